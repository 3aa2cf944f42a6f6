"""Sparse key-value memory with cosine addressing and single-slot operations.

The memory holds a key matrix (one unit-norm row per slot), an integer
label per slot, and an age counter per slot. Exactly one key row changes
per operation: a slot whose stored label differs from the incoming one is
overwritten (write), a slot with a matching label absorbs the incoming
state into its key (update). Candidate lookups return the k_sparse most
cosine-similar slots, which is the controller's entire action space at a
step, so any single step can touch at most k_sparse << mem_size entries.

Addressing uses cosine similarity; the soft attention distribution over
the full memory uses raw dot products. Both are intentional: nearest-slot
routing is scale-free while attention sharpness should reflect state
magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import l2_normalize, softmax

# Reserved label for never-written slots; distinct from every task label
# (task labels are non-negative), so the first write to a slot always
# takes the label-mismatch branch.
EMPTY_LABEL = -1

UNIT_NORM_ATOL = 1e-9


@dataclass
class MemOpRecord:
    """Outcome of one memory operation.

    `kind` reflects the label test at execution time: "write" when the
    slot's stored label differed from the incoming label, "update" when
    they matched. `reward` is filled in by the caller that measures the
    attention entropy change around the op (in nats).
    """

    index: int
    kind: str
    reward: float = 0.0


class SparseMemory:
    """Key matrix + label array + age counters, mutated one slot at a time."""

    def __init__(self, keys: np.ndarray, values: np.ndarray, ages: np.ndarray,
                 k_sparse: int):
        keys = np.asarray(keys, dtype=np.float64)
        if keys.ndim != 2:
            raise ValueError("keys must be a 2-D matrix")
        mem_size = keys.shape[0]
        if not (0 < k_sparse <= mem_size):
            raise ValueError(f"k_sparse must be in (0, {mem_size}], got {k_sparse}")
        self.keys = keys
        self.values = np.asarray(values, dtype=np.int64)
        self.ages = np.asarray(ages, dtype=np.int64)
        self.k_sparse = int(k_sparse)
        if self.values.shape != (mem_size,) or self.ages.shape != (mem_size,):
            raise ValueError("values/ages length must equal mem_size")
        # Row norms are cached and patched on mutation; recomputing them
        # per lookup would dominate the cost of a controller step.
        self._key_norms = np.linalg.norm(self.keys, axis=1)

    @property
    def mem_size(self) -> int:
        return self.keys.shape[0]

    @property
    def key_dim(self) -> int:
        return self.keys.shape[1]

    def satisfies_sparse_constraint(self) -> bool:
        """Whether the candidate-set size is small next to the memory."""
        return self.k_sparse * 10 <= self.mem_size

    def reset_values(self):
        """Clear labels and ages, keeping the keys (between-episode reset)."""
        self.values.fill(EMPTY_LABEL)
        self.ages.fill(0)

    def copy(self) -> "SparseMemory":
        return SparseMemory(self.keys.copy(), self.values.copy(),
                            self.ages.copy(), self.k_sparse)

    def key_similarities(self, s: np.ndarray) -> np.ndarray:
        """Cosine similarity of s against every key row (0 for zero norms)."""
        s = np.asarray(s, dtype=np.float64)
        sn = np.linalg.norm(s)
        if sn == 0.0:
            return np.zeros(self.mem_size)
        denom = self._key_norms * sn
        sims = np.zeros(self.mem_size)
        ok = denom > 0.0
        sims[ok] = (self.keys @ s)[ok] / denom[ok]
        return sims

    def attention_logits(self, s: np.ndarray) -> np.ndarray:
        """Raw dot products s . K[i] over the full memory."""
        return self.keys @ np.asarray(s, dtype=np.float64)


def init_memory(mem_size: int, key_dim: int, k_sparse: int, seed: int) -> SparseMemory:
    """Fresh memory: seeded unit-sphere keys, empty labels, zero ages."""
    if mem_size <= 0 or key_dim <= 0:
        raise ValueError("mem_size and key_dim must be positive")
    if not (0 < k_sparse <= mem_size):
        raise ValueError(f"k_sparse must be in (0, {mem_size}], got {k_sparse}")
    rng = np.random.default_rng(seed)
    keys = rng.standard_normal((mem_size, key_dim))
    keys /= np.linalg.norm(keys, axis=1, keepdims=True)
    values = np.full(mem_size, EMPTY_LABEL, dtype=np.int64)
    ages = np.zeros(mem_size, dtype=np.int64)
    return SparseMemory(keys, values, ages, k_sparse)


def nearest_key(memory: SparseMemory, s) -> int:
    """Index of the key most cosine-similar to s; ties go to the lowest index."""
    return int(np.argmax(memory.key_similarities(s)))


def candidate_set(memory: SparseMemory, s) -> np.ndarray:
    """The k_sparse most similar slot indices, descending, ties by lowest index."""
    sims = memory.key_similarities(s)
    order = np.argsort(-sims, kind="stable")
    return order[: memory.k_sparse]


def attention(memory: SparseMemory, s) -> np.ndarray:
    """Softmax of the raw dot products over the full memory."""
    return softmax(memory.attention_logits(s))


def apply_op(memory: SparseMemory, i: int, s, y: int) -> MemOpRecord:
    """Write or update slot i with state s and label y; mutates the memory.

    Label mismatch overwrites the slot with the normalized state; a match
    merges the state into the existing key. The touched slot's age resets
    to 0 and every other age increments. Exactly one key row changes.
    """
    if not (0 <= i < memory.mem_size):
        raise ValueError(f"slot {i} out of range for memory of {memory.mem_size}")
    s = np.asarray(s, dtype=np.float64)
    if np.linalg.norm(s) == 0.0:
        raise ValueError("cannot apply a memory operation with a zero state")

    if memory.values[i] != y:
        memory.keys[i] = l2_normalize(s)
        memory.values[i] = y
        kind = "write"
    else:
        memory.keys[i] = l2_normalize(memory.keys[i] + s)
        kind = "update"
    memory._key_norms[i] = np.linalg.norm(memory.keys[i])
    memory.ages += 1
    memory.ages[i] = 0
    return MemOpRecord(index=i, kind=kind)


def predict_label(memory: SparseMemory, s) -> int:
    """Label stored at the nearest key (standalone inference rule)."""
    return int(memory.values[nearest_key(memory, s)])
