"""Non-learned memory-management policies used as comparison points.

Two heuristics: `oldest` follows the classic rule of updating the nearest
slot when its label already matches and otherwise overwriting the oldest
slot; `random` operates on a uniformly random candidate. Both share the
op-plus-reward code path with the learned controller, so rewards are
directly comparable across policies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controller import operate_with_reward
from .memory import MemOpRecord, SparseMemory, candidate_set, nearest_key, predict_label


@dataclass(frozen=True)
class HeuristicPolicy:
    """kind is fixed per run: "oldest" or "random"."""

    kind: str

    def __post_init__(self):
        if self.kind not in ("oldest", "random"):
            raise ValueError(f"unknown heuristic kind {self.kind!r}")


def heuristic_step(policy: HeuristicPolicy, memory: SparseMemory, s, y: int,
                   rng: np.random.Generator | None = None) -> MemOpRecord:
    """Apply one heuristic memory operation; mutates the memory.

    oldest: update the nearest slot when it already holds y, else write
    over the slot with the highest age (ties to the lowest index).
    random: operate on a uniformly random member of the candidate set.
    """
    s = np.asarray(s, dtype=np.float64)
    if policy.kind == "oldest":
        i = nearest_key(memory, s)
        if memory.values[i] == y:
            slot = i
        else:
            slot = int(np.argmax(memory.ages))
    else:
        if rng is None:
            raise ValueError("the random policy requires an rng")
        cands = candidate_set(memory, s)
        slot = int(cands[rng.integers(cands.size)])
    return operate_with_reward(memory, slot, s, y)


def predict_baseline(memory: SparseMemory, s) -> int:
    """Shared inference rule for the heuristics: label at the nearest key."""
    return predict_label(memory, s)
