"""Stochastic policy over memory slots, entropy reward, and REINFORCE.

The policy is a softmax over the dot products between the encoder state
and the keys of the k_sparse candidate slots. Each executed operation is
scored by how much it sharpens the soft attention over the full memory:
reward = H(attention before) - H(attention after), in nats. Trajectories
of (state, action, reward) feed a score-function gradient estimator with
reward-to-go and an optional mean baseline; the resulting per-step logit
gradients chain into the encoder state (the keys themselves are treated
as environment state and never receive gradient updates).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .memory import MemOpRecord, SparseMemory, apply_op, candidate_set
from .numerics import entropy, softmax, validate_prob_dist


@dataclass
class PolicyStep:
    """Everything recorded about one controller decision.

    `logprob_grad` is the gradient of log pi(chosen) with respect to the
    candidate logits (one-hot minus the distribution). `cand_keys` is a
    snapshot of the candidate key rows at decision time; keys mutate
    during an episode, so gradients must chain through the values the
    step actually saw.
    """

    state: np.ndarray
    candidates: np.ndarray
    dist: np.ndarray
    chosen: int
    logprob_grad: np.ndarray
    reward: float
    op: MemOpRecord
    cand_keys: np.ndarray
    predicted_label: int = -1
    item_index: int = 0
    token_index: int = 0
    aux_state_grad: np.ndarray | None = None


@dataclass
class Trajectory:
    """Ordered controller steps for one episode."""

    steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    def rewards(self) -> np.ndarray:
        return np.array([st.reward for st in self.steps], dtype=np.float64)

    def total_reward(self) -> float:
        return float(self.rewards().sum())


def policy_distribution(memory: SparseMemory, s):
    """Candidate slots and the softmax over their dot-product logits."""
    cands = candidate_set(memory, s)
    logits = memory.keys[cands] @ np.asarray(s, dtype=np.float64)
    return cands, softmax(logits)


def select_index(dist, mode: str, rng: np.random.Generator | None = None) -> int:
    """Pick a candidate position: sampled during training, argmax at inference.

    Greedy ties break to the lowest index.
    """
    dist = validate_prob_dist(dist)
    if mode == "greedy":
        return int(np.argmax(dist))
    if mode == "sample":
        if rng is None:
            raise ValueError("sampling requires an rng")
        return int(rng.choice(dist.size, p=dist))
    raise ValueError(f"unknown selection mode {mode!r}")


def reward(att_before, att_after) -> float:
    """Entropy reduction of the memory attention, in nats.

    Positive when the operation sharpened the attention distribution.
    """
    att_before = np.asarray(att_before, dtype=np.float64)
    att_after = np.asarray(att_after, dtype=np.float64)
    if att_before.shape != att_after.shape:
        raise ValueError("attention distributions must cover the same memory")
    return entropy(att_before) - entropy(att_after)


def operate_with_reward(memory: SparseMemory, slot: int, s, y: int) -> MemOpRecord:
    """Apply one op at `slot` and score it by the attention entropy change.

    Shared by the learned controller and the heuristic baselines so the
    reward for an identical (memory, s, y, slot) is bitwise-identical
    across policies. Only the logit of the mutated slot is recomputed.
    """
    logits = memory.attention_logits(s)
    h_before = entropy(softmax(logits))
    record = apply_op(memory, slot, s, y)
    logits[slot] = memory.keys[slot] @ np.asarray(s, dtype=np.float64)
    h_after = entropy(softmax(logits))
    record.reward = h_before - h_after
    return record


def controller_step(memory: SparseMemory, s, y: int, mode: str,
                    rng: np.random.Generator | None = None,
                    item_index: int = 0, token_index: int = 0,
                    want_aux_grad: bool = False) -> PolicyStep:
    """One full decision: choose a candidate slot, operate, collect reward.

    Mutates the memory. The returned step carries the log-prob gradient
    for REINFORCE and, optionally, the supervised auxiliary gradient on
    the state (see `aux_state_gradient`).
    """
    s = np.asarray(s, dtype=np.float64)
    aux = aux_state_gradient(memory, s, y) if want_aux_grad else None
    cands, dist = policy_distribution(memory, s)
    pos = select_index(dist, mode, rng)
    slot = int(cands[pos])
    cand_keys = memory.keys[cands].copy()
    # Inference rule: the label at the greedy index, read before the op.
    predicted = int(memory.values[cands[int(np.argmax(dist))]])
    record = operate_with_reward(memory, slot, s, y)
    logprob_grad = -dist.copy()
    logprob_grad[pos] += 1.0
    return PolicyStep(
        state=s, candidates=cands, dist=dist, chosen=pos,
        logprob_grad=logprob_grad, reward=record.reward, op=record,
        cand_keys=cand_keys, predicted_label=predicted,
        item_index=item_index, token_index=token_index,
        aux_state_grad=aux,
    )


def returns_to_go(rewards) -> np.ndarray:
    """Undiscounted suffix sums of a reward sequence."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        raise ValueError("returns_to_go of empty rewards")
    return np.cumsum(r[::-1])[::-1].copy()


def reinforce_gradient(trajectories, use_baseline: bool = True):
    """Per-step logit gradients of the episodic objective.

    For trajectory n and step t the contribution is
    logprob_grad * (G_t - b) / N with G_t the reward-to-go and b the
    mean of all reward-to-go values in the batch (b = 0 with the
    baseline disabled). Returned as a list (per trajectory) of lists of
    per-step gradient vectors over the candidate logits; chain them into
    encoder states with `state_gradients`.
    """
    if not trajectories:
        raise ValueError("reinforce_gradient needs at least one trajectory")
    all_returns = [returns_to_go(traj.rewards()) for traj in trajectories]
    if use_baseline:
        baseline = float(np.mean(np.concatenate(all_returns)))
    else:
        baseline = 0.0
    n = len(trajectories)
    out = []
    for traj, rets in zip(trajectories, all_returns):
        out.append([
            step.logprob_grad * ((g - baseline) / n)
            for step, g in zip(traj.steps, rets)
        ])
    return out


def state_gradients(trajectory: Trajectory, logit_grads) -> list:
    """Chain per-step logit gradients into gradients on the encoder states.

    d/ds of a candidate logit is that candidate's key row as seen at
    decision time, so ds = cand_keys^T @ dlogits.
    """
    if len(logit_grads) != len(trajectory.steps):
        raise ValueError("one logit gradient per step required")
    return [step.cand_keys.T @ g for step, g in zip(trajectory.steps, logit_grads)]


def aux_state_gradient(memory: SparseMemory, s, y: int) -> np.ndarray:
    """Gradient on s of the supervised attention loss -log P(slots with label y).

    Measured on the pre-op memory. Returns zeros when no slot holds y.
    This is the optional dense supervision path; it is off by default
    and only mixed in when explicitly enabled in the config.
    """
    s = np.asarray(s, dtype=np.float64)
    correct = memory.values == y
    if not np.any(correct):
        return np.zeros_like(s)
    att = softmax(memory.attention_logits(s))
    mass = float(att[correct].sum())
    dlogits = att.copy()
    dlogits[correct] -= att[correct] / mass
    return memory.keys.T @ dlogits


def mean_return(trajectories) -> float:
    """Monte-Carlo estimate of the episodic objective: mean total reward."""
    if not trajectories:
        raise ValueError("mean_return of empty batch")
    return float(np.mean([traj.total_reward() for traj in trajectories]))


def mean_policy_entropy(trajectories) -> float:
    """Average entropy of the per-step policy distributions, in nats."""
    ents = [entropy(st.dist) for traj in trajectories for st in traj.steps]
    if not ents:
        raise ValueError("no steps to average over")
    return float(np.mean(ents))
