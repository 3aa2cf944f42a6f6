"""End-to-end episodic training and evaluation.

Each batch samples N episodes. Within an episode the memory labels are
cleared (keys persist between episodes so slot usage can be learned),
every token of every sequence is encoded, predicted, and written through
the active policy, and the learned policy additionally records a
trajectory. After the rollouts the REINFORCE estimator produces per-step
logit gradients, which chain through the candidate keys into the encoder
states and from there through the LSTM backward pass; parameters move by
plain gradient ascent. Runs are strictly sequential and fully determined
by the config seed.

k-th-shot accuracy: within an episode, the sequences supporting a class
are its presentations 1..k_shot in episode order; the j-th bucket scores
the predictions on that class's entity tokens in its j-th presentation.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import HeuristicPolicy, heuristic_step, predict_baseline
from .checkpoint import Checkpoint
from .config import Config
from .controller import (
    Trajectory,
    controller_step,
    mean_return,
    reinforce_gradient,
    state_gradients,
)
from .encoder import LstmGrads, encode_sequence, init_lstm_params, lstm_backward
from .episodes import Corpus, make_episode
from .memory import init_memory

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """Raised when a non-finite objective or gradient is encountered."""


@dataclass
class MetricsRecord:
    """One self-contained record per training batch.

    `wall_ms` is kept on the in-memory record only; the serialized line
    excludes it so metrics files are byte-identical across reruns of the
    same seed.
    """

    batch: int
    mean_return: float
    shot_accuracy: list
    policy_entropy: float
    wall_ms: float = 0.0

    def to_json_line(self) -> str:
        return json.dumps({
            "batch": self.batch,
            "mean_return": self.mean_return,
            "shot_accuracy": self.shot_accuracy,
            "policy_entropy": self.policy_entropy,
        })


@dataclass
class EpisodeRollout:
    rewards: np.ndarray
    shot_hits: np.ndarray
    shot_totals: np.ndarray
    trajectory: Trajectory | None = None
    caches: list = field(default_factory=list)
    policy_entropies: list = field(default_factory=list)


@dataclass
class EvalTable:
    """Per-shot accuracies averaged over evaluation episodes."""

    shot_accuracy: np.ndarray
    shot_counts: np.ndarray
    n_episodes: int

    def format(self) -> str:
        lines = [f"episodes: {self.n_episodes}"]
        for j, (acc, cnt) in enumerate(zip(self.shot_accuracy, self.shot_counts), start=1):
            shown = "n/a" if cnt == 0 else f"{acc:.4f}"
            lines.append(f"shot {j}: accuracy {shown} over {int(cnt)} tokens")
        return "\n".join(lines)


def run_episode(params, memory, episode, config: Config, rng,
                mode: str, collect_grads: bool = False,
                step_observer=None) -> EpisodeRollout:
    """Roll one episode through the memory under the configured policy.

    Predictions are read before each operation (greedy inference rule);
    the operation itself is teacher-forced with the true local label.
    """
    memory.reset_values()
    policy = config.policy
    heuristic = None if policy == "ltc" else HeuristicPolicy(policy)

    schedule: dict = {}
    for item_idx, cls, j in episode.presentation_schedule():
        schedule.setdefault(item_idx, []).append((cls, j))

    k_shot = episode.k_shot
    shot_hits = np.zeros(k_shot)
    shot_totals = np.zeros(k_shot)
    rewards: list = []
    entropies: list = []
    trajectory = Trajectory() if policy == "ltc" else None
    caches: list = []

    for item_idx, seq in enumerate(episode.items):
        local = episode.local_labels(seq)
        if collect_grads:
            states, cache = encode_sequence(params, seq.tokens, with_cache=True)
            caches.append(cache)
        else:
            states = encode_sequence(params, seq.tokens)

        preds = np.empty(len(seq), dtype=np.int64)
        for t in range(len(seq)):
            s = states[t].h
            y = int(local[t])
            if policy == "ltc":
                step = controller_step(
                    memory, s, y, mode, rng,
                    item_index=item_idx, token_index=t,
                    want_aux_grad=collect_grads and config.supervised_aux_enabled,
                )
                preds[t] = step.predicted_label
                rewards.append(step.reward)
                entropies.append(-float(np.sum(step.dist * np.log(step.dist))))
                trajectory.steps.append(step)
                if step_observer is not None:
                    step_observer(memory, step)
            else:
                preds[t] = predict_baseline(memory, s)
                record = heuristic_step(heuristic, memory, s, y, rng)
                rewards.append(record.reward)
                if step_observer is not None:
                    step_observer(memory, record)

        for cls, j in schedule.get(item_idx, []):
            if j > k_shot:
                continue
            mask = seq.labels == cls
            shot_hits[j - 1] += np.count_nonzero(preds[mask] == episode.label_map[cls])
            shot_totals[j - 1] += np.count_nonzero(mask)

    if policy == "oldest":
        entropies = [0.0]
    elif policy == "random":
        entropies = [float(np.log(memory.k_sparse))]
    return EpisodeRollout(
        rewards=np.array(rewards), shot_hits=shot_hits, shot_totals=shot_totals,
        trajectory=trajectory, caches=caches, policy_entropies=entropies,
    )


def _batch_gradients(params, rollouts, config: Config) -> LstmGrads:
    trajectories = [r.trajectory for r in rollouts]
    logit_grads = reinforce_gradient(trajectories, config.baseline_enabled)
    total = LstmGrads.zeros_like(params)
    for rollout, lgrads in zip(rollouts, logit_grads):
        ds_list = state_gradients(rollout.trajectory, lgrads)
        per_item: dict = {}
        for step, ds in zip(rollout.trajectory.steps, ds_list):
            if step.aux_state_grad is not None:
                # ascent direction: objective gradient minus supervised loss gradient
                ds = ds - step.aux_state_grad / len(trajectories)
            per_item.setdefault(step.item_index, {})[step.token_index] = ds
        for item_idx, cache in enumerate(rollout.caches):
            dh = [per_item[item_idx][t] for t in range(len(cache.xcat))]
            total.accumulate(lstm_backward(params, cache, dh))
    return total


def train(config: Config, corpus: Corpus, metrics_path=None,
          step_observer=None, log_every: int = 0):
    """Train (or just roll out, for heuristic policies) on episodic batches.

    Returns the final Checkpoint and the list of MetricsRecords. When
    `metrics_path` is given, each record is also appended there as one
    JSON line. No gradient is ever computed for non-learned policies.
    """
    config.validate()
    if corpus.vocab_size > config.vocab_size:
        raise ValueError(
            f"corpus vocabulary ({corpus.vocab_size}) exceeds config.vocab_size "
            f"({config.vocab_size})")
    memory = init_memory(config.mem_size, config.key_dim, config.k_sparse, config.seed)
    if not memory.satisfies_sparse_constraint():
        raise ValueError(
            f"sparse updating constraint violated: k_sparse={config.k_sparse} "
            f"too large for mem_size={config.mem_size}")
    rng = np.random.default_rng(config.seed)
    params = init_lstm_params(config.vocab_size, config.input_dim,
                              config.hidden_dim, rng)
    learned = config.policy == "ltc"

    records: list = []
    sink = open(metrics_path, "a", encoding="utf-8", newline="\n") if metrics_path else None
    try:
        for batch in range(config.max_training_batches):
            t0 = time.perf_counter()
            rollouts = []
            for _ in range(config.episodes_per_batch):
                episode = make_episode(corpus, config.n_way, config.k_shot, rng)
                rollouts.append(run_episode(
                    params, memory, episode, config, rng, mode="sample",
                    collect_grads=learned and config.learning_rate != 0.0,
                    step_observer=step_observer,
                ))

            if learned:
                j_hat = mean_return([r.trajectory for r in rollouts])
            else:
                j_hat = float(np.mean([r.rewards.sum() for r in rollouts]))
            if not np.isfinite(j_hat):
                _diagnostic_abort(sink, batch, "non-finite objective estimate")

            if learned and config.learning_rate != 0.0:
                grads = _batch_gradients(params, rollouts, config)
                if not grads.all_finite():
                    _diagnostic_abort(sink, batch, "non-finite gradient")
                params.add_scaled(grads, config.learning_rate)

            hits = np.sum([r.shot_hits for r in rollouts], axis=0)
            totals = np.sum([r.shot_totals for r in rollouts], axis=0)
            shot_acc = [float(h / t) if t > 0 else None for h, t in zip(hits, totals)]
            pol_ent = float(np.mean(np.concatenate(
                [np.asarray(r.policy_entropies) for r in rollouts])))
            record = MetricsRecord(
                batch=batch, mean_return=j_hat, shot_accuracy=shot_acc,
                policy_entropy=pol_ent,
                wall_ms=(time.perf_counter() - t0) * 1000.0,
            )
            records.append(record)
            if sink is not None:
                sink.write(record.to_json_line() + "\n")
            if log_every and batch % log_every == 0:
                logger.info("batch %d: J=%.4f shots=%s", batch, j_hat, shot_acc)
    finally:
        if sink is not None:
            sink.close()

    ckpt = Checkpoint(config=config, params=params, memory=memory, rng=rng,
                      batch_counter=config.max_training_batches)
    return ckpt, records


def _diagnostic_abort(sink, batch: int, reason: str):
    line = json.dumps({"batch": batch, "error": reason})
    if sink is not None:
        sink.write(line + "\n")
        sink.flush()
    logger.error("aborting training at batch %d: %s", batch, reason)
    raise TrainingDiverged(f"batch {batch}: {reason}")


def evaluate(ckpt: Checkpoint, corpus: Corpus, n_episodes: int,
             rng: np.random.Generator, n_way=None, k_shot=None) -> EvalTable:
    """Greedy-mode inference over fresh episodes; per-shot accuracy table.

    The checkpoint's memory keys are copied and then evolve across the
    evaluation episodes exactly as during training.
    """
    config = ckpt.config
    if corpus.vocab_size > config.vocab_size:
        raise ValueError("corpus vocabulary exceeds the checkpoint's config")
    n_way = config.n_way if n_way is None else n_way
    k_shot = config.k_shot if k_shot is None else k_shot

    memory = ckpt.memory.copy()
    hits = np.zeros(k_shot)
    totals = np.zeros(k_shot)
    eval_cfg = Config(**{**config.__dict__, "n_way": n_way, "k_shot": k_shot})
    for _ in range(n_episodes):
        episode = make_episode(corpus, n_way, k_shot, rng)
        rollout = run_episode(ckpt.params, memory, episode, eval_cfg, rng,
                              mode="greedy")
        hits += rollout.shot_hits
        totals += rollout.shot_totals
    acc = np.divide(hits, totals, out=np.zeros(k_shot), where=totals > 0)
    return EvalTable(shot_accuracy=acc, shot_counts=totals, n_episodes=n_episodes)
