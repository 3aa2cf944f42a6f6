"""Finite-difference verification of every analytic gradient in the package.

Three suites: the LSTM backward pass (all parameters including the
embedding table), the policy log-prob gradient with respect to the
encoder state (candidate set frozen), and the end-to-end chain of a
log-prob through the state into the LSTM parameters. Each suite reports
its worst absolute deviation from central differences.
"""

from __future__ import annotations

import numpy as np

from .controller import aux_state_gradient
from .encoder import (
    LstmParams,
    encode_sequence,
    init_lstm_params,
    lstm_backward,
)
from .memory import init_memory
from .numerics import finite_diff_grad, softmax

TOLERANCE = 1e-4
EPS = 1e-5


def _flatten_params(params: LstmParams) -> np.ndarray:
    return np.concatenate([a.ravel() for a in params.arrays()])


def _unflatten_into(params: LstmParams, flat: np.ndarray):
    off = 0
    for a in params.arrays():
        a.flat[:] = flat[off:off + a.size]
        off += a.size


def lstm_suite(n_instances: int = 20, seed: int = 0) -> float:
    """Backward pass vs central differences on small random instances.

    Loss: sum over steps of a fixed random projection of h_t. Returns the
    maximum absolute deviation across instances.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        hidden = int(rng.integers(2, 9))
        inp = int(rng.integers(2, 7))
        vocab = int(rng.integers(3, 8))
        seq_len = int(rng.integers(1, 6))
        params = init_lstm_params(vocab, inp, hidden, rng)
        tokens = rng.integers(0, vocab, size=seq_len)
        weights = rng.standard_normal((seq_len, hidden))

        states, cache = encode_sequence(params, tokens, with_cache=True)
        grads = lstm_backward(params, cache, list(weights))
        analytic = _flatten_params(
            LstmParams(*grads.arrays()))  # same array layout as params

        def loss(flat, params=params, tokens=tokens, weights=weights):
            probe = params.copy()
            _unflatten_into(probe, flat)
            sts = encode_sequence(probe, tokens)
            return sum(float(w @ st.h) for w, st in zip(weights, sts))

        numeric = finite_diff_grad(loss, _flatten_params(params), eps=EPS)
        worst = max(worst, float(np.abs(analytic - numeric).max()))
    return worst


def policy_logprob_suite(n_instances: int = 20, seed: int = 1) -> float:
    """d log pi(chosen | s) / ds vs central differences, candidates frozen."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        dim = int(rng.integers(2, 9))
        k = int(rng.integers(2, 6))
        cand_keys = rng.standard_normal((k, dim))
        cand_keys /= np.linalg.norm(cand_keys, axis=1, keepdims=True)
        s = rng.standard_normal(dim)
        dist = softmax(cand_keys @ s)
        chosen = int(rng.integers(k))

        onehot = np.zeros(k)
        onehot[chosen] = 1.0
        analytic = cand_keys.T @ (onehot - dist)

        def logprob(x, cand_keys=cand_keys, chosen=chosen):
            logits = cand_keys @ x
            return float(logits[chosen] - np.log(np.exp(logits - logits.max()).sum())
                         - logits.max())

        numeric = finite_diff_grad(logprob, s, eps=EPS)
        worst = max(worst, float(np.abs(analytic - numeric).max()))
    return worst


def chain_suite(n_instances: int = 10, seed: int = 2) -> float:
    """log pi at one step, differentiated through the encoder parameters.

    The candidate keys are frozen at their forward-time values, matching
    how training treats them.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        hidden = int(rng.integers(2, 7))
        inp = int(rng.integers(2, 5))
        vocab = int(rng.integers(3, 7))
        seq_len = int(rng.integers(1, 5))
        k = int(rng.integers(2, 5))
        params = init_lstm_params(vocab, inp, hidden, rng)
        tokens = rng.integers(0, vocab, size=seq_len)
        cand_keys = rng.standard_normal((k, hidden))
        cand_keys /= np.linalg.norm(cand_keys, axis=1, keepdims=True)
        step_t = int(rng.integers(seq_len))
        chosen = int(rng.integers(k))

        states, cache = encode_sequence(params, tokens, with_cache=True)
        dist = softmax(cand_keys @ states[step_t].h)
        onehot = np.zeros(k)
        onehot[chosen] = 1.0
        ds = cand_keys.T @ (onehot - dist)
        dh = [np.zeros(hidden) for _ in range(seq_len)]
        dh[step_t] = ds
        grads = lstm_backward(params, cache, dh)
        analytic = _flatten_params(LstmParams(*grads.arrays()))

        def logprob(flat, params=params, tokens=tokens, cand_keys=cand_keys,
                    step_t=step_t, chosen=chosen):
            probe = params.copy()
            _unflatten_into(probe, flat)
            sts = encode_sequence(probe, tokens)
            logits = cand_keys @ sts[step_t].h
            shifted = logits - logits.max()
            return float(shifted[chosen] - np.log(np.exp(shifted).sum()))

        numeric = finite_diff_grad(logprob, _flatten_params(params), eps=EPS)
        worst = max(worst, float(np.abs(analytic - numeric).max()))
    return worst


def aux_suite(n_instances: int = 10, seed: int = 3) -> float:
    """Supervised attention-loss gradient on the state vs central differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        dim = int(rng.integers(2, 7))
        mem = int(rng.integers(6, 20))
        memory = init_memory(mem, dim, min(3, mem), seed=int(rng.integers(1 << 30)))
        memory.values[:] = rng.integers(0, 3, size=mem)
        s = rng.standard_normal(dim)
        y = 1
        analytic = aux_state_gradient(memory, s, y)

        def loss(x, memory=memory, y=y):
            att = softmax(memory.keys @ x)
            return -float(np.log(att[memory.values == y].sum()))

        numeric = finite_diff_grad(loss, s, eps=EPS)
        worst = max(worst, float(np.abs(analytic - numeric).max()))
    return worst


def run_all(verbose: bool = True) -> bool:
    """Run every suite; True when all pass the shared tolerance."""
    suites = [
        ("lstm backward", lstm_suite),
        ("policy logprob d/ds", policy_logprob_suite),
        ("logprob through encoder", chain_suite),
        ("supervised attention loss", aux_suite),
    ]
    ok = True
    for name, fn in suites:
        worst = fn()
        passed = worst <= TOLERANCE
        ok &= passed
        if verbose:
            status = "ok" if passed else "FAIL"
            print(f"gradcheck {name}: max |analytic - numeric| = {worst:.3e} [{status}]")
    return ok
