"""Deterministic vector and probability primitives shared across the package.

All math runs in float64. Probability distributions are plain 1-D numpy
arrays that sum to 1; they are validated with helpers here rather than
wrapped in classes. Entropy is measured in nats throughout.
"""

from __future__ import annotations

import numpy as np

# Tolerance used when checking that a distribution sums to 1.
PROB_ATOL = 1e-9


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax over a 1-D array of logits.

    Shifts by the max logit before exponentiating, so arbitrarily large
    (finite) inputs do not overflow.

    Raises:
        ValueError: if the input is empty or contains NaN/Inf.
    """
    x = np.asarray(logits, dtype=np.float64)
    if x.size == 0:
        raise ValueError("softmax requires a non-empty input")
    if not np.all(np.isfinite(x)):
        raise ValueError("softmax input must be finite")
    z = np.exp(x - x.max())
    return z / z.sum()


def entropy(p) -> float:
    """Shannon entropy of a distribution, in nats, with 0 * ln(0) = 0."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two equal-length vectors.

    A zero-norm operand yields 0 ("no preference") instead of an error,
    so untrained all-zero states can be queried safely.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def l2_normalize(v) -> np.ndarray:
    """Scale a vector to unit L2 norm. Raises ValueError on the zero vector."""
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def finite_diff_grad(f, x, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function at x.

    Used as the independent oracle for every analytic gradient in the
    package: grad[i] = (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps).

    Raises:
        ValueError: if any probe evaluation of f is non-finite.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xf = x.reshape(-1)
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + eps
        hi = f(x)
        xf[i] = orig - eps
        lo = f(x)
        xf[i] = orig
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise ValueError(f"non-finite evaluation at component {i}")
        flat[i] = (hi - lo) / (2.0 * eps)
    return grad


def validate_prob_dist(p) -> np.ndarray:
    """Assert that p is a valid probability distribution and return it.

    Entries must be in [0, 1] and sum to 1 within PROB_ATOL.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.size == 0:
        raise ValueError("empty distribution")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    s = p.sum()
    if abs(s - 1.0) > PROB_ATOL:
        raise ValueError(f"probabilities sum to {s!r}, not 1")
    return p
