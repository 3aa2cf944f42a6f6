"""LSTM encoder over token ids, implemented directly on numpy arrays.

Tokens pass through a learned embedding table and a single-layer LSTM.
The forward pass can cache every intermediate needed for an exact
reverse-mode sweep; `lstm_backward` consumes that cache plus per-step
gradients on the hidden states and returns gradients for all parameters,
embedding table included. Gate weights act on the concatenation
[x_t, h_{t-1}] (input first, previous hidden second).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GATE_NAMES = ("w_i", "w_f", "w_o", "w_g")
BIAS_NAMES = ("b_i", "b_f", "b_o", "b_g")


def _sigmoid(x):
    # Split by sign to avoid overflow in exp for large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LstmParams:
    """Encoder weights: four gate matrices, four biases, one embedding table.

    Each gate matrix has shape (hidden_dim, input_dim + hidden_dim) and
    each bias shape (hidden_dim,); embedding is (vocab_size, input_dim).
    """

    w_i: np.ndarray
    w_f: np.ndarray
    w_o: np.ndarray
    w_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray
    embedding: np.ndarray

    @property
    def hidden_dim(self) -> int:
        return self.w_i.shape[0]

    @property
    def input_dim(self) -> int:
        return self.embedding.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.embedding.shape[0]

    def arrays(self):
        """All parameter arrays in serialization order."""
        return (self.w_i, self.w_f, self.w_o, self.w_g,
                self.b_i, self.b_f, self.b_o, self.b_g, self.embedding)

    def validate(self):
        h = self.hidden_dim
        d = self.input_dim
        for name in GATE_NAMES:
            m = getattr(self, name)
            if m.shape != (h, d + h):
                raise ValueError(f"{name} has shape {m.shape}, expected {(h, d + h)}")
        for name in BIAS_NAMES:
            b = getattr(self, name)
            if b.shape != (h,):
                raise ValueError(f"{name} has shape {b.shape}, expected {(h,)}")
        for a in self.arrays():
            if not np.all(np.isfinite(a)):
                raise ValueError("non-finite parameter values")

    def copy(self) -> "LstmParams":
        return LstmParams(*(a.copy() for a in self.arrays()))

    def add_scaled(self, grads: "LstmGrads", scale: float):
        """In-place params += scale * grads (gradient ascent for scale > 0)."""
        for a, g in zip(self.arrays(), grads.arrays()):
            a += scale * g


@dataclass
class LstmGrads:
    """Gradient accumulator shaped like LstmParams."""

    w_i: np.ndarray
    w_f: np.ndarray
    w_o: np.ndarray
    w_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray
    embedding: np.ndarray

    @classmethod
    def zeros_like(cls, params: LstmParams) -> "LstmGrads":
        return cls(*(np.zeros_like(a) for a in params.arrays()))

    def arrays(self):
        return (self.w_i, self.w_f, self.w_o, self.w_g,
                self.b_i, self.b_f, self.b_o, self.b_g, self.embedding)

    def accumulate(self, other: "LstmGrads"):
        for a, b in zip(self.arrays(), other.arrays()):
            a += b

    def max_abs(self) -> float:
        return max(float(np.abs(a).max()) if a.size else 0.0 for a in self.arrays())

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


@dataclass
class LstmState:
    """Hidden and cell state after one step. |h| components stay below 1."""

    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_dim: int) -> "LstmState":
        return cls(np.zeros(hidden_dim), np.zeros(hidden_dim))


@dataclass
class LstmCache:
    """Forward activations required by the exact backward pass."""

    tokens: np.ndarray
    xcat: list = field(default_factory=list)     # [x_t, h_{t-1}] per step
    gates: list = field(default_factory=list)    # (i, f, o, g) per step
    c: list = field(default_factory=list)        # cell state per step
    tanh_c: list = field(default_factory=list)
    c_prev: list = field(default_factory=list)   # cell state entering the step


def init_lstm_params(vocab_size: int, input_dim: int, hidden_dim: int,
                     rng: np.random.Generator,
                     scale: float = 0.1, forget_bias: float = 1.0) -> LstmParams:
    """Uniform(-scale, scale) init with the forget-gate bias shifted up.

    The bias shift keeps the cell state persistent early in training,
    which stabilizes the first episodes.
    """
    def u(*shape):
        return rng.uniform(-scale, scale, size=shape)

    h, d = hidden_dim, input_dim
    params = LstmParams(
        w_i=u(h, d + h), w_f=u(h, d + h), w_o=u(h, d + h), w_g=u(h, d + h),
        b_i=u(h), b_f=u(h) + forget_bias, b_o=u(h), b_g=u(h),
        embedding=u(vocab_size, d),
    )
    params.validate()
    return params


def lstm_step(params: LstmParams, x_t: np.ndarray, prev: LstmState,
              cache: LstmCache | None = None) -> LstmState:
    """One LSTM cell step.

    i, f, o are sigmoid gates, g the tanh candidate;
    c_t = f * c_{t-1} + i * g and h_t = o * tanh(c_t).
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape != (params.input_dim,):
        raise ValueError(f"input has shape {x_t.shape}, expected {(params.input_dim,)}")
    if prev.h.shape != (params.hidden_dim,):
        raise ValueError("previous state dimension mismatch")

    xcat = np.concatenate([x_t, prev.h])
    i = _sigmoid(params.w_i @ xcat + params.b_i)
    f = _sigmoid(params.w_f @ xcat + params.b_f)
    o = _sigmoid(params.w_o @ xcat + params.b_o)
    g = np.tanh(params.w_g @ xcat + params.b_g)
    c = f * prev.c + i * g
    tc = np.tanh(c)
    h = o * tc

    if cache is not None:
        cache.xcat.append(xcat)
        cache.gates.append((i, f, o, g))
        cache.c.append(c)
        cache.tanh_c.append(tc)
        cache.c_prev.append(prev.c)
    return LstmState(h=h, c=c)


def encode_sequence(params: LstmParams, tokens,
                    with_cache: bool = False):
    """Run the encoder over a token-id sequence from the zero state.

    Returns the list of states after each token; states[t].h is the
    controller state for token t. With `with_cache`, also returns the
    LstmCache needed by lstm_backward.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.size == 0:
        raise ValueError("cannot encode an empty token sequence")
    if tokens.min() < 0 or tokens.max() >= params.vocab_size:
        bad = tokens[(tokens < 0) | (tokens >= params.vocab_size)][0]
        raise ValueError(f"token id {bad} outside vocabulary of size {params.vocab_size}")

    cache = LstmCache(tokens=tokens) if with_cache else None
    state = LstmState.zeros(params.hidden_dim)
    states = []
    for t in tokens:
        state = lstm_step(params, params.embedding[t], state, cache)
        states.append(state)
    if with_cache:
        return states, cache
    return states


def lstm_backward(params: LstmParams, cache: LstmCache, dh_out) -> LstmGrads:
    """Exact reverse-mode gradients through a cached forward pass.

    `dh_out` holds one dL/dh_t vector per step (zeros where a step
    contributes nothing). Gradients flow through both the recurrent path
    and the embedding rows of the consumed tokens.
    """
    T = len(cache.xcat)
    if len(dh_out) != T:
        raise ValueError(f"got {len(dh_out)} output gradients for {T} cached steps")
    d = params.input_dim
    if cache.xcat and cache.xcat[0].shape != (d + params.hidden_dim,):
        raise ValueError("cache does not match parameter dimensions")

    grads = LstmGrads.zeros_like(params)
    dh_next = np.zeros(params.hidden_dim)
    dc_next = np.zeros(params.hidden_dim)

    for t in range(T - 1, -1, -1):
        i, f, o, g = cache.gates[t]
        tc = cache.tanh_c[t]
        dh = np.asarray(dh_out[t], dtype=np.float64) + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        df = dc * cache.c_prev[t]
        di = dc * g
        dg = dc * i
        dc_next = dc * f

        da_i = di * i * (1.0 - i)
        da_f = df * f * (1.0 - f)
        da_o = do * o * (1.0 - o)
        da_g = dg * (1.0 - g * g)

        xcat = cache.xcat[t]
        grads.w_i += np.outer(da_i, xcat)
        grads.w_f += np.outer(da_f, xcat)
        grads.w_o += np.outer(da_o, xcat)
        grads.w_g += np.outer(da_g, xcat)
        grads.b_i += da_i
        grads.b_f += da_f
        grads.b_o += da_o
        grads.b_g += da_g

        dxcat = (params.w_i.T @ da_i + params.w_f.T @ da_f
                 + params.w_o.T @ da_o + params.w_g.T @ da_g)
        grads.embedding[cache.tokens[t]] += dxcat[:d]
        dh_next = dxcat[d:]

    return grads
