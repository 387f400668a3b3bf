"""Numeric kernel for a one-layer text CNN.

Valid convolution over word windows, max/average pooling, softmax,
cross-entropy, and the exact analytic gradients of that pipeline. Everything
is float64; numpy is used only as the array container and for BLAS products.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

POOLINGS = ("max", "avg")
NONLINEARITIES = ("relu", "tanh", "identity")


def activate(pre: np.ndarray, g: str) -> np.ndarray:
    if g == "relu":
        return np.maximum(pre, 0.0)
    if g == "tanh":
        return np.tanh(pre)
    if g == "identity":
        return pre.copy()
    raise ValueError(f"unknown nonlinearity {g!r}")


def activate_grad(pre: np.ndarray, out: np.ndarray, g: str) -> np.ndarray:
    """Derivative of ``g`` at ``pre``; the relu derivative at exactly 0 is 0."""
    if g == "relu":
        return (pre > 0.0).astype(np.float64)
    if g == "tanh":
        return 1.0 - out * out
    if g == "identity":
        return np.ones_like(pre)
    raise ValueError(f"unknown nonlinearity {g!r}")


@dataclass(frozen=True)
class Filter:
    weights: np.ndarray  # (h, d)
    bias: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim == 1:
            w = w[None, :]
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def width(self) -> int:
        return self.weights.shape[0]


def windows(X: np.ndarray, h: int) -> np.ndarray:
    """Stack each run of ``h`` consecutive rows into one row: (n-h+1, h*d)."""
    n = X.shape[0]
    if n < h:
        raise ValueError(f"text shorter than filter ({n} < {h})")
    L = n - h + 1
    return np.concatenate([X[j:j + L] for j in range(h)], axis=1)


def conv_valid(X, f: Filter, g: str = "relu") -> np.ndarray:
    """Feature vector of one filter slid over ``X`` without padding."""
    X = np.asarray(X, dtype=np.float64)
    Xw = windows(X, f.width)
    return activate(Xw @ f.weights.reshape(-1) + f.bias, g)


def pool_max(v) -> tuple[float, int]:
    """Maximum and its index; the lowest index wins ties."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot pool an empty feature vector")
    j = int(np.argmax(v))
    return float(v[j]), j


def _mean(V: np.ndarray, axis=None):
    # clamped so rounding can never push the mean outside [min, max]
    return np.clip(V.mean(axis=axis), V.min(axis=axis), V.max(axis=axis))


def pool_avg(v) -> float:
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot pool an empty feature vector")
    return float(_mean(v))


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def cross_entropy(probs, label: int) -> float:
    probs = np.asarray(probs, dtype=np.float64)
    if not 0 <= label < probs.shape[0]:
        raise IndexError(f"label {label} out of range for {probs.shape[0]} classes")
    return float(-np.log(max(probs[label], 1e-300)))


@dataclass(frozen=True)
class ForwardTrace:
    """Everything a forward pass computes, kept for scoring and backprop."""

    feature_vectors: np.ndarray  # (m, n-h+1), after the nonlinearity
    representation: np.ndarray  # (m,)
    probabilities: np.ndarray  # (|C|,)
    argmax: np.ndarray | None  # (m,) for max pooling
    logits: np.ndarray
    preactivations: np.ndarray  # (m, n-h+1)
    windows: np.ndarray  # (n-h+1, h*d)
    n: int
    h: int


def forward_pass(X: np.ndarray, weights: np.ndarray, biases: np.ndarray,
                 softmax_weights: np.ndarray, pooling: str, g: str,
                 Xw: np.ndarray | None = None) -> ForwardTrace:
    """Run conv -> pool -> softmax for all m filters at once.

    ``weights`` is (m, h, d); ``softmax_weights`` is (|C|, m). A precomputed
    window matrix ``Xw`` may be passed to skip rebuilding it.
    """
    m, h, d = weights.shape
    if X.shape[1] != d:
        raise ValueError(f"embedding dimension {X.shape[1]} does not match filters ({d})")
    if Xw is None:
        Xw = windows(X, h)
    pre = weights.reshape(m, h * d) @ Xw.T + biases[:, None]
    V = activate(pre, g)
    if pooling == "max":
        argmax = V.argmax(axis=1)
        r = V[np.arange(m), argmax]
    elif pooling == "avg":
        argmax = None
        r = _mean(V, axis=1)
    else:
        raise ValueError(f"unknown pooling {pooling!r}")
    logits = softmax_weights @ r
    return ForwardTrace(V, r, softmax(logits), argmax, logits, pre, Xw, X.shape[0], h)


@dataclass(frozen=True)
class GradientSet:
    weights: np.ndarray
    biases: np.ndarray
    softmax_weights: np.ndarray
    inputs: np.ndarray | None = None


def backprop_representation(trace: ForwardTrace, weights: np.ndarray, d_repr: np.ndarray,
                            pooling: str, g: str, input_grad: bool = False):
    """Push a gradient w.r.t. the pooled representation back to the filters.

    Returns ``(d_weights, d_biases, d_inputs)``; ``d_inputs`` is None unless
    ``input_grad`` is set.
    """
    m, h, d = weights.shape
    L = trace.preactivations.shape[1]
    if pooling == "max":
        dV = np.zeros((m, L))
        dV[np.arange(m), trace.argmax] = d_repr
    elif pooling == "avg":
        dV = np.repeat(d_repr[:, None] / L, L, axis=1)
    else:
        raise ValueError(f"unknown pooling {pooling!r}")
    dpre = dV * activate_grad(trace.preactivations, trace.feature_vectors, g)
    dW = (dpre @ trace.windows).reshape(m, h, d)
    db = dpre.sum(axis=1)
    dX = None
    if input_grad:
        dXw = dpre.T @ weights.reshape(m, h * d)  # (L, h*d)
        dX = np.zeros((trace.n, d))
        for j in range(h):
            dX[j:j + L] += dXw[:, j * d:(j + 1) * d]
    return dW, db, dX


def backward(trace: ForwardTrace | None, weights: np.ndarray, softmax_weights: np.ndarray,
             label: int, pooling: str, g: str, input_grad: bool = False) -> GradientSet:
    """Gradients of the cross-entropy loss of one text w.r.t. every parameter."""
    if trace is None:
        raise ValueError("backward needs the trace of a completed forward pass")
    C = softmax_weights.shape[0]
    if not 0 <= label < C:
        raise IndexError(f"label {label} out of range for {C} classes")
    d_logits = trace.probabilities.copy()
    d_logits[label] -= 1.0
    dU = np.outer(d_logits, trace.representation)
    d_repr = softmax_weights.T @ d_logits
    dW, db, dX = backprop_representation(trace, weights, d_repr, pooling, g, input_grad)
    return GradientSet(dW, db, dU, dX)


def sgd_step(params, grads: GradientSet, lr: float, l2: float = 0.0):
    """Return a copy of ``params`` moved one step against ``grads``.

    ``params`` is any dataclass with ``weights``, ``biases`` and
    ``softmax_weights`` fields. ``l2`` adds weight decay to the filter and
    softmax weights (biases are not decayed).
    """
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    new = {}
    for name in ("weights", "biases", "softmax_weights"):
        p, gp = getattr(params, name), getattr(grads, name)
        if p.shape != gp.shape:
            raise ValueError(f"shape mismatch for {name}: {p.shape} vs {gp.shape}")
        if l2 and name != "biases":
            gp = gp + l2 * p
        new[name] = p - lr * gp
    return dataclasses.replace(params, **new)
