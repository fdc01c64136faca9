"""Primitive layers with explicit forward and reverse-mode backward passes.

Everything is a pure function over numpy arrays; the model keeps whatever
caches the backward passes need. Pooling and interpolation are fixed linear
maps, so their backwards are exact transposes.
"""

from __future__ import annotations

import numpy as np


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ w + b


def dense_backward(g: np.ndarray, x: np.ndarray, w: np.ndarray):
    """Returns (grad wrt input, grad wrt w, grad wrt b)."""
    return g @ w.T, x.T @ g, g.sum(axis=0)


def relu_forward(s: np.ndarray) -> np.ndarray:
    return np.maximum(s, 0.0)


def relu_backward(g: np.ndarray, s: np.ndarray) -> np.ndarray:
    return g * (s > 0)


def dropout_mask(rng: np.random.Generator, shape, p: float) -> np.ndarray:
    """Inverted-dropout multiplier: zeros with probability p, else 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability {p} outside [0,1)")
    if p == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= p) / (1.0 - p)


def pool_segments(length: int, kernel: int) -> list[tuple[int, int]]:
    """[start, end) per pooled position; the last segment may be shorter."""
    if kernel < 1:
        raise ValueError(f"pool kernel must be >= 1, got {kernel}")
    return [(i, min(i + kernel, length)) for i in range(0, length, kernel)]


def avgpool_forward(x: np.ndarray, kernel: int) -> np.ndarray:
    segs = pool_segments(x.shape[1], kernel)
    return np.stack([x[:, a:b].mean(axis=1) for a, b in segs], axis=1)


def avgpool_backward(g: np.ndarray, length: int, kernel: int) -> np.ndarray:
    segs = pool_segments(length, kernel)
    out = np.empty((g.shape[0], length))
    for j, (a, b) in enumerate(segs):
        out[:, a:b] = g[:, j : j + 1] / (b - a)
    return out


def maxpool_forward(x: np.ndarray, kernel: int):
    """Returns (pooled, argmax index cache for the backward pass)."""
    segs = pool_segments(x.shape[1], kernel)
    pooled = np.empty((x.shape[0], len(segs)))
    arg = np.empty((x.shape[0], len(segs)), dtype=np.int64)
    for j, (a, b) in enumerate(segs):
        block = x[:, a:b]
        idx = block.argmax(axis=1)
        arg[:, j] = a + idx
        pooled[:, j] = block[np.arange(x.shape[0]), idx]
    return pooled, arg


def maxpool_backward(g: np.ndarray, arg: np.ndarray, length: int) -> np.ndarray:
    out = np.zeros((g.shape[0], length))
    rows = np.arange(g.shape[0])[:, None]
    np.add.at(out, (rows, arg), g)
    return out


def interp_matrix(length: int, n_coeff: int) -> np.ndarray:
    """Linear map from n knot coefficients to a length-L curve.

    Knots sit at positions linspace(0, L-1, n) (endpoints anchored), so
    n == L is the identity and n == 1 broadcasts a constant.
    """
    if n_coeff < 1 or length < 1:
        raise ValueError("interpolation needs at least one knot and one output")
    if n_coeff == 1:
        return np.ones((length, 1))
    knots = np.linspace(0.0, length - 1.0, n_coeff)
    m = np.zeros((length, n_coeff))
    for i in range(n_coeff):
        basis = np.zeros(n_coeff)
        basis[i] = 1.0
        m[:, i] = np.interp(np.arange(length), knots, basis)
    return m
