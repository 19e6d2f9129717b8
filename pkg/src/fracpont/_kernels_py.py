"""Numpy implementation of the product-trapezoidal history sums."""

import numpy as np


def lower_apply(c, a0, g):
    """out[i] = a0[i] * g[0] + sum_{j=1..i} c[i-j] * g[j]; out[0] = 0."""
    g = np.ascontiguousarray(g, dtype=np.float64)
    n1, dim = g.shape
    if c.shape[0] < n1 or a0.shape[0] < n1:
        raise ValueError("weight arrays shorter than the path")
    out = np.zeros((n1, dim))
    for k in range(dim):
        out[1:, k] = np.convolve(c[: n1 - 1], g[1:, k])[: n1 - 1]
    out[1:] += a0[1:n1, None] * g[0]
    return out
