"""Pure-numpy reference implementations of the hot kernels."""

import math

import numpy as np


def caputo_l1_apply(values, beta, dt):
    """L1 history convolution for the Caputo derivative of order beta.

    ``values`` are samples on a uniform grid with step ``dt``; returns the
    derivative at every node, with node 0 set to zero.
    """
    values = np.asarray(values, dtype=float)
    m = values.size - 1
    if m < 1:
        raise ValueError("need at least two samples")
    if not (0.0 < beta <= 1.0):
        raise ValueError(f"order must lie in (0, 1], got {beta}")
    k = np.arange(m, dtype=float)
    b = (k + 1.0) ** (1.0 - beta) - k ** (1.0 - beta)
    b[0] = 1.0  # 0**0 evaluates to 1 and would cancel the k=0 weight at beta=1
    dphi = np.diff(values)
    conv = np.convolve(dphi, b)[:m]
    out = np.empty(m + 1)
    out[0] = 0.0
    out[1:] = conv * (dt ** (-beta) / math.gamma(2.0 - beta))
    return out


def pairwise_repulsion_sum(x, y, w):
    """Interaction sum sum_j w_j (x_i - y_j) / (1 + |x_i - y_j|^2).

    ``x`` is (N, d), ``y`` is (M, d), ``w`` is (M,); returns (N, d).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    diff = x[:, None, :] - y[None, :, :]
    denom = 1.0 + np.sum(diff * diff, axis=2)
    return np.einsum("j,njd->nd", w, diff / denom[:, :, None])
