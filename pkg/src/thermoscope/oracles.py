"""Independent ground truth: the doubling map on the circle and closed-form moments.

Nothing here touches the transfer, measure or periodic-point code paths, so
agreement with these values is a genuine cross-check.
"""
from __future__ import annotations

import logging
from math import comb

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)


def doubling_matrix(u, bins: int) -> sp.csr_matrix:
    """Transfer matrix of ``theta -> 2 theta`` with midpoint weights ``e^{u}``.

    Interval ``j = [2 pi j / N, 2 pi (j + 1) / N)`` is mapped by doubling onto
    interval ``2j mod N`` and half of its neighbour, so with ``N`` even the two
    intervals that cover interval ``i`` are ``floor(i / 2)`` and
    ``floor(i / 2) + N / 2``.
    """
    if bins < 64 or bins & (bins - 1):
        raise ValueError("bins must be a power of two >= 64")
    mid = 2 * np.pi * (np.arange(bins) + 0.5) / bins
    weights = np.exp(np.asarray(u(mid), dtype=float) * np.ones(bins))
    rows = np.repeat(np.arange(bins), 2)
    cols = np.empty(2 * bins, dtype=int)
    cols[0::2] = np.arange(bins) // 2
    cols[1::2] = np.arange(bins) // 2 + bins // 2
    return sp.csr_matrix((weights[cols], (rows, cols)), shape=(bins, bins))


def doubling_pressure_oracle(u, bins: int = 4096, tol: float = 1e-12,
                             max_iter: int = 100_000) -> float:
    """Log of the leading eigenvalue of :func:`doubling_matrix`.

    ``u`` maps an array of angles to an array of weights.  Raises
    ``ArithmeticError`` when power iteration does not reach ``tol``.
    """
    B = doubling_matrix(u, bins)
    x = np.ones(bins)
    for _ in range(max_iter):
        y = B @ x
        lam = y.sum() / x.sum()
        if np.max(np.abs(y - lam * x)) / lam <= tol:
            return float(np.log(lam))
        x = y / y.mean()
    raise ArithmeticError("doubling oracle power iteration did not converge")


def haar_circle_moment(m: int) -> complex:
    """``integral of z^m`` against normalised arc length on the unit circle."""
    return complex(1.0 if m == 0 else 0.0)


def arcsine_moment(k: int) -> float:
    """``k``-th moment of the arcsine law on ``[-2, 2]``."""
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    return 0.0 if k % 2 else float(comb(k, k // 2))
