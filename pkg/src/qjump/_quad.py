"""Chebyshev interpolation and Gauss-Legendre rules for Volterra convolutions."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.typing import NDArray


@lru_cache(maxsize=32)
def gauss_legendre(n: int) -> tuple[NDArray, NDArray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


class ChebyshevGrid:
    """Chebyshev points of the second kind on ``[0, T]`` with barycentric interpolation."""

    def __init__(self, T: float, n: int):
        self.T = float(T)
        self.n = int(n)
        j = np.arange(n + 1)
        self.nodes = 0.5 * self.T * (1.0 - np.cos(np.pi * j / n))
        w = np.where(j % 2 == 0, 1.0, -1.0)
        w[0] *= 0.5
        w[-1] *= 0.5
        self.bary = w

    def interp_matrix(self, points: NDArray) -> NDArray:
        """Matrix ``B`` with ``f(points) ~= B @ f(nodes)``."""
        p = np.asarray(points, dtype=float).ravel()
        diff = p[:, None] - self.nodes[None, :]
        exact = diff == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            c = self.bary[None, :] / diff
            b = c / c.sum(axis=1, keepdims=True)
        rows = exact.any(axis=1)
        if rows.any():
            b[rows] = exact[rows].astype(float)
        return b

    def convolution_points(self, q: int) -> tuple[NDArray, NDArray, NDArray]:
        """Quadrature data for ``int_0^{s_i} k(s_i - r) y(r) dr`` at every node.

        Returns:
            ``lag`` (s_i - r_iq), ``weight`` (quadrature weights) and ``B``
            (interpolation of y at r_iq), shapes ``(N, Q)``, ``(N, Q)``, ``(N*Q, N)``.
        """
        x, w = gauss_legendre(q)
        s = self.nodes[:, None]
        r = s * x[None, :]
        lag = s - r
        weight = s * w[None, :]
        return lag, weight, self.interp_matrix(r)
