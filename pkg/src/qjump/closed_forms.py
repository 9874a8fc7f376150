"""Closed-form reference values for the two-level reset model.

These expressions are independent of the quadrature solver in
:mod:`qjump.renewal` and serve as oracles for tests and ``qjump verify``.
The matrix layout is ``[[rho_11, rho_10], [rho_01, rho_00]]``.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammaln


def _parts(rho: ArrayLike) -> tuple[NDArray, NDArray, NDArray]:
    """Off-diagonal part, diagonal part and swapped diagonal of ``rho``."""
    r = np.asarray(rho, dtype=complex)
    off = r - np.diag(np.diag(r))
    diag = np.diag(np.diag(r))
    swap = np.diag(np.diag(r)[::-1])
    return off, diag, swap


def quarter_series(x: float, terms: int = 400) -> NDArray:
    """``exp(-x) sum_m x^(4m+j) / (4m+j)!`` for ``j = 0..3``.

    Summed term by term in log space, so there is no cancellation.
    """
    if x == 0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    n = np.arange(4 * terms)
    logs = n * math.log(x) - x - gammaln(n + 1)
    vals = np.exp(logs).reshape(terms, 4)
    return vals.sum(axis=0)


# exponential law


def exp_mean_state(lam: float, t0: float, rho: ArrayLike) -> NDArray:
    off, diag, swap = _parts(rho)
    e = math.exp(-2 * lam * t0)
    return math.exp(-lam * t0) * off + 0.5 * (1 + e) * diag + 0.5 * (1 - e) * swap


def exp_probabilities(lam: float, t0: float, t: float, rho: ArrayLike) -> tuple[float, float]:
    r = np.asarray(rho, dtype=complex)
    rii = (r[1, 1].real, r[0, 0].real)  # (rho_00, rho_11)
    e = math.exp(-2 * lam * t0)
    a = -math.expm1(-lam * (t - t0))
    return tuple(a * 0.5 * ((1 + e) * p + (1 - e) * (1 - p)) for p in rii)


def exp_at_least_one(lam: float, t0: float, t: float) -> float:
    return -math.expm1(-lam * (t - t0))


def exp_exactly_one(lam: float, t0: float, t: float) -> float:
    x = lam * (t - t0)
    return x * math.exp(-x)


def exp_kolmogorov(lam: float, t0: float, t: float) -> float:
    return -math.expm1(-lam * (t - t0)) * math.exp(-2 * lam * t0)


def exp_trace_distance(lam: float, t0: float) -> float:
    return math.exp(-2 * lam * t0)


# Erlang law with shape 2


def erlang_mean_state(lam: float, t0: float, rho: ArrayLike) -> NDArray:
    off, diag, swap = _parts(rho)
    x = lam * t0
    c = math.exp(-x) * (math.cos(x) + math.sin(x))
    return (1 + x) * math.exp(-x) * off + 0.5 * (1 + c) * diag + 0.5 * (1 - c) * swap


def erlang_mean_state_series(lam: float, t0: float, rho: ArrayLike) -> NDArray:
    off, diag, swap = _parts(rho)
    x = lam * t0
    q = quarter_series(x)
    return (1 + x) * math.exp(-x) * off + (q[0] + q[1]) * diag + (q[2] + q[3]) * swap


def erlang_probabilities(lam: float, t0: float, t: float, rho: ArrayLike) -> tuple[float, float]:
    r = np.asarray(rho, dtype=complex)
    x0 = lam * t0
    tau = lam * (t - t0)
    a = -math.expm1(-tau)
    cs = math.cos(x0) + math.sin(x0)
    out = []
    for p in (r[1, 1].real, r[0, 0].real):
        s = 2 * p - 1
        v = 0.5 * a * (1 + math.exp(-x0) * cs * s)
        v -= 0.5 * tau * math.exp(-lam * t) * (math.cosh(x0) + s * math.cos(x0))
        out.append(v)
    return tuple(out)


def erlang_probabilities_series(
    lam: float, t0: float, t: float, rho: ArrayLike
) -> tuple[float, float]:
    r = np.asarray(rho, dtype=complex)
    tau = lam * (t - t0)
    a = -math.expm1(-tau)
    b = a - tau * math.exp(-tau)
    q = quarter_series(lam * t0)
    out = []
    for p in (r[1, 1].real, r[0, 0].real):
        out.append((b * q[2] + a * q[3]) * (1 - p) + (b * q[0] + a * q[1]) * p)
    return tuple(out)


def erlang_at_least_one(lam: float, t0: float, t: float) -> float:
    tau = lam * (t - t0)
    F = 1 - (1 + tau) * math.exp(-tau)
    return F + tau * math.exp(-lam * t) * math.sinh(lam * t0)


def erlang_kolmogorov(lam: float, t0: float, t: float) -> float:
    x0 = lam * t0
    tau = lam * (t - t0)
    v = -math.expm1(-tau) * math.exp(-x0) * (math.cos(x0) + math.sin(x0))
    v -= tau * math.exp(-lam * t) * math.cos(x0)
    return abs(v)


def erlang_trace_distance(lam: float, t0: float) -> float:
    x0 = lam * t0
    return math.exp(-x0) * abs(math.cos(x0) + math.sin(x0))


def oscillating_density(t: ArrayLike) -> NDArray:
    """Waiting density of the oscillating two-level example with ``s = 1``, ``phi = pi/4``."""
    t = np.asarray(t, dtype=float)
    r = math.sqrt(2.0)
    return np.exp(-r * t) * (r - np.sin(r * t) + np.cos(r * t))
