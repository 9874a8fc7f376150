"""Effective non-Hermitian Hamiltonians: decomposition, 2x2 analysis and waiting times.

A 2x2 effective Hamiltonian is written as
``h = [[eps1, beta], [delta, eps0]] = (eps1 + eps0)/2 * 1 + K`` with
``K = [[alpha, beta], [delta, -alpha]]``, ``K @ K = kappa * 1``.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Literal

import mpmath
import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import quad

from .config import DEFAULT, Tolerances
from .errors import ArgumentError, ModelError, RegimeError
from .qops import (
    JumpChannel,
    JumpModel,
    QuantumChannel,
    as_matrix,
    dagger,
    hermitian_part,
)


# --------------------------------------------------------------------------- #
# decomposition


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    """``h_eff = H - (i/2) R + (i/2) c 1`` with ``H`` Hermitian and ``R >= 0``.

    Attributes:
        h_eff: Effective Hamiltonian.
        c: Real shift; ``R = c 1 + i (h_eff - h_eff^dagger)``.
    """

    h_eff: NDArray
    c: float

    @property
    def dim(self) -> int:
        return self.h_eff.shape[0]

    @property
    def H(self) -> NDArray:
        return hermitian_part(self.h_eff)

    @property
    def R(self) -> NDArray:
        d = self.dim
        return hermitian_part(self.c * np.eye(d) + 1j * (self.h_eff - dagger(self.h_eff)))


def decompose(
    h_eff: ArrayLike,
    c: float | Literal["auto"] = "auto",
    tol: Tolerances = DEFAULT,
) -> EffectiveHamiltonian:
    """Split ``h_eff`` into Hermitian part and decay operator.

    Args:
        h_eff: Square matrix.
        c: ``"auto"`` picks the smallest shift making ``R`` positive; a number is
            validated against positivity.

    Raises:
        ModelError: If an explicit ``c`` leaves ``R`` with a negative eigenvalue.
    """
    h = as_matrix(h_eff, tol=tol)
    x = hermitian_part(1j * (h - dagger(h)))
    lo = float(np.linalg.eigvalsh(x)[0])
    if isinstance(c, str):
        if c != "auto":
            raise ArgumentError(f"unknown c policy {c!r}")
        return EffectiveHamiltonian(h, -lo)
    c = float(c)
    if c + lo < -tol.psd:
        msg = f"c={c!r} gives R with eigenvalue {c + lo:.3e} < 0"
        if h.shape[0] == 2:
            p = c2_parametrize(h, c)
            msg += f"; positivity requires c_tilde={p.c_tilde:.6g} >= k={p.k:.6g}"
        raise ModelError(msg)
    return EffectiveHamiltonian(h, c)


def jump_model(
    eh: EffectiveHamiltonian, label: str = "jump", tol: Tolerances = DEFAULT
) -> JumpModel:
    """Jump model with gain ``G[rho] = R^{1/2} rho R^{1/2}``.

    The channel is written as rate ``nu = ||R||`` times Kraus ``(R / nu)^{1/2}``.
    """
    r = eh.R
    w, v = np.linalg.eigh(r)
    w = np.clip(w, 0.0, None)
    nu = float(w[-1])
    if nu <= 0:
        kraus = np.zeros_like(r)
        nu = 1.0
    else:
        kraus = (v * np.sqrt(w / nu)) @ dagger(v)
    return JumpModel(eh.H, [], [JumpChannel(label, nu, QuantumChannel([kraus], tol))], tol)


# --------------------------------------------------------------------------- #
# 2x2 parametrization


class Regime(str, enum.Enum):
    UNITARY = "unitary"
    UNIFORM = "uniform"
    EXCEPTIONAL = "exceptional"
    GENERIC = "generic"


@dataclass(frozen=True)
class C2Params:
    """Parameters ``eps1, eps0, beta, delta`` and shift ``c`` of a 2x2 model."""

    eps1: complex
    eps0: complex
    beta: complex
    delta: complex
    c: float = 0.0

    @property
    def alpha(self) -> complex:
        return 0.5 * (self.eps1 - self.eps0)

    @property
    def kappa(self) -> complex:
        return self.alpha**2 + self.beta * self.delta

    @property
    def k(self) -> float:
        return math.hypot(abs(self.beta - self.delta.conjugate()), 2.0 * self.alpha.imag)

    @property
    def c_tilde(self) -> float:
        return self.c - (self.eps1 + self.eps0).imag

    @property
    def z(self) -> complex:
        kap = self.kappa
        if kap == 0:
            return 0j
        return cmath.exp(0.5j * cmath.phase(kap)) * math.sqrt(abs(kap))

    @property
    def lambda0(self) -> float:
        return abs(self.beta) + abs(self.delta)

    @property
    def scale(self) -> float:
        return max(abs(self.alpha), abs(self.beta), abs(self.delta))

    @property
    def K(self) -> NDArray:
        a = self.alpha
        return np.array([[a, self.beta], [self.delta, -a]], dtype=np.complex128)

    @property
    def h_eff(self) -> NDArray:
        return np.array([[self.eps1, self.beta], [self.delta, self.eps0]], dtype=np.complex128)

    @property
    def R(self) -> NDArray:
        kk = self.K
        return hermitian_part(self.c_tilde * np.eye(2) + 1j * (kk - dagger(kk)))

    @property
    def positive(self) -> bool:
        return self.c_tilde >= self.k - DEFAULT.psd

    def regime(self, tol: float = DEFAULT.regime) -> Regime:
        s = max(self.scale, 1.0)
        if self.k <= tol * s:
            return Regime.UNITARY if abs(self.c_tilde) <= tol * s else Regime.UNIFORM
        if abs(self.kappa) <= tol * s * s and self.lambda0 > tol * s:
            return Regime.EXCEPTIONAL
        return Regime.GENERIC

    def is_ep(self, tol: float = DEFAULT.regime) -> bool:
        return self.regime(tol) is Regime.EXCEPTIONAL


def c2_parametrize(h_eff: ArrayLike, c: float = 0.0) -> C2Params:
    """Extract the 2x2 parameters and check ``K @ K = kappa 1``."""
    h = as_matrix(h_eff, 2)
    p = C2Params(complex(h[0, 0]), complex(h[1, 1]), complex(h[0, 1]), complex(h[1, 0]), float(c))
    kk = p.K
    if np.max(np.abs(kk @ kk - p.kappa * np.eye(2))) > 1e-12 * max(1.0, p.scale**2):
        raise ModelError("K^2 differs from kappa * 1")
    return p


def refex_params(
    gamma1: float, gamma0: float, beta_abs: float, theta: float, c: float,
    e1: float = 0.0, e0: float = 0.0,
) -> C2Params:
    """Family ``eps_j = E_j - i Gamma_j`` with ``delta = conj(beta) e^{i theta}``.

    Uses a real ``beta = |beta|``, so ``beta delta = |beta|^2 e^{i theta}`` and
    ``k = sqrt(4 |beta|^2 sin^2(theta/2) + (Gamma_1 - Gamma_0)^2)``.
    """
    return C2Params(
        complex(e1, -gamma1), complex(e0, -gamma0), complex(beta_abs),
        beta_abs * cmath.exp(1j * theta), c,
    )


# --------------------------------------------------------------------------- #
# g-functions and propagator


def _series(xi: complex, offset: int) -> complex:
    """``sum_n (-xi)^n / (2n + offset)!`` with enough precision to avoid cancellation."""
    if abs(xi) <= 1.0:
        term = 1.0 / math.factorial(offset) + 0j
        total = term
        n = 0
        while abs(term) >= 1e-16 * max(1.0, abs(total)):
            n += 1
            term *= -xi / ((2 * n + offset) * (2 * n + offset - 1))
            total += term
        return complex(total)
    growth = math.sqrt(abs(xi)) / math.log(10.0)
    with mpmath.workdps(int(25 + growth)):
        x = mpmath.mpc(xi.real, xi.imag)
        term = mpmath.mpf(1) / mpmath.factorial(offset)
        total = term
        n = 0
        eps = mpmath.mpf(10) ** (-20)
        while abs(term) >= eps * max(1, abs(total)):
            n += 1
            term *= -x / ((2 * n + offset) * (2 * n + offset - 1))
            total += term
        return complex(total)


def g_plus_series(xi: complex) -> complex:
    """``g_+(xi) = sum_n (-xi)^n / (2n)!``."""
    return _series(complex(xi), 0)


def g_minus_series(xi: complex) -> complex:
    """``g_-(xi) = sum_n (-xi)^n / (2n+1)!``."""
    return _series(complex(xi), 1)


def g_plus_closed(z: complex, t: float) -> complex:
    """``g_+(z^2 t^2) = cos(z t)``."""
    return complex(cmath.cos(z * t))


def g_minus_closed(z: complex, t: float) -> complex:
    """``g_-(z^2 t^2) = sin(z t) / (z t)``."""
    zt = z * t
    if zt == 0:
        return 1.0 + 0j
    return complex(cmath.sin(zt) / zt)


def _near_ep(p: C2Params, tol: Tolerances) -> bool:
    return abs(p.kappa) <= tol.ep_switch * p.scale**2


def propagator_K(
    params: C2Params,
    t: ArrayLike,
    method: Literal["auto", "series", "closed", "eigen"] = "auto",
    tol: Tolerances = DEFAULT,
) -> NDArray:
    """``exp(-i K t)`` for scalar or array ``t`` (shape ``t.shape + (2, 2)``).

    ``auto`` uses ``cos(zt) 1 - i K sin(zt)/z`` away from the EP and the power
    series near it.
    """
    ts = np.asarray(t, dtype=float)
    if np.any(ts < 0):
        raise ArgumentError("t must be non-negative")
    kk = params.K
    one = np.eye(2, dtype=np.complex128)
    if method == "auto":
        method = "series" if _near_ep(params, tol) else "closed"
    flat = ts.ravel()
    if method == "eigen":
        es = eigensystem(params)
        ph = np.exp(-1j * es.z * flat)
        out = ph[:, None, None] * es.V_plus + (1.0 / ph)[:, None, None] * es.V_minus
        return out.reshape(ts.shape + (2, 2))
    if method == "closed":
        z = params.z
        gp = np.cos(z * flat)
        gm_t = np.sin(z * flat) / z if z != 0 else flat.astype(complex)
    elif method == "series":
        kap = params.kappa
        if kap == 0:
            gp = np.ones(flat.size, complex)
            gm_t = flat.astype(complex)
        else:
            gp = np.array([g_plus_series(kap * s * s) for s in flat])
            gm_t = np.array([g_minus_series(kap * s * s) * s for s in flat])
    else:
        raise ArgumentError(f"unknown method {method!r}")
    out = gp[:, None, None] * one - 1j * gm_t[:, None, None] * kk
    return out.reshape(ts.shape + (2, 2))


# --------------------------------------------------------------------------- #
# eigenvectors and EP basis


@dataclass(frozen=True, eq=False)
class Eigensystem:
    """``K u_pm = pm z u_pm`` and projectors ``V_pm = 1/2 pm K/(2z)``."""

    z: complex
    u_plus: NDArray
    u_minus: NDArray
    V_plus: NDArray
    V_minus: NDArray


def _unit(v: ArrayLike) -> NDArray:
    v = np.asarray(v, dtype=np.complex128)
    return v / np.linalg.norm(v)


def eigensystem(params: C2Params, branch: int = 1, tol: Tolerances = DEFAULT) -> Eigensystem:
    """Eigenvalues ``pm z`` of ``K`` with eigenvectors and spectral projectors.

    Args:
        params: Non-EP parameters.
        branch: ``+1`` for the principal root ``z``, ``-1`` for ``-z``.

    Raises:
        RegimeError: At (or numerically at) an exceptional point.
    """
    p = params
    s = max(p.scale, 1e-300)
    if abs(p.kappa) <= tol.regime * s * s:
        raise RegimeError("eigensystem undefined at an exceptional point")
    a, b, d = p.alpha, p.beta, p.delta
    if b * d != 0:
        z = p.z * branch
        up = _unit([a + z, d])
        um = _unit([a - z, d])
    else:
        z = a
        up = _unit([a + z, d])
        um = _unit([-b, a + z])
    kk = p.K
    one = np.eye(2)
    vp = 0.5 * one + kk / (2 * z)
    vm = 0.5 * one - kk / (2 * z)
    return Eigensystem(complex(z), up, um, vp, vm)


def ep_basis(params: C2Params, tol: Tolerances = DEFAULT) -> tuple[NDArray, NDArray]:
    """Orthonormal pair with ``K phi0 = 0`` and ``K phi1 = (|beta|+|delta|) phi0``.

    Raises:
        RegimeError: Outside the exceptional regime.
    """
    if not params.is_ep(tol.regime):
        raise RegimeError("ep_basis requires kappa = 0 with |beta| + |delta| > 0")
    a, b, d = params.alpha, params.beta, params.delta
    arg_a = cmath.phase(a) if a != 0 else 0.0
    if b == 0:
        return np.array([0, cmath.exp(1j * cmath.phase(d))]), np.array([1, 0], dtype=complex)
    if d == 0:
        return np.array([1, 0], dtype=complex), np.array([0, cmath.exp(-1j * cmath.phase(b))])
    ab, ad = math.sqrt(abs(b)), math.sqrt(abs(d))
    n = math.sqrt(abs(b) + abs(d))
    phi0 = np.array([ab, cmath.exp(1j * (cmath.phase(d) - arg_a)) * ad]) / n
    phi1 = np.array([cmath.exp(-1j * arg_a) * ad, cmath.exp(-1j * cmath.phase(b)) * ab]) / n
    return phi0, phi1


# --------------------------------------------------------------------------- #
# survival and waiting times


def _as_rho(rho0: ArrayLike) -> NDArray:
    a = np.asarray(rho0, dtype=np.complex128)
    if a.ndim == 1:
        a = a / np.linalg.norm(a)
        return np.outer(a, a.conj())
    return as_matrix(a, 2)


def _zeta(params: C2Params, rho: NDArray, t: NDArray, tol: Tolerances) -> NDArray:
    u = propagator_K(params, t, tol=tol)
    return u @ rho @ dagger(u)


def _check_positive(params: C2Params, tol: Tolerances) -> None:
    if params.c_tilde < params.k - tol.psd:
        raise ModelError(
            f"positivity violated: c_tilde={params.c_tilde:.6g} < k={params.k:.6g}"
        )


def survival(params: C2Params, rho0: ArrayLike, t: ArrayLike, tol: Tolerances = DEFAULT) -> NDArray:
    """No-jump probability ``exp(-c_tilde t) Tr{exp(-iKt) rho0 exp(iK^dagger t)}``.

    ``rho0`` may be a density matrix or a state vector.
    """
    _check_positive(params, tol)
    rho = _as_rho(rho0)
    ts = np.asarray(t, dtype=float)
    z = _zeta(params, rho, ts, tol)
    tr = np.trace(z, axis1=-2, axis2=-1).real
    return np.exp(-params.c_tilde * ts) * tr


def waiting_density_nh(
    params: C2Params, rho0: ArrayLike, t: ArrayLike, tol: Tolerances = DEFAULT
) -> NDArray:
    """Waiting-time density ``exp(-c_tilde t) Tr{R zeta(t)}`` (``= -dS/dt``)."""
    _check_positive(params, tol)
    rho = _as_rho(rho0)
    ts = np.asarray(t, dtype=float)
    z = _zeta(params, rho, ts, tol)
    r = params.R
    val = np.einsum("ij,...ji->...", r, z).real
    return np.exp(-params.c_tilde * ts) * val


def ep_density_closed(params: C2Params, psi: ArrayLike, t: ArrayLike) -> NDArray:
    """Closed-form EP waiting density for a pure initial state ``psi``."""
    phi0, phi1 = ep_basis(params)
    lam0 = params.lambda0
    ct = params.c_tilde
    psi = _unit(psi)
    ts = np.asarray(t, dtype=float)
    a0 = np.vdot(phi0, psi)
    a1 = np.vdot(phi1, psi)
    u = propagator_K(params, ts)
    psit = u @ psi
    norm2 = np.sum(np.abs(psit) ** 2, axis=-1)
    coh = np.abs(a0 + 1j * a1 * (1.0 - ts * lam0)) ** 2
    return np.exp(-ct * ts) * ((ct - lam0) * norm2 + lam0 * coh)


def asymptotic_survival(params: C2Params, rho0: ArrayLike) -> float:
    """``lim S(t)`` for ``t -> inf`` from the spectral form (non-EP)."""
    _check_positive(params, DEFAULT)
    rho = _as_rho(rho0)
    es = eigensystem(params)
    total = 0.0
    for sgn, v in ((1, es.V_plus), (-1, es.V_minus)):
        # |exp(-i sgn z t)|^2 = exp(2 sgn Im z t)
        rate = params.c_tilde - 2 * sgn * es.z.imag
        if abs(rate) <= 1e-12 * max(1.0, params.scale):
            total += float(np.trace(v @ rho @ dagger(v)).real)
    return total


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float
    tail: float


def waiting_moments(
    params: C2Params, rho0: ArrayLike, tol: Tolerances = DEFAULT
) -> Moments:
    """Mean and variance of the waiting time by quadrature of ``S``.

    Integrates ``S`` and ``t S`` on ``[0, T*]`` with ``S(T*) < 1e-10`` and adds
    an exponential tail correction. Returns infinities if ``S(inf) > 0``.
    """
    _check_positive(params, tol)
    rho = _as_rho(rho0)
    if not params.is_ep():
        tail = asymptotic_survival(params, rho)
        if tail > 1e-12:
            return Moments(math.inf, math.inf, tail)
    surv = lambda t: float(survival(params, rho, t, tol))  # noqa: E731
    rate_scale = max(params.c_tilde, params.k, params.scale, 1e-12)
    t_star = 1.0 / rate_scale
    for _ in range(200):
        if surv(t_star) < 1e-10:
            break
        t_star *= 1.5
        if t_star * rate_scale > 1e6:
            tail = surv(t_star)
            return Moments(math.inf, math.inf, tail)
    pieces = np.linspace(0.0, t_star, 33)
    m1 = m2 = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        m1 += quad(surv, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        m2 += 2.0 * quad(lambda s: s * surv(s), a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    s_end = surv(t_star)
    dens = float(waiting_density_nh(params, rho, t_star, tol))
    r = dens / s_end if s_end > 0 and dens > 0 else rate_scale
    m1 += s_end / r
    m2 += 2.0 * s_end * (t_star / r + 1.0 / r**2)
    return Moments(m1, m2 - m1 * m1, 0.0)


def conditional_no_jump_state(
    params: C2Params, rho0: ArrayLike, t: float, tol: Tolerances = DEFAULT
) -> NDArray:
    """Normalized no-jump state ``zeta(t) / Tr zeta(t)`` (independent of ``c``)."""
    rho = _as_rho(rho0)
    z = _zeta(params, rho, np.asarray(t, dtype=float), tol)
    return hermitian_part(z / np.trace(z).real)
