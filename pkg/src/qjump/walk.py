"""Hybrid quantum/classical walks on finite graphs.

A walker sits on vertex ``x(k)``. Label ``u`` is active on ``F_u`` and sends
the walker to ``y^u(x)``; the quantum state jumps with the Kraus family
``J_j(x, u)``. Between jumps the quantum state evolves with the vertex
no-jump generator ``A_k = L0^k - {R_k, .} / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .config import DEFAULT, Tolerances
from .engine import Ensemble, ExpTable, Mode, TrajectoryRecord, sample_piecewise
from .errors import ArgumentError, ModelError, NumericError
from .nonhermitian import C2Params, Regime, c2_parametrize
from .pointproc import RngStream, UniformPool
from .qops import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Z,
    JumpChannel,
    JumpModel,
    as_density,
    as_matrix,
    dagger,
    Superoperator,
    _smooth_terms,
    hermitian_part,
    rescale_channel,
    unvec,
    vec,
)


@dataclass(frozen=True, eq=False)
class WalkModel:
    """Finite hybrid walk.

    Attributes:
        vertices: Vertex coordinates (used only as identifiers).
        labels: Label names ``u``.
        rates: ``nu_u`` per label.
        targets: Per label, map from active vertex index to target vertex index.
            Its keys form ``F_u``.
        hamiltonians: ``H(x)`` per vertex.
        lindblads: ``L_k(x)`` per vertex.
        kraus: ``J_j(x, u)`` keyed by ``(vertex index, label index)`` for ``x`` in ``F_u``.
        dim: Quantum dimension.
    """

    vertices: tuple[tuple[float, ...], ...]
    labels: tuple[str, ...]
    rates: NDArray
    targets: tuple[Mapping[int, int], ...]
    hamiltonians: tuple[NDArray, ...]
    lindblads: tuple[tuple[NDArray, ...], ...]
    kraus: Mapping[tuple[int, int], tuple[NDArray, ...]]
    dim: int

    @property
    def n(self) -> int:
        return len(self.vertices)

    def active(self, k: int) -> list[int]:
        """Label indices ``u`` with ``x(k)`` in ``F_u``."""
        return [u for u, tg in enumerate(self.targets) if k in tg]

    @property
    def absorbing(self) -> list[int]:
        """Vertex indices in ``F_0``."""
        return [k for k in range(self.n) if not self.active(k)]

    def R(self, k: int) -> NDArray:
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for u in self.active(k):
            out += self.rates[u] * sum(dagger(j) @ j for j in self.kraus[(k, u)])
        return hermitian_part(out)

    def jump_superop(self, k: int, u: int) -> NDArray:
        """Column-acting superoperator of ``J(x(k), u)``."""
        return sum(np.kron(j, j.conj()) for j in self.kraus[(k, u)])

    def no_jump_generator(self, k: int) -> NDArray:
        ls = self.lindblads[k]
        r0 = sum((dagger(l) @ l for l in ls), np.zeros((self.dim, self.dim), complex))
        h_eff = self.hamiltonians[k] - 0.5j * (r0 + self.R(k))
        return Superoperator(self.dim, _smooth_terms(h_eff, ls)).matrix()

    def rate_generator(self) -> NDArray:
        """Block generator of the Lindblad rate equation on the stacked ``eta_k``."""
        d2 = self.dim**2
        n = self.n
        big = np.zeros((n * d2, n * d2), dtype=np.complex128)
        for k in range(n):
            big[k * d2:(k + 1) * d2, k * d2:(k + 1) * d2] += self.no_jump_generator(k)
            for u in self.active(k):
                l = self.targets[u][k]
                big[l * d2:(l + 1) * d2, k * d2:(k + 1) * d2] += (
                    self.rates[u] * self.jump_superop(k, u)
                )
        return big


def build_walk(
    vertices: Sequence[ArrayLike],
    labels: Sequence[str],
    rates: Sequence[float],
    targets: Sequence[Mapping[int, int]],
    hamiltonians: Sequence[ArrayLike],
    kraus: Mapping[tuple[int, int], Sequence[ArrayLike]],
    lindblads: Sequence[Sequence[ArrayLike]] | None = None,
    tol: Tolerances = DEFAULT,
) -> WalkModel:
    """Validate and assemble a walk model.

    Raises:
        ModelError: On inconsistent sizes, missing or superfluous Kraus
            families, non-positive rates or invalid targets.
    """
    verts = tuple(tuple(float(c) for c in np.atleast_1d(np.asarray(v, dtype=float))) for v in vertices)
    n = len(verts)
    if n == 0:
        raise ModelError("at least one vertex is required")
    if len(set(verts)) != n:
        raise ModelError("vertices must be distinct")
    labs = tuple(str(u) for u in labels)
    if len(set(labs)) != len(labs):
        raise ModelError("labels must be unique")
    nu = np.asarray(rates, dtype=float)
    if nu.shape != (len(labs),) or not np.all(np.isfinite(nu)) or np.any(nu <= 0):
        raise ModelError("one positive rate per label is required")
    if len(targets) != len(labs):
        raise ModelError("one target map per label is required")
    tg = []
    for u, m in enumerate(targets):
        mm = {int(k): int(v) for k, v in dict(m).items()}
        for k, v in mm.items():
            if not (0 <= k < n and 0 <= v < n):
                raise ModelError(f"targets[{u}] refers to a vertex outside 0..{n - 1}")
        tg.append(mm)
    if len(hamiltonians) != n:
        raise ModelError("one Hamiltonian per vertex is required")
    hs = tuple(as_matrix(h, None, tol) for h in hamiltonians)
    dim = hs[0].shape[0]
    for k, h in enumerate(hs):
        if h.shape != (dim, dim):
            raise ModelError(f"hamiltonians[{k}] has the wrong shape")
        if np.max(np.abs(h - dagger(h))) > tol.hermitian:
            raise ModelError(f"hamiltonians[{k}] is not Hermitian")
    ls = tuple(tuple(as_matrix(l, dim, tol) for l in (lindblads[k] if lindblads else ())) for k in range(n))
    if lindblads is not None and len(lindblads) != n:
        raise ModelError("one Lindblad list per vertex is required")
    ks: dict[tuple[int, int], tuple[NDArray, ...]] = {}
    for (k, u), fam in dict(kraus).items():
        k, u = int(k), int(u)
        if not (0 <= u < len(labs)) or k not in tg[u]:
            raise ModelError(f"kraus[({k}, {u})] given outside the active set of label {u}")
        mats = tuple(as_matrix(j, dim, tol) for j in fam)
        if not mats:
            raise ModelError(f"kraus[({k}, {u})] is empty")
        ks[(k, u)] = mats
    for u, m in enumerate(tg):
        for k in m:
            if (k, u) not in ks:
                raise ModelError(f"kraus[({k}, {u})] missing for active vertex")
    return WalkModel(verts, labs, nu, tuple(tg), hs, ls, ks, dim)


@dataclass(frozen=True, eq=False)
class HybridState:
    """Vertex index and normalized quantum state."""

    vertex: int
    rho: NDArray

    def __post_init__(self):
        object.__setattr__(self, "rho", as_density(self.rho))


@dataclass(frozen=True, eq=False)
class RateVector:
    """Unnormalized vertex-resolved states ``eta_k``."""

    etas: tuple[NDArray, ...]

    @property
    def total_trace(self) -> float:
        return float(sum(np.trace(e).real for e in self.etas))

    @property
    def mean_state(self) -> NDArray:
        return sum(self.etas)

    @property
    def occupations(self) -> NDArray:
        return np.array([np.trace(e).real for e in self.etas])

    @classmethod
    def from_state(cls, model: WalkModel, state: HybridState) -> RateVector:
        etas = [np.zeros((model.dim, model.dim), dtype=np.complex128) for _ in range(model.n)]
        etas[state.vertex] = np.array(state.rho, dtype=np.complex128)
        return cls(tuple(etas))

    def stacked(self) -> NDArray:
        return np.concatenate([vec(e) for e in self.etas])


def _check_vertex(model: WalkModel, k: int) -> None:
    if not 0 <= k < model.n:
        raise ArgumentError(f"vertex {k} outside 0..{model.n - 1}")


def pauli_rates(model: WalkModel) -> NDArray:
    """Classical rate matrix ``T(k, l)`` (rate from ``l`` to ``k``)."""
    t = np.zeros((model.n, model.n))
    for u, tg in enumerate(model.targets):
        for l, k in tg.items():
            t[k, l] += model.rates[u]
    return t


def pauli_evolve(model: WalkModel, q0: ArrayLike, t: float) -> NDArray:
    """Solution ``exp(t (T - diag(colsum T))) q0`` of the Pauli rate equation."""
    tm = pauli_rates(model)
    gen = tm - np.diag(tm.sum(axis=0))
    return expm(t * gen) @ np.asarray(q0, dtype=float)


def _as_rate_vector(model: WalkModel, init: RateVector | HybridState) -> RateVector:
    if isinstance(init, HybridState):
        _check_vertex(model, init.vertex)
        return RateVector.from_state(model, init)
    if len(init.etas) != model.n:
        raise ArgumentError("rate vector length differs from the number of vertices")
    return init


def _unstack(model: WalkModel, x: NDArray) -> RateVector:
    d2 = model.dim**2
    return RateVector(
        tuple(hermitian_part(unvec(x[k * d2:(k + 1) * d2], model.dim)) for k in range(model.n))
    )


def lindblad_rate_evolve(
    model: WalkModel,
    init: RateVector | HybridState,
    t: float,
    tol: Tolerances = DEFAULT,
) -> RateVector:
    """Integrate the Lindblad rate equation up to ``t``.

    Uses one block exponential when ``n dim^2`` is at most
    ``tol.block_expm_limit``, an adaptive Runge-Kutta scheme otherwise.

    Raises:
        NumericError: If the total trace drifts by more than 1e-8.
    """
    if t < 0:
        raise ArgumentError("t must be non-negative")
    rv = _as_rate_vector(model, init)
    x0 = rv.stacked()
    if t == 0:
        return rv
    big = model.rate_generator()
    if big.shape[0] <= tol.block_expm_limit:
        x = expm(t * big) @ x0
    else:
        sol = solve_ivp(lambda _s, y: big @ y, (0.0, t), x0, method="DOP853", rtol=1e-9, atol=1e-12)
        if not sol.success:
            raise NumericError(f"rate equation integration failed: {sol.message}")
        x = sol.y[:, -1]
    out = _unstack(model, x)
    if abs(out.total_trace - rv.total_trace) > 1e-8:
        raise NumericError("rate equation does not preserve the total trace")
    return out


def lindblad_rate_curve(
    model: WalkModel, init: RateVector | HybridState, times: ArrayLike
) -> list[RateVector]:
    """Rate-equation solutions on a grid of times."""
    rv = _as_rate_vector(model, init)
    big = model.rate_generator()
    x0 = rv.stacked()
    return [_unstack(model, expm(float(s) * big) @ x0) for s in np.asarray(times, dtype=float)]


@dataclass(frozen=True, eq=False)
class DysonTerms:
    """Rate-equation solution split by the number of jumps.

    Attributes:
        terms: ``D_m^k(t)`` for ``m = 0..m_max`` as rate vectors.
        overflow: Contribution of more than ``m_max`` jumps.
    """

    terms: tuple[RateVector, ...]
    overflow: RateVector

    @property
    def remainder(self) -> float:
        return self.overflow.total_trace

    def partial_sum(self) -> RateVector:
        n = len(self.terms[0].etas)
        return RateVector(tuple(sum(t.etas[k] for t in self.terms) for k in range(n)))


def dyson_terms(
    model: WalkModel, init: RateVector | HybridState, t: float, m_max: int = 20
) -> DysonTerms:
    """Jump-count expansion of the Lindblad rate equation solution."""
    rv = _as_rate_vector(model, init)
    n, d2 = model.n, model.dim**2
    size = n * d2
    diag = np.zeros((size, size), dtype=np.complex128)
    for k in range(n):
        diag[k * d2:(k + 1) * d2, k * d2:(k + 1) * d2] = model.no_jump_generator(k)
    feed = model.rate_generator() - diag
    layers = m_max + 2
    big = np.zeros((layers * size, layers * size), dtype=np.complex128)
    for m in range(layers):
        blk = slice(m * size, (m + 1) * size)
        big[blk, blk] = diag if m < layers - 1 else diag + feed
        if m > 0:
            big[blk, slice((m - 1) * size, m * size)] = feed
    x0 = np.zeros(layers * size, dtype=np.complex128)
    x0[:size] = rv.stacked()
    x = expm(t * big) @ x0
    parts = [_unstack(model, x[m * size:(m + 1) * size]) for m in range(layers)]
    return DysonTerms(tuple(parts[:-1]), parts[-1])


# --------------------------------------------------------------------------- #
# trajectories


def _modes(model: WalkModel) -> list[Mode]:
    modes = []
    for k in range(model.n):
        a = model.no_jump_generator(k)
        act = model.active(k)
        scale = max(
            float(np.linalg.norm(model.R(k), 2)),
            float(np.linalg.norm(model.hamiltonians[k], 2)),
            1e-12,
        )
        modes.append(
            Mode(
                table=ExpTable(a, scale),
                labels=[model.labels[u] for u in act],
                rates=np.array([model.rates[u] for u in act]),
                jumps=[model.jump_superop(k, u).T for u in act],
                targets=[model.targets[u][k] for u in act],
            )
        )
    return modes


def simulate_hybrid_ensemble(
    model: WalkModel,
    init: HybridState,
    horizon: float,
    n: int,
    seed: int,
    first_stream: int = 0,
    max_jumps: int | None = None,
) -> Ensemble:
    """Sample ``n`` hybrid trajectories; ``event_mode`` holds the vertex after each jump."""
    _check_vertex(model, init.vertex)
    if not horizon >= 0:
        raise ArgumentError("horizon must be non-negative")
    pool = UniformPool(seed, np.arange(first_stream, first_stream + n))
    return sample_piecewise(_modes(model), init.vertex, init.rho, horizon, pool, max_jumps)


def simulate_hybrid(
    model: WalkModel, init: HybridState, horizon: float, rng: RngStream
) -> TrajectoryRecord:
    """One hybrid trajectory; ``modes`` lists the vertex entered at each jump."""
    ens = simulate_hybrid_ensemble(model, init, horizon, 1, rng.master_seed, rng.stream_index)
    return ens.record(0)


def ensemble_rate_vector(model: WalkModel, ens: Ensemble) -> tuple[RateVector, RateVector]:
    """Monte Carlo estimate of ``eta_k(horizon)`` and its entrywise standard error."""
    d = model.dim
    states = unvec(ens.final_state, d)
    means, errs = [], []
    for k in range(model.n):
        ind = (ens.final_mode == k)[:, None, None]
        x = np.where(ind, states, 0.0)
        means.append(x.mean(axis=0))
        sd_re = x.real.std(axis=0, ddof=1) / math.sqrt(ens.n)
        sd_im = x.imag.std(axis=0, ddof=1) / math.sqrt(ens.n)
        errs.append(sd_re + 1j * sd_im)
    return RateVector(tuple(means)), RateVector(tuple(errs))


def vertex_waiting(model: WalkModel, state: HybridState, dt: float) -> float:
    """No-jump probability ``Tr{exp(dt A_k)[rho]}`` at the current vertex."""
    _check_vertex(model, state.vertex)
    if dt < 0:
        raise ArgumentError("dt must be non-negative")
    a = model.no_jump_generator(state.vertex)
    out = unvec(expm(dt * a) @ vec(state.rho), model.dim)
    return float(np.trace(out).real)


def as_jump_model(model: WalkModel, tol: Tolerances = DEFAULT) -> JumpModel:
    """Equivalent jump model on ``C^n (x) C^dim`` with a classical vertex register.

    The state ``|k><k| (x) rho`` encodes the hybrid state ``(x(k), rho)``.
    """
    n = model.n
    proj = [np.outer(np.eye(n)[k], np.eye(n)[k]) for k in range(n)]
    h = sum(np.kron(proj[k], model.hamiltonians[k]) for k in range(n))
    ls = [np.kron(proj[k], l) for k in range(n) for l in model.lindblads[k]]
    chans = []
    for u, lab in enumerate(model.labels):
        kraus = []
        for k, l in model.targets[u].items():
            move = np.outer(np.eye(n)[l], np.eye(n)[k])
            kraus.extend(np.kron(move, j) for j in model.kraus[(k, u)])
        rate, ch = rescale_channel(float(model.rates[u]), kraus)
        chans.append(JumpChannel(lab, rate, ch))
    return JumpModel(h, ls, chans, tol)


def embed_state(model: WalkModel, state: HybridState) -> NDArray:
    """``|k><k| (x) rho`` for the register encoding of :func:`as_jump_model`."""
    e = np.zeros((model.n, model.n))
    e[state.vertex, state.vertex] = 1.0
    return np.kron(e, state.rho)


# --------------------------------------------------------------------------- #
# two-level example


@dataclass(frozen=True, eq=False)
class TwoLevelWalk(WalkModel):
    """Two-vertex walk with ``J(x(0)) = g0 E0`` and ``J(x(1)) = g1 E1``.

    Vertex index ``k`` is ``x(k)``.
    """

    case: str = "sigma_z"
    omegas: tuple[float, float] = (0.0, 0.0)
    nus: tuple[float, float] = (1.0, 1.0)

    def params(self, k: int) -> C2Params:
        """2x2 parametrization of ``H_eff^(k) = H_k - i R_k / 2``."""
        return c2_parametrize(self.hamiltonians[k] - 0.5j * self.R(k))

    @property
    def kappa(self) -> tuple[float, float]:
        """``kappa_k = (omega_k^2 - nu_k^2 / 4) / 4`` (meaningful for ``sigma_x``)."""
        return tuple(0.25 * (w * w - 0.25 * v * v) for w, v in zip(self.omegas, self.nus))

    def regime(self, k: int) -> Regime:
        return self.params(k).regime()

    def z(self, k: int) -> complex:
        return self.params(k).z

    def psi(self, s: ArrayLike) -> NDArray:
        """``exp(-i K_1 s) (1, 0)`` for the ``sigma_x`` case, rows over ``s``."""
        from .nonhermitian import propagator_K

        p = self.params(1)
        u = propagator_K(p, np.atleast_1d(np.asarray(s, dtype=float)))
        return u[..., :, 0]


def two_level_example(
    case: Literal["sigma_z", "sigma_x"],
    omega0: float,
    omega1: float,
    nu0: float,
    nu1: float,
    nu: float | None = None,
) -> TwoLevelWalk:
    """Two-vertex walk with alternating reset channels.

    Args:
        case: ``"sigma_z"`` or ``"sigma_x"`` Hamiltonians ``H_k = omega_k sigma / 2``.
        omega0, omega1: Frequencies.
        nu0, nu1: Effective rates ``nu_k = nu g_k``.
        nu: Reference rate ``nu`` (defaults to ``max(nu0, nu1)``).

    Raises:
        ModelError: On non-positive rates, ``nu < max(nu_k)`` or zero
            frequency in the ``sigma_x`` case.
    """
    if case not in ("sigma_z", "sigma_x"):
        raise ModelError(f"unknown case {case!r}")
    if not (nu0 > 0 and nu1 > 0):
        raise ModelError("nu0 and nu1 must be positive")
    if case == "sigma_x" and (omega0 == 0 or omega1 == 0):
        raise ModelError("sigma_x case requires non-zero frequencies")
    nu = max(nu0, nu1) if nu is None else float(nu)
    if nu < max(nu0, nu1):
        raise ModelError("nu must not be smaller than nu0 and nu1")
    g = (nu0 / nu, nu1 / nu)
    sig = SIGMA_Z if case == "sigma_z" else SIGMA_X
    base = build_walk(
        vertices=[[0.0], [1.0]],
        labels=["u"],
        rates=[nu],
        targets=[{0: 1, 1: 0}],
        hamiltonians=[0.5 * omega0 * sig, 0.5 * omega1 * sig],
        kraus={(0, 0): [math.sqrt(g[0]) * SIGMA_PLUS], (1, 0): [math.sqrt(g[1]) * SIGMA_MINUS]},
    )
    return TwoLevelWalk(
        base.vertices, base.labels, base.rates, base.targets, base.hamiltonians,
        base.lindblads, base.kraus, base.dim,
        case=case, omegas=(float(omega0), float(omega1)), nus=(float(nu0), float(nu1)),
    )


def case_b_survival(omega1: float, nu1: float, s: ArrayLike) -> NDArray:
    """``exp(-nu1 s / 2) ||psi(s)||^2`` for ``|omega1| > nu1 / 2`` starting from ``P1``."""
    s = np.asarray(s, dtype=float)
    z = 0.5 * math.sqrt(omega1 * omega1 - 0.25 * nu1 * nu1)
    a = np.cos(z * s) - nu1 / (4 * z) * np.sin(z * s)
    b = omega1 / (2 * z) * np.sin(z * s)
    return np.exp(-0.5 * nu1 * s) * (a * a + b * b)


def case_b_zeros(omega1: float, nu1: float, count: int) -> NDArray:
    """First ``count`` zeros ``s*`` of the case (b) intensity after a jump into ``x(1)``."""
    z = 0.5 * math.sqrt(omega1 * omega1 - 0.25 * nu1 * nu1)
    base = math.atan(4 * z / nu1)
    return (base + math.pi * np.arange(count)) / z

