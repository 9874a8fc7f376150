"""Dynamics with prescribed renewal jump times and state-dependent jump labels.

Jump ``i`` occurs after a waiting time drawn from ``f_i``, independently of the
quantum state. At a jump, label ``u`` is chosen with probability
``nu_u Tr{O(u)[rho]}`` and the state becomes ``O(u)[rho] / Tr{O(u)[rho]}``.
Between jumps the state follows a trace-preserving GKSL semigroup.

Mean states and event probabilities are computed from the layered renewal
convolutions: the unnormalized "just jumped" states ``eta_m(s)`` are
tabulated on a Chebyshev grid and integrated with composite Gauss-Legendre
rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._quad import ChebyshevGrid, gauss_legendre
from .config import DEFAULT, Tolerances
from .engine import ExpTable, Trajectory, TrajectoryRecord
from .errors import ArgumentError, ModelError, NumericError
from .pointproc import RenewalLaw, RngStream, UniformPool, tail_remainder
from .qops import (
    P0,
    P1,
    SIGMA_MINUS,
    SIGMA_PLUS,
    JumpChannel,
    JumpModel,
    Superoperator,
    as_density,
    as_matrix,
    dagger,
    hermitian_part,
    rescale_channel,
    smooth_generator,
    trace_vec,
    unvec,
    vec,
)

# --------------------------------------------------------------------------- #
# model


@dataclass(frozen=True, eq=False)
class InstrumentOutcome:
    """One label of a jump instrument: weight ``nu_u`` and Kraus family ``O_j(u)``."""

    label: str
    weight: float
    kraus: tuple[NDArray, ...]

    def apply(self, rho: NDArray) -> NDArray:
        return sum(k @ rho @ dagger(k) for k in self.kraus)

    def effect(self) -> NDArray:
        return sum(dagger(k) @ k for k in self.kraus)

    def superop(self) -> NDArray:
        return sum(np.kron(k, k.conj()) for k in self.kraus)


Instrument = tuple[InstrumentOutcome, ...]


@dataclass(frozen=True, eq=False)
class InterspersedModel:
    """Renewal-timed jumps interspersed with smooth evolution.

    Entry ``m`` of ``smooth`` governs the evolution after ``m`` jumps; entry
    ``i`` of ``instruments`` and ``laws`` governs jump ``i + 1``. The last entry
    of each list repeats.
    """

    dim: int
    smooth: tuple[Superoperator | None, ...]
    instruments: tuple[Instrument, ...]
    laws: tuple[RenewalLaw, ...]
    smooth_spec: tuple[tuple[NDArray, tuple[NDArray, ...]] | None, ...] = ()

    def smooth_at(self, m: int) -> Superoperator | None:
        return self.smooth[min(m, len(self.smooth) - 1)]

    def instrument_at(self, i: int) -> Instrument:
        """Instrument of jump number ``i`` (1-based)."""
        return self.instruments[min(i - 1, len(self.instruments) - 1)]

    def law_at(self, i: int) -> RenewalLaw:
        """Law of waiting time number ``i`` (1-based)."""
        return self.laws[min(i - 1, len(self.laws) - 1)]

    @property
    def labels(self) -> list[str]:
        out: list[str] = []
        for ins in self.instruments:
            for o in ins:
                if o.label not in out:
                    out.append(o.label)
        return out

    @property
    def homogeneous(self) -> bool:
        return len(self.smooth) == 1 and len(self.instruments) == 1 and len(self.laws) == 1


def build_interspersed(
    dim: int,
    laws: RenewalLaw | Sequence[RenewalLaw],
    instruments: Sequence[Iterable[tuple[str, float, Sequence[ArrayLike]]]],
    smooth: Sequence[tuple[ArrayLike, Sequence[ArrayLike]] | None] | None = None,
    tol: Tolerances = DEFAULT,
) -> InterspersedModel:
    """Validate and assemble an interspersed model.

    Args:
        dim: Hilbert-space dimension.
        laws: One law or a per-jump list.
        instruments: Per-jump list of ``(label, weight, kraus)`` families.
        smooth: Per-count list of ``(H, lindblads)`` or ``None`` for no evolution.

    Raises:
        ModelError: If ``sum_u nu_u sum_j O^dagger O`` differs from the identity.
    """
    law_list = (laws,) if isinstance(laws, RenewalLaw) else tuple(laws)
    if not law_list:
        raise ModelError("at least one renewal law is required")
    ins_list: list[Instrument] = []
    for m, fam in enumerate(instruments):
        outs = []
        for label, weight, kraus in fam:
            if not (np.isfinite(weight) and weight > 0):
                raise ModelError(f"weight of label {label!r} must be positive")
            ks = tuple(as_matrix(k, dim, tol) for k in kraus)
            if not ks:
                raise ModelError(f"label {label!r} has no Kraus operators")
            outs.append(InstrumentOutcome(str(label), float(weight), ks))
        if not outs:
            raise ModelError(f"instrument {m} is empty")
        total = sum(o.weight * o.effect() for o in outs)
        defect = float(np.linalg.norm(total - np.eye(dim), 2))
        if defect > tol.normalization:
            raise ModelError(f"instrument {m} normalization defect {defect:.3e}")
        ins_list.append(tuple(outs))
    if not ins_list:
        raise ModelError("at least one instrument is required")
    sm: list[Superoperator | None] = []
    spec: list[tuple[NDArray, tuple[NDArray, ...]] | None] = []
    for entry in smooth or [None]:
        if entry is None:
            sm.append(None)
            spec.append(None)
        else:
            h = as_matrix(entry[0], dim, tol)
            if np.max(np.abs(h - dagger(h))) > tol.hermitian:
                raise ModelError("smooth hamiltonian is not Hermitian")
            ls = tuple(as_matrix(l, dim, tol) for l in entry[1])
            sm.append(smooth_generator(h, ls))
            spec.append((h, ls))
    return InterspersedModel(dim, tuple(sm), tuple(ins_list), law_list, tuple(spec))


@dataclass(frozen=True, eq=False)
class RevivalModel:
    """Two-level reset model with channels ``E0 = sigma_+ . sigma_-`` and ``E1 = sigma_- . sigma_+``.

    Labels ``"0"`` and ``"1"``; no evolution between jumps.
    """

    law: RenewalLaw

    @property
    def interspersed(self) -> InterspersedModel:
        return build_interspersed(
            2, self.law, [[("0", 1.0, [SIGMA_PLUS]), ("1", 1.0, [SIGMA_MINUS])]]
        )


RHO_PAIR = (P0.copy(), P1.copy())


def adapter(model: InterspersedModel, tol: Tolerances = DEFAULT) -> JumpModel:
    """Jump model equivalent to an exponential-law, count-independent model.

    Jump operators are ``sqrt(lambda) O(u)`` so that ``R = lambda 1``. Rates
    are rescaled if needed to keep each channel trace non-increasing.
    """
    if not model.homogeneous or model.laws[0].kind != "exponential":
        raise ModelError("adapter requires a count-independent exponential model")
    lam = model.laws[0].rate
    chans = []
    for o in model.instruments[0]:
        rate, ch = rescale_channel(o.weight * lam, list(o.kraus))
        chans.append(JumpChannel(o.label, rate, ch))
    sm = model.smooth[0]
    d = model.dim
    if sm is None:
        return JumpModel(np.zeros((d, d)), [], chans, tol)
    h_eff = 1j * sm.terms[0][0]
    h = hermitian_part(h_eff)
    ls = [a for a, _ in sm.terms[2:]]
    return JumpModel(h, ls, chans, tol)


# --------------------------------------------------------------------------- #
# sampling


def _smooth_table(model: InterspersedModel, m: int, scale: float) -> ExpTable | None:
    sm = model.smooth_at(m)
    if sm is None:
        return None
    return ExpTable(sm.matrix(), scale)


def simulate_interspersed_ensemble(
    model: InterspersedModel,
    rho0: ArrayLike,
    horizon: float,
    n: int,
    seed: int,
    first_stream: int = 0,
):
    """Sample ``n`` trajectories; returns an ``engine.Ensemble``."""
    from .engine import Ensemble

    r = as_density(rho0, model.dim)
    d = model.dim
    d2 = d * d
    pool = UniformPool(seed, np.arange(first_stream, first_stream + n))
    scale = max(law.rate for law in model.laws)
    n_sm = len(model.smooth)
    tables = [_smooth_table(model, m, scale) for m in range(n_sm)]
    names = model.labels
    v = np.broadcast_to(vec(r), (n, d2)).copy()
    t_cur = np.zeros(n)
    count = np.zeros(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    final = np.empty_like(v)
    ev = []

    def evolve(rows, dt, m):
        tab = tables[min(m, n_sm - 1)]
        return v[rows] if tab is None else tab.apply(dt, v[rows])

    while active.any():
        groups = np.unique(count[active])
        for m in groups:
            rows = np.nonzero(active & (count == m))[0]
            law = model.law_at(int(m) + 1)
            wait = law.sample(pool.draw(rows))
            t_new = t_cur[rows] + wait
            done = t_new > horizon
            dr = rows[done]
            if dr.size:
                final[dr] = evolve(dr, horizon - t_cur[dr], int(m))
                active[dr] = False
            jr = rows[~done]
            if not jr.size:
                continue
            w = evolve(jr, wait[~done], int(m))
            t_cur[jr] = t_new[~done]
            ins = model.instrument_at(int(m) + 1)
            sups = [o.superop().T for o in ins]
            images = np.stack([w @ s for s in sups], axis=1)
            intens = trace_vec(images, d)
            weights = np.maximum(intens, 0) * np.array([o.weight for o in ins])[None, :]
            lam = weights.sum(axis=1)
            u2 = pool.draw(jr)
            pick = (np.cumsum(weights, axis=1) < (u2 * lam)[:, None]).sum(axis=1)
            pick = np.minimum(pick, len(ins) - 1)
            idx = np.arange(jr.size)
            new = images[idx, pick] / intens[idx, pick][:, None]
            new = vec(hermitian_part(unvec(new, d)))
            v[jr] = new
            lab = np.array([names.index(ins[p].label) for p in pick])
            ev.append((jr, count[jr].copy(), t_cur[jr].copy(), lab, intens[idx, pick], new.copy()))
            count[jr] += 1
    if ev:
        cols = [np.concatenate([e[i] for e in ev]) for i in range(6)]
        order = np.lexsort((cols[1], cols[0]))
        cols = [c[order] for c in cols]
    else:
        cols = [np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0),
                np.zeros(0, np.int64), np.zeros(0), np.zeros((0, d2), complex)]
    return Ensemble(
        n=n, dim=d, horizon=float(horizon), event_traj=cols[0], event_index=cols[1],
        event_time=cols[2], event_label=cols[3], event_mode=np.zeros_like(cols[0]),
        event_weight=cols[4], event_state=cols[5],
        final_state=vec(hermitian_part(unvec(final, d))), final_mode=np.zeros(n, np.int64),
        n_jumps=count, survival_log=np.full(n, np.nan), truncated=np.zeros(n, bool),
        label_names=names,
    )


def simulate_interspersed(
    model: InterspersedModel, rho0: ArrayLike, horizon: float, rng: RngStream
) -> TrajectoryRecord:
    """Sample one trajectory; reproducible from ``rng``."""
    ens = simulate_interspersed_ensemble(
        model, rho0, horizon, 1, rng.master_seed, rng.stream_index
    )
    return ens.record(0)


def exclusive_density_interspersed(
    model: InterspersedModel, rho0: ArrayLike, traj: Trajectory
) -> float:
    """``(1 - F_{m+1}(t - t_m)) prod_i f_i(t_i - t_{i-1}) Tr{O-chain[rho0]}``."""
    r = as_density(rho0, model.dim)
    cur = r
    last = 0.0
    weight = 1.0
    for i, (label, tj) in enumerate(traj.events, start=1):
        sm = model.smooth_at(i - 1)
        if sm is not None:
            from .qops import propagate

            cur = propagate(sm, cur, tj - last)
        weight *= float(model.law_at(i).pdf(tj - last))
        outs = [o for o in model.instrument_at(i) if o.label == label]
        if not outs:
            raise ArgumentError(f"label {label!r} not in instrument {i}")
        cur = outs[0].apply(cur)
        last = tj
    m = len(traj)
    weight *= float(model.law_at(m + 1).sf(traj.horizon - last))
    return weight * max(float(np.trace(cur).real), 0.0)


# --------------------------------------------------------------------------- #
# layered convolution solver


def _panels(a: float, b: float, width: float, q: int) -> tuple[NDArray, NDArray]:
    """Composite Gauss-Legendre nodes and weights on ``[a, b]``."""
    if b <= a:
        return np.zeros(0), np.zeros(0)
    k = max(1, int(math.ceil((b - a) / width)))
    edges = np.linspace(a, b, k + 1)
    x, w = gauss_legendre(q)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + h[:, None] * x[None, :]).ravel()
    weights = (h[:, None] * w[None, :]).ravel()
    return nodes, weights


class InterspersedSolver:
    """Tabulates ``eta_m(s)`` (state just after jump ``m`` at time ``s``) on ``[0, T]``.

    Args:
        model: Interspersed model.
        rho0: Initial state.
        T: Largest time of interest.
        m_max: Number of jump layers kept.
        n: Chebyshev order; chosen adaptively when ``None``.
    """

    def __init__(
        self,
        model: InterspersedModel,
        rho0: ArrayLike,
        T: float,
        m_max: int = 30,
        n: int | None = None,
        atol: float = 1e-12,
    ):
        self.model = model
        self.rho0 = as_density(rho0, model.dim)
        self.T = float(T)
        self.m_max = int(m_max)
        self.d = model.dim
        self.scale = max(law.rate for law in model.laws)
        self.q = 24
        self.width = 1.0 / self.scale
        self._tables: dict[int, ExpTable | None] = {}
        if self.T <= 0:
            self.n = 0
            self.eta = np.zeros((self.m_max, 1, self.d**2), complex)
            self.grid = None
            return
        if n is not None:
            self.n = n
            self.grid, self.eta = self._layers(n)
            return
        nn = max(16, int(8 * self.scale * self.T) + 16)
        grid, eta = self._layers(nn)
        for _ in range(5):
            grid2, eta2 = self._layers(2 * nn)
            err = np.max(np.abs(eta2[:, -1] - eta[:, -1])) / self.scale
            nn *= 2
            grid, eta = grid2, eta2
            if err < atol:
                break
        else:
            raise NumericError("layered convolution did not converge")
        self.n = nn
        self.grid = grid

        self.eta = eta

    # smooth propagation of row-stacked vectors over lags
    def _table(self, m: int) -> ExpTable | None:
        key = min(m, len(self.model.smooth) - 1)
        if key not in self._tables:
            self._tables[key] = _smooth_table(self.model, key, self.scale)
        return self._tables[key]

    def _evolve(self, m: int, lags: NDArray, v: NDArray) -> NDArray:
        tab = self._table(m)
        return v if tab is None else tab.apply(lags, v)

    def _ysup(self, i: int, labels: Sequence[str] | None = None) -> NDArray:
        """Row-acting superoperator of ``Y_i(A)`` (including weights)."""
        d2 = self.d**2
        out = np.zeros((d2, d2), complex)
        for o in self.model.instrument_at(i):
            if labels is None or o.label in labels:
                out += o.weight * o.superop()
        return out.T

    def _layers(self, n: int):
        grid = ChebyshevGrid(self.T, n)
        d2 = self.d**2
        eta = np.zeros((self.m_max, n + 1, d2), complex)
        s = grid.nodes
        v0 = np.broadcast_to(vec(self.rho0), (s.size, d2))
        first = self._evolve(0, s, v0) @ self._ysup(1)
        eta[0] = self.model.law_at(1).pdf(s)[:, None] * first
        lag, weight, b = grid.convolution_points(max(self.q, n))
        for m in range(1, self.m_max):
            prev = b @ eta[m - 1]
            moved = self._evolve(m, lag.ravel(), prev)
            kern = (self.model.law_at(m + 1).pdf(lag) * weight).ravel()
            integrand = (kern[:, None] * moved).reshape(lag.shape + (d2,))
            eta[m] = integrand.sum(axis=1) @ self._ysup(m + 1)
        return grid, eta

    @property
    def _uniform_from(self) -> int:
        """Layer index from which smooth part, instrument and laws no longer change."""
        mdl = self.model
        return max(len(mdl.smooth), len(mdl.instruments), len(mdl.laws)) + 1

    def _layer_groups(self, r: NDArray) -> list[tuple[int, NDArray]]:
        """``(m, eta_m(r))`` pairs; identical trailing layers are summed into one."""
        if not hasattr(self, "_groups"):
            k = min(self._uniform_from, self.m_max)
            self._groups = [(m, self.eta[m - 1]) for m in range(1, k)]
            self._groups.append((k, self.eta[k - 1 :].sum(axis=0)))
        b = self.grid.interp_matrix(r)
        return [(m, b @ e) for m, e in self._groups]

    def eta_at(self, r: NDArray) -> NDArray:
        """``eta_m(r)`` for all layers, shape ``(m_max, len(r), d^2)``."""
        b = self.grid.interp_matrix(r)
        return np.stack([b @ e for e in self.eta])

    def mean_state(self, t: float) -> NDArray:
        if t < 0 or t > self.T * (1 + 1e-12):
            raise ArgumentError(f"t={t!r} outside [0, {self.T}]")
        v0 = vec(self.rho0)[None, :]
        out = self.model.law_at(1).sf(t) * self._evolve(0, np.array([t]), v0)[0]
        if t > 0:
            s, w = _panels(0.0, t, self.width, self.q)
            for m, eta in self._layer_groups(s):
                moved = self._evolve(m, t - s, eta)
                coef = w * self.model.law_at(m + 1).sf(t - s)
                out = out + coef @ moved
        return hermitian_part(unvec(out, self.d))

    def _pending(self, m: int, s: NDArray, r: NDArray, wr: NDArray, eta: NDArray | None) -> NDArray:
        """Unnormalized states at ``s > t0`` for histories with ``m`` jumps before ``t0``.

        Returns ``f_{m+1}``-weighted densities already propagated to ``s``.
        """
        d2 = self.d**2
        law = self.model.law_at(m + 1)
        if m == 0:
            v0 = np.broadcast_to(vec(self.rho0), (s.size, d2))
            return law.pdf(s)[:, None] * self._evolve(0, s, v0)
        if r.size == 0:
            return np.zeros((s.size, d2), complex)
        lags = s[:, None] - r[None, :]
        if self.model.smooth_at(m) is None:
            kern = law.pdf(lags) * wr[None, :]
            return kern @ eta
        src = np.broadcast_to(eta[None, :, :], lags.shape + (d2,)).reshape(-1, d2)
        moved = self._evolve(m, lags.ravel(), src).reshape(lags.shape + (d2,))
        kern = law.pdf(lags) * wr[None, :]
        return np.einsum("sr,srk->sk", kern, moved)

    def after_t0(
        self, labels: Sequence[str] | None, t0: float, t: float, exactly_one: bool
    ) -> float:
        """Probability of a jump of type in ``labels`` being the first after ``t0``.

        With ``exactly_one`` it must also be the only jump in ``(t0, t)``.
        """
        if not 0 <= t0 < t:
            raise ArgumentError("need 0 <= t0 < t")
        if t0 > self.T * (1 + 1e-12):
            raise ArgumentError(f"t0={t0!r} outside [0, {self.T}]")
        if math.isinf(t):
            span = self._horizon_span()
            t = t0 + span
        s, ws = _panels(t0, t, self.width, self.q)
        r, wr = _panels(0.0, t0, self.width, self.q)
        groups = [(0, None)] + (self._layer_groups(r) if r.size else [])
        total = 0.0
        for m, eta in groups:
            pend = self._pending(m, s, r, wr, eta)
            eff = vec(self._effect(m + 1, labels).T)
            vals = pend @ eff
            if exactly_one:
                vals = vals * self.model.law_at(m + 2).sf(t - s)
            total += float(np.real(ws @ vals))
        return total

    def _effect(self, i: int, labels: Sequence[str] | None) -> NDArray:
        d = self.d
        out = np.zeros((d, d), complex)
        for o in self.model.instrument_at(i):
            if labels is None or o.label in labels:
                out += o.weight * o.effect()
        return out

    def _horizon_span(self) -> float:
        span = 1.0 / self.scale
        while any(float(law.sf(span)) > 1e-17 for law in self.model.laws):
            span *= 1.5
        return span


# --------------------------------------------------------------------------- #
# public operations


def mean_state_interspersed(
    model: InterspersedModel, rho0: ArrayLike, t: float, m_max: int = 30
) -> NDArray:
    """Mean state at ``t`` truncated at ``m_max`` jumps.

    Raises:
        NumericError: If the trace misses one by more than the certified remainder.
    """
    if t < 0:
        raise ArgumentError("t must be non-negative")
    r = as_density(rho0, model.dim)
    if t == 0:
        return r
    solver = InterspersedSolver(model, r, t, m_max)
    eta = solver.mean_state(t)
    rem = tail_remainder(model.laws, m_max - 1, t)
    if abs(np.trace(eta).real - 1.0) > max(1e-8, rem):
        raise NumericError("mean-state trace deficit exceeds the certified remainder")
    return eta


def event_probability(
    model: InterspersedModel,
    rho0: ArrayLike,
    labels: Sequence[str] | None,
    t0: float,
    t: float,
    m_max: int = 30,
) -> float:
    """Probability of exactly one jump in ``(t0, t)``, of type in ``labels``.

    ``labels=None`` means any label.
    """
    solver = InterspersedSolver(model, rho0, t0, m_max)
    return solver.after_t0(labels, t0, t, exactly_one=True)


def factorized_event_probability(
    model: InterspersedModel,
    rho0: ArrayLike,
    labels: Sequence[str] | None,
    t0: float,
    t: float,
    m_max: int = 30,
) -> float:
    """Surrogate that restarts the renewal clock at ``t0`` from ``eta(t0)``.

    Exact only for exponential laws.
    """
    eta0 = mean_state_interspersed(model, rho0, t0, m_max) if t0 > 0 else as_density(rho0, model.dim)
    law = model.law_at(1)
    d = model.dim
    eff = np.zeros((d, d), complex)
    for o in model.instrument_at(1):
        if labels is None or o.label in labels:
            eff += o.weight * o.effect()
    s, w = _panels(t0, t, 1.0 / law.rate, 24)
    sm = model.smooth_at(0)
    vals = []
    for si in s:
        cur = eta0 if sm is None else _propagate(sm, eta0, si - t0)
        vals.append(np.trace(eff @ cur).real)
    vals = np.asarray(vals)
    return float(w @ (law.pdf(s - t0) * law.sf(t - s) * vals))


def _propagate(sm: Superoperator, rho: NDArray, dt: float) -> NDArray:
    from .qops import propagate

    return propagate(sm, rho, dt)


def revival_probabilities(
    model: RevivalModel, rho0: ArrayLike, t0: float, t: float, m_max: int = 30
) -> tuple[float, float]:
    """``(P0, P1)``: probabilities that the first jump after ``t0`` (before ``t``) has type 0 or 1."""
    solver = InterspersedSolver(model.interspersed, rho0, t0, m_max)
    return (
        solver.after_t0(["0"], t0, t, exactly_one=False),
        solver.after_t0(["1"], t0, t, exactly_one=False),
    )


def trace_distance(a: NDArray, b: NDArray) -> float:
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(hermitian_part(a - b)))))


@dataclass(frozen=True)
class Distances:
    kolmogorov: float
    trace: float


class RevivalAnalysis:
    """Reusable solvers for a pair of initial states on ``[0, T]``."""

    def __init__(
        self,
        model: RevivalModel,
        T: float,
        pair: tuple[ArrayLike, ArrayLike] = RHO_PAIR,
        m_max: int = 30,
    ):
        self.model = model
        inter = model.interspersed
        self.solvers = tuple(InterspersedSolver(inter, p, T, m_max) for p in pair)

    def probabilities(self, t0: float, t: float) -> tuple[tuple[float, float], tuple[float, float]]:
        return tuple(
            (s.after_t0(["0"], t0, t, False), s.after_t0(["1"], t0, t, False))
            for s in self.solvers
        )

    def mean_states(self, t0: float) -> tuple[NDArray, NDArray]:
        return tuple(s.mean_state(t0) for s in self.solvers)

    def distances(self, t0: float, t: float) -> Distances:
        (a0, a1), (b0, b1) = self.probabilities(t0, t)
        dk = 0.5 * abs(a0 - b0) + 0.5 * abs(a1 - b1)
        e0, e1 = self.mean_states(t0)
        return Distances(dk, trace_distance(e0, e1))


def distances(
    model: RevivalModel,
    t0: float,
    t: float,
    pair: tuple[ArrayLike, ArrayLike] = RHO_PAIR,
    m_max: int = 30,
) -> Distances:
    """Kolmogorov distance of first-jump-type laws and trace distance of mean states."""
    return RevivalAnalysis(model, t0, pair, m_max).distances(t0, t)
