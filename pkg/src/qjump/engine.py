"""Jump trajectories: sampling, conditional and mean states, exclusive densities, counts.

Sampling uses exact survival inversion. For each no-jump generator ``A`` a
table of ``exp(2^k h A)`` is precomputed; the crossing ``S(t) = U`` is then
located by a binary descent over the table (one matrix-vector product per
bisection step), vectorized across trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply
from scipy.stats import poisson

from .config import DEFAULT, Tolerances
from .errors import ArgumentError, InfeasibleTrajectoryError, NumericError
from .pointproc import RngStream, SurvivalFunction, UniformPool
from .qops import (
    JumpModel,
    as_density,
    as_matrix,
    full_generator,
    gain_superoperator,
    hermitian_part,
    no_jump_generator,
    propagate,
    trace_vec,
    unvec,
    vec,
)

# --------------------------------------------------------------------------- #
# trajectories


@dataclass(frozen=True)
class Trajectory:
    """Finite jump record ``(u_1, t_1), ..., (u_m, t_m)`` on ``[0, horizon)``."""

    events: tuple[tuple[str, float], ...]
    horizon: float

    def __post_init__(self):
        ev = tuple((str(u), float(t)) for u, t in self.events)
        times = [t for _, t in ev]
        if any(not t > 0 for t in times[:1]):
            raise ArgumentError("jump times must be positive")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ArgumentError("jump times must increase strictly")
        if times and not self.horizon > times[-1]:
            raise ArgumentError("horizon must exceed the last jump time")
        if not self.horizon >= 0:
            raise ArgumentError("horizon must be non-negative")
        object.__setattr__(self, "events", ev)

    @property
    def labels(self) -> list[str]:
        return [u for u, _ in self.events]

    @property
    def times(self) -> list[float]:
        return [t for _, t in self.events]

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Sampled trajectory with conditional states.

    Attributes:
        trajectory: Jump record.
        states: State after each jump followed by the state at the horizon.
        weights: ``I(u_j, t_j)`` for each jump.
        survival_log: Accumulated integrated intensity.
        modes: Mode (vertex index) after each jump, for hybrid models.
        truncated: True if sampling stopped at ``max_jumps`` before the horizon.
    """

    trajectory: Trajectory
    states: tuple[NDArray, ...]
    weights: tuple[float, ...]
    survival_log: float
    modes: tuple[int, ...] = ()
    truncated: bool = False


# --------------------------------------------------------------------------- #
# dyadic exponential tables

_KMIN = -44
_KMAX = 44
_TABLE_MAX_D2 = 64


class ExpTable:
    """Exponentials ``exp(2^k h M)`` for fast evaluation and survival inversion.

    Args:
        m: Generator matrix acting on vectorized ``dim x dim`` matrices.
        scale: Characteristic rate; ``h = 1 / scale``.
    """

    def __init__(self, m: NDArray, scale: float):
        self.m = np.asarray(m, dtype=np.complex128)
        self.d2 = self.m.shape[0]
        self.dim = int(round(math.sqrt(self.d2)))
        self.h = 1.0 / scale if scale > 0 else 1.0
        self.ks = np.arange(_KMIN, _KMAX + 1)
        self.steps = self.h * np.ldexp(1.0, self.ks)
        self.tabled = self.d2 <= _TABLE_MAX_D2
        if self.tabled:
            self.mats = np.stack([expm(s * self.m).T for s in self.steps])
            if not np.all(np.isfinite(self.mats)):
                raise NumericError("matrix exponential overflow in sampler table")
        self.t_max = 2.0 * self.steps[-1]

    def trace(self, v: NDArray) -> NDArray:
        return trace_vec(v, self.dim)

    def apply(self, t: ArrayLike, v: NDArray) -> NDArray:
        """Rows ``exp(t_i M) v_i`` for row-stacked ``v``."""
        t = np.broadcast_to(np.asarray(t, dtype=float), (v.shape[0],))
        t = np.minimum(t, self.t_max * (1 - 1e-15))
        if not self.tabled:
            return np.stack([expm(ti * self.m) @ vi for ti, vi in zip(t, v)]) if len(v) else v.copy()
        out = np.array(v, dtype=np.complex128, copy=True)
        rem = t.copy()
        for i in range(len(self.steps) - 1, -1, -1):
            sel = np.nonzero(rem >= self.steps[i])[0]
            if sel.size:
                out[sel] = out[sel] @ self.mats[i]
                rem[sel] -= self.steps[i]
        return out

    def search(
        self, v: NDArray, u: NDArray, remaining: NDArray
    ) -> tuple[NDArray, NDArray, NDArray]:
        """Locate ``S(t) = u`` for each row.

        Returns:
            ``jumped`` mask, crossing times and the unnormalized states at the
            crossing (for rows without a jump: the state at ``remaining``).
        """
        end = self.apply(remaining, v)
        jumped = self.trace(end) <= u
        times = np.array(remaining, dtype=float, copy=True)
        rows = np.nonzero(jumped)[0]
        if rows.size:
            if self.tabled:
                w, tj = self._descend(v[rows], u[rows], remaining[rows])
            else:
                w, tj = self._bisect(v[rows], u[rows], remaining[rows])
            end[rows] = w
            times[rows] = tj
        return jumped, times, end

    def _descend(self, w: NDArray, u: NDArray, remaining: NDArray):
        w = w.copy()
        t = np.zeros(len(w))
        top = float(np.max(remaining))
        ktop = int(np.searchsorted(self.steps, min(top, self.steps[-1])))
        for i in range(min(ktop, len(self.steps) - 1), -1, -1):
            cand = w @ self.mats[i]
            ok = self.trace(cand) > u
            w[ok] = cand[ok]
            t[ok] += self.steps[i]
        # state just past the crossing
        w = w @ self.mats[0]
        return w, t + self.steps[0]

    def _bisect(self, w: NDArray, u: NDArray, remaining: NDArray):
        out_w = np.empty_like(w)
        out_t = np.empty(len(w))
        for i, (wi, ui, ri) in enumerate(zip(w, u, remaining)):
            lo, hi = 0.0, ri
            while hi - lo > self.steps[0]:
                mid = 0.5 * (lo + hi)
                if self.trace(expm(mid * self.m) @ wi) > ui:
                    lo = mid
                else:
                    hi = mid
            out_t[i] = hi
            out_w[i] = expm(hi * self.m) @ wi
        return out_w, out_t


def _rate_scale(model_like_norms: Sequence[float]) -> float:
    s = max([float(x) for x in model_like_norms] + [0.0])
    return s if s > 0 else 1.0


# --------------------------------------------------------------------------- #
# piecewise sampler shared by jump models and walks


@dataclass(eq=False)
class Mode:
    """Piecewise-constant dynamics between jumps.

    Attributes:
        table: Exponential table of the no-jump generator.
        labels: Jump labels active in this mode.
        rates: ``nu_u`` for each label.
        jumps: Vectorized superoperators ``J(u)`` (row-acting, transposed).
        targets: Mode entered after each label.
    """

    table: ExpTable
    labels: list[str]
    rates: NDArray
    jumps: list[NDArray]
    targets: list[int]


def _model_mode(model: JumpModel) -> Mode:
    a = no_jump_generator(model).matrix()
    scale = _rate_scale([np.linalg.norm(model.R, 2), np.linalg.norm(model.h_eff, 2)])
    return Mode(
        table=ExpTable(a, scale),
        labels=model.labels,
        rates=np.array([c.rate for c in model.channels]),
        jumps=[c.channel.superop().T for c in model.channels],
        targets=[0] * len(model.channels),
    )


@dataclass(eq=False)
class Ensemble:
    """Batch of sampled trajectories in flat array form.

    Event arrays are ordered by trajectory, then jump index.
    """

    n: int
    dim: int
    horizon: float
    event_traj: NDArray
    event_index: NDArray
    event_time: NDArray
    event_label: NDArray
    event_mode: NDArray
    event_weight: NDArray
    event_state: NDArray
    final_state: NDArray
    final_mode: NDArray
    n_jumps: NDArray
    survival_log: NDArray
    truncated: NDArray
    label_names: list[str] = field(default_factory=list)

    def jump_times(self, i: int) -> NDArray:
        return self.event_time[self.event_traj == i]

    def record(self, i: int) -> TrajectoryRecord:
        sel = self.event_traj == i
        labels = [self.label_names[k] for k in self.event_label[sel]]
        times = self.event_time[sel]
        traj = Trajectory(tuple(zip(labels, times.tolist())), self.horizon)
        states = [unvec(s, self.dim) for s in self.event_state[sel]]
        states.append(unvec(self.final_state[i], self.dim))
        return TrajectoryRecord(
            trajectory=traj,
            states=tuple(states),
            weights=tuple(self.event_weight[sel].tolist()),
            survival_log=float(self.survival_log[i]),
            modes=tuple(int(m) for m in self.event_mode[sel]),
            truncated=bool(self.truncated[i]),
        )


def sample_piecewise(
    modes: Sequence[Mode],
    init_mode: ArrayLike,
    rho0: NDArray,
    horizon: float,
    pool: UniformPool,
    max_jumps: int | None = None,
) -> Ensemble:
    """Sample one trajectory per row of ``pool``.

    Each trajectory consumes, per jump cycle, one uniform for the waiting time
    and, if a jump occurs, one uniform for the label.
    """
    n = len(pool)
    dim = modes[0].table.dim
    v = np.broadcast_to(vec(np.asarray(rho0, dtype=np.complex128)), (n, dim * dim)).copy()
    mode = np.broadcast_to(np.asarray(init_mode, dtype=np.int64), (n,)).copy()
    t_cur = np.zeros(n)
    n_jumps = np.zeros(n, dtype=np.int64)
    slog = np.zeros(n)
    active = np.ones(n, dtype=bool)
    truncated = np.zeros(n, dtype=bool)
    final = np.empty_like(v)
    names: list[str] = []
    name_idx: dict[str, int] = {}
    for md in modes:
        for lab in md.labels:
            if lab not in name_idx:
                name_idx[lab] = len(names)
                names.append(lab)
    ev: list[tuple] = []
    while active.any():
        for mi, md in enumerate(modes):
            rows = np.nonzero(active & (mode == mi))[0]
            if not rows.size:
                continue
            u = pool.draw(rows)
            rem = horizon - t_cur[rows]
            if not md.labels:
                jumped = np.zeros(rows.size, dtype=bool)
                times = rem
                w = md.table.apply(rem, v[rows])
            else:
                jumped, times, w = md.table.search(v[rows], u, rem)
            tr = md.table.trace(w)
            with np.errstate(divide="ignore"):
                slog[rows] += -np.log(np.maximum(tr, 1e-300))
            w = w / tr[:, None]
            stay = rows[~jumped]
            final[stay] = w[~jumped]
            active[stay] = False
            jr = rows[jumped]
            if not jr.size:
                continue
            wj = w[jumped]
            t_cur[jr] += times[jumped]
            images = np.stack([wj @ j for j in md.jumps], axis=1)  # (n, labels, d2)
            intens = md.table.trace(images)
            weights = np.maximum(intens, 0.0) * md.rates[None, :]
            lam = weights.sum(axis=1)
            u2 = pool.draw(jr)
            cum = np.cumsum(weights, axis=1)
            pick = (cum < (u2 * lam)[:, None]).sum(axis=1)
            pick = np.minimum(pick, len(md.labels) - 1)
            dead = lam <= 0
            if dead.any():
                raise NumericError("zero intensity at a sampled jump")
            idx = np.arange(jr.size)
            new = images[idx, pick] / intens[idx, pick][:, None]
            new = vec(hermitian_part(unvec(new, dim)))
            v[jr] = new
            mode[jr] = np.asarray(md.targets)[pick]
            lab_ids = np.array([name_idx[md.labels[p]] for p in pick])
            ev.append(
                (jr, n_jumps[jr].copy(), t_cur[jr].copy(), lab_ids, mode[jr].copy(),
                 intens[idx, pick], new.copy())
            )
            n_jumps[jr] += 1
            if max_jumps is not None:
                done = jr[n_jumps[jr] >= max_jumps]
                final[done] = v[done]
                truncated[done] = t_cur[done] < horizon
                active[done] = False
    if ev:
        cols = [np.concatenate([e[i] for e in ev]) for i in range(7)]
        order = np.lexsort((cols[1], cols[0]))
        cols = [c[order] for c in cols]
    else:
        cols = [np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.int64),
                np.zeros(0, np.int64), np.zeros(0), np.zeros((0, dim * dim), complex)]
    final = vec(hermitian_part(unvec(final, dim)))
    return Ensemble(
        n=n, dim=dim, horizon=float(horizon),
        event_traj=cols[0], event_index=cols[1], event_time=cols[2], event_label=cols[3],
        event_mode=cols[4], event_weight=cols[5], event_state=cols[6],
        final_state=final, final_mode=mode, n_jumps=n_jumps, survival_log=slog,
        truncated=truncated, label_names=names,
    )


_MODE_CACHE: dict[int, tuple[JumpModel, Mode]] = {}


def model_mode(model: JumpModel) -> Mode:
    """Cached sampler data for ``model``."""
    hit = _MODE_CACHE.get(id(model))
    if hit is not None and hit[0] is model:
        return hit[1]
    md = _model_mode(model)
    if len(_MODE_CACHE) > 64:
        _MODE_CACHE.clear()
    _MODE_CACHE[id(model)] = (model, md)
    return md


# --------------------------------------------------------------------------- #
# public operations


@dataclass(frozen=True, eq=False)
class JumpResult:
    """Outcome of a jump: post-jump state (None if forbidden) and ``I``."""

    rho_after: NDArray | None
    intensity: float

    @property
    def forbidden(self) -> bool:
        return self.rho_after is None


def jump_update(model: JumpModel, label: str, rho: ArrayLike) -> JumpResult:
    """Apply ``J(u)`` and renormalize; ``I = 0`` is returned as forbidden."""
    ch = model.channel(label).channel
    r = as_matrix(rho, model.dim)
    img = ch.apply(r)
    i = float(np.trace(img).real)
    if i <= 0.0:
        return JumpResult(None, max(i, 0.0))
    return JumpResult(hermitian_part(img / i), i)


def survival_probability(model: JumpModel, rho: ArrayLike, dt: float) -> float:
    """No-jump probability ``Tr{exp(dt A)[rho]}``."""
    out = propagate(no_jump_generator(model), rho, dt)
    return float(np.trace(out).real)


def waiting_density(model: JumpModel, rho: ArrayLike, dt: float) -> float:
    """Density ``lambda(dt) S(dt) = Tr{R exp(dt A)[rho]}`` of the next jump time."""
    out = propagate(no_jump_generator(model), rho, dt)
    return max(float(np.trace(model.R @ out).real), 0.0)


class GeneratorSurvival(SurvivalFunction):
    """Survival ``t -> Tr{exp(tA)[rho]}`` with table-based inversion."""

    def __init__(self, mode: Mode, rho: NDArray, tol: Tolerances = DEFAULT):
        self.mode = mode
        self.v0 = vec(np.asarray(rho, dtype=np.complex128))[None, :]
        super().__init__(self._evaluate, None, 1.0 / mode.table.h, tol)

    def _evaluate(self, t: NDArray) -> NDArray:
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).ravel()
        vs = np.broadcast_to(self.v0, (flat.size, self.v0.shape[1]))
        out = self.mode.table.trace(self.mode.table.apply(flat, vs))
        return out.reshape(t.shape)

    def state(self, t: ArrayLike) -> NDArray:
        """Unnormalized no-jump states at the times ``t`` (vectorized)."""
        flat = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
        vs = np.broadcast_to(self.v0, (flat.size, self.v0.shape[1]))
        return self.mode.table.apply(flat, vs)

    def intensity(self, t: ArrayLike, R: NDArray) -> NDArray:
        """``lambda(t) = Tr{R rho(t)}`` along the normalized no-jump flow."""
        st = self.state(t)
        d = self.mode.table.dim
        mats = unvec(st, d)
        num = np.einsum("ij,nji->n", R, mats).real
        return num / self.mode.table.trace(st)

    def invert(self, u: float, horizon: float = math.inf) -> float:
        table = self.mode.table
        rem = np.array([min(horizon, table.t_max * (1 - 1e-15))])
        jumped, t, _ = table.search(self.v0, np.array([u]), rem)
        return float(t[0]) if jumped[0] else math.inf


def survival_function(model: JumpModel, rho: ArrayLike) -> GeneratorSurvival:
    """Waiting-time survival function of ``model`` started in ``rho``."""
    r = as_density(rho, model.dim)
    return GeneratorSurvival(model_mode(model), r)


def sample_trajectory(
    model: JumpModel,
    rho0: ArrayLike,
    horizon: float,
    rng: RngStream,
    max_jumps: int | None = None,
) -> TrajectoryRecord:
    """Sample one physical-probability trajectory on ``[0, horizon)``."""
    ens = sample_ensemble(
        model, rho0, horizon, 1, rng.master_seed, rng.stream_index, max_jumps
    )
    return ens.record(0)


def sample_ensemble(
    model: JumpModel,
    rho0: ArrayLike,
    horizon: float,
    n: int,
    seed: int,
    first_stream: int = 0,
    max_jumps: int | None = None,
) -> Ensemble:
    """Sample ``n`` trajectories; trajectory ``i`` uses stream ``first_stream + i``."""
    r = as_density(rho0, model.dim)
    if not horizon >= 0:
        raise ArgumentError("horizon must be non-negative")
    pool = UniformPool(seed, np.arange(first_stream, first_stream + n))
    ens = sample_piecewise([model_mode(model)], 0, r, horizon, pool, max_jumps)
    return ens


def _replay(model: JumpModel, rho0: NDArray, traj: Trajectory, t: float, normalize: bool):
    a = no_jump_generator(model).matrix()
    cur = np.array(rho0, dtype=np.complex128)
    last = 0.0
    for label, tj in traj.events:
        if tj > t:
            break
        cur = propagate(a, cur, tj - last)
        img = model.channel(label).channel.apply(cur)
        norm = float(np.trace(img).real)
        if norm <= 0.0:
            raise InfeasibleTrajectoryError(f"jump {label!r} at t={tj!r} has zero probability")
        cur = hermitian_part(img / norm if normalize else img)
        last = tj
    cur = propagate(a, cur, t - last)
    return cur


def conditional_state(
    model: JumpModel, rho0: ArrayLike, traj: Trajectory, t: float
) -> NDArray:
    """Conditional state at ``t`` given the jump record (right-continuous at jumps)."""
    if t > traj.horizon:
        raise ArgumentError("t exceeds the trajectory horizon")
    r = as_density(rho0, model.dim)
    out = _replay(model, r, traj, t, normalize=True)
    tr = float(np.trace(out).real)
    if tr <= 0.0:
        raise InfeasibleTrajectoryError("no-jump evolution has zero probability")
    return hermitian_part(out / tr)


def unnormalized_state(
    model: JumpModel, rho0: ArrayLike, traj: Trajectory, t: float
) -> NDArray:
    """Linear chain ``S(t, t_m) J(u_m) ... S(t_1, 0)[rho0]``."""
    r = as_density(rho0, model.dim)
    return _replay(model, r, traj, t, normalize=False)


def exclusive_density(model: JumpModel, rho0: ArrayLike, traj: Trajectory) -> float:
    """Exclusive density of ``traj`` with respect to ``prod_j nu_{u_j} dt_j``."""
    r = as_density(rho0, model.dim)
    try:
        out = _replay(model, r, traj, traj.horizon, normalize=False)
    except InfeasibleTrajectoryError:
        return 0.0
    return max(float(np.trace(out).real), 0.0)


def mean_state(model: JumpModel, rho0: ArrayLike, t: float) -> NDArray:
    """Mean state ``exp(t L)[rho0]``."""
    r = as_density(rho0, model.dim)
    return propagate(full_generator(model), r, t)


@dataclass(frozen=True, eq=False)
class CountDecomposition:
    """Mean state split by jump count.

    Attributes:
        terms: ``D_m(t)[rho0]`` for ``m = 0..m_max``.
        overflow: Contribution of all counts above ``m_max``.
        bound: Poisson upper bound on ``P[N(t) > m_max]``.
    """

    terms: tuple[NDArray, ...]
    overflow: NDArray
    bound: float

    @property
    def probabilities(self) -> NDArray:
        return np.array([float(np.trace(d).real) for d in self.terms])

    @property
    def remainder(self) -> float:
        return float(np.trace(self.overflow).real)

    @property
    def deficit(self) -> float:
        return 1.0 - float(self.probabilities.sum())

    def total(self) -> NDArray:
        return sum(self.terms) + self.overflow


def count_decomposition(
    model: JumpModel, rho0: ArrayLike, t: float, m_max: int = 20
) -> CountDecomposition:
    """Split ``exp(tL)[rho0]`` into the Dyson terms ``D_m(t)[rho0]``.

    The layered integrals are evaluated exactly as one exponential of the
    block bidiagonal generator (``A`` on the diagonal, ``G`` feeding
    count ``m`` into ``m + 1``, plus an absorbing overflow layer evolving
    under ``L``).
    """
    if t < 0 or m_max < 0:
        raise ArgumentError("t and m_max must be non-negative")
    r = as_density(rho0, model.dim)
    d = model.dim
    d2 = d * d
    a = no_jump_generator(model).matrix()
    g = gain_superoperator(model).matrix()
    layers = m_max + 2
    big = np.zeros((layers * d2, layers * d2), dtype=np.complex128)
    for m in range(layers):
        blk = slice(m * d2, (m + 1) * d2)
        big[blk, blk] = a if m < layers - 1 else a + g
        if m > 0:
            big[blk, slice((m - 1) * d2, m * d2)] = g
    x0 = np.zeros(layers * d2, dtype=np.complex128)
    x0[:d2] = vec(r)
    if t == 0:
        x = x0
    elif big.shape[0] <= 1024:
        x = expm(t * big) @ x0
    else:
        x = expm_multiply(t * big, x0)
    if not np.all(np.isfinite(x)):
        raise NumericError("count decomposition overflow")
    mats = [hermitian_part(unvec(x[m * d2:(m + 1) * d2], d)) for m in range(layers)]
    lam_max = float(np.linalg.eigvalsh(model.R)[-1])
    bound = float(poisson.sf(m_max, lam_max * t))
    return CountDecomposition(tuple(mats[:-1]), mats[-1], bound)


@dataclass(frozen=True)
class CountDistribution:
    """``P[N(t) = m]`` for ``m = 0..m_max`` with the mass above ``m_max``."""

    probabilities: NDArray
    remainder: float
    bound: float

    @property
    def deficit(self) -> float:
        return 1.0 - float(np.sum(self.probabilities))


def count_distribution(
    model: JumpModel, rho0: ArrayLike, t: float, m_max: int = 20
) -> CountDistribution:
    """Distribution of the number of jumps in ``[0, t]``."""
    dec = count_decomposition(model, rho0, t, m_max)
    return CountDistribution(dec.probabilities, dec.remainder, dec.bound)
