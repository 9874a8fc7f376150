"""Renewal laws, survival functions, random streams and waiting-time samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import PchipInterpolator
from scipy.integrate import cumulative_trapezoid

from ._quad import ChebyshevGrid
from .config import DEFAULT, Tolerances
from .errors import ArgumentError, BoundViolationError, ModelError, NumericError

# --------------------------------------------------------------------------- #
# random streams

_U_SCALE = 2.0**-52


def _raw_to_uniform(raw: NDArray) -> NDArray:
    """Map raw 64-bit words to the open interval (0, 1)."""
    return ((raw >> np.uint64(12)).astype(np.float64) + 0.5) * _U_SCALE


def _bit_generator(master_seed: int, stream_index: int) -> np.random.Philox:
    key = ((int(master_seed) % 2**64) << 64) | (int(stream_index) % 2**64)
    return np.random.Philox(key=key)


@dataclass
class RngStream:
    """Counter-based uniform stream keyed by ``(master_seed, stream_index)``.

    Draws are independent of how many other streams exist or in what order
    they are consumed.
    """

    master_seed: int
    stream_index: int = 0
    _bitgen: np.random.Philox | None = field(default=None, init=False, repr=False)

    def _gen(self) -> np.random.Philox:
        if self._bitgen is None:
            self._bitgen = _bit_generator(self.master_seed, self.stream_index)
        return self._bitgen

    def uniform(self) -> float:
        return float(_raw_to_uniform(self._gen().random_raw(1))[0])

    def uniforms(self, n: int) -> NDArray:
        return _raw_to_uniform(self._gen().random_raw(n))


class UniformPool:
    """Per-stream uniform draws for a batch of streams.

    Stream ``i`` of the pool yields exactly the sequence of
    ``RngStream(master_seed, stream_indices[i])``.
    """

    def __init__(self, master_seed: int, stream_indices: ArrayLike, block: int = 16):
        self.indices = np.asarray(stream_indices, dtype=np.int64)
        self.block = block
        self._gens = [_bit_generator(master_seed, int(i)) for i in self.indices]
        self._buf = np.empty((len(self._gens), block))
        self._pos = np.full(len(self._gens), block, dtype=np.int64)

    def __len__(self) -> int:
        return len(self._gens)

    def draw(self, rows: NDArray) -> NDArray:
        """Next uniform for each pool row listed in ``rows``."""
        rows = np.asarray(rows, dtype=np.int64)
        stale = rows[self._pos[rows] >= self.block]
        for r in stale:
            self._buf[r] = _raw_to_uniform(self._gens[r].random_raw(self.block))
            self._pos[r] = 0
        out = self._buf[rows, self._pos[rows]]
        self._pos[rows] += 1
        return out


# --------------------------------------------------------------------------- #
# renewal laws


class HazardValue(NamedTuple):
    f: float
    F: float
    h: float
    defined: bool


@dataclass(frozen=True, eq=False)
class RenewalLaw:
    """Waiting-time law of a renewal process.

    Attributes:
        kind: ``"exponential"``, ``"erlang2"`` or ``"table"``.
        rate: Rate parameter (for the table kind, the inverse mean).
        table_t: Sample times for the table kind.
        table_f: Density samples for the table kind.
    """

    kind: str
    rate: float = 1.0
    table_t: NDArray | None = None
    table_f: NDArray | None = None
    _cdf: PchipInterpolator | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("exponential", "erlang2", "table"):
            raise ModelError(f"unknown renewal law kind {self.kind!r}")
        if self.kind != "table":
            if not (np.isfinite(self.rate) and self.rate > 0):
                raise ModelError("renewal rate must be positive")
            return
        t = np.asarray(self.table_t, dtype=float)
        f = np.asarray(self.table_f, dtype=float)
        if t.ndim != 1 or t.shape != f.shape or t.size < 3:
            raise ModelError("table law needs matching 1-d arrays of at least 3 samples")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ModelError("table times must start at 0 and increase strictly")
        if np.any(f < 0):
            raise ModelError("table density must be non-negative")
        cdf = cumulative_trapezoid(f, t, initial=0.0)
        total = cdf[-1]
        if not total > 0:
            raise ModelError("table density integrates to zero")
        cdf = cdf / total
        interp = PchipInterpolator(t, cdf, extrapolate=False)
        mean = float(np.trapezoid(1.0 - cdf, t))
        object.__setattr__(self, "table_t", t)
        object.__setattr__(self, "table_f", f / total)
        object.__setattr__(self, "_cdf", interp)
        object.__setattr__(self, "rate", 1.0 / mean)

    @classmethod
    def exponential(cls, rate: float) -> RenewalLaw:
        return cls("exponential", rate)

    @classmethod
    def erlang2(cls, rate: float) -> RenewalLaw:
        return cls("erlang2", rate)

    @classmethod
    def table(cls, t: ArrayLike, f: ArrayLike) -> RenewalLaw:
        return cls("table", 1.0, np.asarray(t, float), np.asarray(f, float))

    def pdf(self, t: ArrayLike) -> NDArray:
        t = np.asarray(t, dtype=float)
        lam = self.rate
        if self.kind == "exponential":
            out = lam * np.exp(-lam * t)
        elif self.kind == "erlang2":
            out = lam * lam * t * np.exp(-lam * t)
        else:
            tt = np.clip(t, 0.0, self.table_t[-1])
            out = np.where(t <= self.table_t[-1], self._cdf(tt, 1), 0.0)
            out = np.maximum(out, 0.0)
        return np.where(t < 0, 0.0, out)

    def cdf(self, t: ArrayLike) -> NDArray:
        return 1.0 - self.sf(t)

    def sf(self, t: ArrayLike) -> NDArray:
        """Survival ``1 - F(t)``, computed without cancellation."""
        t = np.asarray(t, dtype=float)
        lam = self.rate
        tp = np.maximum(t, 0.0)
        if self.kind == "exponential":
            out = np.exp(-lam * tp)
        elif self.kind == "erlang2":
            out = (1.0 + lam * tp) * np.exp(-lam * tp)
        else:
            tt = np.clip(tp, 0.0, self.table_t[-1])
            out = np.where(tp <= self.table_t[-1], 1.0 - self._cdf(tt), 0.0)
            out = np.clip(out, 0.0, 1.0)
        return out

    def survival(self) -> SurvivalFunction:
        return SurvivalFunction(self.sf, tail=0.0, scale=self.rate)

    def sample(self, u: ArrayLike) -> NDArray:
        """Inverse-survival transform: the ``t`` with ``1 - F(t) = u``."""
        u = np.asarray(u, dtype=float)
        if self.kind == "exponential":
            return -np.log(u) / self.rate
        return _bisect_batch(self.sf, u, 1.0 / self.rate, DEFAULT.time_abs / self.rate)


def hazard(law: RenewalLaw, t: float) -> HazardValue:
    """Density, CDF and hazard rate ``h = f / (1 - F)`` at ``t``.

    The hazard is flagged undefined (and returned as NaN) when ``F(t) = 1``.
    """
    if not t >= 0:
        raise ArgumentError(f"time must be non-negative, got {t!r}")
    f = float(law.pdf(t))
    s = float(law.sf(t))
    if law.kind == "exponential":
        return HazardValue(f, 1.0 - s, law.rate, True)
    if s <= 0.0:
        return HazardValue(f, 1.0, math.nan, False)
    if law.kind == "erlang2":
        lt = law.rate * t
        return HazardValue(f, 1.0 - s, law.rate * lt / (1.0 + lt), True)
    return HazardValue(f, 1.0 - s, f / s, True)


# --------------------------------------------------------------------------- #
# survival functions and samplers


def _bisect_batch(
    sf: Callable[[NDArray], NDArray], u: NDArray, t0: float, atol: float
) -> NDArray:
    """Vectorized bracketing plus bisection for ``sf(t) = u``."""
    u = np.asarray(u, dtype=float)
    lo = np.zeros_like(u)
    hi = np.full_like(u, t0)
    for _ in range(200):
        open_ = sf(hi) > u
        if not open_.any():
            break
        lo = np.where(open_, hi, lo)
        hi = np.where(open_, 2.0 * hi, hi)
    else:
        raise NumericError("failed to bracket survival inversion")
    while np.max(hi - lo, initial=0.0) > atol:
        mid = 0.5 * (lo + hi)
        above = sf(mid) > u
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)


class SurvivalFunction:
    """Survival function ``S(t) = P[T > t]`` with a possibly positive tail.

    Args:
        evaluator: Vectorized map ``t -> S(t)``.
        tail: ``S(inf)`` if known; otherwise estimated on a geometric grid.
        scale: Characteristic rate, used for time resolution.
    """

    def __init__(
        self,
        evaluator: Callable[[NDArray], NDArray],
        tail: float | None = None,
        scale: float = 1.0,
        tol: Tolerances = DEFAULT,
    ):
        self._eval = evaluator
        self._tail = tail
        self.scale = float(scale) if scale > 0 else 1.0
        self.tol = tol

    def __call__(self, t: ArrayLike) -> NDArray:
        return self._eval(np.asarray(t, dtype=float))

    @property
    def tail(self) -> float:
        if self._tail is None:
            self._tail = self._estimate_tail()
        return self._tail

    def _estimate_tail(self) -> float:
        t = 1.0 / self.scale
        prev = float(self(t))
        calm = 0
        for _ in range(80):
            t *= 2.0
            cur = float(self(t))
            calm = calm + 1 if abs(cur - prev) < self.tol.tail_change else 0
            prev = cur
            if calm >= 3:
                break
        return max(prev, 0.0)

    def invert(self, u: float, horizon: float = math.inf) -> float:
        """Smallest ``t`` with ``S(t) <= u``, or ``inf`` past the horizon or tail."""
        if math.isfinite(horizon):
            if float(self(horizon)) > u:
                return math.inf
        elif u <= self.tail:
            return math.inf
        atol = self.tol.time_abs / self.scale
        lo, hi = 0.0, 1.0 / self.scale
        s_lo = 1.0
        while True:
            s_hi = float(self(hi))
            if s_hi > s_lo + 1e-12:
                raise ModelError("survival function is not monotone")
            if s_hi <= u:
                break
            lo, s_lo = hi, s_hi
            hi *= 2.0
            if hi > 1e15 / self.scale:
                raise NumericError("failed to bracket survival inversion")
        while hi - lo > atol:
            mid = 0.5 * (lo + hi)
            s_mid = float(self(mid))
            if s_mid > s_lo + 1e-12:
                raise ModelError("survival function is not monotone")
            if s_mid > u:
                lo, s_lo = mid, s_mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def sample_waiting(
    surv: SurvivalFunction, rng: RngStream, horizon: float = math.inf
) -> float:
    """Draw a waiting time with survival ``surv``; ``inf`` means no jump.

    Args:
        surv: Survival function.
        rng: Stream supplying one uniform.
        horizon: Draws beyond this time are reported as ``inf``.
    """
    return surv.invert(rng.uniform(), horizon)


def thinning_sample(
    intensity_bound: float,
    intensity_at: Callable[[float], float],
    rng: RngStream,
    horizon: float,
    tol: Tolerances = DEFAULT,
) -> float:
    """First point of an inhomogeneous Poisson stream by accept/reject.

    Candidates come from a homogeneous stream at ``intensity_bound`` and are
    kept with probability ``intensity_at(t) / intensity_bound``.

    Raises:
        BoundViolationError: If the intensity exceeds the bound.
    """
    if intensity_bound <= 0:
        return math.inf
    t = 0.0
    while True:
        t += -math.log(rng.uniform()) / intensity_bound
        if t > horizon:
            return math.inf
        lam = float(intensity_at(t))
        if lam > intensity_bound * (1.0 + tol.bound_violation):
            raise BoundViolationError(
                f"intensity {lam!r} at t={t!r} exceeds bound {intensity_bound!r}"
            )
        if rng.uniform() * intensity_bound <= lam:
            return t


def thinning_sample_batch(
    intensity_bound: float,
    intensity_at: Callable[[NDArray], NDArray],
    pool: UniformPool,
    horizon: float,
    tol: Tolerances = DEFAULT,
) -> NDArray:
    """Vectorized ``thinning_sample``; row ``i`` uses stream ``i`` of ``pool``."""
    n = len(pool)
    out = np.full(n, np.inf)
    t = np.zeros(n)
    live = np.arange(n)
    while live.size:
        t[live] += -np.log(pool.draw(live)) / intensity_bound
        live = live[t[live] <= horizon]
        if not live.size:
            break
        lam = np.asarray(intensity_at(t[live]), dtype=float)
        if np.any(lam > intensity_bound * (1.0 + tol.bound_violation)):
            raise BoundViolationError("intensity exceeds the thinning bound")
        acc = pool.draw(live) * intensity_bound <= lam
        out[live[acc]] = t[live[acc]]
        live = live[~acc]
    return out


# --------------------------------------------------------------------------- #
# truncation remainder


def _law_at(laws: Sequence[RenewalLaw], i: int) -> RenewalLaw:
    return laws[min(i, len(laws) - 1)]


def _renewal_cdf(laws: Sequence[RenewalLaw], k: int, t: float, n: int, q: int) -> float:
    """``P[S_1 + ... + S_k <= t]`` by layered convolution on a Chebyshev grid."""
    grid = ChebyshevGrid(t, n)
    lag, weight, b = grid.convolution_points(q)
    g = _law_at(laws, 0).cdf(grid.nodes)
    for i in range(1, k):
        kern = _law_at(laws, i).pdf(lag) * weight
        g = np.einsum("iq,iq->i", kern, (b @ g).reshape(lag.shape))
    return float(g[-1])


def tail_remainder(
    laws: Sequence[RenewalLaw], m: int, t: float, rtol: float = 1e-6, atol: float = 1e-16
) -> float:
    """Probability ``r_m(t)`` of at least ``m + 2`` renewals in ``[0, t]``.

    Args:
        laws: Waiting-time laws ``f_1, f_2, ...``; the last one repeats.
        m: Truncation order.
        t: Time.
        rtol: Relative tolerance of the adaptive refinement.
        atol: Absolute tolerance, relevant for negligible remainders.

    Raises:
        NumericError: If refinement does not converge.
    """
    if m < 0 or t < 0:
        raise ArgumentError("m and t must be non-negative")
    if not laws:
        raise ArgumentError("at least one renewal law is required")
    if t == 0:
        return 0.0
    k = m + 2
    prev = None
    for n in (32, 64, 128, 256):
        cur = _renewal_cdf(laws, k, t, n, n)
        if prev is not None and abs(cur - prev) <= rtol * abs(cur) + atol:
            return max(cur, 0.0)
        prev = cur
    raise NumericError(f"tail remainder did not converge (m={m}, t={t})")
