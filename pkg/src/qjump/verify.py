"""Built-in oracle checks run by ``qjump verify``.

Every check compares a production computation with an independent closed
form and reports the worst absolute deviation.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy.stats import poisson

from . import closed_forms as cf
from . import engine
from . import nonhermitian as nh
from .errors import QJumpError
from .pointproc import RenewalLaw
from .qops import IDENTITY2, P1, JumpChannel, JumpModel, QuantumChannel, pure_state
from .renewal import RevivalAnalysis, RevivalModel, mean_state_interspersed, revival_probabilities
from .walk import HybridState, lindblad_rate_evolve, two_level_example, vertex_waiting
from .walk import RateVector, case_b_survival, case_b_zeros


@dataclass(frozen=True)
class CheckResult:
    check_id: str
    anchor: str
    expected: float
    actual: float
    tolerance: float
    status: str


def _result(cid: str, anchor: str, expected: float, actual: float, tol: float) -> CheckResult:
    ok = math.isfinite(actual) and abs(actual - expected) <= tol
    return CheckResult(cid, anchor, expected, actual, tol, "pass" if ok else "fail")


def _ep_moments() -> list[CheckResult]:
    # alpha = 0, beta = 1, delta = 0 sits at the EP with lambda0 = 1; c = lambda0
    p = nh.C2Params(0j, 0j, 1.0 + 0j, 0j, 1.0)
    phi0, phi1 = nh.ep_basis(p)
    s = 1 / math.sqrt(2)
    states = {
        "phi0": (phi0, (1, 1)),
        "minus_i": (s * (phi0 - 1j * phi1), (1, 3)),
        "plus_i": (s * (phi0 + 1j * phi1), (3, 3)),
        "phi1": (phi1, (3, 5)),
    }
    lam = p.lambda0
    out = []
    for name, (psi, (em, ev)) in states.items():
        mom = nh.waiting_moments(p, pure_state(psi))
        out.append(_result(f"ep_mean_{name}", "EP waiting-time moments", em, mom.mean * lam, 1e-6))
        out.append(_result(f"ep_var_{name}", "EP waiting-time moments", ev, mom.variance * lam**2, 1e-6))
    return out


def oscillating_example() -> tuple[nh.C2Params, NDArray]:
    """Real-eigenvalue example ``K = [[i sin phi, 1], [1, -i sin phi]]`` with ``phi = pi/4``.

    Returns the parameters with ``c_tilde = k`` and the initial vector
    ``x+ u+ + x- u-``.
    """
    a = 1j * math.sin(math.pi / 4)
    p = nh.C2Params(a, -a, 1.0 + 0j, 1.0 + 0j, 0.0)
    p = nh.C2Params(a, -a, 1.0 + 0j, 1.0 + 0j, p.k)
    r2 = math.sqrt(2.0)
    u_plus = 0.5 * np.array([1j + 1, r2])
    u_minus = 0.5 * np.array([1j - 1, r2])
    return p, 0.5 * (1 + 1j) * u_plus + 1j / r2 * u_minus


def _oscillating() -> list[CheckResult]:
    p, psi = oscillating_example()
    t = np.linspace(0.0, 10.0, 1001)
    f = nh.waiting_density_nh(p, pure_state(psi), t)
    dev = float(np.max(np.abs(f - cf.oscillating_density(t))))
    zeros = (2 * np.pi * np.arange(4) + 0.75 * np.pi) / math.sqrt(2.0)
    fz = float(np.max(np.abs(nh.waiting_density_nh(p, pure_state(psi), zeros))))
    return [
        _result("oscillating_density", "oscillating waiting density", 0.0, dev, 1e-9),
        _result("oscillating_zeros", "zeros of the oscillating waiting density", 0.0, fz, 1e-8),
    ]


def _propagator() -> list[CheckResult]:
    rng = np.random.default_rng(11)
    dev = 0.0
    t = np.linspace(0.0, 5.0, 11)
    for _ in range(20):
        a, b, c = 0.5 * (rng.normal(size=3) + 1j * rng.normal(size=3))
        p = nh.C2Params(a, -a, b, c, 0.0)
        ser = nh.propagator_K(p, t, "series")
        eig = nh.propagator_K(p, t, "eigen")
        scale = np.maximum(1.0, np.max(np.abs(eig), axis=(-2, -1)))
        dev = max(dev, float(np.max(np.max(np.abs(ser - eig), axis=(-2, -1)) / scale)))
    return [_result("propagator_series_vs_eigen", "propagator series and spectral forms", 0.0, dev, 1e-10)]


def _exp_revival() -> list[CheckResult]:
    lam = 1.0
    rho = np.array([[0.35, 0.2 - 0.1j], [0.2 + 0.1j, 0.65]])
    law = RenewalLaw.exponential(lam)
    m = RevivalModel(law)
    dev_eta = dev_p = dev_dk = 0.0
    an = RevivalAnalysis(m, 2.0)
    for t0 in (0.5, 1.0, 2.0):
        eta = mean_state_interspersed(m.interspersed, rho, t0)
        dev_eta = max(dev_eta, float(np.max(np.abs(eta - cf.exp_mean_state(lam, t0, rho)))))
        pr = revival_probabilities(m, rho, t0, t0 + 1.0)
        dev_p = max(dev_p, float(np.max(np.abs(np.array(pr) - cf.exp_probabilities(lam, t0, t0 + 1.0, rho)))))
        d = an.distances(t0, t0 + 1.0)
        dev_dk = max(dev_dk, abs(d.kolmogorov - cf.exp_kolmogorov(lam, t0, t0 + 1.0)))
        dev_dk = max(dev_dk, abs(d.kolmogorov - cf.exp_at_least_one(lam, t0, t0 + 1.0) * d.trace))
    return [
        _result("exp_mean_state", "exponential reset model mean state", 0.0, dev_eta, 1e-8),
        _result("exp_first_jump_type", "exponential reset model jump-type probabilities", 0.0, dev_p, 1e-8),
        _result("exp_kolmogorov", "exponential Kolmogorov distance factorization", 0.0, dev_dk, 1e-8),
    ]


def _erlang_revival() -> list[CheckResult]:
    lam = 1.0
    rho = np.array([[0.35, 0.2 - 0.1j], [0.2 + 0.1j, 0.65]])
    m = RevivalModel(RenewalLaw.erlang2(lam))
    dev_eta = dev_p = dev_d = 0.0
    an = RevivalAnalysis(m, 2.0)
    for t0, t in ((0.5, 1.5), (1.0, 2.0), (2.0, 4.0)):
        eta = mean_state_interspersed(m.interspersed, rho, t0)
        dev_eta = max(dev_eta, float(np.max(np.abs(eta - cf.erlang_mean_state(lam, t0, rho)))))
        pr = revival_probabilities(m, rho, t0, t)
        dev_p = max(dev_p, float(np.max(np.abs(np.array(pr) - cf.erlang_probabilities(lam, t0, t, rho)))))
        d = an.distances(t0, t)
        dev_d = max(dev_d, abs(d.kolmogorov - cf.erlang_kolmogorov(lam, t0, t)),
                    abs(d.trace - cf.erlang_trace_distance(lam, t0)))
    zero = RevivalAnalysis(m, 3 * math.pi / 4).distances(3 * math.pi / 4, math.inf)
    return [
        _result("erlang_mean_state", "Erlang reset model mean state", 0.0, dev_eta, 1e-8),
        _result("erlang_first_jump_type", "Erlang reset model jump-type probabilities", 0.0, dev_p, 1e-8),
        _result("erlang_distances", "Erlang Kolmogorov and trace distances", 0.0, dev_d, 1e-8),
        _result("erlang_trace_zero", "Erlang trace distance root", 0.0, zero.trace, 1e-8),
        _result("erlang_large_t_limit", "large-time Kolmogorov limit", zero.trace, zero.kolmogorov, 1e-6),
    ]


def _counts() -> list[CheckResult]:
    model = JumpModel(np.zeros((2, 2)), [], [JumpChannel("a", 1.0, QuantumChannel([IDENTITY2]))])
    cd = engine.count_distribution(model, P1, 1.0, 20)
    dev = float(np.max(np.abs(cd.probabilities - poisson.pmf(np.arange(21), 1.0))))
    return [
        _result("identity_channel_poisson", "Poisson counting under the reference law", 0.0, dev, 1e-6),
        _result("count_normalization", "count distribution normalization", 1.0,
                float(cd.probabilities.sum() + cd.remainder), 1e-6),
    ]


def _walk() -> list[CheckResult]:
    wa = two_level_example("sigma_z", 0.7, 1.1, 0.8, 1.3)
    init = HybridState(0, P1)
    eta = lindblad_rate_evolve(wa, init, 5.0)
    ref = RateVector.from_state(wa, init)
    stat = max(float(np.max(np.abs(a - b))) for a, b in zip(eta.etas, ref.etas))
    rho = np.array([[0.4, 0.1], [0.1, 0.6]])
    wait = abs(vertex_waiting(wa, HybridState(1, rho), 0.9) - (0.4 * math.exp(-1.3 * 0.9) + 0.6))
    wb = two_level_example("sigma_x", 1.0, 2.0, 0.8, 1.5)
    s = np.linspace(0.0, 4.0, 9)
    dev = max(abs(vertex_waiting(wb, HybridState(1, P1), x) - case_b_survival(2.0, 1.5, x)) for x in s)
    zeros = case_b_zeros(2.0, 1.5, 4)
    amp = float(np.max(np.abs(wb.psi(zeros)[:, 0])))
    return [
        _result("walk_stationary", "stationary hybrid state without jumps", 0.0, stat, 1e-10),
        _result("walk_sigma_z_survival", "sigma_z vertex survival", 0.0, wait, 1e-12),
        _result("walk_sigma_x_survival", "sigma_x vertex survival", 0.0, float(dev), 1e-10),
        _result("walk_sigma_x_zeros", "zeros of the sigma_x vertex intensity", 0.0, amp, 1e-10),
    ]


def _scenario_pack() -> list[CheckResult]:
    from .scenario import parse_scenario, serialize_scenario

    out = []
    for path in sorted((resources.files("qjump") / "scenarios").iterdir(), key=lambda p: p.name):
        if not path.name.endswith(".json"):
            continue
        try:
            once = serialize_scenario(parse_scenario(json.loads(path.read_text())))
            twice = serialize_scenario(parse_scenario(json.loads(json.dumps(once))))
            ok = float(once == twice)
        except QJumpError:
            ok = 0.0
        out.append(_result(f"scenario_{path.name[:-5]}", "shipped scenario round trip", 1.0, ok, 0.0))
    return out


CHECKS: tuple[Callable[[], list[CheckResult]], ...] = (
    _ep_moments, _oscillating, _propagator, _exp_revival, _erlang_revival, _counts, _walk,
    _scenario_pack,
)


def run_checks() -> list[CheckResult]:
    out: list[CheckResult] = []
    for chk in CHECKS:
        out.extend(chk())
    return out

