from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from scipy.stats import poisson

from qjump import closed_forms as cf
from qjump import engine
from qjump.engine import Trajectory
from qjump.errors import ArgumentError, ModelError
from qjump.pointproc import RenewalLaw, RngStream
from qjump.qops import IDENTITY2, P0, P1, SIGMA_X, SIGMA_Z, pure_state
from qjump.renewal import (
    RevivalAnalysis,
    RevivalModel,
    adapter,
    build_interspersed,
    distances,
    event_probability,
    exclusive_density_interspersed,
    factorized_event_probability,
    mean_state_interspersed,
    revival_probabilities,
    simulate_interspersed,
    simulate_interspersed_ensemble,
)

from conftest import ks_two_sample, random_density

LAM = 1.0
EXP = RevivalModel(RenewalLaw.exponential(LAM))
ERL = RevivalModel(RenewalLaw.erlang2(LAM))
RHO = np.array([[0.3, 0.1 - 0.2j], [0.1 + 0.2j, 0.7]])


def dephasing_model(law: RenewalLaw):
    """Two-label instrument with a smooth precession between jumps."""
    return build_interspersed(
        2, law,
        [[("up", 1.0, [P1]), ("down", 1.0, [P0])]],
        [(0.5 * SIGMA_X + 0.2 * SIGMA_Z, [0.3 * SIGMA_Z])],
    )


class TestBuild:
    def test_revival_normalization(self):
        ins = ERL.interspersed.instruments[0]
        total = sum(o.weight * o.effect() for o in ins)
        np.testing.assert_allclose(total, IDENTITY2, atol=1e-12)

    def test_single_label(self):
        nu = 2.5
        m = build_interspersed(2, RenewalLaw.exponential(1.0), [[("a", nu, [IDENTITY2 / math.sqrt(nu)])]])
        assert m.labels == ["a"]

    def test_defect_rejected(self):
        with pytest.raises(ModelError, match="defect 1.000e-01"):
            build_interspersed(2, RenewalLaw.exponential(1.0), [[("a", 1.0, [math.sqrt(0.9) * IDENTITY2])]])

    def test_non_hermitian_smooth_rejected(self):
        with pytest.raises(ModelError):
            build_interspersed(2, RenewalLaw.exponential(1.0), [[("a", 1.0, [IDENTITY2])]],
                               [(np.array([[0, 1], [0, 0]]), [])])

    def test_adapter_rate_is_scalar(self):
        lam = 1.7
        m = adapter(dephasing_model(RenewalLaw.exponential(lam)))
        np.testing.assert_allclose(m.R, lam * IDENTITY2, atol=1e-12)

    def test_adapter_requires_exponential(self):
        with pytest.raises(ModelError):
            adapter(ERL.interspersed)


class TestSimulate:
    def test_poisson_counts(self):
        t = 2.0
        ens = simulate_interspersed_ensemble(dephasing_model(RenewalLaw.exponential(LAM)), RHO, t, 20000, 3)
        freq = np.bincount(ens.n_jumps, minlength=12)[:12] / ens.n
        ref = poisson.pmf(np.arange(12), LAM * t)
        assert np.all(np.abs(freq - ref) <= 4 * np.sqrt(ref * (1 - ref) / ens.n) + 1e-4)

    def test_jump_times_state_independent(self):
        model = ERL.interspersed
        a = simulate_interspersed_ensemble(model, P0, 50.0, 100_000, 11)
        b = simulate_interspersed_ensemble(model, pure_state([1, 1j]), 50.0, 100_000, 12)
        first = lambda e: e.event_time[e.event_index == 0]  # noqa: E731
        assert ks_two_sample(first(a), first(b)) < 0.015

    def test_first_label_from_ground(self):
        ens = simulate_interspersed_ensemble(EXP.interspersed, P0, 5.0, 2000, 4)
        first = ens.event_label[ens.event_index == 0]
        assert set(ens.label_names[k] for k in first) == {"0"}

    def test_post_jump_states(self):
        ens = simulate_interspersed_ensemble(ERL.interspersed, RHO, 6.0, 500, 5)
        target = {"0": P1, "1": P0}
        for lab, v in zip(ens.event_label, ens.event_state):
            np.testing.assert_allclose(v.reshape(2, 2), target[ens.label_names[lab]], atol=1e-14)

    def test_single_matches_ensemble_row(self):
        model = dephasing_model(RenewalLaw.erlang2(1.3))
        rec = simulate_interspersed(model, RHO, 4.0, RngStream(8, 2))
        ens = simulate_interspersed_ensemble(model, RHO, 4.0, 3, 8)
        assert rec.trajectory == ens.record(2).trajectory


class TestMeanState:
    @pytest.mark.parametrize("t0", [0.3, 1.0, 2.5])
    def test_exponential_closed_form(self, t0):
        np.testing.assert_allclose(mean_state_interspersed(EXP.interspersed, RHO, t0),
                                   cf.exp_mean_state(LAM, t0, RHO), atol=1e-8)

    @pytest.mark.parametrize("t0", [0.3, 1.0, 2.5, 6.0])
    def test_erlang_closed_form(self, t0):
        np.testing.assert_allclose(mean_state_interspersed(ERL.interspersed, RHO, t0),
                                   cf.erlang_mean_state(LAM, t0, RHO), atol=1e-8)

    @pytest.mark.parametrize("x", [0.0, 0.7, 4.0, 20.0])
    def test_erlang_oracles_agree(self, x):
        np.testing.assert_allclose(cf.erlang_mean_state_series(1.0, x, RHO), cf.erlang_mean_state(1.0, x, RHO),
                                   atol=1e-13)

    def test_zero_time(self):
        np.testing.assert_array_equal(mean_state_interspersed(ERL.interspersed, RHO, 0.0), RHO)

    def test_matches_adapter_mean_state(self, rng):
        model = dephasing_model(RenewalLaw.exponential(1.2))
        rho = random_density(rng, 2)
        np.testing.assert_allclose(mean_state_interspersed(model, rho, 1.5),
                                   engine.mean_state(adapter(model), rho, 1.5), atol=1e-9)

    def test_negative_time(self):
        with pytest.raises(ArgumentError):
            mean_state_interspersed(EXP.interspersed, RHO, -1.0)


class TestEventProbability:
    def test_any_label_exponential(self):
        p = event_probability(dephasing_model(RenewalLaw.exponential(LAM)), RHO, None, 0.8, 2.1)
        assert p == pytest.approx(cf.exp_exactly_one(LAM, 0.8, 2.1), abs=1e-8)

    def test_any_label_state_independent(self, rng):
        model = dephasing_model(RenewalLaw.erlang2(1.1))
        a = event_probability(model, random_density(rng, 2), None, 1.0, 2.0)
        b = event_probability(model, random_density(rng, 2), None, 1.0, 2.0)
        assert a == pytest.approx(b, abs=1e-10)

    def test_exponential_factorization(self):
        model = dephasing_model(RenewalLaw.exponential(LAM))
        for lab in (["up"], ["down"]):
            a = event_probability(model, RHO, lab, 1.0, 2.0)
            b = factorized_event_probability(model, RHO, lab, 1.0, 2.0)
            assert a == pytest.approx(b, abs=1e-8)

    def test_erlang_factorization_fails(self):
        model = ERL.interspersed
        a = event_probability(model, P0, ["1"], 1.0, 2.0)
        b = factorized_event_probability(model, P0, ["1"], 1.0, 2.0)
        assert abs(a - b) > 1e-3

    def test_invalid_interval(self):
        with pytest.raises(ArgumentError):
            event_probability(EXP.interspersed, RHO, None, 2.0, 1.0)


class TestRevivalProbabilities:
    @pytest.mark.parametrize("t0,t", [(0.5, 1.5), (1.0, 2.0), (2.0, 4.0)])
    @pytest.mark.parametrize("which", ["exp", "erlang"])
    def test_closed_forms(self, which, t0, t):
        model, ref = (EXP, cf.exp_probabilities) if which == "exp" else (ERL, cf.erlang_probabilities)
        got = revival_probabilities(model, RHO, t0, t)
        np.testing.assert_allclose(got, ref(LAM, t0, t, RHO), atol=1e-8)
        total = cf.exp_at_least_one(LAM, t0, t) if which == "exp" else cf.erlang_at_least_one(LAM, t0, t)
        assert sum(got) == pytest.approx(total, abs=1e-8)

    def test_exponential_from_excited(self):
        p0, p1 = revival_probabilities(EXP, P1, 0.0, 1.3)
        assert p0 == pytest.approx(0.0, abs=1e-12)
        assert p1 == pytest.approx(-math.expm1(-LAM * 1.3), abs=1e-10)

    @pytest.mark.parametrize("x0", [0.0, 0.9, 5.0])
    def test_erlang_oracles_agree(self, x0):
        np.testing.assert_allclose(cf.erlang_probabilities_series(1.0, x0, x0 + 1.2, RHO),
                                   cf.erlang_probabilities(1.0, x0, x0 + 1.2, RHO), atol=1e-13)


class TestDistances:
    @pytest.mark.parametrize("t0,t", [(0.2, 0.9), (1.0, 2.5)])
    def test_exponential(self, t0, t):
        d = distances(EXP, t0, t)
        assert d.kolmogorov == pytest.approx(cf.exp_kolmogorov(LAM, t0, t), abs=1e-8)
        assert d.kolmogorov == pytest.approx(cf.exp_at_least_one(LAM, t0, t) * d.trace, abs=1e-8)

    @pytest.mark.parametrize("t0,t", [(0.5, 1.5), (1.0, 2.0), (2.0, 4.0), (3.0, 3.5)])
    def test_erlang(self, t0, t):
        d = distances(ERL, t0, t)
        assert d.kolmogorov == pytest.approx(cf.erlang_kolmogorov(LAM, t0, t), abs=1e-8)
        assert d.trace == pytest.approx(cf.erlang_trace_distance(LAM, t0), abs=1e-8)

    def test_erlang_trace_zero(self):
        assert distances(ERL, 0.75 * math.pi / LAM, 4.0).trace == pytest.approx(0.0, abs=1e-8)

    @pytest.mark.parametrize("model", [EXP, ERL], ids=["exp", "erlang"])
    @pytest.mark.parametrize("t0", [0.4, 1.5, 3.0])
    def test_large_t_limit(self, model, t0):
        d = distances(model, t0, math.inf)
        assert d.kolmogorov == pytest.approx(d.trace, abs=1e-6)

    def test_bounded(self):
        for model in (EXP, ERL):
            d = distances(model, 0.7, 1.9)
            assert 0 <= d.kolmogorov <= 1 and 0 <= d.trace <= 1

    def test_revival_witness(self):
        x = np.arange(0.05, 4.0 + 1e-9, 0.05)
        erl = RevivalAnalysis(ERL, x[-1])
        dk = np.array([erl.distances(t0, math.inf).kolmogorov for t0 in x])
        i = int(np.argmin(dk[(x > 1.5) & (x < 3.5)])) + int(np.sum(x <= 1.5))
        assert abs(x[i] - 0.75 * math.pi) <= 0.05
        assert dk[i - 1] > dk[i] < dk[i + 1]
        assert dk[-1] > dk[i] + 1e-3
        exp = RevivalAnalysis(EXP, x[-1])
        de = np.array([exp.distances(t0, math.inf).kolmogorov for t0 in x])
        assert np.all(np.diff(de) < 0)


class TestExclusive:
    def test_adapter_factorization(self):
        lam = 1.3
        model = dephasing_model(RenewalLaw.exponential(lam))
        ad = adapter(model)
        rates = {c.label: c.rate for c in ad.channels}
        weights = {o.label: o.weight for o in model.instruments[0]}
        ens = simulate_interspersed_ensemble(model, RHO, 3.0, 40, 21)
        for i in range(ens.n):
            traj = ens.record(i).trajectory
            full_engine = engine.exclusive_density(ad, RHO, traj) * math.prod(rates[u] for u in traj.labels)
            full_renewal = exclusive_density_interspersed(model, RHO, traj) * math.prod(
                weights[u] for u in traj.labels)
            assert full_engine == pytest.approx(full_renewal, rel=1e-10, abs=1e-14)

    def test_label_marginal(self):
        law = RenewalLaw.erlang2(1.1)
        model = dephasing_model(law)
        times = [0.4, 1.3, 2.0]
        T = 2.6
        weights = {o.label: o.weight for o in model.instruments[0]}
        total = 0.0
        for labs in itertools.product(model.labels, repeat=len(times)):
            traj = Trajectory(tuple(zip(labs, times)), T)
            total += exclusive_density_interspersed(model, RHO, traj) * math.prod(weights[u] for u in labs)
        gaps = np.diff([0.0] + times)
        ref = float(np.prod(law.pdf(gaps)) * law.sf(T - times[-1]))
        assert total == pytest.approx(ref, rel=1e-12)
