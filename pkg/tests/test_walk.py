from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qjump import engine
from qjump.errors import ArgumentError, ModelError
from qjump.nonhermitian import Regime
from qjump.pointproc import RngStream
from qjump.qops import IDENTITY2, P0, P1, SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Z, pure_state
from qjump.walk import (
    HybridState,
    RateVector,
    as_jump_model,
    build_walk,
    case_b_survival,
    case_b_zeros,
    dyson_terms,
    embed_state,
    ensemble_rate_vector,
    lindblad_rate_curve,
    lindblad_rate_evolve,
    pauli_evolve,
    pauli_rates,
    simulate_hybrid,
    simulate_hybrid_ensemble,
    two_level_example,
    vertex_waiting,
)

from conftest import ks_one_sample, ks_two_sample, random_density

CASE_A = two_level_example("sigma_z", 0.7, 1.1, 0.8, 1.3)
CASE_B = two_level_example("sigma_x", 1.0, 2.0, 0.8, 1.5)
RHO = np.array([[0.3, 0.1 - 0.2j], [0.1 + 0.2j, 0.7]])


def ring(n: int = 3, h=None, kraus=SIGMA_X) -> object:
    """Walk on a ring with clockwise and counter-clockwise hops."""
    h = 0.4 * SIGMA_Z if h is None else h
    return build_walk(
        vertices=[[k] for k in range(n)],
        labels=["cw", "ccw"],
        rates=[1.1, 0.5],
        targets=[{k: (k + 1) % n for k in range(n)}, {k: (k - 1) % n for k in range(n)}],
        hamiltonians=[h] * n,
        kraus={**{(k, 0): [kraus] for k in range(n)}, **{(k, 1): [IDENTITY2] for k in range(n)}},
    )


class TestBuild:
    def test_kraus_outside_active_set(self):
        with pytest.raises(ModelError):
            build_walk([[0], [1]], ["u"], [1.0], [{0: 1}], [IDENTITY2] * 2,
                       {(0, 0): [IDENTITY2], (1, 0): [IDENTITY2]})

    def test_missing_kraus(self):
        with pytest.raises(ModelError):
            build_walk([[0], [1]], ["u"], [1.0], [{0: 1, 1: 0}], [IDENTITY2] * 2, {(0, 0): [IDENTITY2]})

    def test_duplicate_vertices(self):
        with pytest.raises(ModelError):
            build_walk([[0], [0]], ["u"], [1.0], [{}], [IDENTITY2] * 2, {})

    def test_bad_rate(self):
        with pytest.raises(ModelError):
            build_walk([[0], [1]], ["u"], [0.0], [{0: 1}], [IDENTITY2] * 2, {(0, 0): [IDENTITY2]})

    @pytest.mark.parametrize("args", [("sigma_x", 0.0, 1.0, 1.0, 1.0), ("sigma_z", 1.0, 1.0, -1.0, 1.0),
                                      ("sigma_y", 1.0, 1.0, 1.0, 1.0)])
    def test_two_level_invalid(self, args):
        with pytest.raises(ModelError):
            two_level_example(*args)

    def test_absorbing_set(self):
        m = build_walk([[0], [1], [2]], ["u"], [1.0], [{0: 1, 1: 0}], [IDENTITY2] * 3,
                       {(0, 0): [SIGMA_MINUS], (1, 0): [SIGMA_PLUS]})
        assert m.absorbing == [2]


class TestPauliRates:
    def test_two_vertex(self):
        t = pauli_rates(CASE_A)
        nu = CASE_A.rates[0]
        np.testing.assert_allclose(t, [[0, nu], [nu, 0]])

    def test_all_absorbing(self):
        m = build_walk([[0], [1]], ["u"], [1.0], [{}], [IDENTITY2] * 2, {})
        np.testing.assert_array_equal(pauli_rates(m), 0)

    def test_parallel_labels_add(self):
        m = build_walk([[0], [1]], ["u", "v"], [0.3, 0.9], [{0: 1}, {0: 1}], [IDENTITY2] * 2,
                       {(0, 0): [IDENTITY2], (0, 1): [IDENTITY2]})
        t = pauli_rates(m)
        assert t[1, 0] == pytest.approx(1.2)
        np.testing.assert_array_equal(t[:, 1], 0)

    def test_column_sums(self):
        m = ring(4)
        np.testing.assert_allclose(pauli_rates(m).sum(axis=0), sum(m.rates))


class TestLindbladRate:
    def test_stationary(self):
        init = HybridState(0, P1)
        for t in (0.5, 3.0, 20.0):
            out = lindblad_rate_evolve(CASE_A, init, t)
            ref = RateVector.from_state(CASE_A, init)
            assert max(np.linalg.norm(a - b) for a, b in zip(out.etas, ref.etas)) < 1e-10

    def test_zero_time(self):
        init = HybridState(1, RHO)
        out = lindblad_rate_evolve(CASE_B, init, 0.0)
        np.testing.assert_array_equal(out.etas[1], init.rho)

    def test_negative_time(self):
        with pytest.raises(ArgumentError):
            lindblad_rate_evolve(CASE_B, HybridState(1, RHO), -1.0)

    @pytest.mark.parametrize("model", [CASE_A, CASE_B], ids=["a", "b"])
    def test_coupled_pair(self, model, rng):
        eta0, eta1 = 0.4 * random_density(rng, 2), 0.6 * random_density(rng, 2)
        x = np.concatenate([eta0.reshape(-1), eta1.reshape(-1)])
        d = (model.rate_generator() @ x).reshape(2, 2, 2)
        nu0, nu1 = model.nus
        h0, h1 = model.hamiltonians

        def a(h, r, eta):
            return -1j * (h @ eta - eta @ h) - 0.5 * (r @ eta + eta @ r)

        ref1 = a(h1, nu1 * P1, eta1) + nu0 * SIGMA_PLUS @ eta0 @ SIGMA_MINUS
        ref0 = a(h0, nu0 * P0, eta0) + nu1 * SIGMA_MINUS @ eta1 @ SIGMA_PLUS
        np.testing.assert_allclose(d[1], ref1, atol=1e-13)
        np.testing.assert_allclose(d[0], ref0, atol=1e-13)

    def test_dyson_terms(self):
        init = HybridState(1, RHO)
        t = 2.0
        dt = dyson_terms(CASE_B, init, t, m_max=12)
        full = lindblad_rate_evolve(CASE_B, init, t)
        part = dt.partial_sum()
        err = max(np.abs(a - b).sum() for a, b in zip(part.etas, full.etas))
        assert 0 <= dt.remainder < 1e-6
        assert err <= 2 * dt.remainder + 1e-12

    def test_conservation_and_positivity(self):
        times = np.linspace(0, 8, 41)
        for rv in lindblad_rate_curve(CASE_B, HybridState(1, RHO), times):
            assert rv.total_trace == pytest.approx(1.0, abs=1e-8)
            assert all(np.linalg.eigvalsh(e)[0] >= -1e-9 for e in rv.etas)

    def test_non_uniqueness(self, rng):
        ops = [[SIGMA_X], [SIGMA_X]]
        a = build_walk([[0], [1]], ["u"], [2.0], [{0: 1, 1: 0}], [0.3 * SIGMA_Z] * 2,
                       {(0, 0): ops[0], (1, 0): ops[1]})
        b = build_walk([[0], [1]], ["u", "v"], [1.5, 0.5], [{0: 1, 1: 0}, {0: 1, 1: 0}], [0.3 * SIGMA_Z] * 2,
                       {(0, 0): ops[0], (1, 0): ops[1], (0, 1): ops[0], (1, 1): ops[1]})
        np.testing.assert_allclose(pauli_rates(a), pauli_rates(b))
        init = HybridState(0, random_density(rng, 2))
        ra, rb = lindblad_rate_evolve(a, init, 1.7), lindblad_rate_evolve(b, init, 1.7)
        for x, y in zip(ra.etas, rb.etas):
            np.testing.assert_allclose(x, y, atol=1e-12)

    def test_register_adapter(self):
        init = HybridState(1, RHO)
        jm = as_jump_model(CASE_B)
        big = engine.mean_state(jm, embed_state(CASE_B, init), 1.3)
        rv = lindblad_rate_evolve(CASE_B, init, 1.3)
        np.testing.assert_allclose(big[:2, :2], rv.etas[0], atol=1e-10)
        np.testing.assert_allclose(big[2:, 2:], rv.etas[1], atol=1e-10)


class TestVertexWaiting:
    @pytest.mark.parametrize("k,proj", [(0, P0), (1, P1)])
    def test_case_a(self, k, proj):
        nu = CASE_A.nus[k]
        for dt in (0.2, 1.0, 4.0):
            ref = np.trace(proj @ RHO).real * math.exp(-nu * dt) + np.trace((IDENTITY2 - proj) @ RHO).real
            assert vertex_waiting(CASE_A, HybridState(k, RHO), dt) == pytest.approx(ref, abs=1e-12)

    def test_case_a_depends_on_population_only(self):
        other = np.array([[0.3, -0.4j], [0.4j, 0.7]])
        for dt in (0.5, 2.0):
            assert vertex_waiting(CASE_A, HybridState(1, RHO), dt) == pytest.approx(
                vertex_waiting(CASE_A, HybridState(1, other), dt), abs=1e-12)

    def test_case_b(self):
        s = np.linspace(0, 6, 25)
        got = [vertex_waiting(CASE_B, HybridState(1, P1), x) for x in s]
        np.testing.assert_allclose(got, case_b_survival(2.0, 1.5, s), atol=1e-12)

    def test_absorbing(self):
        m = build_walk([[0], [1]], ["u"], [1.0], [{0: 1}], [SIGMA_X] * 2, {(0, 0): [SIGMA_MINUS]})
        assert vertex_waiting(m, HybridState(1, RHO), 7.0) == pytest.approx(1.0, abs=1e-12)

    def test_negative(self):
        with pytest.raises(ArgumentError):
            vertex_waiting(CASE_A, HybridState(1, RHO), -0.1)


class TestTwoLevelExample:
    def test_ep_regime(self):
        m = two_level_example("sigma_x", 1.0, 0.75, 0.8, 1.5)
        assert m.regime(1) is Regime.EXCEPTIONAL
        assert m.kappa[1] == pytest.approx(0.0)

    def test_kappa_matches_params(self):
        for k in (0, 1):
            assert CASE_B.params(k).kappa == pytest.approx(CASE_B.kappa[k], abs=1e-12)
        assert CASE_B.regime(1) is Regime.GENERIC

    def test_zeros(self):
        w1, nu1 = 2.0, 1.5
        s = case_b_zeros(w1, nu1, 4)
        z = CASE_B.z(1).real
        np.testing.assert_allclose(np.tan(z * s), 4 * z / nu1, rtol=1e-12)
        psi = CASE_B.psi(s)
        np.testing.assert_allclose(np.abs(psi[:, 0]), 0, atol=1e-12)
        rho = pure_state(psi[2])
        np.testing.assert_allclose(rho, P0, atol=1e-12)

    def test_nu_default(self):
        assert CASE_A.rates[0] == pytest.approx(1.3)
        np.testing.assert_allclose(CASE_A.R(0), 0.8 * P0, atol=1e-15)
        np.testing.assert_allclose(CASE_A.R(1), 1.3 * P1, atol=1e-15)


class TestSimulate:
    def test_case_a_alternating(self):
        ens = simulate_hybrid_ensemble(CASE_A, HybridState(1, P1), math.inf, 20000, 1, max_jumps=2)
        assert np.all(ens.n_jumps == 2)
        t1 = ens.event_time[ens.event_index == 0]
        t2 = ens.event_time[ens.event_index == 1] - t1
        nu0, nu1 = CASE_A.nus
        assert ks_one_sample(t1, lambda x: -np.expm1(-nu1 * x)) < 0.015
        assert ks_one_sample(t2, lambda x: -np.expm1(-nu0 * x)) < 0.015
        # vertex 0 is entered with P0, vertex 1 with P1
        np.testing.assert_array_equal(ens.event_mode, np.tile([0, 1], ens.n))
        after = np.stack([P0.reshape(-1), P1.reshape(-1)])[ens.event_mode]
        np.testing.assert_allclose(ens.event_state, after, atol=1e-12)

    def test_case_b_survival(self):
        ens = simulate_hybrid_ensemble(CASE_B, HybridState(1, P1), math.inf, 20000, 2, max_jumps=1)
        t1 = np.sort(ens.event_time)
        assert ks_one_sample(t1, lambda s: 1 - case_b_survival(2.0, 1.5, s)) < 0.015

    def test_stationary_sampler(self):
        ens = simulate_hybrid_ensemble(CASE_A, HybridState(0, P1), 50.0, 2000, 3)
        assert ens.n_jumps.sum() == 0
        assert np.all(ens.final_mode == 0)

    def test_absorbing_vertex(self):
        m = build_walk([[0], [1]], ["u"], [1.0], [{0: 1}], [SIGMA_X] * 2, {(0, 0): [SIGMA_MINUS]})
        rec = simulate_hybrid(m, HybridState(1, RHO), 10.0, RngStream(4))
        assert len(rec.trajectory) == 0
        ens = simulate_hybrid_ensemble(m, HybridState(0, P1), 30.0, 500, 4)
        assert np.all(ens.final_mode == 1)
        assert np.all(ens.n_jumps <= 1)

    def test_markov_restart(self):
        n = 100_000
        cont = simulate_hybrid_ensemble(CASE_B, HybridState(1, P1), math.inf, n, 5, max_jumps=2)
        leg2 = cont.event_time[cont.event_index == 1] - cont.event_time[cont.event_index == 0]
        post = cont.event_state[cont.event_index == 0]
        np.testing.assert_allclose(post, np.broadcast_to(P0.reshape(-1), post.shape), atol=1e-12)
        fresh = simulate_hybrid_ensemble(CASE_B, HybridState(0, P0), math.inf, n, 6, max_jumps=1)
        assert ks_two_sample(leg2, fresh.event_time) < 0.015

    def test_pauli_marginal(self):
        m = ring(3)
        t = 1.2
        ens = simulate_hybrid_ensemble(m, HybridState(0, RHO), t, 20000, 7)
        freq = np.bincount(ens.final_mode, minlength=3) / ens.n
        q = pauli_evolve(m, [1, 0, 0], t)
        assert np.all(np.abs(freq - q) <= 3 * np.sqrt(q * (1 - q) / ens.n))

    def test_rate_equation_vs_ensemble(self):
        t = 2 / 1.5
        ens = simulate_hybrid_ensemble(CASE_B, HybridState(1, P1), t, 100_000, 8)
        mean, err = ensemble_rate_vector(CASE_B, ens)
        ref = lindblad_rate_evolve(CASE_B, HybridState(1, P1), t)
        for a, b, e in zip(mean.etas, ref.etas, err.etas):
            assert np.all(np.abs((a - b).real) <= 3 * e.real + 1e-12)
            assert np.all(np.abs((a - b).imag) <= 3 * e.imag + 1e-12)

    def test_reproducible(self):
        a = simulate_hybrid(CASE_B, HybridState(1, RHO), 5.0, RngStream(9, 1))
        b = simulate_hybrid(CASE_B, HybridState(1, RHO), 5.0, RngStream(9, 1))
        assert a.trajectory == b.trajectory

    @settings(max_examples=10, deadline=None)
    @given(st.floats(0.1, 5.0))
    def test_ensemble_conserves_occupation(self, t):
        ens = simulate_hybrid_ensemble(ring(3), HybridState(1, RHO), t, 200, 10)
        assert np.bincount(ens.final_mode, minlength=3).sum() == 200
