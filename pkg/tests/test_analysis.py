import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import haar_unitary_states, pauli_matrix
from vqshadow.analysis import (
    VarianceReport,
    approximation_naive,
    approximation_shadow,
    delta_quantities,
    g_cs,
    g_factor,
    g_matrix,
    haar_check,
    haar_moment,
    haar_states,
    haar_variance_closed_form,
    hybrid_shot_ratio_bound,
    naive_haar_variance,
    plan_inverse_q,
    shot_ratio_bound,
    variance_fixed_plan,
    variance_naive,
    variance_row,
    variance_shadow,
    weighted_inverse_q,
)
from vqshadow.errors import EmptySample, SingularM
from vqshadow.estimator import estimate_nu, estimate_nu_naive
from vqshadow.hamiltonians import heisenberg, toy4
from vqshadow.measure import (
    build_measurements_classical_shadow,
    build_measurements_derandomization,
    build_measurements_ldf,
)
from vqshadow.pauli import ObservableSum, PauliString
from vqshadow.statevec import StateVector, make_rng


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    return StateVector.from_unnormalized(rng.normal(size=2**n) + 1j * rng.normal(size=2**n))


class TestG:
    def test_closed_form_examples(self):
        assert g_cs(PauliString("XI"), PauliString("IZ")) == 1
        assert g_cs(PauliString("XZ"), PauliString("XI")) == 3
        assert g_cs(PauliString("XI"), PauliString("ZI")) == 0

    def test_cs_diagonal_is_inverse_q(self, rng):
        terms = [PauliString(s) for s in ("XYI", "IZZ", "XXX")]
        plan = build_measurements_classical_shadow(3, 10, rng)
        g = g_matrix(terms, plan)
        assert np.allclose(np.diag(g), 1 / plan.qs(terms))

    def test_deterministic_g_counts_joint_cover(self):
        plan = build_measurements_derandomization(toy4(), 10)
        p, q = PauliString("XXXZ"), PauliString("XXII")
        # both covered by the same five bases: (5/10) / (0.5 * 0.5)
        assert g_factor(p, q, plan) == pytest.approx(2.0)
        assert g_factor(PauliString("XXII"), PauliString("YYII"), plan) == 0.0

    def test_probabilistic_g_uses_distribution(self, rng):
        obs = heisenberg().extend_with_x()
        plan = build_measurements_ldf(obs, 50, rng)
        g = g_matrix(list(obs.paulis), plan)
        assert np.allclose(np.diag(g), 1 / plan.qs(obs.paulis))


class TestVariances:
    def test_single_term_bernoulli(self):
        state = random_state(2, 1)
        obs = ObservableSum([(0.7, "ZZ")])
        plan = build_measurements_derandomization(obs, 5)
        e = np.vdot(state.amplitudes, pauli_matrix("ZZ") @ state.amplitudes).real
        expect = (0.49 - 0.49 * e**2) / 5
        assert variance_shadow(state, obs.coeffs, obs.paulis, plan) == pytest.approx(expect)
        assert variance_fixed_plan(state, obs.coeffs, obs.paulis, plan) == pytest.approx(expect)

    def test_naive_limits(self):
        obs = ObservableSum([(0.5, "ZI"), (0.2, "IZ")])
        assert variance_naive(StateVector.zero(2), obs.coeffs, obs.paulis) == pytest.approx(0.0)
        plus = StateVector(np.full(4, 0.5))
        assert variance_naive(plus, obs.coeffs, obs.paulis, 2) == pytest.approx((0.25 + 0.04) / 2)

    @pytest.mark.parametrize("kind", ["cs", "derand", "ldf", "naive"])
    def test_matches_monte_carlo(self, kind):
        obs = ObservableSum([(0.6, "XZI"), (-0.3, "XIY"), (0.5, "IZZ"), (0.2, "ZZZ")])
        state = random_state(3, 4)
        reps, n_shot = 6000, 40
        vals = []
        fixed = build_measurements_derandomization(obs, n_shot)
        for r in range(reps):
            rr = make_rng(20, r)
            if kind == "cs":
                plan = build_measurements_classical_shadow(3, n_shot, rr)
            elif kind == "ldf":
                plan = build_measurements_ldf(obs, n_shot, rr)
            elif kind == "derand":
                plan = fixed
            if kind == "naive":
                vals.append(estimate_nu_naive(state, obs.coeffs, obs.paulis, 10, rr).value)
            else:
                vals.append(estimate_nu(state, obs.coeffs, obs.paulis, plan, rr).value)
        emp = np.var(vals, ddof=1)
        if kind == "naive":
            analytic = variance_naive(state, obs.coeffs, obs.paulis, 10)
        elif kind == "derand":
            analytic = variance_fixed_plan(state, obs.coeffs, obs.paulis, plan)
        else:
            analytic = variance_shadow(state, obs.coeffs, obs.paulis, plan)
        # 6000 reps: relative sd of a sample variance is about sqrt(2/6000) ~ 1.8%
        assert abs(emp / analytic - 1) < 0.08

    def test_fixed_plan_never_exceeds_shadow_formula(self):
        obs = heisenberg(4).extend_with_x()
        plan = build_measurements_derandomization(obs, 60)
        for seed in range(3):
            s = random_state(5, seed)
            assert variance_fixed_plan(s, obs.coeffs, obs.paulis, plan) <= variance_shadow(s, obs.coeffs, obs.paulis, plan) + 1e-12


class TestApproximations:
    def test_heisenberg_unit_values(self):
        ext = heisenberg().extend_with_x()  # unit convention: G = alpha
        assert approximation_naive(ext.coeffs, 5) == pytest.approx(0.0480)
        plan = build_measurements_classical_shadow(7, 120, make_rng(0))
        assert approximation_shadow(ext.coeffs, ext.paulis, plan) == pytest.approx(0.0450)

    def test_single_term(self):
        plan = build_measurements_derandomization(ObservableSum([(0.3, "X")]), 1)
        assert approximation_shadow([0.3], [PauliString("X")], plan) == pytest.approx(0.09)

    def test_weighted_inverse_q(self):
        assert weighted_inverse_q([1.0, 1.0], [0.5, 0.25]) == pytest.approx(3.0)
        assert weighted_inverse_q([2.0, 0.0], [0.5, 0.1]) == pytest.approx(2.0)


class TestShotRatios:
    def test_worked_examples(self):
        plan = build_measurements_derandomization(toy4(), 10)
        inv_q = plan_inverse_q(toy4(), plan)
        assert inv_q == pytest.approx(2.0)
        assert hybrid_shot_ratio_bound(inv_q, 6) == pytest.approx(0.75)
        assert hybrid_shot_ratio_bound(27.0, 6) >= 10
        assert hybrid_shot_ratio_bound(27.0, 24) == pytest.approx(2.53125)

    def test_general_bound(self):
        # N_P N_g -> large, N_BB = 1: approaches (sqrt a + sqrt b)^2
        assert shot_ratio_bound(4.0, 1.0, 10, 1, 10**6) == pytest.approx(9.0, rel=1e-4)
        assert shot_ratio_bound(1.0, 1.0, 1, 1, 1) == pytest.approx(4.0)

    def test_hybrid_with_params(self):
        assert hybrid_shot_ratio_bound(8.0, 10, n_params=2) == pytest.approx((1 + 1.0) / 10 * 8 * 9 / 4)


class TestHaar:
    def test_states_normalised(self, rng):
        s = haar_states(8, 10, rng)
        assert np.allclose(np.linalg.norm(s, axis=1), 1)
        with pytest.raises(EmptySample):
            haar_states(8, 0, rng)

    @pytest.mark.parametrize("ops", [["ZI", "ZI"], ["XZ", "XZ", "XZ", "XZ"], ["XI", "XI", "IZ", "IZ"], ["XX", "YY", "ZZ"]])
    def test_moment_matches_sampling(self, ops):
        states = haar_unitary_states(4, 200000, np.random.default_rng(2))
        vals = np.ones(len(states))
        for o in ops:
            m = pauli_matrix(o)
            vals *= np.einsum("si,ij,sj->s", states.conj(), m, states).real
        exact = haar_moment([PauliString(o) for o in ops])
        assert abs(vals.mean() - exact) < 4 * vals.std() / np.sqrt(len(vals)) + 1e-12

    def test_naive_single_term_closed_form(self):
        d = 8
        v = naive_haar_variance(np.array([0.5]), [PauliString("XYZ")])
        assert v == pytest.approx(0.5**4 * 2 * d / ((d + 1) ** 2 * (d + 3)))

    def test_closed_form_zero_without_identity_quadruples(self):
        terms = [PauliString("XI"), PauliString("IZ")]
        g = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert haar_variance_closed_form(np.array([1.0, 1.0]), terms, g) == 0.0

    def test_check_report(self):
        ext = ObservableSum([(0.4, "XZ"), (0.3, "IZ"), (-0.2, "XI")]).extend_with_x()
        plan = build_measurements_classical_shadow(3, 10, make_rng(1))
        rep = haar_check(ext, plan, 4000, make_rng(2))
        assert abs(rep.mean_z) < 3
        assert abs(rep.naive_mean_empirical - rep.naive_mean_closed_form) < 0.01
        assert rep.var_empirical == pytest.approx(rep.var_closed_form, rel=0.15)
        assert rep.naive_var_empirical == pytest.approx(rep.naive_var_closed_form, rel=0.15)
        assert "haar check" in rep.to_text()

    def test_constant_functional_z(self):
        ext = ObservableSum([(0.4, "XZ"), (0.3, "ZZ"), (-0.2, "XY")]).extend_with_x()
        plan = build_measurements_classical_shadow(3, 10, make_rng(1))
        rep = haar_check(ext, plan, 50, make_rng(2))
        assert rep.mean_z == 0.0 and rep.var_closed_form == 0.0


class TestDelta:
    def test_identity_m(self):
        n, s, h = delta_quantities(np.eye(3), np.zeros(3), [0.1, 0.2, 0.2], np.ones((3, 3)), [0.1, 0.2, 0.2], np.zeros((3, 3)))
        assert n == pytest.approx(np.sqrt(3) * 0.3) and s == pytest.approx(np.sqrt(3) * 0.3)

    def test_same_dv_zero_dm(self):
        M = np.diag([2.0, 1.0])
        V = np.array([0.3, -0.1])
        n, s, _ = delta_quantities(M, V, [0.1, 0.1], np.zeros((2, 2)), [0.1, 0.1], np.zeros((2, 2)))
        assert n == pytest.approx(s)

    def test_alpha_scaling(self):
        M, V = np.eye(2), np.array([1.0, 0.0])
        dm = np.full((2, 2), 0.1)
        _, _, h1 = delta_quantities(M, V, [0, 0], dm, [0, 0], dm, alpha=1.0)
        _, _, h4 = delta_quantities(M, V, [0, 0], dm, [0, 0], dm, alpha=0.25)
        assert h4 == pytest.approx(2 * h1)
        with pytest.raises(ValueError):
            delta_quantities(M, V, [0, 0], dm, [0, 0], dm, alpha=0.0)

    def test_singular(self):
        with pytest.raises(SingularM):
            delta_quantities(np.zeros((2, 2)), np.zeros(2), [0, 0], np.zeros((2, 2)), [0, 0], np.zeros((2, 2)))


class TestReport:
    def test_rows_and_csv(self):
        ext = ObservableSum([(0.4, "XZ"), (0.3, "ZZ")]).extend_with_x()
        states = [random_state(3, s) for s in range(3)]
        plan = build_measurements_derandomization(ext, 20)
        rows = [variance_row("random 1", "derandomization", states, ext, plan), variance_row("random 1", "naive", states, ext, None, n_naive=5)]
        rep = VarianceReport(rows)
        text = rep.to_csv()
        assert text.startswith("# vqshadow variance table v1")
        assert rows[0].diff == pytest.approx(np.mean(np.abs(np.array(rows[0].per_k_variance) - rows[0].approximation)))
        assert all(r.variance >= -1e-12 for r in rows)
        with pytest.raises(ValueError):
            variance_row("x", "naive", states, ext, None)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_variances_non_negative(self, seed):
        ext = ObservableSum([(0.4, "XZ"), (0.3, "ZY"), (0.1, "IX")]).extend_with_x()
        plan = build_measurements_derandomization(ext, 7)
        s = random_state(3, seed)
        assert variance_shadow(s, ext.coeffs, ext.paulis, plan) >= -1e-12
        assert variance_fixed_plan(s, ext.coeffs, ext.paulis, plan) >= -1e-12
