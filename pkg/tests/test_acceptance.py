"""End-to-end acceptance checks.

Each test prints one ``CRITERION n: PASS|FAIL: details`` line and then
asserts, so the summary survives in the verbose log whatever the outcome.
"""
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ansatz_state, observable_matrix, pauli_matrix
from vqshadow.analysis import (
    haar_check,
    hybrid_shot_ratio_bound,
    plan_inverse_q,
    variance_fixed_plan,
    variance_naive,
    variance_shadow,
    weighted_inverse_q,
)
from vqshadow.ansatz import build_ansatz, prepare_m_state, prepare_v_state
from vqshadow.cli import _axes_rng, toy_observable, variance_table
from vqshadow.estimator import estimate_nu, estimate_nu_naive
from vqshadow.hamiltonians import heisenberg, load_hamiltonian, molecular, toy4
from vqshadow.measure import (
    build_measurements_classical_shadow,
    build_measurements_derandomization,
    build_measurements_naive,
    ldf_groups,
)
from vqshadow.pauli import ObservableSum, PauliString, locality
from vqshadow.statevec import StateVector, make_rng
from vqshadow.vqs import EvolutionConfig, run_evolution


@pytest.fixture
def report(capsys):
    def _report(criterion, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {criterion}: {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return _report


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    return StateVector.from_unnormalized(rng.normal(size=2**n) + 1j * rng.normal(size=2**n))


def cs_inverse_q(obs):
    """<1/q>_G for uniformly random bases, q = 3^-locality."""
    loc = np.array([locality(p) for p in obs.paulis])
    return weighted_inverse_q(obs.coeffs, 3.0 ** (-loc))


# -- 1 --------------------------------------------------------------------------
def test_criterion_1_derandomization_worked_example(report):
    t0 = time.perf_counter()
    plan = build_measurements_derandomization(toy4(), 10)
    elapsed = time.perf_counter() - t0
    counts = {b: plan.bases.count(b) for b in set(plan.bases)}
    inv_q = 1 / plan.qs(toy4().paulis)
    ok = counts == {PauliString("XXXZ"): 5, PauliString("YYZX"): 5} and np.all(inv_q == 2) and elapsed < 1
    detail = f"bases {sorted((b.letters, c) for b, c in counts.items())}, 1/q {inv_q.tolist()}, {elapsed:.3f}s"
    report(1, ok, detail)


# -- 2 --------------------------------------------------------------------------
def test_criterion_2_shot_ratios(report):
    t0 = time.perf_counter()
    ext4 = toy4().extend_with_x()
    derand = hybrid_shot_ratio_bound(plan_inverse_q(ext4, build_measurements_derandomization(ext4, 10)), len(ext4))
    cs4 = hybrid_shot_ratio_bound(cs_inverse_q(ext4), len(ext4))
    ext_h = heisenberg().extend_with_x()
    inv_q_h = cs_inverse_q(ext_h)
    cs_h = hybrid_shot_ratio_bound(inv_q_h, len(ext_h))
    # the coarse <1/q> ~ 27 that treats every extended term as 3-local
    cs_h_coarse = hybrid_shot_ratio_bound(27.0, len(ext_h))
    elapsed = time.perf_counter() - t0
    checks = [derand == pytest.approx(0.75, abs=1e-12), cs4 >= 10, abs(cs_h - 2.5) <= 0.05, elapsed < 1]
    detail = (
        f"derand {derand:.4f} (want 0.75), cs toy {cs4:.2f} (want >= 10), "
        f"cs heisenberg {cs_h:.3f} from <1/q>={inv_q_h:.2f} (want 2.5 +- 0.05; "
        f"3-local approximation <1/q>=27 gives {cs_h_coarse:.3f}), {elapsed:.3f}s"
    )
    report(2, all(checks), detail)


# -- 3 --------------------------------------------------------------------------
def test_criterion_3_ldf_heisenberg(report):
    t0 = time.perf_counter()
    groups = ldf_groups(heisenberg().extend_with_x())
    elapsed = time.perf_counter() - t0
    bases = sorted(b.letters for b in groups.bases)
    ok = bases == ["XXXXXXX", "XYYYYYY", "XZZZZZZ"] and elapsed < 1
    report(3, ok, f"{len(bases)} groups {bases}, {elapsed:.3f}s")


# -- 4 --------------------------------------------------------------------------
def test_criterion_4_heisenberg_variance_table(report):
    rows = variance_table(heisenberg(), "ite", 4, 120, 0, patterns=5, convention="unit").rows
    by = {(r.parameters, r.measurement): r for r in rows}
    naive = by[("all zero", "naive")].approximation
    cs = by[("all zero", "classical shadow")].approximation
    derand = by[("all zero", "derandomization")].approximation
    bad = [f"{r.parameters}/{r.measurement} diff {r.diff:.4f}" for r in rows if r.diff > 0.002]
    checks = [
        naive == pytest.approx(0.0480, abs=5e-9),
        cs == pytest.approx(0.0450, abs=5e-9),
        0.004 <= derand <= 0.008,
        not bad,
    ]
    worst_random = max(r.diff for r in rows if r.parameters != "all zero")
    detail = (
        f"approx naive {naive:.4f} cs {cs:.4f} derand {derand:.4f}; "
        f"max random-parameter diff {worst_random:.4f}; over 0.002: {bad or 'none'}"
    )
    report(4, all(checks), detail)


# -- 5 --------------------------------------------------------------------------
def test_criterion_5_h2_ordering(report):
    h2 = load_hamiltonian("builtin:h2")
    rows = variance_table(h2, "ite", 4, 5 * len(h2), 0, patterns=0, convention="unit").rows
    a = {r.measurement: r.approximation for r in rows}
    naive, cs, derand = a["naive"], a["classical shadow"], a["derandomization"]
    ratio = derand / naive
    ok = derand < cs < naive and ratio < 0.05
    detail = (
        f"derand {derand:.4f} < cs {cs:.4f} < naive {naive:.4f}, derand/naive {ratio:.3f} (want < 0.05); "
        "absolute table values not compared because the bundled decomposition differs"
    )
    report(5, ok, detail)


# -- 6 --------------------------------------------------------------------------
LETTERS = st.text("IXYZ", min_size=3, max_size=3).filter(lambda s: s != "III")
OBSERVABLES = st.lists(
    st.tuples(st.floats(-1, 1).filter(lambda x: abs(x) > 0.05), LETTERS),
    min_size=1,
    max_size=6,
    unique_by=lambda t: t[1],
)


@pytest.mark.parametrize("strategy", ["classical_shadow", "derandomization", "ldf", "naive"])
def test_criterion_6_unbiasedness(strategy, report):
    reps, n_shot = 200, 2000
    worst = []

    @settings(max_examples=6, deadline=None, derandomize=True)
    @given(OBSERVABLES, st.integers(0, 2**31 - 1))
    def check(terms, seed):
        obs = ObservableSum(terms, n=3)
        state = random_state(3, seed)
        truth = float(np.vdot(state.amplitudes, observable_matrix(obs) @ state.amplitudes).real)
        fixed = build_measurements_derandomization(obs, n_shot) if strategy == "derandomization" else None
        naive = build_measurements_naive(obs, n_total=n_shot) if strategy == "naive" else None
        groups = ldf_groups(obs) if strategy == "ldf" else None
        vals = np.empty(reps)
        for r in range(reps):
            rr = make_rng(seed, 6, r)
            if naive is not None:
                vals[r] = estimate_nu_naive(state, obs.coeffs, obs.paulis, naive, rr).value
                continue
            if fixed is not None:
                plan = fixed
            elif groups is not None:
                plan = groups.sample_plan(n_shot, rr)
            else:
                plan = build_measurements_classical_shadow(3, n_shot, rr)
            vals[r] = estimate_nu(state, obs.coeffs, obs.paulis, plan, rr).value
        se = vals.std(ddof=1) / np.sqrt(reps)
        z = 0.0 if se == 0 else (vals.mean() - truth) / se
        worst.append(abs(z))
        assert abs(z) < 3 or abs(vals.mean() - truth) < 1e-12

    try:
        check()
        ok, msg = True, ""
    except AssertionError as exc:
        ok, msg = False, f" ({exc})"
    report(f"6 [{strategy}]", ok, f"{len(worst)} observables, max |z| {max(worst):.2f} (want < 3){msg}")


# -- 7 --------------------------------------------------------------------------
@pytest.mark.parametrize("strategy", ["classical_shadow", "ldf", "derandomization", "naive"])
def test_criterion_7_analytic_variance(strategy, report):
    obs = ObservableSum([(0.6, "XZI"), (-0.3, "XIY"), (0.5, "IZZ"), (0.2, "ZZZ"), (0.4, "YII")])
    state = random_state(3, 77)
    reps, n_shot, n_naive = 20000, 30, 6
    groups = ldf_groups(obs)
    fixed = build_measurements_derandomization(obs, n_shot)
    naive = build_measurements_naive(obs, n_naive=n_naive)
    vals = np.empty(reps)
    plan = fixed
    for r in range(reps):
        rr = make_rng(7, r)
        if strategy == "naive":
            vals[r] = estimate_nu_naive(state, obs.coeffs, obs.paulis, naive, rr).value
            continue
        if strategy == "classical_shadow":
            plan = build_measurements_classical_shadow(3, n_shot, rr)
        elif strategy == "ldf":
            plan = groups.sample_plan(n_shot, rr)
        vals[r] = estimate_nu(state, obs.coeffs, obs.paulis, plan, rr).value
    empirical = vals.var(ddof=1)
    if strategy == "naive":
        analytic = variance_naive(state, obs.coeffs, obs.paulis, n_naive)
    elif strategy == "derandomization":
        analytic = variance_fixed_plan(state, obs.coeffs, obs.paulis, fixed)
    else:
        analytic = variance_shadow(state, obs.coeffs, obs.paulis, plan)
    rel = empirical / analytic - 1
    report(f"7 [{strategy}]", abs(rel) < 0.05, f"empirical {empirical:.6g} analytic {analytic:.6g} rel {rel:+.3%} over {reps} reps")


# -- 8 --------------------------------------------------------------------------
def test_criterion_8_synthesis_identity(report):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 4))
        layers = int(rng.integers(1, 3))
        spec = build_ansatz(n, layers, rng)
        theta = rng.uniform(0, 2 * np.pi, spec.n_params)
        phi = float(rng.uniform(-np.pi, np.pi))
        letters = "".join(rng.choice(list("IXYZ"), size=n))
        k = int(rng.integers(spec.n_params))
        if rng.random() < 0.5:
            state = prepare_v_state(spec, theta, k, phi)
            right = ansatz_state(n, layers, spec.gate_axes, theta)
        else:
            l = int(rng.integers(k, spec.n_params))
            state = prepare_m_state(spec, theta, k, l, phi)
            right = ansatz_state(n, layers, spec.gate_axes, theta, insert=l)
        left = ansatz_state(n, layers, spec.gate_axes, theta, insert=k)
        direct = np.real(np.exp(1j * phi) * np.vdot(left, pauli_matrix(letters) @ right))
        amps = state.amplitudes
        synthesized = np.vdot(amps, pauli_matrix("X" + letters) @ amps).real
        worst = max(worst, abs(synthesized - direct))
    report(8, worst < 1e-10, f"max |Tr[(X(x)P) rho] - direct| = {worst:.2e} over 100 instances")


# -- 9 --------------------------------------------------------------------------
def test_criterion_9_haar(report):
    reports = {}
    for n in (2, 3, 4):
        ext = toy_observable(n).extend_with_x()
        plan = build_measurements_classical_shadow(ext.n_qubits, 100, make_rng(9, n))
        reports[n] = haar_check(ext, plan, 5000, make_rng(90, n))
    zs = {n: reports[n].mean_z for n in (2, 3)}
    ns = np.array([2, 3, 4])
    slope = np.polyfit(ns, np.log2([reports[n].var_empirical for n in ns]), 1)[0]
    closed = np.polyfit(ns, np.log2([reports[n].var_closed_form for n in ns]), 1)[0]
    ok = all(abs(z) < 3 for z in zs.values()) and abs(slope + 1) <= 0.3
    detail = (
        f"mean z n=2 {zs[2]:+.2f}, n=3 {zs[3]:+.2f}; variance exponent {slope:.3f} per qubit "
        f"(closed form {closed:.3f}, want -1 +- 0.3)"
    )
    report(9, ok, detail)


# -- 10 -------------------------------------------------------------------------
def test_criterion_10_vqs_correctness(report):
    from vqshadow.ansatz import AnsatzSpec

    toy = AnsatzSpec(1, 1, ("x",))
    trace, _ = run_evolution(toy, EvolutionConfig("rte", ObservableSum([(1.0, "X")]), dt=1e-3, steps=100))
    t = np.array([r.t for r in trace.records])
    track = float(np.max(np.abs(trace.params[:, 0] - 2 * t)))

    spec = build_ansatz(6, 4, _axes_rng(0, 0))
    theta0 = make_rng(10).uniform(0, 2 * np.pi, spec.n_params)
    ite, _ = run_evolution(spec, EvolutionConfig("ite", heisenberg(), steps=20), theta0, paired=False)
    rise = float(np.max(np.diff(ite.energies)))

    noisy, _ = run_evolution(spec, EvolutionConfig("ite", heisenberg(), steps=1, strategy="naive", n_total=120))
    d0 = noisy.records[0].infidelity
    ok = track < 1e-3 and rise <= 1e-6 and d0 == 0
    report(10, ok, f"max |theta - 2t| {track:.2e}; max energy rise {rise:.2e}; D_I(0) {d0}")


# -- 11 -------------------------------------------------------------------------
def mean_infidelity(ham, n, layers, strategy, n_total, steps, trials, cutoff):
    curves = []
    for trial in range(trials):
        spec = build_ansatz(n, layers, _axes_rng(0, trial))
        cfg = EvolutionConfig(
            "ite", ham, steps=steps, strategy=strategy, n_total=n_total, svd_cutoff=cutoff, seed=0, trial=trial
        )
        trace, _ = run_evolution(spec, cfg)
        curves.append(trace.infidelities)
    return np.mean(curves, axis=0)


# A relative cutoff of 1e-3 keeps shot noise in V from being amplified along
# the near-null directions of M; the library default 1e-6 saturates D_I.
CUTOFF = 1e-3


def test_criterion_11_heisenberg_infidelity(report):
    ham = heisenberg()
    strategies = ("derandomization", "ldf", "naive")
    at_120 = {s: mean_infidelity(ham, 6, 4, s, 120, 5, 5, CUTOFF) for s in strategies}
    final = {s: c[5] for s, c in at_120.items()}
    ordered = final["derandomization"] <= final["ldf"] <= final["naive"]
    slopes = {}
    for s in strategies:
        d = [at_120[s][1]] + [mean_infidelity(ham, 6, 4, s, n, 1, 5, CUTOFF)[1] for n in (480, 1920)]
        slopes[s] = np.polyfit(np.log([120, 480, 1920]), np.log(d), 1)[0]
    slope_ok = all(abs(v + 0.5) <= 0.15 for v in slopes.values())
    detail = (
        "D_I(5dt) at N=120: "
        + ", ".join(f"{s} {v:.4f}" for s, v in final.items())
        + f" (ordering {'holds' if ordered else 'violated'}); slopes at T=dt: "
        + ", ".join(f"{s} {v:.3f}" for s, v in slopes.items())
        + f" (want -0.5 +- 0.15); svd cutoff {CUTOFF}"
    )
    report(11, ordered and slope_ok, detail)


@pytest.mark.slow
def test_criterion_11_lih_ordering(report):
    ham = molecular("lih")
    final = {
        s: mean_infidelity(ham, ham.n_qubits, 4, s, 5 * len(ham), 5, 1, CUTOFF)[5]
        for s in ("derandomization", "ldf", "naive")
    }
    ok = final["derandomization"] <= final["ldf"] <= final["naive"]
    detail = "LiH D_I(5dt), one trial: " + ", ".join(f"{s} {v:.4f}" for s, v in final.items())
    report("11 [LiH ordering]", ok, detail)
