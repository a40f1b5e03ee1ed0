"""Closed-form variances, Haar-average surrogates and shot-count ratios.

All variances here are variances of the estimate itself, i.e. they already
include the 1/N_shot (or 1/N_naive) factor unless stated otherwise.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import permutations
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptySample, SingularM
from .measure import (
    DETERMINISTIC,
    MeasurementPlan,
    covering_matrix,
    estimate_mu_batch,
)
from .pauli import CODE, ObservableSum, PauliString, pauli_codes, qubitwise_commute, trace_product
from .statevec import StateVector, basis_probabilities, pauli_expectation, pauli_expectations

_LETTER_OF = {v: k for k, v in CODE.items()}


# -- g factors ---------------------------------------------------------------
def g_cs(p: PauliString, q: PauliString) -> float:
    """Product over qubits of 1 (either is I), 3 (equal, non-I) or 0."""
    if len(p) != len(q):
        raise DimensionMismatch(f"length mismatch: {p} vs {q}")
    out = 1.0
    for a, b in zip(p.letters, q.letters):
        if a == "I" or b == "I":
            continue
        if a != b:
            return 0.0
        out *= 3.0
    return out


def _g_cs_matrix(codes: np.ndarray) -> np.ndarray:
    a = codes[:, None, :]
    b = codes[None, :, :]
    local = np.where((a == 0) | (b == 0), 1.0, np.where(a == b, 3.0, 0.0))
    return local.prod(axis=2)


def g_matrix(terms: Sequence[PauliString], plan: MeasurementPlan) -> np.ndarray:
    """g(P_j, P_l) for all pairs; the diagonal equals 1/q(P_j)."""
    terms = list(terms)
    codes = pauli_codes(terms)
    if plan.is_classical_shadow:
        return _g_cs_matrix(codes)
    q = plan.qs(terms)
    if plan.kind == DETERMINISTIC:
        cover = covering_matrix(codes, pauli_codes(plan.bases)).astype(float)
        joint = cover.T @ cover / plan.n_shot
    else:
        if not plan.distribution:
            raise ValueError("probabilistic plan without a basis distribution")
        bases = [m for m, _ in plan.distribution]
        probs = np.array([p for _, p in plan.distribution])
        cover = covering_matrix(codes, pauli_codes(bases)).astype(float)
        joint = cover.T @ (probs[:, None] * cover)
    return joint / np.outer(q, q)


def g_factor(p: PauliString, q: PauliString, plan: MeasurementPlan) -> float:
    if plan.is_classical_shadow:
        return g_cs(p, q)
    return float(g_matrix([p, q], plan)[0, 1]) if p != q else 1.0 / plan.qs([p])[0]


# -- exact variances -----------------------------------------------------------
def _product_codes(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # letterwise product of qubit-wise commuting strings (phase is +1)
    return np.where(a == b, 0, a | b)


def pair_expectations(state: StateVector, terms: Sequence[PauliString], mask: np.ndarray) -> np.ndarray:
    """Re Tr(P_j P_l rho) for pairs selected by ``mask`` (must be qubit-wise commuting)."""
    codes = pauli_codes(terms)
    out = np.zeros(mask.shape)
    cache: dict[bytes, float] = {}
    for j, l in zip(*np.nonzero(np.triu(mask))):
        if j == l:
            out[j, j] = 1.0
            continue
        if not qubitwise_commute(terms[j], terms[l]):
            raise ValueError(f"{terms[j]} and {terms[l]} are not qubit-wise commuting")
        prod = _product_codes(codes[j], codes[l])
        key = prod.tobytes()
        if key not in cache:
            cache[key] = pauli_expectation(state, PauliString("".join(_LETTER_OF[int(c)] for c in prod)))
        out[j, l] = out[l, j] = cache[key]
    return out


def variance_shadow(
    state: StateVector, coeffs: Sequence[float], terms: Sequence[PauliString], plan: MeasurementPlan
) -> float:
    """(1/N)[sum_jl a_j a_l g(P_j,P_l) Tr(P_j P_l rho) - Tr(H rho)^2], diagonal g = 1/q."""
    a = np.asarray(coeffs, dtype=float)
    terms = list(terms)
    g = g_matrix(terms, plan)
    t = pair_expectations(state, terms, g != 0)
    mean = float(a @ pauli_expectations(state, terms))
    return float((a @ (g * t) @ a - mean**2) / plan.n_shot)


def variance_fixed_plan(
    state: StateVector, coeffs: Sequence[float], terms: Sequence[PauliString], plan: MeasurementPlan
) -> float:
    """Exact Var(nu) conditional on the emitted bases, from full outcome distributions.

    For deterministic plans this is the true variance of the estimator.  It
    differs from :func:`variance_shadow` by (1/N^2) sum_r (E[nu_r] - Tr(H rho))^2.
    """
    a = np.asarray(coeffs, dtype=float)
    terms = list(terms)
    codes = pauli_codes(terms)
    w = a / plan.qs(terms)
    n = state.n
    outcomes = 1 - 2 * ((np.arange(1 << n)[:, None] >> np.arange(n - 1, -1, -1)) & 1)
    uniq, counts = np.unique([m.letters for m in plan.bases], return_counts=True)
    total = 0.0
    for letters, c in zip(uniq, counts):
        m = PauliString(str(letters))
        covered = covering_matrix(codes, m.codes[None, :])[0]
        probs = basis_probabilities(state, m)
        values = estimate_mu_batch(codes[covered], outcomes) @ w[covered]
        mean = probs @ values
        total += c * (probs @ values**2 - mean**2)
    return float(total / plan.n_shot**2)


def variance_naive(
    state: StateVector, coeffs: Sequence[float], terms: Sequence[PauliString], n_naive: int = 1
) -> float:
    """sum_j a_j^2 (1 - Tr(P_j rho)^2) / N_naive."""
    a = np.asarray(coeffs, dtype=float)
    e = pauli_expectations(state, list(terms))
    return float(np.sum(a**2 * (1 - e**2)) / n_naive)


# -- Haar surrogates -----------------------------------------------------------
def approximation_shadow(coeffs: Sequence[float], terms: Sequence[PauliString], plan: MeasurementPlan) -> float:
    """sum_r G_r^2 / q(P_r) / N_shot."""
    a = np.asarray(coeffs, dtype=float)
    return float(np.sum(a**2 / plan.qs(list(terms))) / plan.n_shot)


def approximation_naive(coeffs: Sequence[float], n_naive: int = 1) -> float:
    return float(np.sum(np.asarray(coeffs, dtype=float) ** 2) / n_naive)


def weighted_inverse_q(weights: Sequence[float] | np.ndarray, q: Sequence[float] | np.ndarray) -> float:
    """<1/q>_G = sum G^2/q / sum G^2 (weights may be any shape matching q)."""
    w2 = np.asarray(weights, dtype=float) ** 2
    q = np.broadcast_to(np.asarray(q, dtype=float), w2.shape)
    return float(np.sum(w2 / q) / np.sum(w2))


def plan_inverse_q(extended: ObservableSum, plan: MeasurementPlan) -> float:
    return weighted_inverse_q(extended.coeffs, plan.qs(extended.paulis))


# -- shot ratios -----------------------------------------------------------------
def shot_ratio_bound(
    inv_q_v: float, inv_q_m: float, n_ba: int, n_bb: int, n_params: int, n_deriv: int = 1
) -> float:
    """Upper estimate of N_shadow^total / N_naive^total with shadows for both M and V."""
    npg = n_params * n_deriv
    return (1 + npg) / (n_ba + npg * n_bb) * (np.sqrt(inv_q_v) + np.sqrt(inv_q_m)) ** 2


def hybrid_shot_ratio_bound(inv_q_v: float, n_ba: int, n_params: int | None = None, n_deriv: int = 1) -> float:
    """(1 + N_alpha)/N_BA * <1/q>_G * 9/4 with alpha = 4/<1/q>_G.

    ``n_params=None`` takes the N_alpha -> 0 limit (negligible M cost).
    """
    n_alpha = 0.0 if n_params is None else 4 * n_params * n_deriv / inv_q_v
    return (1 + n_alpha) / n_ba * inv_q_v * 9 / 4


# -- Haar checks -------------------------------------------------------------------
def haar_states(dim: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Rows are normalised complex Gaussian vectors (Haar-random pure states)."""
    if samples < 1:
        raise EmptySample("need at least one Haar sample")
    v = rng.normal(size=(samples, dim)) + 1j * rng.normal(size=(samples, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def shadow_variance_functional(
    amps: np.ndarray, coeffs: np.ndarray, terms: Sequence[PauliString], g: np.ndarray
) -> float:
    """sum_r G_r^2/q_r + sum_{r != r'} G_r G_r' g Tr(P_r P_r' rho) for a pure state."""
    state = StateVector(amps)
    t = pair_expectations(state, list(terms), g != 0)
    return float(coeffs @ (g * t) @ coeffs)


def haar_variance_closed_form(coeffs: np.ndarray, terms: Sequence[PauliString], g: np.ndarray) -> float:
    """1/(D(D+1)) sum over r!=r', u!=u' of G G G G g g Tr(P_r P_r' P_u P_u')."""
    terms = list(terms)
    n = len(terms[0])
    d = 2**n
    pairs = [(r, s) for r in range(len(terms)) for s in range(len(terms)) if r != s and g[r, s] != 0]
    total = 0.0
    for r, s in pairs:
        for u, v in pairs:
            tr = trace_product([terms[r], terms[s], terms[u], terms[v]], n)
            if tr:
                total += coeffs[r] * coeffs[s] * coeffs[u] * coeffs[v] * g[r, s] * g[u, v] * np.real(tr)
    return float(total / (d * (d + 1)))


def _cycles(perm: tuple[int, ...]) -> list[list[int]]:
    seen, out = set(), []
    for i in range(len(perm)):
        if i in seen:
            continue
        cyc, j = [], i
        while j not in seen:
            seen.add(j)
            cyc.append(j)
            j = perm[j]
        out.append(cyc)
    return out


def haar_moment(ops: Sequence[PauliString]) -> float:
    """E_Haar[prod_i <psi|P_i|psi>] = sum_sigma prod_cycles Tr(...) / (D(D+1)...(D+m-1))."""
    ops = list(ops)
    m, n = len(ops), len(ops[0])
    d = 2**n
    total = 0.0
    for perm in permutations(range(m)):
        term = 1.0
        for cyc in _cycles(perm):
            term *= trace_product([ops[i] for i in cyc], n)
            if term == 0:
                break
        total += np.real(term)
    return float(total / np.prod([d + i for i in range(m)]))


def naive_haar_variance(coeffs: np.ndarray, terms: Sequence[PauliString]) -> float:
    """Var_Haar of sum_r G_r^2 (1 - Tr(P_r rho)^2); one term gives G^4 2D/((D+1)^2 (D+3))."""
    terms = list(terms)
    w = np.asarray(coeffs, dtype=float) ** 2
    total = 0.0
    for r, p in enumerate(terms):
        for u, q in enumerate(terms):
            cov = haar_moment([p, p, q, q]) - haar_moment([p, p]) * haar_moment([q, q])
            total += w[r] * w[u] * cov
    return float(total)


@dataclass
class HaarReport:
    n_qubits: int
    samples: int
    mean_empirical: float
    mean_stderr: float
    mean_closed_form: float
    var_empirical: float
    var_closed_form: float
    naive_mean_empirical: float
    naive_mean_closed_form: float
    naive_var_empirical: float
    naive_var_closed_form: float

    @property
    def mean_z(self) -> float:
        diff = self.mean_empirical - self.mean_closed_form
        # a constant functional has zero spread; compare at round-off level instead
        floor = 1e-12 * max(1.0, abs(self.mean_closed_form))
        if self.mean_stderr <= floor:
            return 0.0 if abs(diff) <= 1e3 * floor else float(np.sign(diff) * np.inf)
        return diff / self.mean_stderr

    def to_text(self) -> str:
        rows = [
            ("shadow mean", self.mean_empirical, self.mean_closed_form),
            ("shadow variance", self.var_empirical, self.var_closed_form),
            ("naive mean", self.naive_mean_empirical, self.naive_mean_closed_form),
            ("naive variance", self.naive_var_empirical, self.naive_var_closed_form),
        ]
        lines = [f"# haar check: {self.n_qubits} qubits, {self.samples} samples", f"{'quantity':<16}{'empirical':>14}{'closed form':>14}"]
        lines += [f"{name:<16}{emp:>14.6g}{cf:>14.6g}" for name, emp, cf in rows]
        lines.append(f"mean z-score {self.mean_z:.3f}")
        return "\n".join(lines) + "\n"


def haar_check(
    extended: ObservableSum, plan: MeasurementPlan, samples: int, rng: np.random.Generator
) -> HaarReport:
    """Compare Haar-sampled statistics of the variance functionals with closed forms.

    The shadow functional is sum_r G_r^2/q_r + cross terms; the naive one is
    sum_r G_r^2 (1 - Tr(P_r rho)^2).
    """
    terms = list(extended.paulis)
    coeffs = extended.coeffs
    n_qubits = extended.n_qubits
    d = 2**n_qubits
    g = g_matrix(terms, plan)
    states = haar_states(d, samples, rng)
    shadow_vals = np.array([shadow_variance_functional(s, coeffs, terms, g) for s in states])
    naive_vals = np.array(
        [np.sum(coeffs**2 * (1 - pauli_expectations(StateVector(s), terms) ** 2)) for s in states]
    )
    return HaarReport(
        n_qubits=n_qubits,
        samples=samples,
        mean_empirical=float(shadow_vals.mean()),
        mean_stderr=float(shadow_vals.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0,
        mean_closed_form=float(np.sum(coeffs**2 / plan.qs(terms))),
        var_empirical=float(shadow_vals.var(ddof=1)) if samples > 1 else 0.0,
        var_closed_form=haar_variance_closed_form(coeffs, terms, g),
        naive_mean_empirical=float(naive_vals.mean()),
        naive_mean_closed_form=float(np.sum(coeffs**2) * (1 - 1 / (d + 1))),
        naive_var_empirical=float(naive_vals.var(ddof=1)) if samples > 1 else 0.0,
        naive_var_closed_form=naive_haar_variance(coeffs, terms),
    )


# -- error propagation ---------------------------------------------------------------
def _pinv_frobenius(m: np.ndarray, cutoff: float) -> float:
    s = np.linalg.svd(np.asarray(m, dtype=float), compute_uv=False)
    keep = s > cutoff * s.max() if s.size and s.max() > 0 else np.zeros_like(s, dtype=bool)
    if not keep.any():
        raise SingularM("M has no singular value above the cutoff")
    return float(np.sqrt(np.sum(1 / s[keep] ** 2)))


def delta_quantities(
    M: np.ndarray,
    V: np.ndarray,
    dv_naive: Sequence[float],
    dm_naive: np.ndarray,
    dv_shadow: Sequence[float],
    dm_shadow: np.ndarray,
    alpha: float = 1.0,
    svd_cutoff: float = 1e-6,
) -> tuple[float, float, float]:
    """(Delta_naive, Delta_shadow, Delta_hybrid) from per-entry standard deviations.

    Delta = ||M^-1||_F sqrt(sum dV^2) + ||M^-1||_F^2 ||V||_2 sqrt(sum dM^2); the
    hybrid form uses the naive dM scaled by 1/alpha.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    inv_f = _pinv_frobenius(M, svd_cutoff)
    v_norm = float(np.linalg.norm(V))

    def combine(dv, dm2):
        return inv_f * np.sqrt(np.sum(np.square(dv))) + inv_f**2 * v_norm * np.sqrt(dm2)

    dm_naive2 = float(np.sum(np.square(dm_naive)))
    return (
        float(combine(dv_naive, dm_naive2)),
        float(combine(dv_shadow, float(np.sum(np.square(dm_shadow))))),
        float(combine(dv_shadow, dm_naive2 / alpha)),
    )


# -- variance tables ---------------------------------------------------------------
@dataclass
class VarianceRow:
    parameters: str
    measurement: str
    variance: float
    approximation: float
    diff: float
    per_k_variance: list[float] = field(default_factory=list)


@dataclass
class VarianceReport:
    rows: list[VarianceRow]

    def to_text(self) -> str:
        head = f"{'Parameters':<12}{'Measurement':<20}{'Variance':>12}{'Approximation':>15}{'Diff':>10}"
        lines = [head]
        for r in self.rows:
            lines.append(
                f"{r.parameters:<12}{r.measurement:<20}{r.variance:>12.4f}{r.approximation:>15.4f}{r.diff:>10.4f}"
            )
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# vqshadow variance table v1\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameters", "measurement", "variance", "approximation", "diff"])
        for r in self.rows:
            w.writerow([r.parameters, r.measurement, repr(r.variance), repr(r.approximation), repr(r.diff)])
        return buf.getvalue()


def variance_row(
    label: str,
    measurement: str,
    v_states: Sequence[StateVector],
    extended: ObservableSum,
    plan: MeasurementPlan | None,
    n_naive: int | None = None,
) -> VarianceRow:
    """Mean over k of Var(V_k), its Haar surrogate, and the mean |difference|.

    ``plan=None`` selects the naive strategy with ``n_naive`` shots per term.
    """
    coeffs, terms = extended.coeffs, list(extended.paulis)
    if plan is None:
        if not n_naive:
            raise ValueError("naive rows need n_naive")
        approx = approximation_naive(coeffs, n_naive)
        per_k = [variance_naive(s, coeffs, terms, n_naive) for s in v_states]
    else:
        approx = approximation_shadow(coeffs, terms, plan)
        per_k = [variance_shadow(s, coeffs, terms, plan) for s in v_states]
    per_k_arr = np.array(per_k)
    return VarianceRow(
        label,
        measurement,
        float(per_k_arr.mean()),
        approx,
        float(np.mean(np.abs(per_k_arr - approx))),
        per_k,
    )
