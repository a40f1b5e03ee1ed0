"""Shadow-style estimator nu, naive per-term estimation, and the M/V estimators.

V_k and M_kl are read off ancilla-assisted states as expectations of
X (x) P sums, so every strategy only ever estimates <sum_r G_r X(x)P_r>.
The exact routines compute the same numbers from inner products of branch
states and serve as oracles and as the exact-M experiment mode.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ansatz import (
    G_COEFF,
    AnsatzSpec,
    as_params,
    branch_state,
    derivative_phase_and_weight,
    m_weight,
    prepare_m_state,
    prepare_v_state,
)
from .errors import DimensionMismatch
from .measure import MeasurementPlan, NaivePlan, build_measurements_naive, covering_matrix, estimate_mu_batch
from .pauli import ObservableSum, PauliString, pauli_codes
from .statevec import BasisSampler, StateVector, apply_observable


@dataclass
class NuEstimate:
    value: float
    shots_used: int
    per_shot: np.ndarray | None = None


def estimate_nu(
    state: StateVector,
    coeffs: Sequence[float] | np.ndarray,
    terms: Sequence[PauliString],
    plan: MeasurementPlan,
    rng: np.random.Generator,
    keep_per_shot: bool = False,
) -> NuEstimate:
    """nu = (1/N) sum_r sum_j a_j f(P_j, M_r) mu(P_j, b_r) / q(P_j).

    Shots sharing a basis are sampled together; the per-shot values are put
    back in plan order.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    terms = list(terms)
    if coeffs.shape != (len(terms),):
        raise DimensionMismatch(f"{coeffs.size} coefficients for {len(terms)} terms")
    if state.n != plan.n_qubits:
        raise DimensionMismatch(f"{plan.n_qubits}-qubit plan on {state.n}-qubit state")
    if not terms:
        return NuEstimate(0.0, plan.n_shot, np.zeros(plan.n_shot) if keep_per_shot else None)
    weights = coeffs / plan.qs(terms)
    term_codes = pauli_codes(terms)

    slots: dict[PauliString, list[int]] = {}
    for r, m in enumerate(plan.bases):
        slots.setdefault(m, []).append(r)
    uniq = list(slots)
    cover = covering_matrix(term_codes, pauli_codes(uniq))

    sampler = BasisSampler(state)
    sampler.prefetch(m for m, covered in zip(uniq, cover) if covered.any())
    nu_r = np.zeros(plan.n_shot)
    for m, covered in zip(uniq, cover):
        idx = np.flatnonzero(covered)
        if idx.size == 0:
            continue
        shots = slots[m]
        outcomes = sampler.sample(m, len(shots), rng)
        nu_r[shots] = estimate_mu_batch(term_codes[idx], outcomes) @ weights[idx]
    return NuEstimate(float(nu_r.mean()), plan.n_shot, nu_r if keep_per_shot else None)


def estimate_nu_naive(
    state: StateVector,
    coeffs: Sequence[float] | np.ndarray,
    terms: Sequence[PauliString],
    n_naive: int | NaivePlan,
    rng: np.random.Generator,
) -> NuEstimate:
    """sum_j a_j * mean(mu) with each term measured in its own basis."""
    coeffs = np.asarray(coeffs, dtype=float)
    terms = list(terms)
    if coeffs.shape != (len(terms),):
        raise DimensionMismatch(f"{coeffs.size} coefficients for {len(terms)} terms")
    if isinstance(n_naive, NaivePlan):
        plan = n_naive
        if list(plan.terms.paulis) != terms:
            raise ValueError("naive plan was built for different terms")
    else:
        plan = build_measurements_naive(ObservableSum(zip(np.ones(len(terms)), terms), n=state.n), n_naive)
    sampler = BasisSampler(state)
    sampler.prefetch(plan.bases)
    total = 0.0
    for a, p, basis, shots in zip(coeffs, terms, plan.bases, plan.shots):
        if len(p) != state.n:
            raise DimensionMismatch(f"{len(p)}-qubit term on {state.n}-qubit state")
        mu = estimate_mu_batch(p.codes[None, :], sampler.sample(basis, shots, rng))
        total += a * mu.mean()
    return NuEstimate(float(total), plan.total_shots)


# -- extended observables ----------------------------------------------------
def extended_v_observable(
    hamiltonian: ObservableSum, mode: str, convention: str = "half"
) -> tuple[ObservableSum, float]:
    """sum_r G_r X(x)P_r and the shared phase phi for the V side."""
    terms = []
    phi = derivative_phase_and_weight(mode, 1.0, convention)[1]
    for a, p in hamiltonian:
        g, _ = derivative_phase_and_weight(mode, a, convention)
        terms.append((g, p))
    return ObservableSum(terms, n=hamiltonian.n_qubits).extend_with_x(), phi


def extended_m_observable(bb: ObservableSum, convention: str = "half") -> tuple[ObservableSum, float]:
    """sum_q g* g beta_q X(x)P_q; the phase is always 0."""
    terms = [(m_weight(b, convention), p) for b, p in bb]
    return ObservableSum(terms, n=bb.n_qubits).extend_with_x(), 0.0


def identity_bb(n: int) -> ObservableSum:
    return ObservableSum([(1.0, PauliString.identity(n))])


def _estimate(state: StateVector, ext: ObservableSum, plan, rng) -> float:
    if isinstance(plan, NaivePlan):
        return estimate_nu_naive(state, ext.coeffs, ext.paulis, plan, rng).value
    return estimate_nu(state, ext.coeffs, ext.paulis, plan, rng).value


def estimate_V(
    spec: AnsatzSpec,
    params,
    k: int,
    extended: ObservableSum,
    phi: float,
    plan: MeasurementPlan | NaivePlan,
    rng: np.random.Generator,
) -> float:
    """Estimate V_k from the ancilla-assisted state of parameter k."""
    if extended.n_qubits != spec.n + 1:
        raise DimensionMismatch("V observable must be extended by one ancilla qubit")
    state = prepare_v_state(spec, params, k, phi)
    return _estimate(state, extended, plan, rng)


def estimate_M(
    spec: AnsatzSpec,
    params,
    k: int,
    l: int,
    extended: ObservableSum,
    phi: float,
    plan: MeasurementPlan | NaivePlan,
    rng: np.random.Generator,
) -> float:
    """Estimate M_kl (k <= l) from the two-insertion ancilla state."""
    if k > l:
        raise ValueError(f"need k <= l, got k={k}, l={l}")
    if extended.n_qubits != spec.n + 1:
        raise DimensionMismatch("M observable must be extended by one ancilla qubit")
    state = prepare_m_state(spec, params, k, l, phi)
    return _estimate(state, extended, plan, rng)


# -- exact values ------------------------------------------------------------
def _branch_matrix(spec: AnsatzSpec, params) -> np.ndarray:
    return np.stack([branch_state(spec, params, k).amplitudes for k in range(spec.n_params)])


def exact_V(spec: AnsatzSpec, params, k: int, mode: str, hamiltonian: ObservableSum) -> float:
    """sum_r G_r Re[e^{i phi} <v_ref|R_k^dag P_r R|v_ref>]."""
    _, phi = derivative_phase_and_weight(mode, 1.0)
    a = branch_state(spec, params, k).amplitudes
    b = branch_state(spec, params).amplitudes
    hb = apply_observable(b, spec.n, hamiltonian)
    return float(abs(G_COEFF) * np.real(np.exp(1j * phi) * np.vdot(a, hb)))


def exact_M(spec: AnsatzSpec, params, k: int, l: int, bb: ObservableSum | None = None) -> float:
    """sum_q g* g beta_q Re[<v_ref|R_k^dag P_q R_l|v_ref>]."""
    bb = bb if bb is not None else identity_bb(spec.n)
    a = branch_state(spec, params, k).amplitudes
    b = branch_state(spec, params, l).amplitudes
    return float(abs(G_COEFF) ** 2 * np.real(np.vdot(a, apply_observable(b, spec.n, bb))))


def exact_MV(
    spec: AnsatzSpec, params, mode: str, hamiltonian: ObservableSum, bb: ObservableSum | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """All of M and V at once from the N_P branch states."""
    theta = as_params(spec, params)
    bb = bb if bb is not None else identity_bb(spec.n)
    branches = _branch_matrix(spec, theta)
    full = branch_state(spec, theta).amplitudes
    g_abs = abs(G_COEFF)
    bb_branches = np.stack([apply_observable(v, spec.n, bb) for v in branches])
    M = g_abs**2 * np.real(branches.conj() @ bb_branches.T)
    M = (M + M.T) / 2
    _, phi = derivative_phase_and_weight(mode, 1.0)
    h_full = apply_observable(full, spec.n, hamiltonian)
    V = g_abs * np.real(np.exp(1j * phi) * (branches.conj() @ h_full))
    return M, V
