"""McLachlan variational time evolution with pluggable M/V estimation.

Each step assembles M and V, solves M theta_dot = V with a truncated-SVD
pseudo-inverse and takes a forward Euler step.  Random streams are keyed by
(seed, trial, purpose, step, k, l) so estimates do not depend on evaluation order.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .analysis import plan_inverse_q
from .ansatz import MODES, AnsatzSpec, as_params, prepare_state
from .errors import SingularM
from .estimator import (
    estimate_M,
    estimate_V,
    exact_MV,
    extended_m_observable,
    extended_v_observable,
    identity_bb,
)
from .measure import (
    DerandomizationParams,
    MeasurementPlan,
    build_measurements_classical_shadow,
    build_measurements_derandomization,
    build_measurements_naive,
    ldf_groups,
)
from .pauli import ObservableSum
from .statevec import expectation, make_rng

log = logging.getLogger(__name__)

STRATEGIES = ("exact", "naive", "classical_shadow", "derandomization", "ldf", "hybrid")
TRACE_SCHEMA = "vqshadow trace v1"
# stream identifiers for make_rng
_V_STREAM, _M_STREAM, _PLAN_STREAM = 1, 2, 3


@dataclass
class EvolutionConfig:
    mode: str
    hamiltonian: ObservableSum
    bb_observable: ObservableSum | None = None
    dt: float = 0.01
    steps: int = 5
    strategy: str = "exact"
    n_total: int | None = None
    alpha: float | None = None
    svd_cutoff: float = 1e-6
    seed: int = 0
    trial: int = 0
    sample_m: bool = False
    hybrid_v_strategy: str = "derandomization"
    derand: DerandomizationParams = field(default_factory=DerandomizationParams)

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.hybrid_v_strategy not in ("classical_shadow", "derandomization", "ldf"):
            raise ValueError("hybrid V strategy must be a shadow-style strategy")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.svd_cutoff < 0:
            raise ValueError("svd_cutoff must be >= 0")
        if self.alpha is not None and not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.strategy != "exact" and (self.n_total is None or self.n_total < 1):
            raise ValueError("sampling strategies need n_total >= 1")
        if self.mode in ("rte", "ite"):
            # the identity only shifts the global phase (rte) or cancels (ite)
            self.hamiltonian = self.hamiltonian.without_identity()
            if self.bb_observable is not None and self.bb_observable != identity_bb(self.hamiltonian.n_qubits):
                raise ValueError("rte/ite use B^dag B = I")
        if len(self.hamiltonian) == 0:
            raise ValueError("Hamiltonian has no non-identity terms")

    @property
    def bb(self) -> ObservableSum:
        return self.bb_observable if self.bb_observable is not None else identity_bb(self.hamiltonian.n_qubits)

    @property
    def v_strategy(self) -> str:
        return self.hybrid_v_strategy if self.strategy == "hybrid" else self.strategy

    @property
    def m_sampled(self) -> bool:
        return self.strategy == "hybrid" or (self.sample_m and self.strategy != "exact")


class _PlanSource:
    """Provides a measurement plan per (step, target) for one observable."""

    def __init__(self, strategy: str, extended: ObservableSum, n_shot: int, key: tuple, tag: int, derand):
        self.strategy, self.extended, self.n_shot, self.key, self.tag = strategy, extended, n_shot, key, tag
        self._fixed = None
        self._groups = None
        if strategy == "derandomization":
            self._fixed = build_measurements_derandomization(extended, n_shot, derand)
        elif strategy == "ldf":
            self._groups = ldf_groups(extended)
        elif strategy == "naive":
            self._fixed = build_measurements_naive(extended, n_total=n_shot)

    def plan(self, step: int, k: int, l: int = 0):
        if self._fixed is not None:
            return self._fixed
        rng = make_rng(*self.key, _PLAN_STREAM, self.tag, step, k, l)
        if self._groups is not None:
            return self._groups.sample_plan(self.n_shot, rng)
        return build_measurements_classical_shadow(self.extended.n_qubits, self.n_shot, rng)

    def reference_plan(self) -> MeasurementPlan:
        return self.plan(0, 0) if self.strategy != "naive" else None


def hybrid_alpha_default(extended: ObservableSum, plan: MeasurementPlan) -> float:
    """alpha = 4 / <1/q>_G, clamped to (0, 1]."""
    return float(min(1.0, 4.0 / plan_inverse_q(extended, plan)))


class Assembler:
    """Builds M and V for one configuration; plans are created once per run."""

    def __init__(self, spec: AnsatzSpec, config: EvolutionConfig):
        if config.hamiltonian.n_qubits != spec.n:
            raise ValueError("Hamiltonian and ansatz qubit counts differ")
        self.spec, self.config = spec, config
        self.key = (config.seed, config.trial)
        self.v_ext, self.v_phi = extended_v_observable(config.hamiltonian, config.mode)
        self.m_ext, self.m_phi = extended_m_observable(config.bb)
        self.v_source = self.m_source = None
        self.alpha = None
        if config.strategy == "exact":
            return
        self.v_source = _PlanSource(
            config.v_strategy, self.v_ext, config.n_total, self.key, _V_STREAM, config.derand
        )
        if config.strategy == "hybrid":
            self.alpha = config.alpha
            if self.alpha is None:
                self.alpha = hybrid_alpha_default(self.v_ext, self.v_source.reference_plan())
            m_shots = max(len(self.m_ext), int(round(self.alpha * config.n_total)))
            self.m_source = _PlanSource("naive", self.m_ext, m_shots, self.key, _M_STREAM, config.derand)
            log.info("hybrid alpha=%.4f, %d shots per M entry", self.alpha, m_shots)
        elif config.sample_m:
            self.m_source = _PlanSource(
                config.strategy, self.m_ext, config.n_total, self.key, _M_STREAM, config.derand
            )

    def assemble(self, params, step: int = 0) -> tuple[np.ndarray, np.ndarray]:
        spec, cfg = self.spec, self.config
        theta = as_params(spec, params)
        M, V = exact_MV(spec, theta, cfg.mode, cfg.hamiltonian, cfg.bb)
        if self.v_source is not None:
            V = np.array(
                [
                    estimate_V(
                        spec, theta, k, self.v_ext, self.v_phi,
                        self.v_source.plan(step, k), make_rng(*self.key, _V_STREAM, step, k),
                    )
                    for k in range(spec.n_params)
                ]
            )
        if self.m_source is not None:
            M = np.zeros((spec.n_params, spec.n_params))
            for k in range(spec.n_params):
                for l in range(k, spec.n_params):
                    M[k, l] = M[l, k] = estimate_M(
                        spec, theta, k, l, self.m_ext, self.m_phi,
                        self.m_source.plan(step, k, l), make_rng(*self.key, _M_STREAM, step, k, l),
                    )
        return M, V


def assemble_MV(spec: AnsatzSpec, params, config: EvolutionConfig, step: int = 0) -> tuple[np.ndarray, np.ndarray]:
    return Assembler(spec, config).assemble(params, step)


def solve_step(M: np.ndarray, V: np.ndarray, dt: float, svd_cutoff: float = 1e-6) -> np.ndarray:
    """dt * pinv(M) V, discarding singular values below svd_cutoff * sigma_max."""
    M = np.asarray(M, dtype=float)
    V = np.asarray(V, dtype=float)
    u, s, vt = np.linalg.svd(M)
    if s.size == 0 or s[0] <= 0:
        raise SingularM("M is zero")
    keep = s > svd_cutoff * s[0]
    if not keep.any():
        raise SingularM("no singular value of M above the cutoff")
    theta_dot = vt[keep].T @ ((u[:, keep].T @ V) / s[keep])
    return theta_dot * dt


def infidelity(spec: AnsatzSpec, params_a, params_b) -> float:
    """sqrt(1 - |<v(a)|v(b)>|^2)."""
    overlap = prepare_state(spec, params_a).inner(prepare_state(spec, params_b))
    return float(np.sqrt(max(0.0, 1.0 - abs(overlap) ** 2)))


@dataclass
class StepRecord:
    step: int
    t: float
    params: np.ndarray
    energy: float
    M: np.ndarray | None = None
    V: np.ndarray | None = None
    theta_dot: np.ndarray | None = None
    infidelity: float | None = None


@dataclass
class EvolutionTrace:
    strategy: str
    mode: str
    records: list[StepRecord] = field(default_factory=list)

    @property
    def params(self) -> np.ndarray:
        return np.array([r.params for r in self.records])

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    @property
    def infidelities(self) -> np.ndarray:
        return np.array([np.nan if r.infidelity is None else r.infidelity for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {TRACE_SCHEMA}: strategy={self.strategy} mode={self.mode}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "t", "energy", "D_I"])
        for r in self.records:
            w.writerow([r.step, repr(r.t), repr(r.energy), "" if r.infidelity is None else repr(r.infidelity)])
        return buf.getvalue()

    def to_json(self) -> str:
        def arr(x):
            return None if x is None else np.asarray(x).tolist()

        body = {
            "schema": TRACE_SCHEMA,
            "strategy": self.strategy,
            "mode": self.mode,
            "steps": [
                {
                    "step": r.step,
                    "t": r.t,
                    "energy": r.energy,
                    "D_I": r.infidelity,
                    "params": arr(r.params),
                    "M": arr(r.M),
                    "V": arr(r.V),
                    "theta_dot": arr(r.theta_dot),
                }
                for r in self.records
            ],
        }
        return json.dumps(body, indent=1)


def _evolve(spec: AnsatzSpec, config: EvolutionConfig, theta0: np.ndarray) -> EvolutionTrace:
    assembler = Assembler(spec, config)
    trace = EvolutionTrace(config.strategy, config.mode)
    theta = theta0.copy()
    for step in range(config.steps + 1):
        energy = expectation(prepare_state(spec, theta), config.hamiltonian)
        rec = StepRecord(step, step * config.dt, theta.copy(), energy)
        trace.records.append(rec)
        if step == config.steps:
            break
        M, V = assembler.assemble(theta, step)
        delta = solve_step(M, V, config.dt, config.svd_cutoff)
        rec.M, rec.V, rec.theta_dot = M, V, delta / config.dt
        theta = theta + delta
    return trace


def run_evolution(
    spec: AnsatzSpec, config: EvolutionConfig, params0=None, paired: bool = True
) -> tuple[EvolutionTrace, EvolutionTrace | None]:
    """Evolve with the configured strategy and, if ``paired``, an exact reference.

    The reference shares the ansatz and initial parameters; D_I at every step
    compares the two parameter vectors.
    """
    theta0 = np.zeros(spec.n_params) if params0 is None else as_params(spec, params0).copy()
    trace = _evolve(spec, config, theta0)
    if not paired:
        return trace, None
    if config.strategy == "exact" and not config.sample_m:
        exact = trace
    else:
        exact_cfg = EvolutionConfig(
            mode=config.mode,
            hamiltonian=config.hamiltonian,
            bb_observable=config.bb_observable,
            dt=config.dt,
            steps=config.steps,
            strategy="exact",
            svd_cutoff=config.svd_cutoff,
            seed=config.seed,
            trial=config.trial,
        )
        exact = _evolve(spec, exact_cfg, theta0)
    for rec, ref in zip(trace.records, exact.records):
        rec.infidelity = infidelity(spec, ref.params, rec.params)
    return trace, exact
