"""Shadow-based measurement strategies for variational quantum simulation."""
from .ansatz import AnsatzSpec, build_ansatz, prepare_state
from .errors import (
    DimensionMismatch,
    EmptySample,
    InvalidLetter,
    PlanRejected,
    SingularM,
    UncoveredTerm,
    VQShadowError,
)
from .hamiltonians import heisenberg, load_hamiltonian
from .measure import (
    MeasurementPlan,
    build_measurements_classical_shadow,
    build_measurements_derandomization,
    build_measurements_ldf,
    build_measurements_naive,
)
from .pauli import ObservableSum, PauliString, parse_pauli
from .statevec import StateVector, make_rng
from .vqs import EvolutionConfig, EvolutionTrace, run_evolution

__version__ = "0.1.0"

__all__ = [
    "AnsatzSpec",
    "DimensionMismatch",
    "EmptySample",
    "EvolutionConfig",
    "EvolutionTrace",
    "InvalidLetter",
    "MeasurementPlan",
    "ObservableSum",
    "PauliString",
    "PlanRejected",
    "SingularM",
    "StateVector",
    "UncoveredTerm",
    "VQShadowError",
    "build_ansatz",
    "build_measurements_classical_shadow",
    "build_measurements_derandomization",
    "build_measurements_ldf",
    "build_measurements_naive",
    "heisenberg",
    "load_hamiltonian",
    "make_rng",
    "parse_pauli",
    "prepare_state",
    "run_evolution",
]
