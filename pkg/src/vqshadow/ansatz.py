"""Hardware-efficient ansatz and the ancilla-assisted derivative states.

Parameters are indexed from 0.  Parameter ``k`` is the rotation on qubit
``k % n`` in layer ``k // n``; each layer applies all rotations and then its
CZ entanglers.  Every rotation is exp(-i sigma theta / 2), so its derivative
is g * sigma * R_k with g = -i/2 and a single generator per parameter.

In the (n+1)-qubit derivative states the ancilla is qubit 0 and the system
occupies qubits 1..n.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DimensionMismatch
from .pauli import PauliString
from .statevec import (
    StateVector,
    apply_controlled_pauli,
    apply_cz,
    apply_hadamard,
    apply_matrix,
    apply_pauli,
    apply_single_qubit_rotation,
)

AXES = "xyz"
# derivative coefficient of exp(-i sigma theta/2)
G_COEFF = -0.5j
MODES = ("rte", "ite", "general")
G_CONVENTIONS = {"half": 1.0, "unit": 2.0}

_X = np.array([[0, 1], [1, 0]], dtype=complex)


def entangler_pairs(n: int, layer: int) -> list[tuple[int, int]]:
    """CZ pairs (0-indexed qubits) for ``layer`` (0-indexed).

    Layers 0, 2, ... entangle (0,1), (2,3), ... first and then (1,2), (3,4), ...;
    layers 1, 3, ... use the reverse order.
    """
    first = [(2 * m, 2 * m + 1) for m in range(n // 2)]
    second = [(2 * m + 1, 2 * m + 2) for m in range((n - 1) // 2)]
    return first + second if layer % 2 == 0 else second + first


@dataclass(frozen=True)
class AnsatzSpec:
    n: int
    layers: int
    gate_axes: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("ansatz needs at least one qubit")
        if self.layers < 1:
            raise ValueError("ansatz needs at least one layer")
        object.__setattr__(self, "gate_axes", tuple(a.lower() for a in self.gate_axes))
        if len(self.gate_axes) != self.n * self.layers:
            raise ValueError(f"expected {self.n * self.layers} gate axes, got {len(self.gate_axes)}")
        bad = set(self.gate_axes) - set(AXES)
        if bad:
            raise ValueError(f"unknown gate axes {sorted(bad)}")

    @property
    def n_params(self) -> int:
        return self.n * self.layers

    def qubit_of(self, k: int) -> int:
        return k % self.n

    def generator(self, k: int) -> PauliString:
        """The Pauli inserted by d/dtheta_k, as an n-qubit string."""
        self._check_index(k)
        letters = ["I"] * self.n
        letters[self.qubit_of(k)] = self.gate_axes[k].upper()
        return PauliString("".join(letters))

    def _check_index(self, k: int) -> None:
        if not 0 <= k < self.n_params:
            raise IndexError(f"parameter index {k} outside [0, {self.n_params})")

    def operations(self) -> Iterator[tuple]:
        """Gate sequence: ("rot", k) and ("cz", a, b) in application order."""
        for layer in range(self.layers):
            for q in range(self.n):
                yield ("rot", layer * self.n + q)
            for a, b in entangler_pairs(self.n, layer):
                yield ("cz", a, b)


def build_ansatz(
    n: int,
    layers: int = 4,
    rng: np.random.Generator | None = None,
    gate_axes: Sequence[str] | None = None,
) -> AnsatzSpec:
    """Ansatz with explicit axes, or axes drawn uniformly from {x, y, z}."""
    if gate_axes is None:
        if rng is None:
            raise ValueError("need either rng or gate_axes")
        gate_axes = [AXES[i] for i in rng.integers(0, 3, size=n * layers)]
    return AnsatzSpec(n, layers, tuple(gate_axes))


def as_params(spec: AnsatzSpec, params: Sequence[float] | np.ndarray) -> np.ndarray:
    theta = np.asarray(params, dtype=float).reshape(-1)
    if theta.size != spec.n_params:
        raise DimensionMismatch(f"expected {spec.n_params} parameters, got {theta.size}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("parameters must be finite")
    return theta


def reference_state(n: int) -> StateVector:
    """H^n |0...0>."""
    return StateVector(np.full(1 << n, 2 ** (-n / 2), dtype=complex), copy=False)


def _run(spec: AnsatzSpec, theta: np.ndarray, state: StateVector, offset: int, hooks: dict) -> StateVector:
    for op in spec.operations():
        if op[0] == "rot":
            k = op[1]
            apply_single_qubit_rotation(state, offset + spec.qubit_of(k), spec.gate_axes[k], theta[k])
            for hook in hooks.get(k, ()):
                hook(state)
        else:
            apply_cz(state, offset + op[1], offset + op[2])
    return state


def prepare_state(spec: AnsatzSpec, params) -> StateVector:
    """|v(theta)> = R |v_ref>."""
    theta = as_params(spec, params)
    return _run(spec, theta, reference_state(spec.n), 0, {})


def branch_state(spec: AnsatzSpec, params, k: int | None = None) -> StateVector:
    """R_k |v_ref> (generator inserted after rotation k), or R |v_ref> for k=None."""
    theta = as_params(spec, params)
    hooks = {}
    if k is not None:
        spec._check_index(k)
        gen = spec.generator(k)
        hooks[k] = [lambda s: apply_pauli(s, gen)]
    return _run(spec, theta, reference_state(spec.n), 0, hooks)


def _ancilla_input(n: int, phi: float) -> StateVector:
    """(|0> + e^{i phi}|1>)/sqrt(2) on the ancilla, |v_ref> on the system."""
    state = StateVector.zero(n + 1)
    for q in range(n + 1):
        apply_hadamard(state, q)
    apply_matrix(state, 0, np.diag([1.0, np.exp(1j * phi)]))
    return state


def _controlled_insert(spec: AnsatzSpec, k: int, on_zero: bool):
    gen = spec.generator(k)

    def hook(state: StateVector) -> None:
        if on_zero:
            apply_matrix(state, 0, _X)
        apply_controlled_pauli(state, 0, gen, offset=1)
        if on_zero:
            apply_matrix(state, 0, _X)

    return hook


def prepare_v_state(spec: AnsatzSpec, params, k: int, phi: float) -> StateVector:
    """(|0> R_k|v_ref> + e^{i phi} |1> R|v_ref>)/sqrt(2), built gate by gate.

    <X (x) P> on this state equals Re[e^{i phi} <v_ref|R_k^dag P R|v_ref>].
    """
    theta = as_params(spec, params)
    spec._check_index(k)
    hooks = {k: [_controlled_insert(spec, k, on_zero=True)]}
    return _run(spec, theta, _ancilla_input(spec.n, phi), 1, hooks)


def prepare_m_state(spec: AnsatzSpec, params, k: int, l: int, phi: float) -> StateVector:
    """(|0> R_k|v_ref> + e^{i phi} |1> R_l|v_ref>)/sqrt(2), built gate by gate.

    <X (x) P> on this state equals Re[e^{i phi} <v_ref|R_k^dag P R_l|v_ref>].
    """
    theta = as_params(spec, params)
    spec._check_index(k)
    spec._check_index(l)
    if k > l:
        raise ValueError(f"need k <= l, got k={k}, l={l}")
    hooks: dict[int, list] = {k: [_controlled_insert(spec, k, on_zero=True)]}
    hooks.setdefault(l, []).append(_controlled_insert(spec, l, on_zero=False))
    return _run(spec, theta, _ancilla_input(spec.n, phi), 1, hooks)


def derivative_phase_and_weight(mode: str, alpha: float, convention: str = "half") -> tuple[float, float]:
    """Polar split G e^{i phi} of the V-side prefactor for one Hamiltonian term.

    rte: -i g* alpha, ite: -g* alpha, general: g* alpha (coefficient of B^dag A).
    A negative alpha keeps phi and makes G negative.  ``convention="unit"``
    doubles G, i.e. uses |g| = 1.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    phi = {"rte": 0.0, "ite": -np.pi / 2, "general": np.pi / 2}[mode]
    return float(alpha) * abs(G_COEFF) * G_CONVENTIONS[convention], phi


def m_weight(beta: float, convention: str = "half") -> float:
    """Weight of one B^dag B term in M: g* g beta (phase 0)."""
    return float(beta) * (abs(G_COEFF) * G_CONVENTIONS[convention]) ** 2
