"""Dense state-vector simulation.

Amplitude index ``x`` encodes qubit 0 in its most significant bit, matching
the left-to-right letter order of :class:`~vqshadow.pauli.PauliString`.
Gate functions mutate the state in place and return it for chaining.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch
from .pauli import ObservableSum, PauliString

MAX_QUBITS = 24
NORM_TOL = 1e-10

_SQRT1_2 = 1 / np.sqrt(2)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT1_2
S_DAG = np.array([[1, 0], [0, -1j]], dtype=complex)
PAULI_MATRIX = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
# rotation taking each measurement basis onto Z
_BASIS_CHANGE = {"X": HADAMARD, "Y": HADAMARD @ S_DAG, "Z": None}


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-style generator: identical ``(seed, *keys)`` give identical streams.

    Keys identify a stream (trial, step, k, l, ...) so results do not depend on
    the order in which independent estimations are scheduled.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


class StateVector:
    """Unit-norm complex amplitudes on ``n`` qubits."""

    __slots__ = ("amplitudes", "n")

    def __init__(self, amplitudes: Iterable[complex] | np.ndarray, copy: bool = True):
        amps = np.array(amplitudes, dtype=complex, copy=copy).reshape(-1)
        n = int(amps.size).bit_length() - 1
        if amps.size < 2 or 1 << n != amps.size:
            raise DimensionMismatch(f"amplitude count {amps.size} is not a power of two >= 2")
        if n > MAX_QUBITS:
            raise DimensionMismatch(f"{n} qubits exceeds the {MAX_QUBITS}-qubit ceiling")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalised (|psi|^2 = {norm})")
        self.amplitudes = amps
        self.n = n

    @classmethod
    def zero(cls, n: int) -> "StateVector":
        if not 1 <= n <= MAX_QUBITS:
            raise DimensionMismatch(f"qubit count {n} outside [1, {MAX_QUBITS}]")
        amps = np.zeros(1 << n, dtype=complex)
        amps[0] = 1.0
        return cls(amps, copy=False)

    @classmethod
    def from_unnormalized(cls, amplitudes: np.ndarray) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex)
        return cls(amps / np.linalg.norm(amps))

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes, copy=True)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __repr__(self) -> str:
        return f"StateVector(n={self.n})"


def _check_qubit(state: StateVector, q: int) -> None:
    if not 0 <= q < state.n:
        raise IndexError(f"qubit {q} out of range for {state.n}-qubit state")


def apply_matrix(state: StateVector, qubit: int, u: np.ndarray) -> StateVector:
    _check_qubit(state, qubit)
    view = state.amplitudes.reshape(1 << qubit, 2, 1 << (state.n - qubit - 1))
    a0 = view[:, 0, :].copy()
    a1 = view[:, 1, :]
    view[:, 0, :] = u[0, 0] * a0 + u[0, 1] * a1
    view[:, 1, :] = u[1, 0] * a0 + u[1, 1] * a1
    return state


def rotation_matrix(axis: str, angle: float) -> np.ndarray:
    """exp(-i sigma_axis angle / 2)."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    axis = axis.lower()
    if axis == "x":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if axis == "y":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if axis == "z":
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]], dtype=complex)
    raise ValueError(f"unknown rotation axis {axis!r}")


def apply_single_qubit_rotation(state: StateVector, qubit: int, axis: str, angle: float) -> StateVector:
    return apply_matrix(state, qubit, rotation_matrix(axis, angle))


def apply_hadamard(state: StateVector, qubit: int) -> StateVector:
    return apply_matrix(state, qubit, HADAMARD)


def apply_cz(state: StateVector, control: int, target: int) -> StateVector:
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise ValueError("CZ control and target must differ")
    t = state.amplitudes.reshape((2,) * state.n)
    idx = [slice(None)] * state.n
    idx[control] = 1
    idx[target] = 1
    t[tuple(idx)] *= -1
    return state


def _masks(p: PauliString, offset: int, n: int) -> tuple[int, int, int]:
    xmask = zmask = 0
    ny = 0
    for i, c in enumerate(p.letters):
        bit = 1 << (n - 1 - (i + offset))
        if c in "XY":
            xmask |= bit
        if c in "ZY":
            zmask |= bit
        ny += c == "Y"
    return xmask, zmask, ny


_INDEX_CACHE: dict[int, np.ndarray] = {}


def _indices(n: int) -> np.ndarray:
    idx = _INDEX_CACHE.get(n)
    if idx is None:
        idx = _INDEX_CACHE[n] = np.arange(1 << n, dtype=np.int64)
    return idx


def _pauli_action(amps: np.ndarray, n: int, p: PauliString, offset: int = 0) -> np.ndarray:
    """Return P|amps> as a new array (P acting on qubits offset..offset+len(p)-1)."""
    xmask, zmask, ny = _masks(p, offset, n)
    idx = _indices(n)
    signs = 1.0 - 2.0 * (np.bitwise_count(idx & zmask) & 1)
    # P|x> = i^ny (-1)^{|x & z|} |x ^ xmask>
    out = np.empty_like(amps)
    out[idx ^ xmask] = (1j**ny) * signs * amps
    return out


def apply_pauli(state: StateVector, p: PauliString, offset: int = 0) -> StateVector:
    if offset < 0 or offset + len(p) > state.n:
        raise DimensionMismatch(f"{p} at offset {offset} does not fit {state.n} qubits")
    state.amplitudes[:] = _pauli_action(state.amplitudes, state.n, p, offset)
    return state


def apply_controlled_pauli(state: StateVector, control: int, p: PauliString, offset: int) -> StateVector:
    """Apply ``p`` to qubits ``offset..`` on the branch where ``control`` is |1>."""
    _check_qubit(state, control)
    if offset < 0 or offset + len(p) > state.n:
        raise DimensionMismatch(f"{p} at offset {offset} does not fit {state.n} qubits")
    if control in range(offset, offset + len(p)) and p[control - offset] != "I":
        raise ValueError("control qubit overlaps the Pauli support")
    moved = _pauli_action(state.amplitudes, state.n, p, offset)
    on = ((_indices(state.n) >> (state.n - 1 - control)) & 1) == 1
    state.amplitudes[on] = moved[on]
    return state


def pauli_expectation(state: StateVector, p: PauliString) -> float:
    if len(p) != state.n:
        raise DimensionMismatch(f"{len(p)}-qubit Pauli on {state.n}-qubit state")
    val = np.vdot(state.amplitudes, _pauli_action(state.amplitudes, state.n, p))
    if abs(val.imag) > 1e-10:
        raise ArithmeticError(f"<{p}> has imaginary part {val.imag}")
    return float(val.real)


def pauli_expectations(state: StateVector, paulis: Sequence[PauliString]) -> np.ndarray:
    return np.array([pauli_expectation(state, p) for p in paulis], dtype=float)


def apply_observable(amps: np.ndarray, n: int, obs: ObservableSum) -> np.ndarray:
    """O|amps> for a weighted Pauli sum (not normalised)."""
    if obs.n_qubits != n:
        raise DimensionMismatch(f"{obs.n_qubits}-qubit observable on {n}-qubit vector")
    out = np.zeros_like(amps)
    for c, p in obs:
        out += c * _pauli_action(amps, n, p)
    return out


def expectation(state: StateVector, obs: ObservableSum) -> float:
    """sum_j a_j <psi|P_j|psi>."""
    if obs.n_qubits != state.n:
        raise DimensionMismatch(f"{obs.n_qubits}-qubit observable on {state.n}-qubit state")
    if len(obs) == 0:
        return 0.0
    return float(np.dot(obs.coeffs, pauli_expectations(state, obs.paulis)))


def _check_basis(basis: PauliString, n: int) -> None:
    if len(basis) != n:
        raise DimensionMismatch(f"{len(basis)}-qubit basis on {n}-qubit state")
    if "I" in basis.letters:
        raise ValueError(f"measurement basis {basis} contains an identity letter")


def basis_probabilities(state: StateVector, basis: PauliString) -> np.ndarray:
    """Outcome distribution after rotating ``basis`` onto the computational basis."""
    _check_basis(basis, state.n)
    rotated = state.copy()
    for q, c in enumerate(basis.letters):
        u = _BASIS_CHANGE[c]
        if u is not None:
            apply_matrix(rotated, q, u)
    probs = np.abs(rotated.amplitudes) ** 2
    return np.clip(probs, 0.0, None)


def _draw(cdf: np.ndarray, n: int, shots: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(shots)
    outcome = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    shifts = np.arange(n - 1, -1, -1)
    bits = (outcome[:, None] >> shifts) & 1
    return (1 - 2 * bits).astype(np.int8)


def sample_in_basis(
    state: StateVector, basis: PauliString, rng: np.random.Generator, shots: int | None = None
) -> np.ndarray:
    """Measure in ``basis``; outcomes are +1 for bit 0 and -1 for bit 1.

    Returns shape ``(n,)`` when ``shots`` is None, else ``(shots, n)``.
    """
    cdf = np.cumsum(basis_probabilities(state, basis))
    out = _draw(cdf, state.n, 1 if shots is None else shots, rng)
    return out[0] if shots is None else out


def _rotated(amps: np.ndarray, n: int, qubit: int, u: np.ndarray) -> np.ndarray:
    """Out-of-place single-qubit gate on a raw amplitude array."""
    view = amps.reshape(1 << qubit, 2, 1 << (n - qubit - 1))
    out = np.empty_like(view)
    out[:, 0, :] = u[0, 0] * view[:, 0, :] + u[0, 1] * view[:, 1, :]
    out[:, 1, :] = u[1, 0] * view[:, 0, :] + u[1, 1] * view[:, 1, :]
    return out.reshape(-1)


def basis_probabilities_many(state: StateVector, bases: Iterable[PauliString]) -> dict[PauliString, np.ndarray]:
    """Outcome distributions for several bases, sharing work between common prefixes.

    Bases are walked as a prefix tree, so a rotation on qubit i is applied once
    per distinct prefix of length i + 1 rather than once per basis.
    """
    uniq = sorted(set(bases), key=lambda b: b.letters)
    for b in uniq:
        _check_basis(b, state.n)
    out: dict[PauliString, np.ndarray] = {}
    n = state.n

    def visit(amps: np.ndarray, depth: int, group: list[PauliString]) -> None:
        if depth == n:
            probs = np.abs(amps) ** 2
            for b in group:
                out[b] = probs
            return
        by_letter: dict[str, list[PauliString]] = {}
        for b in group:
            by_letter.setdefault(b.letters[depth], []).append(b)
        for letter, sub in by_letter.items():
            u = _BASIS_CHANGE[letter]
            visit(amps if u is None else _rotated(amps, n, depth, u), depth + 1, sub)

    if uniq:
        visit(state.amplitudes, 0, uniq)
    return out


class BasisSampler:
    """Caches the rotated outcome distribution per basis for one fixed state."""

    def __init__(self, state: StateVector):
        self.state = state
        self._cdf: dict[PauliString, np.ndarray] = {}

    def prefetch(self, bases: Iterable[PauliString]) -> None:
        """Compute the distributions of many bases at once (see basis_probabilities_many)."""
        todo = [b for b in set(bases) if b not in self._cdf]
        for b, probs in basis_probabilities_many(self.state, todo).items():
            self._cdf[b] = np.cumsum(probs)

    @property
    def n(self) -> int:
        return self.state.n

    def sample(self, basis: PauliString, shots: int, rng: np.random.Generator) -> np.ndarray:
        cdf = self._cdf.get(basis)
        if cdf is None:
            cdf = self._cdf[basis] = np.cumsum(basis_probabilities(self.state, basis))
        return _draw(cdf, self.state.n, shots, rng)
