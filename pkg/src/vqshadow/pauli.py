"""Pauli strings, phased products and weighted Pauli sums.

Qubit ordering is fixed throughout the package: the leftmost letter is qubit 0
(the most significant bit of a computational-basis index).  After
:func:`extend_with_x` the ancilla therefore sits at position 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidLetter

LETTERS = "IXYZ"
CODE = {"I": 0, "X": 1, "Y": 2, "Z": 3}

# (a, b) -> (phase, a*b) for single-qubit Paulis
_PRODUCT: dict[tuple[str, str], tuple[complex, str]] = {}
for _a in LETTERS:
    _PRODUCT[("I", _a)] = (1, _a)
    _PRODUCT[(_a, "I")] = (1, _a)
    _PRODUCT[(_a, _a)] = (1, "I")
for _a, _b, _c in ("XYZ", "YZX", "ZXY"):
    _PRODUCT[(_a, _b)] = (1j, _c)
    _PRODUCT[(_b, _a)] = (-1j, _c)


@dataclass(frozen=True, order=True)
class PauliString:
    """Tensor product of single-qubit Paulis, e.g. ``PauliString("XYI")``."""

    letters: str

    def __post_init__(self) -> None:
        if not isinstance(self.letters, str) or not self.letters:
            raise InvalidLetter("Pauli string must be a non-empty str")
        bad = set(self.letters) - set(LETTERS)
        if bad:
            raise InvalidLetter(f"invalid Pauli letters {sorted(bad)} in {self.letters!r}")

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return self.letters

    def __getitem__(self, i: int) -> str:
        return self.letters[i]

    @property
    def n(self) -> int:
        return len(self.letters)

    @cached_property
    def codes(self) -> np.ndarray:
        """Letters as uint8 codes, I=0 X=1 Y=2 Z=3."""
        return np.array([CODE[c] for c in self.letters], dtype=np.uint8)

    @property
    def is_identity(self) -> bool:
        return set(self.letters) == {"I"}

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls("I" * n)


@dataclass(frozen=True)
class PhasedPauli:
    phase: complex
    pauli: PauliString

    def __post_init__(self) -> None:
        if self.phase not in (1, -1, 1j, -1j):
            raise ValueError(f"phase must be a fourth root of unity, got {self.phase}")


def parse_pauli(text: str) -> PauliString:
    return PauliString(text.strip())


def locality(p: PauliString) -> int:
    """Number of non-identity letters."""
    return sum(c != "I" for c in p.letters)


def _check_same_length(p: PauliString, q: PauliString) -> None:
    if len(p) != len(q):
        raise DimensionMismatch(f"length mismatch: {p} vs {q}")


def multiply(p: PauliString, q: PauliString) -> PhasedPauli:
    _check_same_length(p, q)
    phase: complex = 1
    out = []
    for a, b in zip(p.letters, q.letters):
        ph, c = _PRODUCT[(a, b)]
        phase *= ph
        out.append(c)
    return PhasedPauli(_snap_phase(phase), PauliString("".join(out)))


def _snap_phase(z: complex) -> complex:
    # products of +-1, +-i stay exact in floating point, but normalise the type
    z = complex(z)
    if z.imag == 0:
        return int(z.real)
    return complex(0, int(z.imag))


def extend_with_x(p: PauliString) -> PauliString:
    """Prepend an ancilla ``X``: P -> X (x) P."""
    return PauliString("X" + p.letters)


def qubitwise_commute(p: PauliString, q: PauliString) -> bool:
    _check_same_length(p, q)
    return all(a == b or a == "I" or b == "I" for a, b in zip(p.letters, q.letters))


def trace_product(paulis: Sequence[PauliString], n: int) -> complex | float:
    """Tr(P1 P2 ... Pm) on ``n`` qubits, evaluated symbolically.

    Returns a float when the trace is real (always the case for Hermitian
    chains) and a complex number otherwise.
    """
    if not paulis:
        return float(2**n)
    for p in paulis:
        if len(p) != n:
            raise DimensionMismatch(f"{p} is not an {n}-qubit string")
    phase: complex = 1
    acc = paulis[0]
    for p in paulis[1:]:
        step = multiply(acc, p)
        phase *= step.phase
        acc = step.pauli
    if not acc.is_identity:
        return 0.0
    value = complex(_snap_phase(phase)) * 2**n
    return float(value.real) if value.imag == 0 else value


def pauli_codes(paulis: Sequence[PauliString]) -> np.ndarray:
    """Stack strings into a ``(K, n)`` uint8 code matrix."""
    if not paulis:
        return np.zeros((0, 0), dtype=np.uint8)
    return np.stack([p.codes for p in paulis])


def _as_pauli(p: PauliString | str) -> PauliString:
    return p if isinstance(p, PauliString) else PauliString(p)


class ObservableSum:
    """Real-weighted sum of equal-length Pauli strings.

    Duplicate strings are merged and zero coefficients dropped on
    construction; first-appearance order is preserved otherwise.
    """

    __slots__ = ("_terms", "_n")

    def __init__(self, terms: Iterable[tuple[float, PauliString | str]], n: int | None = None):
        merged: dict[PauliString, float] = {}
        for coeff, p in terms:
            p = _as_pauli(p)
            coeff = float(coeff)
            if not math.isfinite(coeff):
                raise ValueError(f"non-finite coefficient {coeff} for {p}")
            if n is None:
                n = len(p)
            elif len(p) != n:
                raise DimensionMismatch(f"term {p} has {len(p)} qubits, expected {n}")
            merged[p] = merged.get(p, 0.0) + coeff
        if n is None:
            raise ValueError("empty ObservableSum needs an explicit qubit count")
        self._terms = tuple((c, p) for p, c in merged.items() if c != 0.0)
        self._n = n

    @property
    def n_qubits(self) -> int:
        return self._n

    @property
    def terms(self) -> tuple[tuple[float, PauliString], ...]:
        return self._terms

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([c for c, _ in self._terms], dtype=float)

    @property
    def paulis(self) -> tuple[PauliString, ...]:
        return tuple(p for _, p in self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[float, PauliString]]:
        return iter(self._terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ObservableSum):
            return NotImplemented
        return self._n == other._n and self._terms == other._terms

    def __repr__(self) -> str:
        body = " + ".join(f"{c:g}*{p}" for c, p in self._terms[:6])
        more = f" + ... ({len(self)} terms)" if len(self) > 6 else ""
        return f"ObservableSum({body}{more})"

    def scaled(self, factor: float) -> "ObservableSum":
        return ObservableSum(((factor * c, p) for c, p in self._terms), n=self._n)

    def extend_with_x(self) -> "ObservableSum":
        return ObservableSum(((c, extend_with_x(p)) for c, p in self._terms), n=self._n + 1)

    def without_identity(self) -> "ObservableSum":
        return ObservableSum(((c, p) for c, p in self._terms if not p.is_identity), n=self._n)

    def identity_coefficient(self) -> float:
        return sum(c for c, p in self._terms if p.is_identity)

    # -- text format ------------------------------------------------------
    @classmethod
    def from_text(cls, text: str) -> "ObservableSum":
        terms = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected '<coefficient> <letters>', got {raw!r}")
            try:
                coeff = float(parts[0])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: bad coefficient {parts[0]!r}") from exc
            terms.append((coeff, parse_pauli(parts[1])))
        if not terms:
            raise ValueError("no terms found")
        return cls(terms)

    def to_text(self, header: Sequence[str] = ()) -> str:
        lines = [f"# {h}" for h in header]
        lines += [f"{c!r} {p}" for c, p in self._terms]
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, path: str | Path) -> "ObservableSum":
        return cls.from_text(Path(path).read_text())

    def save(self, path: str | Path, header: Sequence[str] = ()) -> None:
        Path(path).write_text(self.to_text(header))
