"""Covering/estimation functions and measurement-basis builders.

A basis ``M`` covers a Pauli string ``P`` when every non-identity letter of
``P`` equals the letter of ``M`` at that position.  Plans come in two kinds:

* ``probabilistic``: bases are draws from a distribution q_m(M) and the
  covering probability is q(P) = sum_M q_m(M) f(P, M).  Classical shadows use
  the closed form 3^-locality(P); LDF plans keep their finite distribution.
* ``deterministic``: bases are fixed and q(P) is the covered fraction of them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, PlanRejected, UncoveredTerm
from .pauli import CODE, ObservableSum, PauliString, locality, pauli_codes

PROBABILISTIC = "probabilistic"
DETERMINISTIC = "deterministic"
_LETTER_OF = {v: k for k, v in CODE.items()}


def _basis_from_codes(codes: np.ndarray) -> PauliString:
    return PauliString("".join(_LETTER_OF[int(c)] for c in codes))


def covering_f(p: PauliString, m: PauliString) -> int:
    if len(p) != len(m):
        raise DimensionMismatch(f"length mismatch: {p} vs {m}")
    return int(all(a == "I" or a == b for a, b in zip(p.letters, m.letters)))


def covering_matrix(term_codes: np.ndarray, basis_codes: np.ndarray) -> np.ndarray:
    """f as a boolean ``(n_bases, n_terms)`` array from code matrices."""
    if term_codes.shape[1] != basis_codes.shape[1]:
        raise DimensionMismatch("terms and bases have different qubit counts")
    t = term_codes[None, :, :]
    b = basis_codes[:, None, :]
    return np.all((t == 0) | (t == b), axis=2)


def estimate_mu(p: PauliString, b: Sequence[int] | np.ndarray) -> int:
    """Product of the outcomes over the support of ``p``."""
    b = np.asarray(b)
    if b.shape != (len(p),):
        raise DimensionMismatch(f"outcome of shape {b.shape} for {len(p)}-qubit string")
    support = p.codes != 0
    return int(np.prod(b[support]))


def estimate_mu_batch(term_codes: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
    """mu for every (shot, term): ``(shots, n)`` outcomes -> ``(shots, K)``."""
    support = (term_codes != 0).astype(np.int64)
    bits = (outcomes < 0).astype(np.int64)
    return 1 - 2 * ((bits @ support.T) & 1)


def fill_identity(p: PauliString, letter: str = "Z") -> PauliString:
    """Covering basis of a single string: identity positions set to ``letter``."""
    return PauliString(p.letters.replace("I", letter))


@dataclass(frozen=True)
class MeasurementPlan:
    """Ordered bases plus the covering probabilities used by the estimator."""

    bases: tuple[PauliString, ...]
    kind: str
    strategy: str
    covering_q: Mapping[PauliString, float] = field(default_factory=dict)
    # finite support of q_m for probabilistic plans other than classical shadow
    distribution: tuple[tuple[PauliString, float], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in (PROBABILISTIC, DETERMINISTIC):
            raise ValueError(f"unknown plan kind {self.kind!r}")
        if not self.bases:
            raise ValueError("plan has no bases")
        n = len(self.bases[0])
        for m in self.bases:
            if len(m) != n:
                raise DimensionMismatch("plan bases differ in length")
            if "I" in m.letters:
                raise ValueError(f"basis {m} contains an identity letter")

    @property
    def n_qubits(self) -> int:
        return len(self.bases[0])

    @property
    def n_shot(self) -> int:
        return len(self.bases)

    @property
    def is_classical_shadow(self) -> bool:
        return self.strategy == "classical_shadow"

    def q(self, p: PauliString) -> float:
        if self.is_classical_shadow:
            if len(p) != self.n_qubits:
                raise DimensionMismatch(f"{p} on a {self.n_qubits}-qubit plan")
            return 3.0 ** -locality(p)
        try:
            return self.covering_q[p]
        except KeyError:
            raise UncoveredTerm(f"term {p} is not part of this plan") from None

    def qs(self, paulis: Sequence[PauliString]) -> np.ndarray:
        """Covering probabilities, raising UncoveredTerm for q = 0."""
        out = np.array([self.q(p) for p in paulis], dtype=float)
        bad = np.flatnonzero(out <= 0)
        if bad.size:
            raise UncoveredTerm(f"term {paulis[bad[0]]} has covering probability 0")
        return out

    def empirical_q(self, paulis: Sequence[PauliString]) -> np.ndarray:
        """(1/N) sum_r f(P, M_r) on the emitted bases."""
        cover = covering_matrix(pauli_codes(paulis), pauli_codes(self.bases))
        return cover.mean(axis=0)

    def to_text(self) -> str:
        return "".join(f"{m}\n" for m in self.bases)


def _deterministic_q(paulis: Sequence[PauliString], bases: Sequence[PauliString]) -> dict[PauliString, float]:
    cover = covering_matrix(pauli_codes(paulis), pauli_codes(bases))
    return {p: float(c) for p, c in zip(paulis, cover.sum(axis=0) / len(bases))}


# -- classical shadow -------------------------------------------------------
def build_measurements_classical_shadow(n: int, n_shot: int, rng: np.random.Generator) -> MeasurementPlan:
    """Each letter i.i.d. uniform over {X, Y, Z}."""
    if n_shot < 1:
        raise ValueError("n_shot must be >= 1")
    codes = rng.integers(1, 4, size=(n_shot, n))
    bases = tuple(_basis_from_codes(row) for row in codes)
    return MeasurementPlan(bases, PROBABILISTIC, "classical_shadow")


# -- derandomization --------------------------------------------------------
@dataclass(frozen=True)
class DerandomizationParams:
    eta: float = 0.9
    gamma: float = 1.0

    def __post_init__(self) -> None:
        for name in ("eta", "gamma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v}")


def _log_score(log_base: np.ndarray, inv_w: np.ndarray, beta: np.ndarray, alive: np.ndarray) -> float:
    """log sum_j exp(-V_j / w_j) for one candidate letter."""
    with np.errstate(divide="ignore"):
        log_tail = inv_w * np.log1p(-beta * alive)
    x = log_base + log_tail
    m = x.max()
    if m == -np.inf:
        return -np.inf
    return float(m + np.log(np.exp(x - m).sum()))


def build_measurements_derandomization(
    terms: ObservableSum, n_shot: int, params: DerandomizationParams | None = None
) -> MeasurementPlan:
    """Greedy letter-by-letter choice minimising the confidence-bound score.

    The score is sum_j exp(-V_j / w_j) with
    V_j = (eta/2) #{completed bases covering P_j} - log(1 - beta_j F_j),
    F_j = 1 if the letters fixed so far in the current basis are compatible
    with P_j, and beta_j = gamma 3^-(non-identity letters of P_j still
    unassigned).  It is evaluated in the log domain so long plans do not
    underflow.  Ties go to X, then Y, then Z.
    """
    params = params or DerandomizationParams()
    if n_shot < 1:
        raise ValueError("n_shot must be >= 1")
    if len(terms) == 0:
        raise ValueError("no terms to cover")
    paulis = terms.paulis
    codes = pauli_codes(paulis).astype(np.int64)
    k_terms, n = codes.shape
    w = np.abs(terms.coeffs)
    w = w / w.max()
    inv_w = 1.0 / w
    nontrivial = codes != 0
    # non-identity letters strictly after position i
    after = np.cumsum(nontrivial[:, ::-1], axis=1)[:, ::-1] - nontrivial
    beta_after = params.gamma * 3.0 ** -after  # (K, n)

    counts = np.zeros(k_terms)
    bases = []
    for _ in range(n_shot):
        log_base = -params.eta * counts * inv_w / 2
        alive = np.ones(k_terms, dtype=bool)
        letters = np.zeros(n, dtype=np.int64)
        for i in range(n):
            col = codes[:, i]
            best, best_score = 0, np.inf
            for c in (1, 2, 3):
                cand = alive & ((col == 0) | (col == c))
                score = _log_score(log_base, inv_w, beta_after[:, i], cand)
                if score < best_score or best == 0:
                    best, best_score = c, score
            letters[i] = best
            alive &= (col == 0) | (col == best)
        counts += alive
        bases.append(_basis_from_codes(letters))

    q = {p: float(c) / n_shot for p, c in zip(paulis, counts)}
    missing = [p for p in paulis if q[p] == 0]
    if missing:
        raise PlanRejected(f"{len(missing)} term(s) never covered with {n_shot} shots, e.g. {missing[0]}")
    return MeasurementPlan(tuple(bases), DETERMINISTIC, "derandomization", q)


# -- largest-degree-first grouping -----------------------------------------
def qubitwise_commute_matrix(codes: np.ndarray) -> np.ndarray:
    a = codes[:, None, :]
    b = codes[None, :, :]
    return np.all((a == 0) | (b == 0) | (a == b), axis=2)


@dataclass(frozen=True)
class LDFGrouping:
    """Colour classes of the incompatibility graph with their covering bases."""

    terms: ObservableSum
    groups: tuple[tuple[int, ...], ...]
    bases: tuple[PauliString, ...]
    weights: tuple[float, ...]

    @property
    def probabilities(self) -> np.ndarray:
        w = np.array(self.weights)
        return w / w.sum()

    def covering_q(self) -> dict[PauliString, float]:
        cover = covering_matrix(pauli_codes(self.terms.paulis), pauli_codes(self.bases))
        q = self.probabilities @ cover
        return {p: float(v) for p, v in zip(self.terms.paulis, q)}

    def sample_plan(self, n_shot: int, rng: np.random.Generator) -> MeasurementPlan:
        if n_shot < 1:
            raise ValueError("n_shot must be >= 1")
        picks = rng.choice(len(self.bases), size=n_shot, p=self.probabilities)
        dist = tuple(zip(self.bases, self.probabilities.tolist()))
        return MeasurementPlan(
            tuple(self.bases[i] for i in picks), PROBABILISTIC, "ldf", self.covering_q(), dist
        )


def ldf_groups(terms: ObservableSum) -> LDFGrouping:
    paulis = terms.paulis
    if not paulis:
        raise ValueError("no terms to group")
    codes = pauli_codes(paulis)
    conflict = ~qubitwise_commute_matrix(codes)
    degree = conflict.sum(axis=1)
    order = sorted(range(len(paulis)), key=lambda j: (-degree[j], j))
    colour = np.full(len(paulis), -1)
    for j in order:
        used = set(colour[conflict[j] & (colour >= 0)].tolist())
        c = 0
        while c in used:
            c += 1
        colour[j] = c
    groups, bases, weights = [], [], []
    coeffs = terms.coeffs
    for c in range(colour.max() + 1):
        members = np.flatnonzero(colour == c)
        basis = codes[members].max(axis=0)  # members agree wherever non-identity
        basis[basis == 0] = CODE["Z"]
        groups.append(tuple(members.tolist()))
        bases.append(_basis_from_codes(basis))
        weights.append(float(np.sqrt(np.sum(coeffs[members] ** 2))))
    return LDFGrouping(terms, tuple(groups), tuple(bases), tuple(weights))


def build_measurements_ldf(terms: ObservableSum, n_shot: int, rng: np.random.Generator) -> MeasurementPlan:
    """Group sampling with probability proportional to each group's coefficient 2-norm."""
    return ldf_groups(terms).sample_plan(n_shot, rng)


# -- naive ------------------------------------------------------------------
@dataclass(frozen=True)
class NaivePlan:
    """Each term measured in its own covering basis with its own shots."""

    terms: ObservableSum
    bases: tuple[PauliString, ...]
    shots: tuple[int, ...]

    @property
    def total_shots(self) -> int:
        return sum(self.shots)


def split_budget(total: int, k_terms: int) -> list[int]:
    """Floor split of ``total`` over ``k_terms``; the remainder goes to the first terms."""
    if k_terms < 1:
        raise ValueError("no terms")
    base, extra = divmod(int(total), k_terms)
    if base < 1:
        raise ValueError(f"budget {total} gives some of the {k_terms} terms no shots")
    return [base + (j < extra) for j in range(k_terms)]


def build_measurements_naive(
    terms: ObservableSum, n_naive: int | None = None, n_total: int | None = None
) -> NaivePlan:
    """Per-term plan from either a per-term count or a total budget."""
    if (n_naive is None) == (n_total is None):
        raise ValueError("give exactly one of n_naive and n_total")
    k_terms = len(terms)
    if n_naive is not None:
        if n_naive < 1:
            raise ValueError("n_naive must be >= 1")
        shots = [int(n_naive)] * k_terms
    else:
        shots = split_budget(n_total, k_terms)
    bases = tuple(fill_identity(p) for p in terms.paulis)
    return NaivePlan(terms, bases, tuple(shots))
