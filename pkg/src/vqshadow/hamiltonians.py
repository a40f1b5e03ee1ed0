"""Builtin Hamiltonians and loading of the bundled molecular assets."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

from .pauli import ObservableSum

BUILTINS = ("heisenberg", "h2", "lih", "toy4")
_ASSETS = {"h2": "h2_631g_bk.txt", "lih": "lih_sto3g_bk.txt"}


def _site(n: int, letters: dict[int, str]) -> str:
    return "".join(letters.get(j, "I") for j in range(n))


def heisenberg(n: int = 6, coupling: float = 0.1, field: float = 0.1) -> ObservableSum:
    """Periodic XXX ring plus a uniform Z field."""
    terms = []
    for j in range(n):
        for a in "XYZ":
            terms.append((coupling, _site(n, {j: a, (j + 1) % n: a})))
    for j in range(n):
        terms.append((field, _site(n, {j: "Z"})))
    return ObservableSum(terms, n=n)


def toy4() -> ObservableSum:
    """4-qubit sum of six unit-weight terms that two bases cover completely."""
    return ObservableSum([(1.0, p) for p in ("XXXZ", "XXII", "IIXZ", "YYZX", "YYII", "IIZX")])


def molecular(name: str, keep_identity: bool = False) -> ObservableSum:
    """Bundled qubit Hamiltonian ("h2" or "lih"); the constant term is dropped by default."""
    if name not in _ASSETS:
        raise ValueError(f"unknown molecule {name!r}; choose from {sorted(_ASSETS)}")
    text = resources.files("vqshadow").joinpath("data", _ASSETS[name]).read_text()
    obs = ObservableSum.from_text(text)
    return obs if keep_identity else obs.without_identity()


def load_hamiltonian(source: str, keep_identity: bool = False) -> ObservableSum:
    """Resolve ``builtin:<name>`` or a path to a Hamiltonian text file."""
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1].lower()
        if name == "heisenberg":
            return heisenberg()
        if name == "toy4":
            return toy4()
        if name in _ASSETS:
            return molecular(name, keep_identity)
        raise ValueError(f"unknown builtin {name!r}; choose from {BUILTINS}")
    obs = ObservableSum.load(Path(source))
    return obs if keep_identity else obs.without_identity()
