"""Command-line driver: evolutions with infidelity traces, variance tables,
derandomized plan export and Haar-average checks."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import VarianceReport, haar_check, variance_row
from .ansatz import build_ansatz, prepare_v_state
from .errors import EmptySample, PlanRejected, SingularM, VQShadowError
from .estimator import extended_v_observable
from .hamiltonians import load_hamiltonian
from .measure import (
    DerandomizationParams,
    build_measurements_classical_shadow,
    build_measurements_derandomization,
    ldf_groups,
)
from .pauli import ObservableSum
from .statevec import make_rng
from .vqs import EvolutionConfig, run_evolution

log = logging.getLogger("vqshadow")

STRATEGY_ALIASES = {
    "exact": "exact",
    "naive": "naive",
    "cs": "classical_shadow",
    "derand": "derandomization",
    "ldf": "ldf",
    "hybrid": "hybrid",
}
SUMMARY_SCHEMA = "vqshadow evolve summary v1"
EXIT_CONFIG, EXIT_NUMERIC = 2, 3

# stream keys for make_rng
_AXES_STREAM, _PARAMS_STREAM, _PLAN_STREAM, _HAAR_STREAM = 11, 12, 13, 14


def _axes_rng(seed: int, trial: int) -> np.random.Generator:
    return make_rng(seed, _AXES_STREAM, trial)


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


# -- evolve --------------------------------------------------------------------
def summarize(traces) -> str:
    """Per-step mean and standard error of D_I and energy over trials."""
    d = np.array([t.infidelities for t in traces])
    e = np.array([t.energies for t in traces])
    k = len(traces)
    sem = d.std(axis=0, ddof=1) / np.sqrt(k) if k > 1 else np.zeros(d.shape[1])
    buf = io.StringIO()
    buf.write(f"# {SUMMARY_SCHEMA}: strategy={traces[0].strategy} mode={traces[0].mode} trials={k}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "t", "mean_D_I", "sem_D_I", "mean_energy"])
    for i, rec in enumerate(traces[0].records):
        w.writerow([rec.step, repr(rec.t), repr(float(d[:, i].mean())), repr(float(sem[i])), repr(float(e[:, i].mean()))])
    return buf.getvalue()


def cmd_evolve(args) -> int:
    ham = load_hamiltonian(args.hamiltonian)
    strategy = STRATEGY_ALIASES[args.strategy]
    n_total = args.shots_total if args.shots_total is not None else 5 * len(ham)
    traces = []
    for trial in range(args.trials):
        spec = build_ansatz(ham.n_qubits, args.layers, _axes_rng(args.seed, trial))
        config = EvolutionConfig(
            mode=args.mode,
            hamiltonian=ham,
            dt=args.dt,
            steps=args.steps,
            strategy=strategy,
            n_total=None if strategy == "exact" else n_total,
            alpha=args.alpha,
            svd_cutoff=args.svd_cutoff,
            seed=args.seed,
            trial=trial,
        )
        trace, _ = run_evolution(spec, config)
        traces.append(trace)
        log.info("trial %d: final D_I %.6g", trial, trace.records[-1].infidelity)
        if args.out is not None:
            body = trace.to_json() if args.format == "json" else trace.to_csv()
            _write(body, str(Path(args.out) / f"trial_{trial}.{args.format}"))
    summary = summarize(traces)
    _write(summary, None if args.out is None else str(Path(args.out) / "summary.csv"))
    return 0


# -- variance ------------------------------------------------------------------
def variance_table(
    ham: ObservableSum,
    mode: str,
    layers: int,
    n_total: int,
    seed: int,
    patterns: int = 5,
    strategies=("naive", "cs", "derand"),
    convention: str = "half",
) -> VarianceReport:
    """Variance/Approximation/Diff rows for all-zero and random parameters."""
    ham = ham.without_identity()
    extended, phi = extended_v_observable(ham, mode, convention)
    spec = build_ansatz(ham.n_qubits, layers, _axes_rng(seed, 0))
    n_naive = n_total // len(ham)
    plans = {}
    for name in strategies:
        if name == "cs":
            plans[name] = build_measurements_classical_shadow(extended.n_qubits, n_total, make_rng(seed, _PLAN_STREAM))
        elif name == "derand":
            plans[name] = build_measurements_derandomization(extended, n_total)
        elif name == "ldf":
            plans[name] = ldf_groups(extended).sample_plan(n_total, make_rng(seed, _PLAN_STREAM, 1))
        elif name != "naive":
            raise ValueError(f"unknown variance strategy {name!r}")
    labels = {"naive": "naive", "cs": "classical shadow", "derand": "derandomization", "ldf": "ldf"}
    param_sets = [("all zero", np.zeros(spec.n_params))]
    prng = make_rng(seed, _PARAMS_STREAM)
    param_sets += [(f"random {i + 1}", prng.uniform(0, 2 * np.pi, spec.n_params)) for i in range(patterns)]
    rows = []
    for label, theta in param_sets:
        states = [prepare_v_state(spec, theta, k, phi) for k in range(spec.n_params)]
        for name in strategies:
            if name == "naive":
                rows.append(variance_row(label, labels[name], states, extended, None, n_naive=n_naive))
            else:
                rows.append(variance_row(label, labels[name], states, extended, plans[name]))
    return VarianceReport(rows)


def cmd_variance(args) -> int:
    ham = load_hamiltonian(args.hamiltonian)
    n_total = args.shots_total if args.shots_total is not None else 5 * len(ham)
    report = variance_table(
        ham,
        args.mode,
        args.layers,
        n_total,
        args.seed,
        patterns=args.patterns,
        strategies=tuple(args.strategies.split(",")),
        convention=args.g_convention,
    )
    _write(report.to_csv() if args.format == "csv" else report.to_text(), args.out)
    return 0


# -- derandomize ---------------------------------------------------------------
def cmd_derandomize(args) -> int:
    ham = load_hamiltonian(args.hamiltonian)
    obs = ham.extend_with_x() if args.extend else ham
    plan = build_measurements_derandomization(obs, args.shots, DerandomizationParams(args.eta, args.gamma))
    _write(plan.to_text(), args.out)
    return 0


# -- haar-check ----------------------------------------------------------------
def toy_observable(n: int) -> ObservableSum:
    """Fixed two-qubit observable padded with identities to ``n`` qubits.

    Keeping the support fixed isolates the 1/D scaling of the Haar variance.
    """
    if n < 2:
        raise ValueError("the Haar toy observable needs n >= 2")
    pad = "I" * (n - 2)
    return ObservableSum([(0.4, "XZ" + pad), (0.3, "IZ" + pad), (-0.2, "XI" + pad), (0.5, "ZZ" + pad)], n=n)


def cmd_haar_check(args) -> int:
    if args.samples < 1:
        raise EmptySample("haar-check needs at least one sample")
    extended = toy_observable(args.n).extend_with_x()
    if args.strategy == "derand":
        plan = build_measurements_derandomization(extended, args.shots)
    else:
        plan = build_measurements_classical_shadow(extended.n_qubits, args.shots, make_rng(args.seed, _PLAN_STREAM))
    report = haar_check(extended, plan, args.samples, make_rng(args.seed, _HAAR_STREAM))
    _write(report.to_text(), args.out)
    return 0


# -- parser --------------------------------------------------------------------
def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vqshadow", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, shots=True):
        p.add_argument("--hamiltonian", default="builtin:heisenberg", help="builtin:heisenberg|h2|lih|toy4 or a file")
        p.add_argument("--mode", choices=("rte", "ite"), default="ite")
        p.add_argument("--layers", type=_positive_int, default=4)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)
        if shots:
            p.add_argument("--shots-total", type=_positive_int, default=None, help="shots per V_k (default 5 N_BA)")

    p = sub.add_parser("evolve", help="paired noisy/exact evolutions with D_I traces")
    common(p)
    p.add_argument("--strategy", choices=tuple(STRATEGY_ALIASES), default="derand")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--trials", type=_positive_int, default=5)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--svd-cutoff", type=float, default=1e-6)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("variance", help="Variance/Approximation/Diff table")
    common(p)
    p.add_argument("--strategies", default="naive,cs,derand", help="comma list of naive,cs,derand,ldf")
    p.add_argument("--patterns", type=int, default=5)
    p.add_argument("--g-convention", choices=("half", "unit"), default="half")
    p.add_argument("--format", choices=("csv", "text"), default="text")
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("derandomize", help="export a derandomized measurement plan")
    p.add_argument("--hamiltonian", default="builtin:heisenberg")
    p.add_argument("--shots", type=_positive_int, required=True)
    p.add_argument("--extend", action="store_true", help="prepend the ancilla X to every term first")
    p.add_argument("--eta", type=float, default=0.9)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_derandomize)

    p = sub.add_parser("haar-check", help="Haar-average check of the variance closed forms")
    p.add_argument("--n", type=_positive_int, default=2, help="system qubits (the ancilla is added)")
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--shots", type=_positive_int, default=100)
    p.add_argument("--strategy", choices=("cs", "derand"), default="cs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_haar_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (SingularM, PlanRejected) as exc:
        print(f"vqshadow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (VQShadowError, ValueError, KeyError, OSError) as exc:
        print(f"vqshadow: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
