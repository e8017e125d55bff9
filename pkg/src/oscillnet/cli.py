"""Command-line entry point ``oscillnet``.

Exit codes: 0 success, 1 usage/input error, 2 numerical failure,
3 verification (acceptance) failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_CHECK = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _cmd_spectrum(args) -> int:
    from .graph import build_laplacian, connected_components, read_graph
    from .spectral import eigendecompose, gerschgorin_nonnegative_real_part

    g = read_graph(args.graph)
    L = build_laplacian(g)
    spec = eigendecompose(L, tol=args.tol)
    comps = connected_components(g)
    gers = gerschgorin_nonnegative_real_part(L)
    if args.format == "tsv":
        print("key\tvalue")
        for i, lam in enumerate(spec.eigenvalues):
            print(f"eigenvalue_{i}\t{lam.real:.17g}{lam.imag:+.17g}j")
        print(f"zero_multiplicity\t{spec.zero_multiplicity}")
        print(f"components\t{len(comps)}")
        print(f"is_real\t{int(spec.is_real)}")
        print(f"is_diagonalizable\t{int(spec.is_diagonalizable)}")
        print(f"gerschgorin_nonnegative\t{int(gers.nonnegative)}")
    else:
        print(f"nodes: {g.n}")
        print("eigenvalues:")
        for c in spec.clusters:
            v = c.value
            val = f"{v.real:.10g}" if spec.is_real else f"{v.real:.10g}{v.imag:+.10g}j"
            print(f"  {val}  (multiplicity {c.multiplicity})")
        print(f"zero multiplicity: {spec.zero_multiplicity}")
        print(f"connected components: {len(comps)}")
        print(f"real spectrum: {'yes' if spec.is_real else 'no'}")
        print(f"diagonalizable: {'yes' if spec.is_diagonalizable else 'no'}")
        print(f"Gerschgorin discs in Re >= 0: {'yes' if gers.nonnegative else 'no'}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    from .graph import build_laplacian, read_graph
    from .io import read_initial_conditions, write_node_trajectory_csv
    from .oscillator import NodeTrajectory, integrate_wave_direct, wave_spectral
    from .spectral import eigendecompose

    g = read_graph(args.graph)
    x0, v0 = read_initial_conditions(args.init)
    if len(x0) != g.n:
        raise UsageError(f"{args.init}: {len(x0)} nodes, graph has {g.n}")
    L = build_laplacian(g)
    traj = integrate_wave_direct(L, x0, v0, dt=args.dt, T=args.T, stride=args.stride)
    if args.method == "spectral":
        x = wave_spectral(eigendecompose(L), x0, v0, traj.times)
        traj = NodeTrajectory(traj.times, x, None, {"method": "spectral"})
    if args.output:
        write_node_trajectory_csv(args.output, traj)
    else:
        write_node_trajectory_csv(sys.stdout, traj)
    return EXIT_OK


def _cmd_algebra_check(args) -> int:
    from .degenerate import (
        CheckResult,
        JordanBlockModel,
        appendix_square_permutation_check,
        model_checks,
        verify_unitary_invariance,
    )

    model = JordanBlockModel(_number(args.omega), _number(args.d), args.m)
    results = list(model_checks(model))
    results += verify_unitary_invariance(JordanBlockModel(float(model.omega), float(model.d),
                                                          model.m)).checks()
    app = appendix_square_permutation_check()
    results.append(CheckResult("appendix_square_permutation", 0.0 if app.passed else 1.0, True))
    print("check\tmax_deviation\texact\tresult")
    for r in results:
        print(r.row())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def _number(text: str):
    """Integers and fractions stay exact; anything else becomes float."""
    from fractions import Fraction

    try:
        return Fraction(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            raise UsageError(f"not a number: {text!r}") from None


_OVERRIDE_KEYS = ("omega", "d", "m", "variant", "dt", "T", "stride", "oracle_T",
                  "overflow_guard", "slope_min", "r2_min", "tail_fraction",
                  "converge_amplitude", "stats_t_min", "output")


def _cmd_experiment(args) -> int:
    from .experiment import load_config, run_experiment

    overrides = {k: getattr(args, k) for k in _OVERRIDE_KEYS}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, _, v = item.partition("=")
        overrides[k.strip()] = v.strip()
    cfg = load_config(args.config, overrides)
    manifest = run_experiment(cfg)
    print((Path(manifest.run_dir) / "summary.txt").read_text(), end="")
    print(f"run directory: {manifest.run_dir}")
    return EXIT_OK


def _cmd_export(args) -> int:
    from .experiment import export_plot_data

    for p in export_plot_data(args.run_dir, args.figure, args.out):
        print(p)
    return EXIT_OK


def _cmd_compare(args) -> int:
    from .experiment import compare_runs

    rep = compare_runs(args.run_a, args.run_b)
    print("series\tmax_abs_deviation")
    for name, dev in rep.max_deviation.items():
        print(f"{name}\t{dev:.3e}")
    print(f"compared samples: {rep.samples}")
    if rep.classification_diffs:
        print("classification differences:")
        for lab, (a, b) in rep.classification_diffs.items():
            print(f"  mode {lab}: {a} -> {b}")
    else:
        print("classification differences: none")
    if args.tol is not None and not rep.overall <= args.tol:
        print(f"max deviation {rep.overall:.3e} exceeds tolerance {args.tol:g}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="oscillnet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("spectrum", help="Laplacian spectrum, components and Gerschgorin test")
    s.add_argument("graph", help="edge-list file ('n <count>' header, 'i j w' lines)")
    s.add_argument("--tol", type=float, default=1e-8, help="eigenvalue clustering tolerance")
    s.add_argument("--format", choices=("text", "tsv"), default="text")
    s.set_defaults(func=_cmd_spectrum)

    s = sub.add_parser("simulate", help="integrate the wave equation on a graph")
    s.add_argument("graph")
    s.add_argument("init", help="initial conditions, one 'x v' pair per node")
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--T", type=float, default=10.0)
    s.add_argument("--stride", type=int, default=100)
    s.add_argument("--method", choices=("rk4", "spectral"), default="rk4")
    s.add_argument("-o", "--output", help="CSV path (default: stdout)")
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("algebra-check", help="verify the operator identities for (omega, d, m)")
    s.add_argument("--omega", default="0", help="integer/fraction for exact arithmetic")
    s.add_argument("--d", default="1")
    s.add_argument("--m", type=int, default=3)
    s.set_defaults(func=_cmd_algebra_check)

    s = sub.add_parser("experiment", help="run a phase-dynamics experiment")
    s.add_argument("config", nargs="?", help="key = value config file (e.g. experiments/table1.cfg)")
    s.add_argument("--omega", type=float)
    s.add_argument("--d", type=float)
    s.add_argument("--m", type=int)
    s.add_argument("--variant", choices=("direct", "unitary"))
    s.add_argument("--dt", type=float)
    s.add_argument("--T", type=float)
    s.add_argument("--stride", type=int)
    s.add_argument("--oracle-T", dest="oracle_T", type=float)
    s.add_argument("--overflow-guard", dest="overflow_guard", type=float)
    s.add_argument("--slope-min", dest="slope_min", type=float)
    s.add_argument("--r2-min", dest="r2_min", type=float)
    s.add_argument("--tail-fraction", dest="tail_fraction", type=float)
    s.add_argument("--converge-amplitude", dest="converge_amplitude", type=float)
    s.add_argument("--stats-t-min", dest="stats_t_min", type=float)
    s.add_argument("-o", "--output", help="run directory")
    s.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    s.set_defaults(func=_cmd_experiment)

    s = sub.add_parser("export", help="write plot-ready two-column files")
    s.add_argument("--figure", required=True, choices=("f4", "f5", "f6"))
    s.add_argument("run_dir")
    s.add_argument("--out", help="destination directory (default: <run_dir>/plots)")
    s.set_defaults(func=_cmd_export)

    s = sub.add_parser("compare", help="compare two completed runs")
    s.add_argument("run_a")
    s.add_argument("run_b")
    s.add_argument("--tol", type=float, help="exit 3 if any deviation exceeds this")
    s.set_defaults(func=_cmd_compare)
    return p


def main(argv=None) -> int:
    from .analysis import InsufficientSamplesError
    from .experiment import ConfigError, RunError
    from .integrate import StepSizeError
    from .io import FormatError
    from .phase import PhaseIntegrationError
    from .spectral import SpectralError

    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PhaseIntegrationError, SpectralError, StepSizeError, InsufficientSamplesError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"oscillnet: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, ConfigError, RunError, FormatError, OSError,
            ValueError) as exc:
        print(f"oscillnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
