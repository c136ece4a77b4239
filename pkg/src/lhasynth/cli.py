"""Command-line interface.

Exit codes: 0 success, 1 input/usage error, 2 internal self-check or solver
failure, 3 series not captured (``verify``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .automaton import SelfCheckError, SynthesisConfig, best_execution, check_epsilon_capture, \
    dumps_model, loads_model, synthesize, validate_execution
from .datagen import DeadlockError, cyclic_2d, generate, simulate_lha, thermostat_family
from .flowpoly import LPError, VariableLayout, build_flow_polyhedron, intersect
from .timeseries import TimeSeries, TimeSeriesError, format_csv, parse_time_series

log = logging.getLogger("lhasynth")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL, EXIT_NOT_CAPTURED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_float(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def read_series(paths) -> list[TimeSeries]:
    out = []
    for path in paths:
        path = Path(path)
        out.extend(parse_time_series(path.read_text(), name=path.stem))
    ids = [s.id for s in out]
    if len(set(ids)) != len(ids):
        raise TimeSeriesError(f"duplicate series ids: {ids}")
    return out


def plot_rows(s: TimeSeries, execution, epsilon: float) -> str:
    values = execution.projection()(s.times)
    n = s.dim
    header = ["t"] + [f"data_x{c + 1}" for c in range(n)] + [f"exec_x{c + 1}" for c in range(n)] \
        + [f"lower_x{c + 1}" for c in range(n)] + [f"upper_x{c + 1}" for c in range(n)]
    table = np.column_stack([s.times, s.points, values, s.points - epsilon, s.points + epsilon])
    lines = [",".join(header)] + [",".join(repr(float(v)) for v in row) for row in table]
    return "\n".join(lines) + "\n"


def cmd_synthesize(args) -> int:
    series = read_series(args.input)
    cfg = SynthesisConfig(
        n_locations=args.locations,
        theta=args.theta,
        k_max=args.k_max,
        rdp_tol=None if args.no_simplify else args.rdp_tol,
        merge_dwells=args.merge_dwells,
    )
    result = synthesize(series, cfg)
    if args.model:
        Path(args.model).write_text(dumps_model(result.lha, result.epsilon) + "\n")
    if args.report:
        report = dict(result.report)
        report["mapping"] = {s.id: lab.tolist() for s, lab in zip(series, result.mapping.labels)}
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
    if args.plot_data:
        out = Path(args.plot_data)
        out.mkdir(parents=True, exist_ok=True)
        for s, ex in zip(series, result.executions):
            (out / f"{s.id.replace('#', '_')}.csv").write_text(plot_rows(s, ex, result.epsilon))
    if args.dump_lp:
        layout = VariableLayout(result.mapping.n_locations, series[0].dim, len(series))
        P = intersect([build_flow_polyhedron(s, lab, j, layout)
                       for j, (s, lab) in enumerate(zip(series, result.mapping.labels))])
        Path(args.dump_lp).write_text(P.dump())
    print(f"epsilon = {result.epsilon:.6g}")
    print(f"locations = {len(result.lha.locations)}, transitions = {len(result.lha.edges)}")
    for row in result.mapping.cost_table:
        rel = "-" if row.rel_improvement is None else f"{row.rel_improvement:.2f}"
        print(f"  k={row.k:<3d} cost={row.cost:.4g} rel={rel}")
    return EXIT_OK


def cmd_verify(args) -> int:
    lha, model_eps = loads_model(Path(args.model).read_text())
    eps = args.epsilon if args.epsilon is not None else model_eps
    if eps is None:
        raise UsageError("verify: --epsilon not given and the model has none")
    series = read_series(args.input)
    status = EXIT_OK
    for s in series:
        ex, _ = best_execution(lha, s)
        cap = check_epsilon_capture(ex, s, eps, args.tol)
        val = validate_execution(lha, ex, args.tol)
        verdict = "captured" if cap.ok and val.ok else "NOT captured"
        print(f"{s.id}: achieved deviation {cap.max_deviation:.6g} (eps {eps:.6g}) -> {verdict}")
        for v in val.violations:
            print(f"  {v.kind}: {v.message}")
        if not (cap.ok and val.ok):
            status = EXIT_NOT_CAPTURED
    return status


_MODELS = {"thermostat": thermostat_family, "cyclic2d": lambda n: cyclic_2d()}


def cmd_generate(args) -> int:
    model = _MODELS[args.model](args.n)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        series = generate(model, args.r, args.p, args.T, seed=args.seed, scheme=args.sampling,
                          prefix=args.model, allow_partial=True)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    for s in series:
        (out / f"{s.id}.csv").write_text(format_csv(s))
    print(f"wrote {len(series)} series ({sum(len(s) for s in series)} data points) to {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    lha, _ = loads_model(Path(args.model).read_text())
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        s = simulate_lha(lha, args.duration, args.seed, start_location=args.start_location)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    Path(args.out).write_text(format_csv(s))
    print(f"wrote {len(s)} points to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lhasynth", description="Synthesize linear hybrid automata from time series.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synthesize", help="synthesize an LHA with minimal epsilon")
    p.add_argument("--input", nargs="+", required=True, help="CSV files (t,x1,...,xn)")
    p.add_argument("--locations", type=_positive_int, help="number of locations (default: automatic)")
    p.add_argument("--theta", type=float, default=0.5, help="relative cost improvement threshold")
    p.add_argument("--k-max", type=_positive_int, default=20)
    p.add_argument("--rdp-tol", type=_nonneg_float, default=0.01, help="normalized simplification tolerance")
    p.add_argument("--no-simplify", action="store_true")
    p.add_argument("--merge-dwells", action="store_true", help="merge consecutive same-location dwells")
    p.add_argument("--model", help="write the model document (JSON)")
    p.add_argument("--report", help="write the run report (JSON)")
    p.add_argument("--plot-data", help="directory for per-series plot CSVs")
    p.add_argument("--dump-lp", help="write the LP in plain-text row format")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("verify", help="check that a model captures time series")
    p.add_argument("--model", required=True)
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--epsilon", type=_nonneg_float, help="precision to check (default: the model's)")
    p.add_argument("--tol", type=_nonneg_float, default=1e-6)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("generate", help="generate benchmark time series")
    p.add_argument("model", choices=sorted(_MODELS))
    p.add_argument("--n", type=_positive_int, default=1, help="number of parallel thermostats")
    p.add_argument("--r", type=_positive_int, default=1, help="number of series")
    p.add_argument("--p", type=int, default=50, help="data points per series")
    p.add_argument("--T", type=float, default=40.0, help="simulated duration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sampling", choices=["switching", "uniform"], default="switching")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="random simulation of a synthesized model")
    p.add_argument("--model", required=True)
    p.add_argument("--duration", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start-location", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "generate" and (args.p < 2 or args.T <= 0):
            raise UsageError("generate: need --p >= 2 and --T > 0")
        if args.command == "simulate" and args.duration <= 0:
            raise UsageError("simulate: --duration must be positive")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SelfCheckError, LPError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except DeadlockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (TimeSeriesError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
