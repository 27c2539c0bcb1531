"""Command-line surface: scenario runs, the built-in fixture, capacity math.

Exit codes: 0 on success, 1 when a scenario fails at runtime, 2 on usage
or parse errors.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .capacity import choose_dimension, max_path_length, n_max_dense, n_max_sparse
from .scenario import (
    FIG3_DEMOS,
    MODES,
    ScenarioParseError,
    build_fixture_fig3,
    parse_scenario,
)
from .simulator import ScenarioRuntimeError, Simulator, emit_trace


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _run_scenario(sc, trace_path: Optional[str], metrics_path: Optional[str], show_tables: bool) -> int:
    try:
        result = Simulator(sc).run()
    except (ScenarioRuntimeError, AssertionError) as exc:
        print(f"scenario failed: {exc}", file=sys.stderr)
        return 1
    out = [emit_trace(result.trace)]
    if show_tables:
        lines = []
        for name in sorted(result.sim.net.nodes):
            node = result.sim.net.nodes[name]
            if node.table is not None:
                lines.append(f"table {name}: {node.table.render()}")
        if lines:
            out.append("\n".join(lines) + "\n")
    _write(trace_path, "".join(out))
    metrics_text = "\n".join(result.metrics.to_lines()) + "\n"
    if metrics_path is None and trace_path is None:
        sys.stdout.write(metrics_text)
    else:
        _write(metrics_path, metrics_text)
    return 0


def _cmd_run(args) -> int:
    try:
        with open(args.scenario, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return 2
    try:
        sc = parse_scenario(text)
    except ScenarioParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        sc.seed = args.seed
    return _run_scenario(sc, args.trace, args.metrics, show_tables=False)


def _cmd_fixture(args) -> int:
    sc = build_fixture_fig3(mode=args.mode, demo=args.demo)
    return _run_scenario(sc, args.trace, args.metrics, show_tables=sc.mode == "proactive")


def _cmd_capacity(args) -> int:
    if args.regime == "sparse":
        est = n_max_sparse(args.d, args.k)
        print(f"n_max={int(est.value)}")
        print(f"valid={'true' if est.valid else 'false'}")
        if est.note:
            print(f"note={est.note}")
    else:
        print(f"n_max={n_max_dense(args.d, args.k, args.c)}")
    return 0


def _cmd_choose_dim(args) -> int:
    print(f"d={choose_dimension(args.nodes)}")
    return 0


def _cmd_path_len(args) -> int:
    est = max_path_length(args.nodes, args.k, d=args.d)
    print(f"l_max={est.value!r}")
    print(f"valid={'true' if est.valid else 'false'}")
    if est.note:
        print(f"note={est.note}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cubenet",
        description="Hypercube-addressed spontaneous-network simulator and capacity calculator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--trace", default=None, help="trace output path (default stdout)")
    p_run.add_argument("--metrics", default=None, help="metrics output path (default stdout)")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.set_defaults(fn=_cmd_run)

    p_fix = sub.add_parser("fixture", help="run the built-in demonstration network")
    p_fix.add_argument("name", choices=["fig3"])
    p_fix.add_argument("--mode", choices=list(MODES), default=None)
    p_fix.add_argument("--demo", choices=sorted(FIG3_DEMOS), default=None)
    p_fix.add_argument("--trace", default=None)
    p_fix.add_argument("--metrics", default=None)
    p_fix.set_defaults(fn=_cmd_fixture)

    p_cap = sub.add_parser("capacity", help="maximum joinable nodes")
    cap_sub = p_cap.add_subparsers(dest="regime", required=True)
    p_sparse = cap_sub.add_parser("sparse")
    p_sparse.add_argument("--d", type=int, required=True)
    p_sparse.add_argument("--k", type=int, required=True)
    p_sparse.set_defaults(fn=_cmd_capacity)
    p_dense = cap_sub.add_parser("dense")
    p_dense.add_argument("--d", type=int, required=True)
    p_dense.add_argument("--k", type=int, required=True)
    p_dense.add_argument("--c", type=float, required=True)
    p_dense.set_defaults(fn=_cmd_capacity)

    p_dim = sub.add_parser("choose-dim", help="smallest dimension for a node target")
    p_dim.add_argument("--nodes", type=int, required=True)
    p_dim.set_defaults(fn=_cmd_choose_dim)

    p_len = sub.add_parser("path-len", help="maximum path length estimate")
    p_len.add_argument("--nodes", type=int, required=True)
    p_len.add_argument("--k", type=int, required=True)
    p_len.add_argument("--d", type=int, default=None)
    p_len.set_defaults(fn=_cmd_path_len)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
