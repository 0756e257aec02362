"""Command-line entry point.

    bufsim trace gen-scan --relations 4 --blocks 1000 --streams 4 --scans 3 --seed 1 --out t.csv
    bufsim run --trace t.csv --policy clock --capacity 1024 --seed 7 --out r.json
    bufsim compare --traces t.csv --policies clock,pbm-sampling,evolved,belady --out c.json
    bufsim report --in c.json --csv c.csv --figures figs/

Exit status: 0 on success, 1 on usage or validation errors, 2 on internal errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import (ConfigError, InvalidParameterError, TraceParseError,
                     TraceValidationError)
from .harness import (ComparisonReport, RunReport, SimConfig, compare_policies, load_report,
                      parse_config, run_simulation, write_csv)
from .policies import POLICY_NAMES
from .trace import (PointParams, ScanParams, generate_mixed_workload, generate_point_workload,
                    generate_scan_workload, read_trace, write_trace)

EXIT_OK, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2
VALIDATION_ERRORS = (ConfigError, InvalidParameterError, TraceParseError, TraceValidationError,
                     OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_scan_args(p):
    p.add_argument("--relations", type=int, default=4)
    p.add_argument("--blocks", type=int, default=1000)
    p.add_argument("--streams", type=int, default=4)
    p.add_argument("--scans", type=int, default=3, help="sweeps per stream")


def _add_point_args(p, prefix=""):
    p.add_argument(f"--{prefix}blocks", type=int, default=1000)
    p.add_argument(f"--{prefix}requests", type=int, default=12000)
    p.add_argument("--zipf", type=float, default=1.0)
    p.add_argument("--write-fraction", type=float, default=0.0)


def _add_sim_args(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--capacity", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--pin-window", type=int)
    p.add_argument("--ring", action="store_true", default=None, help="enable ring buffers")
    p.add_argument("--bgwriter", type=float, metavar="PAGES_PER_TICK",
                   help="enable the background writer at this rate")
    p.add_argument("--seq-us", type=float)
    p.add_argument("--rand-us", type=float)
    p.add_argument("--dirty-us", type=float)
    p.add_argument("--out", help="JSON report path (stdout if omitted)")
    p.add_argument("--csv", help="also write one CSV row per run here")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bufsim", description="Trace-driven buffer pool simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    trace = sub.add_parser("trace", help="generate workload traces")
    tsub = trace.add_subparsers(dest="trace_command", required=True, parser_class=_Parser)
    g = tsub.add_parser("gen-scan")
    _add_scan_args(g)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g = tsub.add_parser("gen-point")
    _add_point_args(g)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g = tsub.add_parser("gen-mixed")
    _add_scan_args(g)
    _add_point_args(g, prefix="point-")
    g.add_argument("--ratio", type=float, default=0.5, help="fraction of scan requests")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")

    run = sub.add_parser("run", help="simulate one policy on one trace")
    run.add_argument("--trace", required=True)
    run.add_argument("--policy")
    _add_sim_args(run)

    cmp_ = sub.add_parser("compare", help="compare policies across traces")
    cmp_.add_argument("--traces", nargs="+", required=True)
    cmp_.add_argument("--policies", default=",".join(POLICY_NAMES))
    cmp_.add_argument("--jobs", type=int, default=1)
    cmp_.add_argument("--figures", help="render figures into this directory")
    _add_sim_args(cmp_)

    rep = sub.add_parser("report", help="re-emit a saved report as CSV and figures")
    rep.add_argument("--in", dest="input", required=True)
    rep.add_argument("--csv")
    rep.add_argument("--figures")
    return parser


def _sim_config(args, policy: str | None = None) -> SimConfig:
    cfg = SimConfig()
    if args.config:
        cfg = parse_config(Path(args.config).read_text(), cfg)
    top = {}
    if policy is not None:
        top["policy"] = policy
    if args.capacity is not None:
        top["capacity_pages"] = args.capacity
    if args.seed is not None:
        top["seed"] = args.seed
    if args.pin_window is not None:
        top["pin_hold_window"] = args.pin_window
    if args.ring:
        top["ring_buffer_enabled"] = True
    if args.bgwriter is not None:
        top["background_writer_enabled"] = True
        top["background_writer_pages_per_tick"] = args.bgwriter
    cost = {}
    for flag, name in (("seq_us", "seq_read_us"), ("rand_us", "rand_read_us"),
                       ("dirty_us", "dirty_writeback_us")):
        if getattr(args, flag) is not None:
            cost[name] = getattr(args, flag)
    cfg = replace(cfg, cost_model=replace(cfg.cost_model, **cost), **top)
    cfg.validate()
    return cfg


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _load_trace(path: str):
    with open(path, encoding="utf-8") as fh:
        return read_trace(fh)


def _write_extras(reports, csv_path, figures) -> None:
    if csv_path:
        Path(csv_path).write_text(write_csv(reports))
    if figures:
        from .plotting import render_figures

        for p in render_figures(reports, figures):
            print(f"wrote {p}", file=sys.stderr)


def _summary(report: ComparisonReport) -> str:
    lines = [f"{'rank':<5}{'policy':<14}{'hit_rate':>10}{'score':>10}"]
    for i, p in enumerate(report.ranking, start=1):
        lines.append(f"{i:<5}{p:<14}{report.mean_hit_rate[p]:>10.4f}"
                     f"{report.mean_latency_score[p]:>10.3f}")
    return "\n".join(lines) + "\n"


def _cmd_trace(args) -> None:
    if args.trace_command == "gen-scan":
        t = generate_scan_workload(args.relations, args.blocks, args.streams, args.scans, args.seed)
    elif args.trace_command == "gen-point":
        t = generate_point_workload(args.blocks, args.requests, args.zipf, args.write_fraction,
                                    args.seed)
    else:
        t = generate_mixed_workload(
            ScanParams(args.relations, args.blocks, args.streams, args.scans),
            PointParams(args.point_blocks, args.point_requests, args.zipf, args.write_fraction),
            args.ratio, args.seed)
    _emit(write_trace(t), args.out)


def _cmd_run(args) -> None:
    if args.policy is not None and args.policy not in POLICY_NAMES:
        raise ConfigError(f"unknown policy {args.policy!r}; valid names: {', '.join(POLICY_NAMES)}")
    cfg = _sim_config(args, args.policy)
    report = run_simulation(_load_trace(args.trace), cfg, trace_id=Path(args.trace).stem)
    _emit(report.to_json() + "\n", args.out)
    _write_extras([report], args.csv, None)


def _cmd_compare(args) -> None:
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    bad = [p for p in policies if p not in POLICY_NAMES]
    if bad:
        raise ConfigError(f"unknown policy {bad[0]!r}; valid names: {', '.join(POLICY_NAMES)}")
    cfg = _sim_config(args)
    traces = [(Path(p).stem, _load_trace(p)) for p in args.traces]
    report = compare_policies(traces, policies, cfg, jobs=args.jobs)
    _emit(report.to_json() + "\n", args.out)
    if args.out:
        sys.stdout.write(_summary(report))
    _write_extras(report.runs, args.csv, args.figures)


def _cmd_report(args) -> None:
    report = load_report(Path(args.input).read_text())
    if isinstance(report, RunReport):
        runs = [report]
        sys.stdout.write(write_csv(runs))
    else:
        runs = report.runs
        sys.stdout.write(_summary(report))
    _write_extras(runs, args.csv, args.figures)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        {"trace": _cmd_trace, "run": _cmd_run, "compare": _cmd_compare,
         "report": _cmd_report}[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except VALIDATION_ERRORS as exc:
        print(f"bufsim: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"bufsim: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
