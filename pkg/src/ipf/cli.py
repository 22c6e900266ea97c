"""Command-line entry point: run, analyze, check-trace, dump-defaults."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .cpa import analyze_or
from .model import ValidationError
from .scenario import ParseError, dump_defaults, load_scenario
from .sim import Simulation
from .trace import MalformedTrace, check_trace

OUT_DIR_ENV = "IPF_OUT_DIR"
EXIT_OK, EXIT_USAGE, EXIT_SC_FAILURE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ipf", description="Information Processing Factory simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario")
    run.add_argument("scenario")
    run.add_argument("--seed", type=int)
    run.add_argument("--until", type=int, help="run length in microseconds")
    run.add_argument("--out-dir", help=f"output directory (env {OUT_DIR_ENV}, default ./out)")
    run.add_argument("--report-limited-qos", action="store_true", default=None)

    an = sub.add_parser("analyze", help="schedulability of the scenario's initial OR")
    an.add_argument("scenario")
    an.add_argument("--json", action="store_true")

    ct = sub.add_parser("check-trace", help="audit the cross-layer invariants of a trace")
    ct.add_argument("trace")

    sub.add_parser("dump-defaults", help="print every parameter default")
    return ap


def _load(path):
    try:
        return load_scenario(path)
    except FileNotFoundError:
        print(f"error: no such scenario file: {path}", file=sys.stderr)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
    return None


def cmd_run(args) -> int:
    scenario = _load(args.scenario)
    if scenario is None:
        return EXIT_USAGE
    out_dir = args.out_dir or os.environ.get(OUT_DIR_ENV) or "out"
    sim = Simulation(scenario, seed=args.seed, until=args.until,
                     report_limited_qos=args.report_limited_qos).run()
    paths = sim.write_outputs(out_dir)
    m = sim.metrics()
    print(f"scenario {m['scenario']} seed {m['seed']} until {m['until_us']} us")
    print(f"SC deadline misses: {m['sc_deadline_misses']}")
    for tid, row in m["sc_tasks"].items():
        print(f"  {tid}: worst response {row['worst_response']} / deadline {row['deadline']}")
    for tid, row in m["be_tasks"].items():
        print(f"  {tid}: throughput {row['throughput']:.1f}/s, attainment {row['attainment']:.2f}")
    print(f"transitions: {len(m['transitions'])}, failure reports: {len(m['failure_reports'])}, "
          f"hazards: {len(m['hazard_events'])}")
    print(f"trace {paths['trace']} digest {m['trace_digest']}")
    return sim.exit_code


def cmd_analyze(args) -> int:
    scenario = _load(args.scenario)
    if scenario is None:
        return EXIT_USAGE
    report = analyze_or(scenario.system.initial_or, scenario.system)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(f"OR {report.region}: {'PASS' if report.passed else 'FAIL'}")
        for reason in report.reasons:
            print(f"  {reason}")
        for v in report.tasks:
            d = v.to_dict()
            resp = "unbounded" if d["response"] is None else d["response"]
            print(f"  {v.task} on {v.resource}: C={v.wcet} R={resp} D={v.deadline} "
                  f"{'ok' if v.passed else 'MISS'}")
    return EXIT_OK if report.passed else EXIT_SC_FAILURE


def cmd_check_trace(args) -> int:
    try:
        report = check_trace(args.trace)
    except FileNotFoundError:
        print(f"error: no such trace file: {args.trace}", file=sys.stderr)
        return EXIT_USAGE
    except MalformedTrace as exc:
        print(f"malformed trace: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_SC_FAILURE


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "analyze":
        return cmd_analyze(args)
    if args.command == "check-trace":
        return cmd_check_trace(args)
    sys.stdout.write(dump_defaults())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
