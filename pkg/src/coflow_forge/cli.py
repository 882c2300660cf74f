"""Command-line front end: generation, ordering, scheduling, ingestion, eval.

Every stochastic subcommand takes an explicit seed, so reruns with the same
flags produce byte-identical files. Wall-clock timing columns are zero unless
--timing is passed, for the same reason.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import __version__
from .model import (
    DocumentError,
    Instance,
    InvalidInstanceError,
    document_to_instance,
    document_to_jobset,
    instance_to_document,
    validate_instance,
)
from .assignment import (
    assign_coflows_cdls,
    assign_flows_fdls,
    assignment_to_payload,
)
from .generator import (
    DENSITY_MODES,
    GeneratorParams,
    generate_instance,
)
from .metrics_report import (
    ALGORITHMS,
    EvaluationReport,
    emit_report,
    evaluate,
)
from .primal_dual import (
    DEFAULT_KAPPA,
    dual_to_document,
    permute_coflow_level,
    permute_flow_level,
    permute_jobs,
)
from .simulator import schedule_to_document, simulate, simulate_jobs
from .trace_io import TraceError, filter_by_min_flows, parse_trace, to_instance

USAGE_ERROR = 2
DATA_ERROR = 1


class DataError(Exception):
    """Invalid input data; maps to exit code 1."""


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _load_instance(path: str) -> Instance:
    instance = document_to_instance(_read(path))
    report = validate_instance(instance)
    if not report.ok:
        raise DataError(f"{path}: " + "; ".join(report.violations))
    return instance


def _seed_range(spec: str) -> list[int]:
    if ":" in spec:
        lo, hi = spec.split(":", 1)
        return list(range(int(lo), int(hi)))
    return [int(s) for s in spec.split(",")]


def _max_workers() -> int:
    raw = os.environ.get("COFLOW_FORGE_THREADS", "")
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    return max(1, cap) if cap else min(8, os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_generate(args) -> int:
    params = GeneratorParams(
        n=args.n, num_ports=args.ports, num_cores=args.cores, deg=args.deg,
        p=args.p, weight_range=(args.weight_min, args.weight_max),
        density_mode=args.density, seed=args.seed,
        release_horizon=args.release_horizon, conforming=args.conforming)
    try:
        instance = generate_instance(params)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    _write(args.output, instance_to_document(instance))
    return 0


def _order(subject, algorithm: str, kappa: float):
    if algorithm == "fdls":
        return permute_flow_level(subject, kappa)
    if algorithm == "cdls":
        return permute_coflow_level(subject, kappa)
    return permute_jobs(subject, kappa)


def _cmd_order(args) -> int:
    if args.alg == "jobs":
        subject = document_to_jobset(_read(args.instance))
    else:
        subject = _load_instance(args.instance)
    perm, dual = _order(subject, args.alg, args.kappa)
    payload = {"algorithm": args.alg, "kappa": args.kappa,
               "order": list(perm.order)}
    _write(args.output, json.dumps(payload, indent=2) + "\n")
    if args.emit_dual:
        _write(args.emit_dual, dual_to_document(dual, subject))
    return 0


def _cmd_schedule(args) -> int:
    if args.alg == "jobs":
        jobset = document_to_jobset(_read(args.instance))
        perm, _ = permute_jobs(jobset, args.kappa)
        sched = simulate_jobs(jobset, perm)
        payload = {"algorithm": "jobs", "kappa": args.kappa,
                   "order": list(perm.order),
                   "schedule": json.loads(schedule_to_document(sched))}
    else:
        instance = _load_instance(args.instance)
        perm, _ = _order(instance, args.alg, args.kappa)
        assignment = assign_flows_fdls(instance, perm) if args.alg == "fdls" \
            else assign_coflows_cdls(instance, perm)
        sched = simulate(instance, assignment, perm)
        payload = {"algorithm": args.alg, "kappa": args.kappa,
                   "order": list(perm.order),
                   "assignment": assignment_to_payload(assignment),
                   "schedule": json.loads(schedule_to_document(sched))}
    _write(args.output, json.dumps(payload, indent=2) + "\n")
    return 0


def _evaluate_one(path: str, algorithms: list[str], kappa: float,
                  timing: bool) -> list:
    records = []
    for alg in algorithms:
        if alg == "jobs":
            subject = document_to_jobset(_read(path))
        else:
            subject = _load_instance(path)
        records.append(evaluate(subject, alg, kappa,
                                instance_id=os.path.basename(path),
                                timing=timing))
    return records


def _cmd_eval(args) -> int:
    algorithms = args.alg.split(",")
    for alg in algorithms:
        if alg not in ALGORITHMS:
            raise DataError(f"unknown algorithm {alg!r}")
    records = []
    for path in args.instances:
        records.extend(_evaluate_one(path, algorithms, args.kappa, args.timing))
    _write(args.output, emit_report(EvaluationReport(records), args.format))
    return 0


def _cmd_ingest(args) -> int:
    try:
        port_count, coflows = parse_trace(_read(args.trace))
        instance = to_instance(port_count, coflows, num_cores=args.cores,
                               weight_mode=args.weight_mode,
                               release_mode=args.release_mode, seed=args.seed)
    except (TraceError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    if args.min_flows:
        instance = filter_by_min_flows(instance, args.min_flows)
    _write(args.output, instance_to_document(instance))
    return 0


def _cmd_bench(args) -> int:
    algorithms = args.alg.split(",")
    for alg in algorithms:
        if alg not in ("fdls", "cdls"):
            raise DataError(f"bench supports fdls/cdls, not {alg!r}")
    if (args.vary is None) != (args.values is None):
        raise DataError("--vary and --values must be given together")
    seeds = _seed_range(args.seeds)
    values = args.values.split(",") if args.values else [None]

    def build(value, seed):
        n, m, p, threshold = args.n, args.cores, args.p, None
        if args.vary == "n":
            n = int(value)
        elif args.vary == "m":
            m = int(value)
        elif args.vary == "p":
            p = float(value)
        elif args.vary == "threshold":
            threshold = int(value)
        if args.trace:
            port_count, coflows = parse_trace(_read(args.trace))
            instance = to_instance(port_count, coflows, num_cores=m,
                                   weight_mode="uniform", seed=seed)
            if threshold:
                instance = filter_by_min_flows(instance, threshold)
            return instance
        params = GeneratorParams(n=n, num_ports=args.ports, num_cores=m,
                                 deg=args.deg, p=p, density_mode=args.density,
                                 seed=seed, conforming=args.conforming)
        return generate_instance(params)

    tasks = [(value, seed) for value in values for seed in seeds]

    def run(task):
        value, seed = task
        instance = build(value, seed)
        tag = f"{args.vary}={value}" if args.vary else "base"
        return [evaluate(instance, alg, args.kappa, instance_id=tag,
                         seed=seed, timing=args.timing)
                for alg in algorithms]

    records = []
    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        for chunk in pool.map(run, tasks):
            records.extend(chunk)
    _write(args.output, emit_report(EvaluationReport(records), args.format))
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coflow-forge",
        description="Primal-dual coflow ordering and list scheduling on "
                    "identical parallel networks.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="emit a seeded synthetic instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--cores", type=int, required=True)
    g.add_argument("--ports", type=int, required=True)
    g.add_argument("--deg", type=int, default=3)
    g.add_argument("--p", type=float, default=1.0)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--density", choices=DENSITY_MODES, default="default")
    g.add_argument("--weight-min", type=int, default=1)
    g.add_argument("--weight-max", type=int, default=100)
    g.add_argument("--release-horizon", type=int, default=0)
    g.add_argument("--conforming", action="store_true")
    g.add_argument("-o", "--output", default=None)
    g.set_defaults(func=_cmd_generate)

    o = sub.add_parser("order", help="run a permutation algorithm")
    o.add_argument("instance")
    o.add_argument("--alg", choices=ALGORITHMS, default="fdls")
    o.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    o.add_argument("--emit-dual", metavar="PATH", default=None)
    o.add_argument("-o", "--output", default=None)
    o.set_defaults(func=_cmd_order)

    s = sub.add_parser("schedule", help="order, assign and simulate")
    s.add_argument("instance")
    s.add_argument("--alg", choices=ALGORITHMS, default="fdls")
    s.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    s.add_argument("-o", "--output", default=None)
    s.set_defaults(func=_cmd_schedule)

    e = sub.add_parser("eval", help="evaluate algorithms against the dual bound")
    e.add_argument("instances", nargs="+")
    e.add_argument("--alg", default="fdls")
    e.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    e.add_argument("--format", choices=("csv", "summary"), default="csv")
    e.add_argument("--timing", action="store_true")
    e.add_argument("-o", "--output", default=None)
    e.set_defaults(func=_cmd_eval)

    i = sub.add_parser("ingest", help="convert a rack-level trace")
    i.add_argument("trace")
    i.add_argument("--cores", type=int, default=1)
    i.add_argument("--min-flows", type=int, default=0)
    i.add_argument("--weight-mode", choices=("unit", "uniform"), default="unit")
    i.add_argument("--release-mode", choices=("zero", "arrival"), default="zero")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("-o", "--output", default=None)
    i.set_defaults(func=_cmd_ingest)

    b = sub.add_parser("bench", help="seed sweep over one experiment axis")
    b.add_argument("--seeds", required=True, metavar="LO:HI|A,B,...")
    b.add_argument("--vary", choices=("n", "m", "p", "threshold"), default=None)
    b.add_argument("--values", default=None,
                   help="comma-separated values for the varied axis")
    b.add_argument("--n", type=int, default=25)
    b.add_argument("--cores", type=int, default=5)
    b.add_argument("--ports", type=int, default=10)
    b.add_argument("--deg", type=int, default=3)
    b.add_argument("--p", type=float, default=1.0)
    b.add_argument("--density", choices=DENSITY_MODES, default="default")
    b.add_argument("--conforming", action="store_true")
    b.add_argument("--alg", default="fdls,cdls")
    b.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    b.add_argument("--trace", default=None)
    b.add_argument("--format", choices=("csv", "summary"), default="csv")
    b.add_argument("--timing", action="store_true")
    b.add_argument("-o", "--output", default=None)
    b.set_defaults(func=_cmd_bench)
    return parser


def execute(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, DocumentError, InvalidInstanceError, TraceError,
            ValueError) as exc:
        print(f"coflow-forge: error: {exc}", file=sys.stderr)
        return DATA_ERROR


def main(argv=None) -> int:
    return execute(argv)


if __name__ == "__main__":
    sys.exit(main())
