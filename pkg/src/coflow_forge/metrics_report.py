"""Objective values, empirical approximation ratios and theorem-bound checks.

The empirical approximation ratio divides an algorithm's total weighted
completion time by the dual objective, which certifies a lower bound on the
optimum; a ratio below one therefore indicates a bug, never luck.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, fields
from statistics import mean, pstdev

from .model import (
    Instance,
    JobSet,
    is_conforming,
    longest_path_chi,
)
from .assignment import assign_coflows_cdls, assign_flows_fdls
from .primal_dual import (
    DEFAULT_KAPPA,
    check_dual_feasibility,
    dual_objective,
    permute_coflow_level,
    permute_flow_level,
    permute_jobs,
)
from .simulator import Schedule, simulate, simulate_jobs, verify_schedule

CSV_HEADER = "instance,seed,algorithm,n,m,N,chi,R,twc,dual,ratio,bound,conforming,ms"

ALGORITHMS = ("fdls", "cdls", "jobs")


@dataclass(frozen=True)
class RunRecord:
    instance_id: str
    seed: int
    algorithm: str
    n: int
    m: int
    num_ports: int
    chi: int
    weight_ratio: float
    twc: float
    dual: float
    ratio: float
    bound: float
    conforming: bool
    ms: float


@dataclass
class EvaluationReport:
    records: list[RunRecord]

    def merged(self, other: "EvaluationReport") -> "EvaluationReport":
        return EvaluationReport(self.records + other.records)

    def sorted_records(self) -> list[RunRecord]:
        return sorted(self.records,
                      key=lambda r: (r.instance_id, r.algorithm, r.seed))


def total_weighted_completion(schedule: Schedule,
                              subject: Instance | JobSet) -> float:
    """Sum of weight times completion over coflows (or jobs for a JobSet)."""
    if isinstance(subject, JobSet):
        total = 0.0
        for job in subject.jobs:
            if job.id not in schedule.job_completions:
                raise ValueError(f"schedule lacks completion for job {job.id}")
            total += job.weight * schedule.job_completions[job.id]
        return total
    total = 0.0
    for c in subject.coflows:
        if c.id not in schedule.coflow_completions:
            raise ValueError(f"schedule lacks completion for coflow {c.id}")
        total += c.weight * schedule.coflow_completions[c.id]
    return total


def approximation_ratio(alg_value: float, dual_bound: float) -> float:
    if dual_bound <= 0:
        raise ValueError("degenerate bound: dual objective must be positive")
    return alg_value / dual_bound


def weight_ratio_R(subject: Instance | JobSet) -> float:
    """Ratio of maximum to minimum weight."""
    weights = [j.weight for j in subject.jobs] if isinstance(subject, JobSet) \
        else [c.weight for c in subject.coflows]
    if not weights:
        raise ValueError("empty instance has no weight ratio")
    return max(weights) / min(weights)


def theorem_bound(kind: str, chi: int, m: int, R: float = 1.0,
                  with_release: bool = True,
                  conforming_weights: bool = True) -> float:
    """Closed-form approximation-ratio guarantee for conforming instances.

    Flow-level: 4*chi + 2 - 2/m with releases, 4*chi + 1 - 2/m without;
    with non-conforming weights the chi term scales by R and the release
    variant gains another R. Coflow-level trades the additive constants for
    a factor m. Job-level ordering never sets gamma, so the flow-level
    constants apply without any weight conformity requirement.
    """
    if chi < 1 or m < 1 or R < 1:
        raise ValueError("need chi >= 1, m >= 1, R >= 1")
    a = 1.0 if with_release else 0.0
    if kind in ("flow", "job"):
        if conforming_weights or kind == "job":
            return 4.0 * chi + 1.0 + a - 2.0 / m
        return 4.0 * R * chi + a * R + 1.0 - 2.0 / m
    if kind == "coflow":
        if conforming_weights:
            return 4.0 * chi * m + a
        return 4.0 * R * chi * m + a * R
    raise ValueError(f"unknown bound kind {kind!r}")


def evaluate(subject: Instance | JobSet, algorithm: str,
             kappa: float = DEFAULT_KAPPA, instance_id: str = "instance",
             seed: int = 0, timing: bool = False) -> RunRecord:
    """Run one algorithm end to end and assemble its report record.

    The schedule is audited before anything is reported; an infeasible
    schedule or dual is an internal error, not a data point.
    """
    started = time.perf_counter()
    if algorithm == "jobs":
        if not isinstance(subject, JobSet):
            raise ValueError("algorithm 'jobs' requires a job set")
        perm, dual = permute_jobs(subject, kappa)
        schedule = simulate_jobs(subject, perm)
        base = Instance(subject.config, subject.coflows, subject.intra_job_dag)
        audit = verify_schedule(schedule, base)
        if not audit.ok:
            raise RuntimeError("internal error: infeasible job schedule: "
                               + "; ".join(audit.violations[:3]))
        conforming = is_conforming(base)
        chi = longest_path_chi(subject.intra_job_dag)
        with_release = any(c.release > 0 for c in subject.coflows)
        bound = theorem_bound("job", max(chi, 1), subject.config.num_cores,
                              weight_ratio_R(subject), with_release, conforming)
    elif algorithm in ("fdls", "cdls"):
        if not isinstance(subject, Instance):
            raise ValueError(f"algorithm {algorithm!r} requires an instance")
        if algorithm == "fdls":
            perm, dual = permute_flow_level(subject, kappa)
            assignment = assign_flows_fdls(subject, perm)
        else:
            perm, dual = permute_coflow_level(subject, kappa)
            assignment = assign_coflows_cdls(subject, perm)
        schedule = simulate(subject, assignment, perm)
        audit = verify_schedule(schedule, subject, assignment)
        if not audit.ok:
            raise RuntimeError("internal error: infeasible schedule: "
                               + "; ".join(audit.violations[:3]))
        conforming = is_conforming(subject)
        chi = longest_path_chi(subject.dag)
        with_release = any(c.release > 0 for c in subject.coflows)
        bound = theorem_bound("flow" if algorithm == "fdls" else "coflow",
                              max(chi, 1), subject.config.num_cores,
                              weight_ratio_R(subject), with_release, conforming)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")

    feas = check_dual_feasibility(dual, subject)
    if not feas.feasible:
        raise RuntimeError("internal error: infeasible dual solution "
                           f"(violation {feas.max_violation})")
    twc = total_weighted_completion(schedule, subject)
    lower = dual_objective(dual, subject)
    ratio = approximation_ratio(twc, lower)
    ms = (time.perf_counter() - started) * 1000.0 if timing else 0.0
    n = len(subject.coflows)
    return RunRecord(instance_id, seed, algorithm, n,
                     subject.config.num_cores, subject.config.num_ports,
                     max(chi, 1), weight_ratio_R(subject), twc, lower, ratio,
                     bound, conforming, ms)


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(report: EvaluationReport, format: str = "csv") -> str:
    """Render the report as CSV rows or a per-algorithm summary."""
    records = report.sorted_records()
    if format == "csv":
        lines = [CSV_HEADER]
        for r in records:
            lines.append(",".join(_csv_cell(getattr(r, f.name))
                                  for f in fields(RunRecord)))
        return "\n".join(lines) + "\n"
    if format == "summary":
        by_alg: dict[str, list[float]] = {}
        for r in records:
            by_alg.setdefault(r.algorithm, []).append(r.ratio)
        lines = []
        for alg in sorted(by_alg):
            ratios = by_alg[alg]
            lines.append(f"{alg}: runs={len(ratios)} "
                         f"mean_ratio={mean(ratios):.6f} "
                         f"stddev={pstdev(ratios):.6f} "
                         f"max_ratio={max(ratios):.6f}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def parse_report(text: str) -> EvaluationReport:
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("missing or unexpected CSV header")
    records = []
    for ln in lines[1:]:
        cells = ln.split(",")
        records.append(RunRecord(
            cells[0], int(cells[1]), cells[2], int(cells[3]), int(cells[4]),
            int(cells[5]), int(cells[6]), float(cells[7]), float(cells[8]),
            float(cells[9]), float(cells[10]), float(cells[11]),
            cells[12] == "true", float(cells[13])))
    return EvaluationReport(records)
