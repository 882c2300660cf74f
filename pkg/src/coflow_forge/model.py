"""Core domain types: coflows, precedence DAGs, parallel-network configuration.

Ports are integers 1..N; the input side and the output side are separate
namespaces (a flow from input port 2 to output port 2 uses two different
physical links). Flow sizes and release times are integers, weights are
arbitrary positive numbers. All types are immutable after construction and
safe to share between threads.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence


class CycleError(ValueError):
    """Raised when an operation requires an acyclic DAG but finds a cycle."""


class DocumentError(ValueError):
    """Raised when an instance/jobset document is malformed."""


class InvalidInstanceError(ValueError):
    """Raised by algorithms that require a valid instance or job set."""

    def __init__(self, violations: Sequence[str]):
        super().__init__("invalid instance: " + "; ".join(violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class NetworkConfig:
    """m identical N x N non-blocking switches."""

    num_cores: int
    num_ports: int


@dataclass(frozen=True)
class Flow:
    """A (source port, destination port, size) demand inside coflow `coflow`."""

    source: int
    dest: int
    coflow: int
    size: int


@dataclass(frozen=True)
class Coflow:
    id: int
    release: int
    weight: float
    flows: tuple[Flow, ...]

    @staticmethod
    def make(cid: int, release: int, weight: float,
             flows: Iterable[tuple[int, int, int]]) -> "Coflow":
        """Build a coflow from (src, dst, size) triples, sorted canonically."""
        fl = tuple(Flow(s, d, cid, z) for s, d, z in sorted(flows))
        return Coflow(cid, release, weight, fl)

    def total_size(self) -> int:
        return sum(f.size for f in self.flows)


@dataclass(frozen=True)
class PrecedenceDag:
    """Edges (pred, succ): every flow of pred completes before succ may start."""

    nodes: frozenset[int]
    edges: frozenset[tuple[int, int]]

    @staticmethod
    def make(nodes: Iterable[int],
             edges: Iterable[tuple[int, int]] = ()) -> "PrecedenceDag":
        return PrecedenceDag(frozenset(nodes), frozenset(edges))

    def successors(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            adj.setdefault(a, []).append(b)
        for lst in adj.values():
            lst.sort()
        return adj

    def predecessors(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            adj.setdefault(b, []).append(a)
        for lst in adj.values():
            lst.sort()
        return adj


@dataclass(frozen=True)
class Instance:
    config: NetworkConfig
    coflows: tuple[Coflow, ...]
    dag: PrecedenceDag

    def coflow_by_id(self) -> dict[int, Coflow]:
        return {c.id: c for c in self.coflows}


@dataclass(frozen=True)
class Job:
    id: int
    weight: float
    coflows: tuple[int, ...]


@dataclass(frozen=True)
class JobSet:
    """Multi-stage jobs: each job owns a group of coflows with one release time."""

    config: NetworkConfig
    jobs: tuple[Job, ...]
    coflows: tuple[Coflow, ...]
    intra_job_dag: PrecedenceDag

    def coflow_by_id(self) -> dict[int, Coflow]:
        return {c.id: c for c in self.coflows}

    def job_of_coflow(self) -> dict[int, int]:
        owner: dict[int, int] = {}
        for job in self.jobs:
            for k in job.coflows:
                owner[k] = job.id
        return owner


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


# ---------------------------------------------------------------------------
# structural queries
# ---------------------------------------------------------------------------

def _check_cyclic(dag: PrecedenceDag) -> bool:
    # Stray edge endpoints are reported separately; ignore them here.
    inner = PrecedenceDag.make(dag.nodes,
                               ((a, b) for a, b in dag.edges
                                if a in dag.nodes and b in dag.nodes))
    try:
        topological_order(inner)
    except CycleError:
        return True
    return False


def validate_instance(instance: Instance) -> ValidationReport:
    """Check every type invariant; violations are data, not exceptions."""
    v: list[str] = []
    cfg = instance.config
    if not (isinstance(cfg.num_cores, int) and cfg.num_cores >= 1):
        v.append(f"num_cores must be a positive integer, got {cfg.num_cores!r}")
    if not (isinstance(cfg.num_ports, int) and cfg.num_ports >= 1):
        v.append(f"num_ports must be a positive integer, got {cfg.num_ports!r}")

    seen_ids: set[int] = set()
    for c in instance.coflows:
        if c.id in seen_ids:
            v.append(f"duplicate coflow id {c.id}")
        seen_ids.add(c.id)
        if not c.weight > 0:
            v.append(f"coflow {c.id}: non-positive weight {c.weight!r}")
        if not (isinstance(c.release, int) and c.release >= 0):
            v.append(f"coflow {c.id}: release must be a non-negative integer, "
                     f"got {c.release!r}")
        pairs: set[tuple[int, int]] = set()
        for f in c.flows:
            if f.coflow != c.id:
                v.append(f"coflow {c.id}: flow tagged with coflow {f.coflow}")
            if not (isinstance(f.size, int) and f.size > 0):
                v.append(f"coflow {c.id}: non-positive flow size on "
                         f"({f.source},{f.dest})")
            if isinstance(cfg.num_ports, int) and cfg.num_ports >= 1:
                if not (1 <= f.source <= cfg.num_ports
                        and 1 <= f.dest <= cfg.num_ports):
                    v.append(f"coflow {c.id}: flow ({f.source},{f.dest}) "
                             f"outside ports 1..{cfg.num_ports}")
            if (f.source, f.dest) in pairs:
                v.append(f"coflow {c.id}: duplicate flow pair "
                         f"({f.source},{f.dest})")
            pairs.add((f.source, f.dest))

    if instance.dag.nodes != seen_ids:
        v.append("dag nodes differ from coflow ids")
    for a, b in sorted(instance.dag.edges):
        if a not in instance.dag.nodes or b not in instance.dag.nodes:
            v.append(f"edge ({a},{b}) has endpoint outside dag nodes")
    if _check_cyclic(instance.dag):
        v.append("cycle detected in precedence dag")
    return ValidationReport(tuple(v))


def validate_jobset(jobset: JobSet) -> ValidationReport:
    base = validate_instance(
        Instance(jobset.config, jobset.coflows, jobset.intra_job_dag))
    v = list(base.violations)

    owner: dict[int, int] = {}
    seen_jobs: set[int] = set()
    for job in jobset.jobs:
        if job.id in seen_jobs:
            v.append(f"duplicate job id {job.id}")
        seen_jobs.add(job.id)
        if not job.weight > 0:
            v.append(f"job {job.id}: non-positive weight {job.weight!r}")
        if not job.coflows:
            v.append(f"job {job.id}: empty coflow group")
        for k in job.coflows:
            if k in owner:
                v.append(f"coflow {k} assigned to jobs {owner[k]} and {job.id}")
            owner[k] = job.id

    all_ids = {c.id for c in jobset.coflows}
    if set(owner) != all_ids:
        v.append("jobs do not partition the coflow set")

    releases = {c.id: c.release for c in jobset.coflows}
    for job in jobset.jobs:
        rel = {releases[k] for k in job.coflows if k in releases}
        if len(rel) > 1:
            v.append(f"job {job.id}: coflows have differing release times {sorted(rel)}")

    for a, b in sorted(jobset.intra_job_dag.edges):
        if a in owner and b in owner and owner[a] != owner[b]:
            v.append(f"edge ({a},{b}) crosses jobs {owner[a]} and {owner[b]}")
    return ValidationReport(tuple(v))


def topological_order(dag: PrecedenceDag) -> list[int]:
    """Kahn's algorithm; ties broken by ascending node id."""
    indeg = {n: 0 for n in dag.nodes}
    succ = dag.successors()
    for _, b in dag.edges:
        indeg[b] += 1
    ready = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    out: list[int] = []
    while ready:
        n = heapq.heappop(ready)
        out.append(n)
        for s in succ.get(n, ()):
            indeg[s] -= 1
            if indeg[s] == 0:
                heapq.heappush(ready, s)
    if len(out) != len(dag.nodes):
        raise CycleError("cyclic DAG")
    return out


def longest_path_chi(dag: PrecedenceDag) -> int:
    """Number of nodes on the longest directed path; 1 for an edgeless DAG."""
    if not dag.nodes:
        return 0
    order = topological_order(dag)  # raises CycleError on cycles
    succ = dag.successors()
    depth = {n: 1 for n in dag.nodes}
    for n in reversed(order):
        for s in succ.get(n, ()):
            depth[n] = max(depth[n], 1 + depth[s])
    return max(depth.values())


def coflow_port_loads(coflow: Coflow,
                      config: NetworkConfig) -> tuple[list[int], list[int]]:
    """Per-port load vectors (index p-1 holds port p's load)."""
    load_in = [0] * config.num_ports
    load_out = [0] * config.num_ports
    for f in coflow.flows:
        load_in[f.source - 1] += f.size
        load_out[f.dest - 1] += f.size
    return load_in, load_out


def is_conforming(instance: Instance) -> bool:
    """True iff along every edge weights are non-increasing and per-port
    loads non-decreasing (the regime of the constant-factor bounds)."""
    by_id = instance.coflow_by_id()
    loads = {c.id: coflow_port_loads(c, instance.config)
             for c in instance.coflows}
    for a, b in instance.dag.edges:
        if by_id[a].weight < by_id[b].weight:
            return False
        la_in, la_out = loads[a]
        lb_in, lb_out = loads[b]
        if any(x > y for x, y in zip(la_in, lb_in)):
            return False
        if any(x > y for x, y in zip(la_out, lb_out)):
            return False
    return True


# ---------------------------------------------------------------------------
# instance document format
# ---------------------------------------------------------------------------
# One JSON document per instance. Top-level fields: cores, ports, coflows
# (list of {id, release, weight, flows: [{src, dst, size}]}), edges (list of
# [pred, succ]) and optional jobs (list of {id, weight, coflows}). Unknown
# fields are rejected.

def _reject_unknown(obj: Mapping, allowed: set[str], where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise DocumentError(f"unknown field(s) {sorted(extra)} in {where}")


def _require(obj: Mapping, key: str, where: str):
    if key not in obj:
        raise DocumentError(f"missing field '{key}' in {where}")
    return obj[key]


def _parse_document(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"not a valid document: {exc}") from exc
    if not isinstance(doc, dict):
        raise DocumentError("document root must be an object")
    _reject_unknown(doc, {"cores", "ports", "coflows", "edges", "jobs"},
                    "document root")
    return doc


def _coflows_from_doc(doc: dict) -> tuple[Coflow, ...]:
    coflows = []
    for entry in _require(doc, "coflows", "document root"):
        _reject_unknown(entry, {"id", "release", "weight", "flows"}, "coflow")
        cid = _require(entry, "id", "coflow")
        flows = []
        for fl in _require(entry, "flows", f"coflow {cid}"):
            _reject_unknown(fl, {"src", "dst", "size"}, f"flow of coflow {cid}")
            flows.append((_require(fl, "src", "flow"),
                          _require(fl, "dst", "flow"),
                          _require(fl, "size", "flow")))
        coflows.append(Coflow.make(cid, _require(entry, "release", "coflow"),
                                   _require(entry, "weight", "coflow"), flows))
    return tuple(coflows)


def document_to_instance(text: str) -> Instance:
    doc = _parse_document(text)
    coflows = _coflows_from_doc(doc)
    edges = [tuple(e) for e in _require(doc, "edges", "document root")]
    for e in edges:
        if len(e) != 2:
            raise DocumentError(f"edge {list(e)} must be a [pred, succ] pair")
    config = NetworkConfig(_require(doc, "cores", "document root"),
                           _require(doc, "ports", "document root"))
    return Instance(config, coflows,
                    PrecedenceDag.make((c.id for c in coflows), edges))


def document_to_jobset(text: str) -> JobSet:
    doc = _parse_document(text)
    if "jobs" not in doc:
        raise DocumentError("document has no 'jobs' field")
    instance = document_to_instance(
        json.dumps({k: v for k, v in doc.items() if k != "jobs"}))
    jobs = []
    for entry in doc["jobs"]:
        _reject_unknown(entry, {"id", "weight", "coflows"}, "job")
        jobs.append(Job(_require(entry, "id", "job"),
                        _require(entry, "weight", "job"),
                        tuple(_require(entry, "coflows", "job"))))
    return JobSet(instance.config, tuple(jobs), instance.coflows, instance.dag)


def _instance_payload(config: NetworkConfig, coflows: Sequence[Coflow],
                      dag: PrecedenceDag) -> dict:
    return {
        "cores": config.num_cores,
        "ports": config.num_ports,
        "coflows": [
            {
                "id": c.id,
                "release": c.release,
                "weight": c.weight,
                "flows": [{"src": f.source, "dst": f.dest, "size": f.size}
                          for f in sorted(c.flows,
                                          key=lambda f: (f.source, f.dest))],
            }
            for c in coflows
        ],
        "edges": [list(e) for e in sorted(dag.edges)],
    }


def instance_to_document(instance: Instance) -> str:
    payload = _instance_payload(instance.config, instance.coflows, instance.dag)
    return json.dumps(payload, indent=2) + "\n"


def jobset_to_document(jobset: JobSet) -> str:
    payload = _instance_payload(jobset.config, jobset.coflows,
                                jobset.intra_job_dag)
    payload["jobs"] = [{"id": j.id, "weight": j.weight,
                        "coflows": list(j.coflows)} for j in jobset.jobs]
    return json.dumps(payload, indent=2) + "\n"
