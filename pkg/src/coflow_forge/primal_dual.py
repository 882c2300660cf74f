"""Primal-dual ordering of coflows and jobs, plus the dual lower bound.

The three permutation builders share one right-to-left loop. Each iteration
fills the last open position: either the alpha rule fires (the most recently
released entity is pushed to the back because its release dominates the
remaining bottleneck load) or the beta rule raises the dual variable of the
bottleneck port until some entity's constraint becomes tight. An entity picked
by the beta rule that still has unscheduled successors is traded, via a gamma
variable on the final chain edge, for a successor-free descendant so the
emitted order can respect precedence.

All dual variables stay non-negative, every constraint stays feasible and the
constraint of each placed entity is tight at the moment of placement, which
makes the dual objective a certified lower bound on the optimal total
weighted completion time.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import (
    Coflow,
    DocumentError,
    Instance,
    InvalidInstanceError,
    JobSet,
    coflow_port_loads,
    validate_instance,
    validate_jobset,
)

FLOW_LEVEL = "flow-level"
COFLOW_LEVEL = "coflow-level"
JOB_LEVEL = "job-level"

DEFAULT_KAPPA = 0.5

# Tiny residual noise below this scale is rounding, not signal.
_EPS = 1e-9


@dataclass(frozen=True)
class Permutation:
    order: tuple[int, ...]


@dataclass(frozen=True)
class BetaRecord:
    """One raise of a port's dual variable.

    `coflows` freezes the unscheduled set at that moment; for flow-level
    duals the underlying subset is the flows of those coflows at the port.
    """

    side: str  # "in" | "out"
    port: int  # 1..N
    coflows: tuple[int, ...]
    value: float


@dataclass(frozen=True)
class DualSolution:
    kind: str  # FLOW_LEVEL | COFLOW_LEVEL | JOB_LEVEL
    kappa: float
    alpha: dict[tuple[str, int, int], float]  # (side, port, entity id) -> value
    beta: tuple[BetaRecord, ...]
    gamma: dict[tuple[int, int], float]  # (pred, succ) -> value


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    max_violation: float  # worst relative overshoot of any constraint, >= 0
    tight_set: tuple[int, ...]
    lhs: dict[int, float] = field(default_factory=dict)


def f_set(sizes: Iterable[float], m: int) -> float:
    """(sum(d)^2 + sum(d^2)) / (2m) over a multiset of flow sizes."""
    if m < 1:
        raise ValueError("m must be >= 1")
    total = 0.0
    squares = 0.0
    for d in sizes:
        total += d
        squares += d * d
    return (total * total + squares) / (2.0 * m)


def f_port_set(loads: Iterable[float], m: int) -> float:
    """Same aggregate applied to per-coflow port loads (zeros allowed)."""
    return f_set(loads, m)


# ---------------------------------------------------------------------------
# shared right-to-left engine
# ---------------------------------------------------------------------------

class _Entities:
    """Dense arrays for the entities being permuted (coflows or jobs)."""

    def __init__(self, ids: Sequence[int], release: Sequence[int],
                 weight: Sequence[float], load_in: np.ndarray,
                 load_out: np.ndarray,
                 successors: Mapping[int, Sequence[int]]):
        self.ids = list(ids)
        self.index = {e: i for i, e in enumerate(ids)}
        self.release = np.asarray(release, dtype=np.int64)
        self.weight = np.asarray(weight, dtype=np.float64)
        self.load_in = np.asarray(load_in, dtype=np.float64)
        self.load_out = np.asarray(load_out, dtype=np.float64)
        self.successors = {self.index[a]: sorted(self.index[b] for b in bs)
                           for a, bs in successors.items()}


def _run_engine(ent: _Entities, m: int, kappa: float, kind: str,
                snapshot_ids) -> tuple[Permutation, DualSolution]:
    n = len(ent.ids)
    port_in = ent.load_in.sum(axis=0)
    port_out = ent.load_out.sum(axis=0)
    resid = ent.weight.astype(np.float64).copy()
    unsched = np.ones(n, dtype=bool)

    alpha: dict[tuple[str, int, int], float] = {}
    beta: list[BetaRecord] = []
    gamma: dict[tuple[int, int], float] = {}
    sigma = [0] * n
    scale = max(1.0, float(ent.weight.max())) if n else 1.0

    for pos in range(n, 0, -1):
        mu1 = int(np.argmax(port_in))
        mu2 = int(np.argmax(port_out))
        # Strict ">" so the output side wins ties, matching the branch test.
        if port_in[mu1] > port_out[mu2]:
            side, port = "in", mu1
            loads = ent.load_in[:, mu1]
            bottleneck = port_in[mu1]
        else:
            side, port = "out", mu2
            loads = ent.load_out[:, mu2]
            bottleneck = port_out[mu2]

        krel = int(np.argmax(np.where(unsched, ent.release, -1)))
        cand_mask = unsched & (loads > 0)

        if ent.release[krel] > kappa * bottleneck / m or not cand_mask.any():
            # Alpha rule: release dominates (or, degenerately, nothing loads
            # the bottleneck port); raising alpha makes krel tight.
            chosen = krel
            alpha[(side, port + 1, ent.ids[krel])] = float(resid[krel])
        else:
            ratios = np.full(n, np.inf)
            np.divide(resid, loads, out=ratios, where=cand_mask)
            cand = int(np.argmin(ratios))
            f1 = float(ratios[cand])

            t1 = cand
            t0 = -1
            while True:
                nxt = next((s for s in ent.successors.get(t1, ())
                            if unsched[s]), None)
                if nxt is None:
                    break
                t0, t1 = t1, nxt
            if t1 != cand:
                g = float(resid[t1] - loads[t1] * f1)
                if g < -_EPS * scale:
                    raise RuntimeError(
                        "internal error: negative gamma for edge "
                        f"({ent.ids[t0]},{ent.ids[t1]}): {g}")
                if g > _EPS * scale:
                    gamma[(ent.ids[t0], ent.ids[t1])] = g
                    resid[t0] += g
                    resid[t1] -= g

            beta.append(BetaRecord(side, port + 1,
                                   snapshot_ids(unsched, side, port + 1, loads),
                                   f1))
            resid[unsched] -= f1 * loads[unsched]
            chosen = t1

        sigma[pos - 1] = ent.ids[chosen]
        unsched[chosen] = False
        port_in = port_in - ent.load_in[chosen]
        port_out = port_out - ent.load_out[chosen]
        if unsched.any():
            worst = float(resid[unsched].min())
            if worst < -1e-6 * scale:
                raise RuntimeError(
                    f"internal error: residual weight went negative ({worst})")
            np.clip(resid, 0.0, None, out=resid)

    dual = DualSolution(kind, kappa, alpha, tuple(beta), gamma)
    return Permutation(tuple(sigma)), dual


def _coflow_arrays(instance: Instance):
    coflows = sorted(instance.coflows, key=lambda c: c.id)
    n = len(coflows)
    num_ports = instance.config.num_ports
    load_in = np.zeros((n, num_ports))
    load_out = np.zeros((n, num_ports))
    for i, c in enumerate(coflows):
        li, lo = coflow_port_loads(c, instance.config)
        load_in[i] = li
        load_out[i] = lo
    return coflows, load_in, load_out


def _checked(instance: Instance, kappa: float) -> None:
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    report = validate_instance(instance)
    if not report.ok:
        raise InvalidInstanceError(report.violations)


def permute_flow_level(instance: Instance,
                       kappa: float = DEFAULT_KAPPA
                       ) -> tuple[Permutation, DualSolution]:
    """Order coflows for flow-level scheduling; returns (order, feasible dual)."""
    _checked(instance, kappa)
    coflows, load_in, load_out = _coflow_arrays(instance)
    ent = _Entities([c.id for c in coflows], [c.release for c in coflows],
                    [c.weight for c in coflows], load_in, load_out,
                    instance.dag.successors())

    def snapshot(unsched, side, port, loads):
        # Only coflows with flows at the port belong to the frozen flow set.
        return tuple(ent.ids[i] for i in np.flatnonzero(unsched & (loads > 0)))

    return _run_engine(ent, instance.config.num_cores, kappa, FLOW_LEVEL,
                       snapshot)


def permute_coflow_level(instance: Instance,
                         kappa: float = DEFAULT_KAPPA
                         ) -> tuple[Permutation, DualSolution]:
    """Order coflows for coflow-level scheduling; returns (order, dual)."""
    _checked(instance, kappa)
    coflows, load_in, load_out = _coflow_arrays(instance)
    ent = _Entities([c.id for c in coflows], [c.release for c in coflows],
                    [c.weight for c in coflows], load_in, load_out,
                    instance.dag.successors())

    def snapshot(unsched, side, port, loads):
        # The whole unscheduled coflow set is frozen, loaded or not.
        return tuple(ent.ids[i] for i in np.flatnonzero(unsched))

    return _run_engine(ent, instance.config.num_cores, kappa, COFLOW_LEVEL,
                       snapshot)


def permute_jobs(jobset: JobSet,
                 kappa: float = DEFAULT_KAPPA
                 ) -> tuple[Permutation, DualSolution]:
    """Order jobs; gamma stays empty since jobs have no mutual precedence."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    report = validate_jobset(jobset)
    if not report.ok:
        raise InvalidInstanceError(report.violations)

    jobs = sorted(jobset.jobs, key=lambda j: j.id)
    by_id = jobset.coflow_by_id()
    num_ports = jobset.config.num_ports
    n = len(jobs)
    load_in = np.zeros((n, num_ports))
    load_out = np.zeros((n, num_ports))
    release = []
    coflow_in = {}
    coflow_out = {}
    for c in jobset.coflows:
        coflow_in[c.id], coflow_out[c.id] = coflow_port_loads(c, jobset.config)
    for i, job in enumerate(jobs):
        for k in job.coflows:
            load_in[i] += coflow_in[k]
            load_out[i] += coflow_out[k]
        release.append(by_id[job.coflows[0]].release)

    ent = _Entities([j.id for j in jobs], release, [j.weight for j in jobs],
                    load_in, load_out, {})
    members = {ent.index[j.id]: sorted(j.coflows) for j in jobs}

    def snapshot(unsched, side, port, loads):
        # Freeze the coflows (not the jobs) carrying load at the port.
        per = coflow_in if side == "in" else coflow_out
        return tuple(k for i in np.flatnonzero(unsched) for k in members[i]
                     if per[k][port - 1] > 0)

    return _run_engine(ent, jobset.config.num_cores, kappa, JOB_LEVEL,
                       snapshot)


# ---------------------------------------------------------------------------
# dual objective and feasibility
# ---------------------------------------------------------------------------

def _port_demand(coflow: Coflow, side: str, port: int) -> list[int]:
    if side == "in":
        return [f.size for f in coflow.flows if f.source == port]
    return [f.size for f in coflow.flows if f.dest == port]


def _slot_demand(coflow: Coflow, side: str, port: int) -> int:
    # The alpha variable of the flow-level dual sits on slot (port, 1) or
    # (1, port); its objective coefficient is that slot's demand.
    for f in coflow.flows:
        if side == "in" and f.source == port and f.dest == 1:
            return f.size
        if side == "out" and f.source == 1 and f.dest == port:
            return f.size
    return 0


def dual_objective(dual: DualSolution,
                   subject: Instance | JobSet) -> float:
    """Value of the feasible dual solution: the certified lower bound.

    Gamma variables are kept as per-edge aggregates; the underlying per-slot
    variables are placed on a zero-coefficient slot, so the precedence terms
    contribute nothing here. That choice never overstates the certificate
    (any other distribution of the same aggregate is also feasible and only
    adds non-negative terms).
    """
    m = subject.config.num_cores
    by_id = subject.coflow_by_id()

    def coflow(k: int) -> Coflow:
        if k not in by_id:
            raise ValueError(f"dual references unknown coflow {k}")
        return by_id[k]

    total = 0.0
    if dual.kind == JOB_LEVEL:
        if not isinstance(subject, JobSet):
            raise ValueError("job-level dual requires a JobSet")
        if dual.gamma:
            raise ValueError("job-level dual must not carry gamma variables")
        jobs = {j.id: j for j in subject.jobs}
        for (side, port, t), value in dual.alpha.items():
            if t not in jobs:
                raise ValueError(f"dual references unknown job {t}")
            total += value * coflow(jobs[t].coflows[0]).release
        for rec in dual.beta:
            loads = [sum(_port_demand(coflow(k), rec.side, rec.port))
                     for k in rec.coflows]
            total += rec.value * f_port_set(loads, m)
        return total

    for (_, k), _value in dual.gamma.items():
        coflow(k)  # unknown references are an error even at zero coefficient

    if dual.kind == FLOW_LEVEL:
        for (side, port, k), value in dual.alpha.items():
            c = coflow(k)
            total += value * (c.release + _slot_demand(c, side, port))
        for rec in dual.beta:
            sizes: list[int] = []
            for k in rec.coflows:
                sizes.extend(_port_demand(coflow(k), rec.side, rec.port))
            total += rec.value * f_set(sizes, m)
        return total

    if dual.kind == COFLOW_LEVEL:
        for (side, port, k), value in dual.alpha.items():
            c = coflow(k)
            total += value * (c.release + sum(_port_demand(c, side, port)))
        for rec in dual.beta:
            loads = [sum(_port_demand(coflow(k), rec.side, rec.port))
                     for k in rec.coflows]
            total += rec.value * f_port_set(loads, m)
        return total

    raise ValueError(f"unknown dual kind {dual.kind!r}")


def constraint_lhs(dual: DualSolution,
                   subject: Instance | JobSet) -> dict[int, float]:
    """Left-hand side of every entity's dual constraint."""
    by_id = subject.coflow_by_id()
    port_load: dict[tuple[int, str, int], float] = {}

    def load_of(k: int, side: str, port: int) -> float:
        key = (k, side, port)
        if key not in port_load:
            if k not in by_id:
                raise ValueError(f"dual references unknown coflow {k}")
            port_load[key] = float(sum(_port_demand(by_id[k], side, port)))
        return port_load[key]

    coflow_lhs: dict[int, float] = {c.id: 0.0 for c in subject.coflows}
    for rec in dual.beta:
        for k in rec.coflows:
            if k not in coflow_lhs:
                raise ValueError(f"dual references unknown coflow {k}")
            coflow_lhs[k] += rec.value * load_of(k, rec.side, rec.port)
    for (a, b), value in dual.gamma.items():
        coflow_lhs[b] += value
        coflow_lhs[a] -= value

    if dual.kind == JOB_LEVEL:
        assert isinstance(subject, JobSet)
        lhs = {j.id: sum(coflow_lhs[k] for k in j.coflows)
               for j in subject.jobs}
        for (_, _, t), value in dual.alpha.items():
            lhs[t] += value
        return lhs

    for (_, _, k), value in dual.alpha.items():
        coflow_lhs[k] += value
    return coflow_lhs


def check_dual_feasibility(dual: DualSolution, subject: Instance | JobSet,
                           rel_tol: float = 1e-6) -> FeasibilityReport:
    """Evaluate every dual constraint: feasible iff LHS <= w (1 + rel_tol)."""
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    lhs = constraint_lhs(dual, subject)
    if dual.kind == JOB_LEVEL:
        assert isinstance(subject, JobSet)
        weights = {j.id: float(j.weight) for j in subject.jobs}
    else:
        weights = {c.id: float(c.weight) for c in subject.coflows}

    worst = 0.0
    tight: list[int] = []
    feasible = True
    for eid, w in sorted(weights.items()):
        excess = (lhs[eid] - w) / w
        worst = max(worst, excess)
        if excess > rel_tol:
            feasible = False
        if abs(lhs[eid] - w) <= rel_tol * w:
            tight.append(eid)
    return FeasibilityReport(feasible, worst, tuple(tight), lhs)


# ---------------------------------------------------------------------------
# dual document format
# ---------------------------------------------------------------------------
# {"kind": ..., "kappa": ..., "alpha": [{"side","port","id","value"}],
#  "beta": [{"side","port","snapshot","value"}], "gamma": [{"pred","succ",
#  "value"}]}. Flow-level beta snapshots list [src, dst, coflow] triples;
#  coflow- and job-level snapshots list coflow ids.

def dual_to_document(dual: DualSolution, subject: Instance | JobSet) -> str:
    by_id = subject.coflow_by_id()

    def snapshot_payload(rec: BetaRecord):
        if dual.kind != FLOW_LEVEL:
            return sorted(rec.coflows)
        triples = []
        for k in sorted(rec.coflows):
            c = by_id[k]
            for f in sorted(c.flows, key=lambda f: (f.source, f.dest)):
                if (rec.side == "in" and f.source == rec.port) or \
                        (rec.side == "out" and f.dest == rec.port):
                    triples.append([f.source, f.dest, k])
        return triples

    payload = {
        "kind": dual.kind,
        "kappa": dual.kappa,
        "alpha": [{"side": s, "port": p, "id": e, "value": v}
                  for (s, p, e), v in sorted(dual.alpha.items())],
        "beta": [{"side": rec.side, "port": rec.port,
                  "snapshot": snapshot_payload(rec), "value": rec.value}
                 for rec in dual.beta],
        "gamma": [{"pred": a, "succ": b, "value": v}
                  for (a, b), v in sorted(dual.gamma.items())],
    }
    return json.dumps(payload, indent=2) + "\n"


def document_to_dual(text: str) -> DualSolution:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"not a valid dual document: {exc}") from exc
    for key in ("kind", "kappa", "alpha", "beta", "gamma"):
        if key not in doc:
            raise DocumentError(f"missing field '{key}' in dual document")
    extra = set(doc) - {"kind", "kappa", "alpha", "beta", "gamma"}
    if extra:
        raise DocumentError(f"unknown field(s) {sorted(extra)} in dual document")

    kind = doc["kind"]
    alpha = {(a["side"], a["port"], a["id"]): a["value"] for a in doc["alpha"]}
    beta = []
    for b in doc["beta"]:
        snap = b["snapshot"]
        if kind == FLOW_LEVEL:
            ids = tuple(sorted({triple[2] for triple in snap}))
        else:
            ids = tuple(snap)
        beta.append(BetaRecord(b["side"], b["port"], ids, b["value"]))
    gamma = {(g["pred"], g["succ"]): g["value"] for g in doc["gamma"]}
    return DualSolution(kind, doc["kappa"], alpha, tuple(beta), gamma)
