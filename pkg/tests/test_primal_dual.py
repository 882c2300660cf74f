import numpy as np
import pytest

from coflow_forge import (
    COFLOW_LEVEL,
    FLOW_LEVEL,
    JOB_LEVEL,
    BetaRecord,
    DualSolution,
    InvalidInstanceError,
    Job,
    JobSet,
    NetworkConfig,
    PrecedenceDag,
    check_dual_feasibility,
    document_to_dual,
    dual_objective,
    dual_to_document,
    f_port_set,
    f_set,
    permute_coflow_level,
    permute_flow_level,
    permute_jobs,
)
from coflow_forge.generator import GeneratorParams, generate_instance

from conftest import jobset_from_instance, mk_instance


# ---------------------------------------------------------------------------
# f_set / f_port_set
# ---------------------------------------------------------------------------

def test_f_set_examples():
    assert f_set([2, 2], 2) == 6.0
    assert f_set([], 5) == 0.0
    assert f_set([7], 1) == 49.0


def test_f_port_set_examples():
    assert f_port_set([1, 2], 1) == 7.0
    assert f_port_set([], 3) == 0.0
    assert f_port_set([3], 3) == 3.0


def test_f_requires_positive_m():
    with pytest.raises(ValueError):
        f_set([1], 0)
    with pytest.raises(ValueError):
        f_port_set([1], 0)


@pytest.mark.parametrize("seed", range(20))
def test_observation_squared_sum_bound(seed):
    # d(S)^2 <= 2m * f(S) for any multiset and m.
    rng = np.random.default_rng(seed)
    sizes = rng.integers(1, 1000, size=rng.integers(1, 30)).tolist()
    m = int(rng.integers(1, 10))
    assert sum(sizes) ** 2 <= 2 * m * f_set(sizes, m) + 1e-9
    assert sum(sizes) ** 2 <= 2 * m * f_port_set(sizes, m) + 1e-9


# ---------------------------------------------------------------------------
# permute_flow_level
# ---------------------------------------------------------------------------

def test_flow_level_two_coflows(two_coflow_instance):
    perm, dual = permute_flow_level(two_coflow_instance)
    assert perm.order == (2, 1)
    assert dual.kind == FLOW_LEVEL
    assert dual.alpha == {} and dual.gamma == {}
    assert len(dual.beta) == 2
    first, second = dual.beta
    assert first.port == 1 and set(first.coflows) == {1, 2}
    assert first.value == pytest.approx(0.5)
    assert second.port == 1 and set(second.coflows) == {2}
    assert second.value == pytest.approx(1.5)


def test_flow_level_single_coflow():
    inst = mk_instance(3, 2, [(1, 0, 4, [(1, 2, 5)])])
    perm, dual = permute_flow_level(inst)
    assert perm.order == (1,)
    report = check_dual_feasibility(dual, inst)
    assert report.feasible and report.tight_set == (1,)


def test_flow_level_successor_chain_sets_gamma():
    inst = mk_instance(1, 1, [(1, 0, 1, [(1, 1, 1)]),
                              (2, 0, 10, [(1, 1, 1)])],
                       edges=[(1, 2)])
    perm, dual = permute_flow_level(inst)
    assert perm.order == (1, 2)
    assert dual.gamma == {(1, 2): pytest.approx(9.0)}
    report = check_dual_feasibility(dual, inst)
    assert report.feasible and set(report.tight_set) == {1, 2}


def test_flow_level_rejects_bad_inputs(two_coflow_instance):
    with pytest.raises(ValueError):
        permute_flow_level(two_coflow_instance, kappa=0.0)
    bad = mk_instance(1, 1, [(1, 0, -1, [(1, 1, 1)])])
    with pytest.raises(InvalidInstanceError):
        permute_flow_level(bad)


# ---------------------------------------------------------------------------
# permute_coflow_level
# ---------------------------------------------------------------------------

def test_coflow_level_two_coflows(two_coflow_instance):
    perm, dual = permute_coflow_level(two_coflow_instance)
    assert perm.order == (2, 1)
    assert dual.kind == COFLOW_LEVEL
    # coflow-level snapshots freeze the whole unscheduled set
    assert set(dual.beta[0].coflows) == {1, 2}
    assert set(dual.beta[1].coflows) == {2}


def test_coflow_level_release_triggers_alpha():
    inst = mk_instance(1, 1, [(1, 0, 1.0, [(1, 1, 1)]),
                              (2, 100, 1.0, [(1, 1, 1)])])
    perm, dual = permute_coflow_level(inst, kappa=0.5)
    assert perm.order == (1, 2)
    assert len(dual.alpha) == 1
    ((side, port, k), value), = dual.alpha.items()
    assert k == 2 and value > 0
    report = check_dual_feasibility(dual, inst)
    assert report.feasible and set(report.tight_set) == {1, 2}


def test_coflow_level_single():
    inst = mk_instance(2, 3, [(1, 0, 2, [(1, 3, 4), (2, 1, 2)])])
    perm, dual = permute_coflow_level(inst)
    assert perm.order == (1,)
    assert check_dual_feasibility(dual, inst).tight_set == (1,)


# ---------------------------------------------------------------------------
# permute_jobs
# ---------------------------------------------------------------------------

def test_jobs_single():
    js = JobSet(NetworkConfig(1, 1), (Job(1, 1, (1,)),),
                mk_instance(1, 1, [(1, 0, 1, [(1, 1, 3)])]).coflows,
                PrecedenceDag.make([1]))
    perm, dual = permute_jobs(js)
    assert perm.order == (1,)
    assert dual.kind == JOB_LEVEL and dual.gamma == {}


def test_jobs_two_single_coflow_jobs(two_coflow_instance):
    inst = two_coflow_instance
    js = JobSet(inst.config, (Job(1, 1, (1,)), Job(2, 2, (2,))),
                inst.coflows, inst.dag)
    perm, dual = permute_jobs(js)
    assert perm.order == (2, 1)
    assert [rec.value for rec in dual.beta] == pytest.approx([0.5, 1.5])


def test_jobs_smaller_load_first():
    inst = mk_instance(1, 1, [(1, 0, 3, [(1, 1, 1)]),
                              (2, 0, 3, [(1, 1, 5)])])
    js = JobSet(inst.config, (Job(1, 3, (1,)), Job(2, 3, (2,))),
                inst.coflows, inst.dag)
    perm, _ = permute_jobs(js)
    assert perm.order == (1, 2)


def test_jobs_gamma_always_empty():
    for seed in range(5):
        inst = generate_instance(GeneratorParams(n=9, num_ports=4,
                                                 num_cores=2, deg=3,
                                                 seed=seed))
        js = jobset_from_instance(inst)
        _, dual = permute_jobs(js)
        assert dual.gamma == {}


# ---------------------------------------------------------------------------
# dual_objective
# ---------------------------------------------------------------------------

def test_objective_two_coflow_example(two_coflow_instance):
    _, dual = permute_flow_level(two_coflow_instance)
    assert dual_objective(dual, two_coflow_instance) == pytest.approx(5.0)


def test_objective_empty_dual(two_coflow_instance):
    empty = DualSolution(FLOW_LEVEL, 0.5, {}, (), {})
    assert dual_objective(empty, two_coflow_instance) == 0.0


def test_objective_single_coflow_w_times_d():
    for w, d in ((3, 4), (1, 9), (7, 2)):
        inst = mk_instance(1, 1, [(1, 0, w, [(1, 1, d)])])
        _, dual = permute_flow_level(inst)
        assert dual.beta[0].value == pytest.approx(w / d)
        assert dual_objective(dual, inst) == pytest.approx(w * d)


def test_objective_unknown_reference(two_coflow_instance):
    dual = DualSolution(FLOW_LEVEL, 0.5, {},
                        (BetaRecord("in", 1, (9,), 1.0),), {})
    with pytest.raises(ValueError, match="unknown coflow"):
        dual_objective(dual, two_coflow_instance)


def test_objective_alpha_slot_demand():
    # alpha sits on slot (port, 1) / (1, port); its r + d term uses that slot.
    inst = mk_instance(1, 2, [(1, 0, 1.0, [(1, 1, 1)]),
                              (2, 50, 1.0, [(1, 1, 4)])])
    perm, dual = permute_coflow_level(inst)
    assert perm.order == (1, 2)
    # release 50 dominates: alpha pays (release + port load) at coflow level
    assert dual_objective(dual, inst) >= 50.0


# ---------------------------------------------------------------------------
# check_dual_feasibility
# ---------------------------------------------------------------------------

def test_feasibility_scaled_beta_detected(two_coflow_instance):
    _, dual = permute_flow_level(two_coflow_instance)
    scaled = DualSolution(dual.kind, dual.kappa, dual.alpha,
                          tuple(BetaRecord(r.side, r.port, r.coflows,
                                           r.value * 10)
                                for r in dual.beta), dual.gamma)
    report = check_dual_feasibility(scaled, two_coflow_instance)
    assert not report.feasible
    assert report.max_violation > 1.0


def test_feasibility_empty_dual(two_coflow_instance):
    empty = DualSolution(FLOW_LEVEL, 0.5, {}, (), {})
    report = check_dual_feasibility(empty, two_coflow_instance)
    assert report.feasible and report.tight_set == ()


def test_feasibility_rejects_bad_tol(two_coflow_instance):
    _, dual = permute_flow_level(two_coflow_instance)
    with pytest.raises(ValueError):
        check_dual_feasibility(dual, two_coflow_instance, rel_tol=0)


# ---------------------------------------------------------------------------
# algorithm invariants over seeded instances
# ---------------------------------------------------------------------------

def _random_instance(seed):
    return generate_instance(GeneratorParams(
        n=3 + seed % 12, num_ports=6, num_cores=1 + seed % 3,
        deg=0 if seed % 2 else 3, seed=seed,
        release_horizon=0 if seed % 4 < 2 else 30))


@pytest.mark.parametrize("seed", range(24))
def test_all_levels_feasible_and_tight(seed):
    inst = _random_instance(seed)
    js = jobset_from_instance(inst)
    for perm, dual, subject in (
            (*permute_flow_level(inst), inst),
            (*permute_coflow_level(inst), inst),
            (*permute_jobs(js), js)):
        report = check_dual_feasibility(dual, subject, rel_tol=1e-6)
        n_entities = len(js.jobs) if dual.kind == JOB_LEVEL else len(inst.coflows)
        assert report.feasible, (seed, dual.kind, report.max_violation)
        assert len(report.tight_set) == n_entities, (seed, dual.kind)
        assert sorted(perm.order) == sorted(
            j.id for j in js.jobs) if dual.kind == JOB_LEVEL else sorted(
            c.id for c in inst.coflows)


@pytest.mark.parametrize("seed", range(12))
def test_zero_release_means_no_alpha(seed):
    inst = generate_instance(GeneratorParams(n=10, num_ports=5, num_cores=2,
                                             deg=3, seed=seed))
    for permute in (permute_flow_level, permute_coflow_level):
        _, dual = permute(inst)
        assert dual.alpha == {}


@pytest.mark.parametrize("seed", range(12))
def test_zero_release_order_is_topological(seed):
    inst = generate_instance(GeneratorParams(n=12, num_ports=5, num_cores=2,
                                             deg=3, seed=seed))
    for permute in (permute_flow_level, permute_coflow_level):
        perm, dual = permute(inst)
        assert dual.alpha == {}
        pos = {k: i for i, k in enumerate(perm.order)}
        for a, b in inst.dag.edges:
            assert pos[a] < pos[b], (seed, permute.__name__)


@pytest.mark.parametrize("seed", range(10))
def test_conforming_instances_have_no_gamma(seed):
    inst = generate_instance(GeneratorParams(n=10, num_ports=5, num_cores=2,
                                             deg=3, seed=seed,
                                             conforming=True))
    for permute in (permute_flow_level, permute_coflow_level):
        _, dual = permute(inst)
        assert dual.gamma == {}, (seed, permute.__name__)


def test_determinism(two_coflow_instance):
    for permute in (permute_flow_level, permute_coflow_level):
        a = permute(two_coflow_instance)
        b = permute(two_coflow_instance)
        assert a == b


@pytest.mark.parametrize("seed", range(6))
def test_beta_values_non_negative_and_snapshots_shrink(seed):
    inst = _random_instance(seed)
    _, dual = permute_flow_level(inst)
    for rec in dual.beta:
        assert rec.value >= 0
        assert rec.coflows == tuple(sorted(rec.coflows))
    for v in dual.gamma.values():
        assert v > 0


@pytest.mark.parametrize("kappa", [0.05, 1.0, 2.5])
def test_nondefault_kappa_still_feasible_and_tight(kappa):
    for seed in range(6):
        inst = generate_instance(GeneratorParams(n=8, num_ports=6,
                                                 num_cores=2, deg=3,
                                                 seed=seed,
                                                 release_horizon=30))
        for permute in (permute_flow_level, permute_coflow_level):
            _, dual = permute(inst, kappa)
            assert dual.kappa == kappa
            report = check_dual_feasibility(dual, inst, rel_tol=1e-6)
            assert report.feasible
            assert len(report.tight_set) == len(inst.coflows)


def test_empty_coflow_is_handled():
    # A coflow without flows still gets placed and made tight via alpha.
    inst = mk_instance(1, 2, [(1, 0, 1, [(1, 1, 3)]), (2, 0, 2, [])])
    for permute in (permute_flow_level, permute_coflow_level):
        perm, dual = permute(inst)
        assert sorted(perm.order) == [1, 2]
        report = check_dual_feasibility(dual, inst)
        assert report.feasible and set(report.tight_set) == {1, 2}


# ---------------------------------------------------------------------------
# dual documents
# ---------------------------------------------------------------------------

def test_dual_document_round_trip_flow(two_coflow_instance):
    _, dual = permute_flow_level(two_coflow_instance)
    text = dual_to_document(dual, two_coflow_instance)
    back = document_to_dual(text)
    assert back == dual
    assert dual_to_document(back, two_coflow_instance) == text


def test_dual_document_round_trip_coflow_and_job(two_coflow_instance):
    inst = two_coflow_instance
    _, dual = permute_coflow_level(inst)
    text = dual_to_document(dual, inst)
    assert document_to_dual(text) == dual

    js = JobSet(inst.config, (Job(1, 1, (1,)), Job(2, 2, (2,))),
                inst.coflows, inst.dag)
    _, jdual = permute_jobs(js)
    jtext = dual_to_document(jdual, js)
    assert document_to_dual(jtext) == jdual


def test_dual_document_flow_snapshots_are_triples(two_coflow_instance):
    import json
    _, dual = permute_flow_level(two_coflow_instance)
    doc = json.loads(dual_to_document(dual, two_coflow_instance))
    assert doc["beta"][0]["snapshot"] == [[1, 1, 1], [1, 1, 2]]
