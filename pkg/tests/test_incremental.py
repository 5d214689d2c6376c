from __future__ import annotations

import pytest

from incropt.algebra import ExprSig
from incropt.baselines import brute_force_optimize
from incropt.catalog import StatUpdate, apply_update
from incropt.errors import UnknownTarget
from incropt.incremental import ReoptSession, stat_to_deltas
from incropt.optimizer import DeclarativeOptimizer, Strategies
from incropt.workload import UPDATE_FACTORS, make_update_batch, make_workload


def fresh_session(cat, q, **kw):
    opt = DeclarativeOptimizer(cat, q, **kw).run()
    return opt, ReoptSession(opt)


def test_identity_factor_produces_no_deltas(q3s_fixture):
    cat, q = q3s_fixture
    opt, _ = fresh_session(cat, q)
    assert stat_to_deltas(StatUpdate("scan_cost", "lineitem", 1.0), opt) == []


def test_scan_update_targets_exactly_leaf_rows(q3s_fixture):
    # with pruning off, everything stays alive and propagation covers the
    # rest, so the seeded deltas are exactly the leaf rows over the relation
    cat, q = q3s_fixture
    opt, _ = fresh_session(cat, q, strategies=Strategies.none())
    opt.rebind_catalog(apply_update(cat, StatUpdate("scan_cost", "lineitem", 8.0)),
                       frozenset(["lineitem"]))
    deltas = stat_to_deltas(StatUpdate("scan_cost", "lineitem", 8.0), opt)
    rows = {d.payload for d in deltas}
    expect = {(g, ak) for g, gs in opt.groups.items()
              if g[0] == ExprSig.of(["lineitem"]) for ak in gs.alts}
    assert rows == expect and rows


def test_unknown_target_rejected(q3s_fixture):
    cat, q = q3s_fixture
    opt, _ = fresh_session(cat, q)
    with pytest.raises(UnknownTarget):
        stat_to_deltas(StatUpdate("scan_cost", "nope", 2.0), opt)
    with pytest.raises(UnknownTarget):
        stat_to_deltas(StatUpdate("join_selectivity", "a.x=b.y", 2.0), opt)


def test_noop_batch_converges_immediately(q3s_fixture):
    cat, q = q3s_fixture
    _, session = fresh_session(cat, q)
    session.add_updates([StatUpdate("scan_cost", "lineitem", 1.0)])
    plan, m = session.reoptimize()
    assert m.touched_and == 0 and m.touched_or == 0
    assert not m.plan_changed
    assert m.update_ratio_and == 0.0 and m.update_ratio_or == 0.0
    assert session.converged()


def test_reoptimize_equals_from_scratch_randomized():
    checked = 0
    for shape in ("chain", "star", "clique"):
        for n in (3, 4, 5):
            for seed in range(3):
                cat, q = make_workload(shape, n, seed)
                opt, session = fresh_session(cat, q)
                batch = make_update_batch(cat, 1 + seed, seed * 7 + n)
                session.add_updates(batch)
                plan, _ = session.reoptimize()
                updated = cat
                for u in batch:
                    updated = apply_update(updated, u)
                fresh, _ = brute_force_optimize(q, updated)
                assert plan == fresh, (shape, n, seed)
                assert opt.audit_refcounts() == []
                assert opt.audit_fixpoint() == []
                checked += 1
    assert checked == 27


def test_plan_change_is_detected(q5s_fixture):
    cat, q = q5s_fixture
    _, session = fresh_session(cat, q)
    before = session.plan
    u = StatUpdate("join_selectivity", "nation.n_regionkey=region.r_regionkey", 8.0)
    session.add_updates([u])
    plan, m = session.reoptimize()
    fresh, _ = brute_force_optimize(q, apply_update(cat, u))
    assert plan == fresh
    assert m.plan_changed == (plan.structure() != before.structure())
    assert m.plan_changed
    assert not session.converged()


def test_second_identical_reoptimize_touches_nothing(q5s_fixture):
    cat, q = q5s_fixture
    _, session = fresh_session(cat, q)
    session.add_updates(make_update_batch(cat, 3, 11))
    session.reoptimize()
    _, m2 = session.reoptimize()
    assert (m2.touched_and, m2.touched_or) == (0, 0)
    assert session.converged()


def test_inverse_updates_restore_state(q3s_fixture, q5s_fixture):
    for cat, q in (q3s_fixture, q5s_fixture):
        opt, session = fresh_session(cat, q)
        before = opt.state_digest()
        batch = [StatUpdate("scan_cost", "lineitem", 8.0),
                 StatUpdate("join_selectivity",
                            "orders.o_orderkey=lineitem.l_orderkey", 0.25)]
        session.add_updates(batch)
        session.reoptimize()
        session.add_updates([u.inverse() for u in reversed(batch)])
        session.reoptimize()
        assert opt.state_digest() == before
        _, m3 = session.reoptimize()
        assert session.converged() and m3.touched_and == 0


def test_touched_counters_and_ratios(q5s_fixture):
    cat, q = q5s_fixture
    opt, session = fresh_session(cat, q)
    session.add_updates([StatUpdate("scan_cost", "lineitem", 8.0)])
    _, m = session.reoptimize()
    assert 0 < m.touched_and < m.total_and
    assert 0 < m.touched_or <= m.total_or
    assert m.update_ratio_and == m.touched_and / m.total_and
    assert m.wall_time_ms >= 0.0


def test_locality_topmost_join_cheaper_than_leaf(q5s_fixture):
    # changes near the plan root reach fewer alternatives than a scan-cost
    # change on the largest relation, which sits deep in the plan
    cat, q = q5s_fixture
    base, _ = brute_force_optimize(q, cat)
    top_preds = cat.crossing_predicates(base.children[0].expr.rels,
                                        base.children[1].expr.rels)
    largest = max(cat.relations, key=lambda r: r.cardinality)
    assert largest.name == "lineitem"
    for factor in (0.125, 8.0):
        _, s_top = fresh_session(cat, q)
        s_top.add_updates([StatUpdate("join_selectivity", top_preds[0].name, factor)])
        _, m_top = s_top.reoptimize()
        _, s_leaf = fresh_session(cat, q)
        s_leaf.add_updates([StatUpdate("scan_cost", largest.name, factor)])
        _, m_leaf = s_leaf.reoptimize()
        assert m_top.touched_and < m_leaf.touched_and, factor


def test_batch_equals_sequential_at_quiescence(q3s_fixture):
    cat, q = q3s_fixture
    batch = [StatUpdate("scan_cost", "lineitem", 8.0),
             StatUpdate("scan_cost", "orders", 0.5)]
    opt_a, s_a = fresh_session(cat, q)
    s_a.add_updates(batch)
    s_a.reoptimize()
    opt_b, s_b = fresh_session(cat, q)
    for u in batch:
        s_b.add_updates([u])
        s_b.reoptimize()
    assert opt_a.state_digest() == opt_b.state_digest()


@pytest.mark.parametrize("factor", UPDATE_FACTORS)
def test_all_grid_factors(q3s_fixture, factor):
    cat, q = q3s_fixture
    _, session = fresh_session(cat, q)
    session.add_updates([StatUpdate("scan_cost", "orders", factor)])
    plan, _ = session.reoptimize()
    fresh, _ = brute_force_optimize(
        q, apply_update(cat, StatUpdate("scan_cost", "orders", factor)))
    assert plan == fresh


def test_pruned_row_readmitted_when_it_becomes_viable(q5s_fixture):
    # a row suppressed by aggregate selection is re-inserted once an update
    # makes it the group minimum
    cat, q = q5s_fixture
    opt, session = fresh_session(cat, q)
    before = set(opt.visible_rows())
    u = StatUpdate("join_selectivity", "nation.n_regionkey=region.r_regionkey", 8.0)
    session.add_updates([u])
    plan, m = session.reoptimize()
    assert m.plan_changed
    after = set(opt.visible_rows())
    readmitted = after - before
    assert readmitted, "expected previously pruned rows to come back"
    assert opt.final_state_check()["ok"]
