"""Re-optimization sessions: statistics updates in, new optimal plan out.

An update batch is first folded into the catalog, then converted into
recost deltas aimed at exactly the state the changed numbers can reach:

* a scan-cost change touches the leaf rows over that relation, plus any
  alive row whose affected child subtree is currently pruned away (those
  rows cannot hear about the change through delta propagation, so they are
  refreshed directly);
* a join-selectivity change touches every alternative of every alive group
  whose expression contains both endpoint relations, since their output or
  input summaries change.

Everything else is reached through ordinary fixpoint propagation, and the
result provably equals a from-scratch optimization over the updated
catalog.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

from .catalog import JOIN_SELECTIVITY, SCAN_COST, StatUpdate, apply_update
from .deltaflow import Delta, INSERT
from .errors import UnknownTarget
from .optimizer import DeclarativeOptimizer
from .plan import PlanNode


@dataclass
class ReoptMetrics:
    touched_and: int
    touched_or: int
    total_and: int
    total_or: int
    update_ratio_and: float
    update_ratio_or: float
    wall_time_ms: float
    plan_changed: bool

    def to_dict(self) -> dict:
        return {
            "touched_and": self.touched_and,
            "touched_or": self.touched_or,
            "total_and": self.total_and,
            "total_or": self.total_or,
            "update_ratio_and": self.update_ratio_and,
            "update_ratio_or": self.update_ratio_or,
            "wall_time_ms": self.wall_time_ms,
            "plan_changed": self.plan_changed,
        }


def stat_to_deltas(u: StatUpdate, opt: DeclarativeOptimizer) -> list[Delta]:
    """Convert one statistics update into recost deltas over the live state.

    The optimizer's catalog must already reflect the update.  A factor of
    1.0 is an identity and produces no deltas.
    """
    if u.kind == SCAN_COST:
        opt.catalog.relation(u.target)  # raises UnknownTarget
    elif u.kind == JOIN_SELECTIVITY:
        rels = sorted(u.target_relations())
        if not opt.catalog.predicates_between(*rels):
            raise UnknownTarget(f"no predicate {u.target!r} in catalog")
    else:
        raise UnknownTarget(f"unknown update kind {u.kind!r}")
    if u.factor == 1.0:
        return []
    targets = u.target_relations()
    out: list[Delta] = []
    for g, gs in opt.groups.items():
        if not gs.alive:
            continue
        expr = set(g[0].rels)
        if u.kind == JOIN_SELECTIVITY:
            if targets <= expr:
                out.extend(Delta("recost", INSERT, (g, ak)) for ak in gs.alts)
            continue
        # scan-cost update: leaf rows over the relation, plus rows whose
        # affected child is currently pruned and hence unreachable by
        # propagation
        if not (targets & expr):
            continue
        if g[0].is_leaf:
            out.extend(Delta("recost", INSERT, (g, ak)) for ak in gs.alts)
            continue
        for ak, a in gs.alts.items():
            for child in a.alt.children():
                if not (targets & set(child[0].rels)):
                    continue
                cgs = opt.groups.get(child)
                if cgs is None or not cgs.alive:
                    out.append(Delta("recost", INSERT, (g, ak)))
                break
    return out


class ReoptSession:
    """Single-owner re-optimization loop over one quiescent optimizer."""

    def __init__(self, opt: DeclarativeOptimizer):
        self.opt = opt
        self.pending: list[StatUpdate] = []
        self.last_metrics: ReoptMetrics | None = None
        self._last_plan: PlanNode = opt.best_plan()

    @property
    def plan(self) -> PlanNode:
        return self._last_plan

    def add_updates(self, updates) -> None:
        self.pending.extend(updates)

    def reoptimize(self) -> tuple[PlanNode, ReoptMetrics]:
        """Apply the pending batch, drain to fixpoint, report touch metrics."""
        start = time.perf_counter()
        opt = self.opt
        batch, self.pending = self.pending, []
        new_cat = opt.catalog
        affected: set[str] = set()
        for u in batch:
            if u.factor != 1.0:
                new_cat = apply_update(new_cat, u)
                affected |= u.target_relations()
        if affected:
            opt.rebind_catalog(new_cat, frozenset(affected))
        opt.set_tracking(True)
        deltas: list[Delta] = []
        for u in batch:
            deltas.extend(stat_to_deltas(u, opt))
        opt.push_and_run(deltas)
        opt.set_tracking(False)
        touched_and = len(opt.touched_and)
        touched_or = len(opt.touched_or)
        plan = opt.best_plan()
        changed = plan.structure() != self._last_plan.structure()
        self._last_plan = plan
        total_or, total_and = opt.universe.totals()
        metrics = ReoptMetrics(
            touched_and=touched_and,
            touched_or=touched_or,
            total_and=total_and,
            total_or=total_or,
            update_ratio_and=touched_and / total_and if total_and else 0.0,
            update_ratio_or=touched_or / total_or if total_or else 0.0,
            wall_time_ms=(time.perf_counter() - start) * 1000.0,
            plan_changed=changed,
        )
        self.last_metrics = metrics
        return plan, metrics

    def converged(self) -> bool:
        """True iff the last re-optimization touched nothing and kept the plan."""
        m = self.last_metrics
        return (m is not None and m.touched_and == 0 and m.touched_or == 0
                and not m.plan_changed)
