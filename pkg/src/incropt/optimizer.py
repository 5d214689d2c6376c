"""The declarative, incrementally-maintainable join-order optimizer.

All search and cost state lives in maintained relations with counted
visibility, driven to fixpoint by delta propagation:

* ``searchspace``  -- one row per physical alternative (AND node), counted;
* ``plancost``     -- the current full cost of each alternative, retained in
  a per-group min structure even while a row is pruned, so the next-best
  plan is recoverable;
* ``bestcost``     -- the per-group (OR node) minimum, with deterministic
  (cost, index, phy_op) tie-breaking shared with every baseline;
* ``refcount``     -- per-group count of visible parent AND rows; at zero a
  group's plans are pruned, on revival they are recomputed;
* ``bound`` / ``maxbound`` and per-row parent-bound contributions -- the
  recursive branch-and-bound relations.

Three pruning strategies gate row visibility: aggregate selection keeps only
the group minimum and suppresses the losing rows back out of the search
space; reference counting retires whole groups no surviving plan references;
recursive bounding prunes any row whose cost exceeds its group bound.  The
quiescent visible state is a unique fixpoint of those rules, so any delta
drain order converges to the same answer.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

from .algebra import (
    Alternative, AltKey, ExprSig, GroupKey, PropertySpec, Query, SearchUniverse,
)
from .catalog import Catalog
from .costmodel import (
    CostConfig, CostContext, alternative_cost, lexmin, sum_cost,
)
from .deltaflow import (
    CountedState, DEFAULT_DELTA_CEILING, Delta, DELETE, FixpointEngine, INSERT,
    MinGroupState, UPDATE,
)
from .errors import InfeasibleQuery, NotQuiescent, StateMismatch, ValidationError
from .plan import PlanNode, build_plan

RowKey = tuple[GroupKey, AltKey]

STRATEGY_NAMES = ("aggsel", "refcount", "bounding")


@dataclass(frozen=True)
class Strategies:
    """Pruning strategy toggles; bounding presupposes aggregate selection."""

    aggsel: bool = True
    refcount: bool = True
    bounding: bool = True

    def __post_init__(self):
        if self.bounding and not self.aggsel:
            raise ValidationError("strategy 'bounding' requires 'aggsel'")

    @classmethod
    def all(cls) -> "Strategies":
        return cls(True, True, True)

    @classmethod
    def none(cls) -> "Strategies":
        return cls(False, False, False)

    @classmethod
    def parse(cls, text: str) -> "Strategies":
        names = [t for t in (s.strip() for s in text.split(",")) if t]
        unknown = set(names) - set(STRATEGY_NAMES)
        if unknown:
            raise ValidationError(f"unknown strategies {sorted(unknown)}")
        return cls(aggsel="aggsel" in names, refcount="refcount" in names,
                   bounding="bounding" in names)

    def to_list(self) -> list[str]:
        return [n for n in STRATEGY_NAMES if getattr(self, n)]

    def label(self) -> str:
        return ",".join(self.to_list()) or "none"


class AltState:
    """Mutable per-alternative state: local cost and retained full cost."""

    __slots__ = ("alt", "local", "cost")

    def __init__(self, alt: Alternative):
        self.alt = alt
        self.local: float | None = None
        self.cost: float | None = None


class GroupState:
    """Mutable per-(expr, prop) state: the OR node."""

    __slots__ = ("key", "alts", "refcount", "synthetic", "alive",
                 "contribs", "maxbound", "bound")

    def __init__(self, key: GroupKey, synthetic: int = 0):
        self.key = key
        self.alts: dict[AltKey, AltState] = {}
        self.refcount = 0
        self.synthetic = synthetic
        self.alive = True
        # parent-bound contributions keyed by (parent row, side)
        self.contribs: dict[tuple[RowKey, str], float] = {}
        self.maxbound: float | None = None
        self.bound: float | None = None


class _DpBest:
    """Pure recursive best-cost resolver over the shared universe.

    Backs cost composition through groups whose maintained entries are
    currently pruned away, so retained values never go stale relative to
    the catalog.  Invalidated per affected relation set on catalog updates.
    """

    def __init__(self, universe: SearchUniverse, ctx: CostContext):
        self.universe = universe
        self.ctx = ctx
        self.memo: dict[GroupKey, tuple[float, AltKey]] = {}

    def best(self, g: GroupKey) -> tuple[float, AltKey]:
        got = self.memo.get(g)
        if got is None:
            got = lexmin(
                (alternative_cost(self.ctx, g, alt, self.best), alt.key)
                for alt in self.universe.alternatives(g)
            )
            if got is None:
                raise InfeasibleQuery(f"group {g[0]}|{g[1]} has no alternatives")
            self.memo[g] = got
        return got

    def invalidate(self, affected: frozenset[str], ctx: CostContext) -> None:
        self.ctx = ctx
        self.memo = {g: v for g, v in self.memo.items()
                     if not (set(g[0].rels) & affected)}


_AND_PAYLOAD = {"recost", "refilterrow", "pbound"}
_OR_PAYLOAD = {"expr", "refilter", "maxbound", "bound"}


class DeclarativeOptimizer:
    """Owns the maintained relations for one query and drives them to fixpoint."""

    def __init__(self, cat: Catalog, query: Query, *,
                 strategies: Strategies | None = None,
                 config: CostConfig | None = None,
                 trace: Callable[[str], None] | None = None,
                 max_deltas: int = DEFAULT_DELTA_CEILING,
                 drain_order: str = "fifo", drain_seed: int | None = None):
        self.catalog = cat
        self.query = query
        self.strategies = strategies or Strategies.all()
        self.ctx = CostContext(cat, query, config)
        self.universe = SearchUniverse(cat, query)
        self._dp = _DpBest(self.universe, self.ctx)
        self.root: GroupKey = self.universe.root
        self.groups: dict[GroupKey, GroupState] = {}
        self.parent_index: dict[GroupKey, list[RowKey]] = {}
        self.ss = CountedState("searchspace", trace=trace)
        self.mins = MinGroupState("bestcost")
        self.touched_and: set[RowKey] = set()
        self.touched_or: set[GroupKey] = set()
        self._tracking = False
        self.engine = FixpointEngine(
            {
                "expr": self._h_expr,
                "recost": self._h_recost,
                "bestcost": self._h_bestcost,
                "refcount": self._h_refcount,
                "refilter": self._h_refilter,
                "refilterrow": self._h_refilterrow,
                "pbound": self._h_pbound,
                "maxbound": self._h_maxbound,
                "bound": self._h_bound,
            },
            max_deltas=max_deltas, order=drain_order, seed=drain_seed,
            observer=self._observe,
        )

    # -- driving ---------------------------------------------------------

    def run(self) -> "DeclarativeOptimizer":
        """Seed the root expression and drain to quiescence."""
        if not self.universe.feasible:
            raise InfeasibleQuery(
                f"no plan satisfies {self.root[1]} for {self.root[0]}")
        if self.root not in self.groups:
            self.engine.push(Delta("expr", INSERT, self.root))
        self.engine.run()
        return self

    def push_and_run(self, deltas: Iterable[Delta]) -> int:
        self.engine.push(deltas)
        return self.engine.run()

    def set_tracking(self, on: bool) -> None:
        self._tracking = on
        if on:
            self.touched_and = set()
            self.touched_or = set()

    def _observe(self, d: Delta) -> None:
        if not self._tracking:
            return
        rel = d.relation
        if rel in _AND_PAYLOAD:
            self.touched_and.add(d.payload)
        elif rel in _OR_PAYLOAD:
            self.touched_or.add(d.payload)
        elif rel == "bestcost":
            self.touched_or.add(d.payload if d.op == UPDATE else d.payload[0])
        elif rel == "refcount":
            self.touched_or.add(d.payload[0])

    # -- group lifecycle -------------------------------------------------

    def _alloc_group(self, g: GroupKey, synthetic: int = 0) -> GroupState:
        gs = GroupState(g, synthetic=synthetic)
        for alt in self.universe.alternatives(g):
            gs.alts[alt.key] = AltState(alt)
            for child in alt.children():
                self.parent_index.setdefault(child, []).append((g, alt.key))
        self.groups[g] = gs
        return gs

    def _create_group(self, g: GroupKey, synthetic: int = 0) -> list[Delta]:
        gs = self._alloc_group(g, synthetic=synthetic)
        out: list[Delta] = []
        for ak in gs.alts:
            out.extend(self._apply_row_visibility((g, ak), INSERT))
        return out

    def _kill_group(self, g: GroupKey) -> list[Delta]:
        gs = self.groups[g]
        gs.alive = False
        out: list[Delta] = []
        for ak, a in gs.alts.items():
            if a.cost is not None:
                out.extend(self._set_row_cost(g, ak, a, None))
        out.append(Delta("refilter", INSERT, g))
        return out

    def _revive_group(self, g: GroupKey) -> list[Delta]:
        gs = self.groups[g]
        gs.alive = True
        gs.contribs.clear()
        gs.maxbound = None
        gs.bound = None
        out = [Delta("recost", INSERT, (g, ak)) for ak in gs.alts]
        out.append(Delta("refilter", INSERT, g))
        if self.strategies.bounding:
            out.append(Delta("bound", INSERT, g))
        return out

    # -- cost composition --------------------------------------------------

    def _child_best(self, g: GroupKey) -> tuple[float, AltKey]:
        gs = self.groups.get(g)
        if gs is not None and gs.alive:
            m = self.mins.min_of(g)
            if m is not None:
                return m
        return self._dp.best(g)

    # -- handlers ----------------------------------------------------------

    def _h_expr(self, d: Delta) -> list[Delta]:
        g = d.payload
        if g in self.groups:
            return []
        return self._create_group(g, synthetic=1 if g == self.root else 0)

    def _apply_row_visibility(self, rowkey: RowKey, op: str) -> list[Delta]:
        """Flip one searchspace row's counted visibility synchronously.

        Applying the count inline (instead of queueing the adjustment) keeps
        the flip idempotent: every emitted adjustment corresponds to exactly
        one observed transition, so counts stay in {0, 1}.
        """
        if self._tracking:
            self.touched_and.add(rowkey)
        out: list[Delta] = []
        for edge in self.ss.apply(Delta("searchspace", op, rowkey)):
            g, ak = edge.payload
            gs = self.groups[g]
            a = gs.alts[ak]
            if edge.op == INSERT:
                self.mins.set_visible(g, ak, True)
                for child in a.alt.children():
                    out.append(Delta("refcount", INSERT, (child, rowkey)))
                out.append(Delta("recost", INSERT, rowkey))
            else:
                self.mins.set_visible(g, ak, False)
                for child in a.alt.children():
                    out.append(Delta("refcount", DELETE, (child, rowkey)))
            if self.strategies.bounding and not a.alt.is_scan:
                out.append(Delta("pbound", INSERT, rowkey))
        return out

    def _h_recost(self, d: Delta) -> list[Delta]:
        g, ak = d.payload
        gs = self.groups.get(g)
        if gs is None or not gs.alive:
            return []
        a = gs.alts[ak]
        out: list[Delta] = []
        e, p = g
        local = self.ctx.local_cost(e, p, a.alt)
        if local != a.local:
            a.local = local
            if (self.strategies.bounding and not a.alt.is_scan
                    and self.ss.visible((g, ak))):
                out.append(Delta("pbound", INSERT, (g, ak)))
        if a.alt.is_scan:
            cost = sum_cost(None, None, local)
        else:
            bl = self._child_best((a.alt.l_expr, a.alt.l_prop))
            br = self._child_best((a.alt.r_expr, a.alt.r_prop))
            cost = sum_cost(bl[0], br[0], local)
        if cost != a.cost:
            out.extend(self._set_row_cost(g, ak, a, cost))
        return out

    def _set_row_cost(self, g: GroupKey, ak: AltKey, a: AltState,
                      cost: float | None) -> list[Delta]:
        """Write one plancost value and its group-min effect atomically.

        The min structure is updated in the same step as the value, so a
        shuffled drain can never interleave an older value over a newer one.
        Only change notifications go through the queue.
        """
        old = a.cost
        a.cost = cost
        if old is None:
            member = Delta("pc", INSERT, (ak, cost))
        elif cost is None:
            member = Delta("pc", DELETE, (ak,))
        else:
            member = Delta("pc", UPDATE, None, old=(ak, old), new=(ak, cost))
        if self._tracking:
            self.touched_and.add((g, ak))
        out = [Delta("refilterrow", INSERT, (g, ak))]
        if self.strategies.bounding and self.ss.visible((g, ak)):
            out.append(Delta("pbound", INSERT, (g, ak)))
        evt = self.mins.update(g, member)
        if evt is not None:
            out.append(evt)
        return out

    def _h_bestcost(self, d: Delta) -> list[Delta]:
        g = d.payload if d.op == UPDATE else d.payload[0]
        out: list[Delta] = []
        for rowkey in self.parent_index.get(g, ()):
            pgs = self.groups.get(rowkey[0])
            if pgs is not None and pgs.alive:
                out.append(Delta("recost", INSERT, rowkey))
        out.append(Delta("refilter", INSERT, g))
        if self.strategies.bounding:
            out.append(Delta("bound", INSERT, g))
            for rowkey in self.parent_index.get(g, ()):
                if self.ss.visible(rowkey):
                    out.append(Delta("pbound", INSERT, rowkey))
        return out

    def _h_refcount(self, d: Delta) -> list[Delta]:
        g, _src = d.payload
        out: list[Delta] = []
        gs = self.groups.get(g)
        if gs is None:
            out.extend(self._create_group(g))
            gs = self.groups[g]
        gs.refcount += 1 if d.op == INSERT else -1
        if not self.strategies.refcount:
            return out
        total = gs.refcount + gs.synthetic
        if gs.alive and total <= 0:
            out.extend(self._kill_group(g))
        elif not gs.alive and total > 0:
            out.extend(self._revive_group(g))
        return out

    def _pruned(self, g: GroupKey, gs: GroupState, ak: AltKey, a: AltState) -> bool:
        if a.cost is None:
            return False
        if self.strategies.aggsel:
            m = self.mins.min_of(g)
            if m is not None and (a.cost, ak) != m:
                return True
        if self.strategies.bounding and gs.bound is not None and a.cost > gs.bound:
            return True
        return False

    def _refilter_row(self, g: GroupKey, ak: AltKey, gs: GroupState) -> list[Delta]:
        target = gs.alive and not self._pruned(g, gs, ak, gs.alts[ak])
        if target == self.ss.visible((g, ak)):
            return []
        return self._apply_row_visibility((g, ak), INSERT if target else DELETE)

    def _h_refilter(self, d: Delta) -> list[Delta]:
        gs = self.groups.get(d.payload)
        if gs is None:
            return []
        out: list[Delta] = []
        for ak in gs.alts:
            out.extend(self._refilter_row(d.payload, ak, gs))
        return out

    def _h_refilterrow(self, d: Delta) -> list[Delta]:
        g, ak = d.payload
        gs = self.groups.get(g)
        if gs is None:
            return []
        return self._refilter_row(g, ak, gs)

    def _h_pbound(self, d: Delta) -> list[Delta]:
        rowkey = d.payload
        g, ak = rowkey
        gs = self.groups.get(g)
        if gs is None:
            return []
        a = gs.alts.get(ak)
        if a is None or a.alt.is_scan:
            return []
        lkey = (a.alt.l_expr, a.alt.l_prop)
        rkey = (a.alt.r_expr, a.alt.r_prop)
        active = (gs.alive and self.ss.visible(rowkey)
                  and gs.bound is not None and a.cost is not None)
        out: list[Delta] = []
        for childkey, side in ((lkey, "l"), (rkey, "r")):
            # parent bound minus sibling best minus local cost, computed as
            # child_best + (bound - row_cost): algebraically identical but
            # free of the cancellation that could land one ulp below
            # the child's own best and wrongly prune the optimal row
            val = None
            if active:
                child = self.groups.get(childkey)
                if child is not None and child.alive:
                    cm = self.mins.min_of(childkey)
                    if cm is not None:
                        val = cm[0] + (gs.bound - a.cost)
            cgs = self.groups.get(childkey)
            if cgs is None:
                continue
            slot = (rowkey, side)
            cur = cgs.contribs.get(slot)
            if val is None:
                if slot in cgs.contribs:
                    del cgs.contribs[slot]
                    out.append(Delta("maxbound", INSERT, childkey))
            elif cur != val:
                cgs.contribs[slot] = val
                out.append(Delta("maxbound", INSERT, childkey))
        return out

    def _h_maxbound(self, d: Delta) -> list[Delta]:
        gs = self.groups.get(d.payload)
        if gs is None:
            return []
        mb = max(gs.contribs.values()) if gs.contribs else None
        if mb == gs.maxbound:
            return []
        gs.maxbound = mb
        return [Delta("bound", INSERT, d.payload)]

    def _h_bound(self, d: Delta) -> list[Delta]:
        g = d.payload
        gs = self.groups.get(g)
        if gs is None:
            return []
        parts = []
        m = self.mins.min_of(g)
        if m is not None:
            parts.append(m[0])
        if gs.maxbound is not None:
            parts.append(gs.maxbound)
        b = min(parts) if parts else None
        if b == gs.bound:
            return []
        gs.bound = b
        out = [Delta("refilter", INSERT, g)]
        for ak, a in gs.alts.items():
            if not a.alt.is_scan and self.ss.visible((g, ak)):
                out.append(Delta("pbound", INSERT, (g, ak)))
        return out

    # -- read-side ---------------------------------------------------------

    def _require_quiescent(self) -> None:
        if self.engine.pending:
            raise NotQuiescent(f"{self.engine.pending} deltas still pending")

    def best_cost(self) -> float:
        self._require_quiescent()
        m = self.mins.min_of(self.root)
        if m is None:
            raise InfeasibleQuery("root group has no plan")
        return m[0]

    def best_plan(self) -> PlanNode:
        self._require_quiescent()

        def best(g: GroupKey) -> tuple[float, AltKey]:
            m = self.mins.min_of(g)
            if m is None:
                raise InfeasibleQuery(f"group {g[0]}|{g[1]} has no plan")
            return m

        return build_plan(self.universe, self.ctx, best, self.root)

    def visible_rows(self) -> list[RowKey]:
        rows = self.ss.visible_tuples()
        rows.sort(key=lambda rk: (rk[0][0].rels, str(rk[0][1]), rk[1]))
        return rows

    def visible_counts(self) -> tuple[int, int]:
        """(groups with a visible row, visible rows)."""
        rows = self.ss.visible_tuples()
        return len({rk[0] for rk in rows}), len(rows)

    def optimal_tree_rows(self) -> set[RowKey]:
        self._require_quiescent()
        rows: set[RowKey] = set()

        def walk(g: GroupKey) -> None:
            m = self.mins.min_of(g)
            if m is None:
                raise InfeasibleQuery(f"group {g[0]}|{g[1]} has no plan")
            ak = m[1]
            rows.add((g, ak))
            for child in self.groups[g].alts[ak].alt.children():
                walk(child)

        walk(self.root)
        return rows

    def final_state_check(self) -> dict:
        """Compare the visible state against the optimal tree's node set."""
        tree_rows = self.optimal_tree_rows()
        visible = set(self.ss.visible_tuples())
        alive_groups = {g for g, gs in self.groups.items() if gs.alive}
        tree_groups = {g for g, _ in tree_rows}
        return {
            "ok": visible == tree_rows,
            "extra_rows": sorted(
                (str(g[0]), str(g[1]), ak) for g, ak in visible - tree_rows),
            "missing_rows": sorted(
                (str(g[0]), str(g[1]), ak) for g, ak in tree_rows - visible),
            "extra_groups": sorted(
                (str(g[0]), str(g[1])) for g in alive_groups - tree_groups),
        }

    # -- audits ------------------------------------------------------------

    def recount_oracle(self) -> dict[GroupKey, int]:
        """Brute-force recount: visible parent AND rows per group."""
        counts: dict[GroupKey, int] = {g: 0 for g in self.groups}
        for rowkey in self.ss.visible_tuples():
            g, ak = rowkey
            for child in self.groups[g].alts[ak].alt.children():
                counts[child] = counts.get(child, 0) + 1
        return counts

    def audit_refcounts(self) -> list[str]:
        self._require_quiescent()
        recount = self.recount_oracle()
        bad = []
        for g, gs in self.groups.items():
            if gs.refcount != recount.get(g, 0):
                bad.append(f"{g[0]}|{g[1]}: refcount {gs.refcount} != recount {recount.get(g, 0)}")
            if gs.refcount < 0:
                bad.append(f"{g[0]}|{g[1]}: negative refcount at quiescence")
        return bad

    def audit_fixpoint(self) -> list[str]:
        """Check the bestcost/bound defining equations by direct scan."""
        self._require_quiescent()
        bad = []
        for g, gs in self.groups.items():
            entries = {ak: a.cost for ak, a in gs.alts.items() if a.cost is not None}
            stored = self.mins.members(g)
            if entries != stored:
                bad.append(f"{g[0]}|{g[1]}: retained plancost mismatch")
            if not gs.alive:
                continue
            m = self.mins.min_of(g)
            expect = lexmin((c, ak) for ak, c in entries.items())
            if m != expect:
                bad.append(f"{g[0]}|{g[1]}: bestcost {m} != min over plancost {expect}")
            visible = [(ak, entries[ak]) for ak in entries
                       if self.ss.visible((g, ak))]
            if visible:
                vmin = lexmin((c, ak) for ak, c in visible)
                if self.mins.visible_min(g) != vmin:
                    bad.append(f"{g[0]}|{g[1]}: visible min mismatch")
            if self.strategies.bounding:
                expected_contribs: dict[tuple[RowKey, str], float] = {}
                for pk, pgs in self.groups.items():
                    for ak, a in pgs.alts.items():
                        if a.alt.is_scan or not self.ss.visible((pk, ak)):
                            continue
                        if not pgs.alive or pgs.bound is None or a.cost is None:
                            continue
                        lkey = (a.alt.l_expr, a.alt.l_prop)
                        rkey = (a.alt.r_expr, a.alt.r_prop)
                        for childkey, side in ((lkey, "l"), (rkey, "r")):
                            if childkey != g:
                                continue
                            cm = self.mins.min_of(childkey)
                            child = self.groups.get(childkey)
                            if cm is None or child is None or not child.alive:
                                continue
                            expected_contribs[((pk, ak), side)] = cm[0] + (pgs.bound - a.cost)
                if expected_contribs != gs.contribs:
                    bad.append(f"{g[0]}|{g[1]}: parentbound contributions mismatch")
                mb = max(gs.contribs.values()) if gs.contribs else None
                if mb != gs.maxbound:
                    bad.append(f"{g[0]}|{g[1]}: maxbound {gs.maxbound} != max {mb}")
                parts = [x for x in (m[0] if m else None, gs.maxbound) if x is not None]
                expect_bound = min(parts) if parts else None
                if expect_bound != gs.bound:
                    bad.append(f"{g[0]}|{g[1]}: bound {gs.bound} != {expect_bound}")
        return bad

    # -- digests / snapshots -------------------------------------------------

    @staticmethod
    def _group_label(g: GroupKey) -> str:
        return f"{g[0]}|{g[1]}"

    def state_digest(self) -> dict:
        """Canonical visible-state structure for deep-equality comparisons."""
        self._require_quiescent()
        out = {}
        for g in sorted(self.groups, key=lambda k: (k[0].rels, str(k[1]))):
            gs = self.groups[g]
            rows = {}
            for ak in sorted(gs.alts):
                a = gs.alts[ak]
                rows[str(ak)] = {
                    "visible": self.ss.visible((g, ak)),
                    "cost": a.cost,
                }
            out[self._group_label(g)] = {
                "alive": gs.alive,
                "refcount": gs.refcount,
                "best": self.mins.min_of(g),
                "bound": gs.bound,
                "maxbound": gs.maxbound,
                "rows": rows,
            }
        return out

    def to_snapshot(self) -> dict:
        """JSON dump of the maintained relations, resumable by `reoptimize`."""
        self._require_quiescent()
        groups = []
        for g in sorted(self.groups, key=lambda k: (k[0].rels, str(k[1]))):
            gs = self.groups[g]
            rows = []
            for ak in sorted(gs.alts):
                a = gs.alts[ak]
                rows.append({
                    "index": ak[0], "phy_op": ak[1],
                    "ss_count": self.ss.count((g, ak)),
                    "cost": a.cost,
                })
            best = self.mins.min_of(g)
            groups.append({
                "expr": list(g[0].rels),
                "prop": str(g[1]),
                "refcount": gs.refcount,
                "synthetic": gs.synthetic,
                "alive": gs.alive,
                "best": None if best is None else
                    {"cost": best[0], "index": best[1][0], "phy_op": best[1][1]},
                "bound": None if gs.bound is None else gs.bound,
                "maxbound": None if gs.maxbound is None else gs.maxbound,
                "rows": rows,
            })
        return {
            "schema": "incropt-state",
            "version": 1,
            "catalog": self.catalog.to_dict(),
            "catalog_hash": self.catalog.content_hash(),
            "query": {"relations": list(self.query.relations),
                      "filters": [{"relation": r, "selectivity": s}
                                  for r, s in self.query.filters]},
            "strategies": self.strategies.to_list(),
            "cost_config": self.ctx.config.to_dict(),
            "groups": groups,
        }

    @classmethod
    def from_snapshot(cls, snap: dict, *,
                      trace: Callable[[str], None] | None = None,
                      max_deltas: int = DEFAULT_DELTA_CEILING) -> "DeclarativeOptimizer":
        from .catalog import catalog_from_dict
        from .algebra import query_from_dict

        try:
            if snap.get("schema") != "incropt-state":
                raise StateMismatch("not an incropt state snapshot")
            cat = catalog_from_dict(snap["catalog"])
            if cat.content_hash() != snap["catalog_hash"]:
                raise StateMismatch("snapshot catalog hash mismatch (corrupted state)")
            query = query_from_dict(snap["query"], cat)
            strategies = Strategies(
                aggsel="aggsel" in snap["strategies"],
                refcount="refcount" in snap["strategies"],
                bounding="bounding" in snap["strategies"],
            )
            config = CostConfig.from_dict(snap["cost_config"])
            opt = cls(cat, query, strategies=strategies, config=config,
                      trace=trace, max_deltas=max_deltas)
            for gobj in snap["groups"]:
                g = (ExprSig.of(gobj["expr"]), PropertySpec.parse(gobj["prop"]))
                gs = opt._alloc_group(g, synthetic=int(gobj["synthetic"]))
                gs.refcount = int(gobj["refcount"])
                gs.alive = bool(gobj["alive"])
                gs.bound = gobj["bound"]
                gs.maxbound = gobj["maxbound"]
                for robj in gobj["rows"]:
                    ak = (int(robj["index"]), robj["phy_op"])
                    if ak not in gs.alts:
                        raise StateMismatch(f"snapshot row {ak} unknown to enumeration")
                    a = gs.alts[ak]
                    a.cost = robj["cost"]
                    count = int(robj["ss_count"])
                    if count:
                        opt.ss.counts[(g, ak)] = count
                    opt.mins.set_visible(g, ak, count > 0)
                    if a.cost is not None:
                        opt.mins.update(g, Delta("pc", INSERT, (ak, a.cost)))
            # local costs and bound contributions are pure; rebuild directly
            for g, gs in opt.groups.items():
                for ak, a in gs.alts.items():
                    if a.cost is not None or opt.ss.visible((g, ak)):
                        a.local = opt.ctx.local_cost(g[0], g[1], a.alt)
            if strategies.bounding:
                for g, gs in opt.groups.items():
                    for ak, a in gs.alts.items():
                        if a.alt.is_scan or not opt.ss.visible((g, ak)):
                            continue
                        if not gs.alive or gs.bound is None or a.cost is None:
                            continue
                        lkey = (a.alt.l_expr, a.alt.l_prop)
                        rkey = (a.alt.r_expr, a.alt.r_prop)
                        for childkey, side in ((lkey, "l"), (rkey, "r")):
                            child = opt.groups.get(childkey)
                            cm = opt.mins.min_of(childkey)
                            if child is None or not child.alive or cm is None:
                                continue
                            child.contribs[((g, ak), side)] = cm[0] + (gs.bound - a.cost)
            return opt
        except (KeyError, TypeError, ValueError) as exc:
            raise StateMismatch(f"corrupted state snapshot: {exc}") from exc

    # -- incremental support -------------------------------------------------

    def rebind_catalog(self, new_cat: Catalog, affected: frozenset[str]) -> None:
        """Swap in an updated catalog; structure (join graph, indexes) must
        be unchanged, only numbers may differ."""
        self.catalog = new_cat
        self.ctx = self.ctx.rebased(new_cat, affected)
        self._dp.invalidate(affected, self.ctx)
