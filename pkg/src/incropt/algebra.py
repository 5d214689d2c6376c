"""Expressions, physical properties, and the merged logical+physical split.

An expression signature is the canonical set of base relations a
subexpression joins.  A property is a requirement or guarantee on the
physical form of the output: none, sorted on a qualified attribute, or
reachable through an index on a qualified attribute.  ``split`` enumerates,
for a composite expression and a requested output property, every binary
partition under the join graph crossed with every physical join operator
that can satisfy the property.

Conventions baked in here:

* bushy enumeration over connected partitions only (no cross products);
* symmetric operators (hash, merge) are emitted once in canonical side
  order, the asymmetric indexed nested-loop join is emitted once per
  indexed inner side, with the indexed inner on the left;
* orders are produced only by merge joins and index scans; there are no
  enforcer (explicit sort) operators.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations

from .catalog import Catalog, JoinPredicate
from .errors import NoAlternatives, ParseError, ValidationError

LOG_JOIN = "join"
LOG_SCAN = "scan"

HASH_JOIN = "hash_join"
MERGE_JOIN = "merge_join"
INDEX_NL_JOIN = "index_nl_join"
SEQ_SCAN = "seq_scan"
INDEX_SCAN = "index_scan"

PROP_NONE = "none"
PROP_SORTED = "sorted"
PROP_INDEX = "index"


@dataclass(frozen=True, order=True)
class ExprSig:
    """Canonical signature of a subexpression: a sorted tuple of relations."""

    rels: tuple[str, ...]

    @classmethod
    def of(cls, names) -> "ExprSig":
        rels = tuple(sorted(set(names)))
        if not rels:
            raise ValidationError("expression signature must be non-empty")
        return cls(rels)

    @property
    def is_leaf(self) -> bool:
        return len(self.rels) == 1

    @property
    def sole(self) -> str:
        return self.rels[0]

    def minus(self, other: "ExprSig") -> "ExprSig":
        return ExprSig.of(set(self.rels) - set(other.rels))

    def __len__(self) -> int:
        return len(self.rels)

    def __str__(self) -> str:
        return "(" + ",".join(self.rels) + ")"


@dataclass(frozen=True, order=True)
class PropertySpec:
    """Physical property requirement/guarantee; ``attr`` is qualified ``"R.a"``."""

    kind: str = PROP_NONE
    attr: str | None = None

    @classmethod
    def none(cls) -> "PropertySpec":
        return _PROP_NONE_SINGLETON

    @classmethod
    def sorted_on(cls, attr: str) -> "PropertySpec":
        return cls(PROP_SORTED, attr)

    @classmethod
    def index_on(cls, attr: str) -> "PropertySpec":
        return cls(PROP_INDEX, attr)

    @property
    def is_none(self) -> bool:
        return self.kind == PROP_NONE

    def __str__(self) -> str:
        if self.kind == PROP_NONE:
            return "none"
        return f"{self.kind}:{self.attr}"

    @classmethod
    def parse(cls, text: str) -> "PropertySpec":
        if text == PROP_NONE:
            return cls.none()
        kind, _, attr = text.partition(":")
        if kind not in (PROP_SORTED, PROP_INDEX) or not attr:
            raise ParseError(f"bad property spec {text!r}")
        return cls(kind, attr)


_PROP_NONE_SINGLETON = PropertySpec(PROP_NONE, None)

GroupKey = tuple[ExprSig, PropertySpec]
AltKey = tuple[int, str]


@dataclass(frozen=True)
class Alternative:
    """One physical plan alternative (an AND node) for an (expr, prop) pair."""

    index: int
    log_op: str
    phy_op: str
    l_expr: ExprSig | None = None
    l_prop: PropertySpec | None = None
    r_expr: ExprSig | None = None
    r_prop: PropertySpec | None = None

    @property
    def key(self) -> AltKey:
        return (self.index, self.phy_op)

    @property
    def is_scan(self) -> bool:
        return self.log_op == LOG_SCAN

    def children(self) -> tuple[GroupKey, ...]:
        if self.is_scan:
            return ()
        return ((self.l_expr, self.l_prop), (self.r_expr, self.r_prop))


@dataclass(frozen=True)
class Query:
    """A join query: the relations to join plus per-relation filter selectivities."""

    relations: tuple[str, ...]
    filters: tuple[tuple[str, float], ...] = ()

    @property
    def sig(self) -> ExprSig:
        return ExprSig.of(self.relations)

    def filter_selectivities(self, rel: str) -> tuple[float, ...]:
        return tuple(s for r, s in self.filters if r == rel)


_QUERY_KEYS = {"relations", "filters"}
_FILTER_KEYS = {"relation", "selectivity"}


def query_from_dict(data: dict, cat: Catalog) -> Query:
    if not isinstance(data, dict):
        raise ParseError("query root must be a JSON object")
    extra = set(data) - _QUERY_KEYS
    if extra:
        raise ParseError(f"unknown keys {sorted(extra)} in query")
    rels = data.get("relations")
    if not rels:
        raise ValidationError("query declares no relations")
    filters = []
    for obj in data.get("filters", []):
        extra = set(obj) - _FILTER_KEYS
        if extra:
            raise ParseError(f"unknown keys {sorted(extra)} in query filter")
        filters.append((obj["relation"], float(obj["selectivity"])))
    q = Query(relations=tuple(rels), filters=tuple(filters))
    validate_query(q, cat)
    return q


def validate_query(q: Query, cat: Catalog) -> None:
    declared = {r.name for r in cat.relations}
    if len(set(q.relations)) != len(q.relations):
        raise ValidationError("query relations are not distinct")
    for r in q.relations:
        if r not in declared:
            raise ValidationError(f"query references undeclared relation {r!r}")
    for r, s in q.filters:
        if r not in q.relations:
            raise ValidationError(f"filter on {r!r} which is not in the query")
        if not (0.0 < s <= 1.0):
            raise ValidationError(f"filter selectivity on {r!r} must be in (0, 1]")


def load_query(path: str, cat: Catalog) -> Query:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read query file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"query file {path} is not valid JSON: {exc}") from exc
    return query_from_dict(data, cat)


def is_leaf(e: ExprSig) -> bool:
    return e.is_leaf


def _is_connected(rels: tuple[str, ...], cat: Catalog) -> bool:
    if len(rels) <= 1:
        return True
    remaining = set(rels)
    stack = [rels[0]]
    remaining.discard(rels[0])
    while stack:
        cur = stack.pop()
        for nxt in cat.adjacency.get(cur, ()):
            if nxt in remaining:
                remaining.discard(nxt)
                stack.append(nxt)
    return not remaining


def connected_subexprs(query: ExprSig, cat: Catalog) -> set[ExprSig]:
    """All subsets of the query inducing a connected join subgraph.

    Brute-force subset scan; intended for queries small enough to exhaust.
    """
    out: set[ExprSig] = set()
    rels = query.rels
    for size in range(1, len(rels) + 1):
        for combo in combinations(rels, size):
            if _is_connected(combo, cat):
                out.add(ExprSig.of(combo))
    return out


def _pred_sides(pred: JoinPredicate, left_side: set[str]) -> tuple[str, str]:
    """Return (attr on left side, attr on right side), qualified."""
    if pred.left_relation in left_side:
        return pred.left, pred.right
    return pred.right, pred.left


def leaf_alternatives(e: ExprSig, p: PropertySpec, cat: Catalog) -> list[Alternative]:
    """Scan operators producing property ``p`` over a single relation.

    An empty list signals that the property is unobtainable from this leaf.
    """
    rel = cat.relation(e.sole)
    if p.is_none:
        return [Alternative(1, LOG_SCAN, SEQ_SCAN)]
    rel_name, _, attr = (p.attr or "").partition(".")
    if rel_name != rel.name or not attr:
        return []
    if p.kind == PROP_SORTED and (attr == rel.sorted_on or attr in rel.indexed_on):
        return [Alternative(1, LOG_SCAN, INDEX_SCAN)]
    if p.kind == PROP_INDEX and attr in rel.indexed_on:
        return [Alternative(1, LOG_SCAN, INDEX_SCAN)]
    return []


def split(e: ExprSig, p: PropertySpec, cat: Catalog) -> list[Alternative]:
    """Enumerate join alternatives for composite ``e`` under output property ``p``.

    Deterministic: partitions in lexicographic order of the smaller side,
    operators in phy_op order within each partition, 1-based indexes in
    emission order.  Raises NoAlternatives when no operator can satisfy
    ``p`` over any connected partition.
    """
    if e.is_leaf:
        raise ValidationError(f"split called on leaf {e}")
    rels = e.rels
    out: list[Alternative] = []
    seen_partitions: set[frozenset[str]] = set()
    counter = 1

    def emit(phy_op: str, l_expr: ExprSig, l_prop: PropertySpec,
             r_expr: ExprSig, r_prop: PropertySpec) -> None:
        nonlocal counter
        out.append(Alternative(counter, LOG_JOIN, phy_op, l_expr, l_prop, r_expr, r_prop))
        counter += 1

    for size in range(1, len(rels) // 2 + 1):
        for combo in combinations(rels, size):
            side_a = frozenset(combo)
            if side_a in seen_partitions:
                continue
            side_b_rels = tuple(r for r in rels if r not in side_a)
            seen_partitions.add(side_a)
            seen_partitions.add(frozenset(side_b_rels))
            if not _is_connected(combo, cat) or not _is_connected(side_b_rels, cat):
                continue
            crossing = cat.crossing_predicates(combo, side_b_rels)
            if not crossing:
                continue
            a_sig, b_sig = ExprSig.of(combo), ExprSig.of(side_b_rels)
            a_set = set(combo)

            if p.is_none:
                emit(HASH_JOIN, a_sig, PropertySpec.none(), b_sig, PropertySpec.none())
                for pred in crossing:
                    attr_a, attr_b = _pred_sides(pred, a_set)
                    for inner_sig, inner_attr, outer_sig in (
                        (a_sig, attr_a, b_sig),
                        (b_sig, attr_b, a_sig),
                    ):
                        if not inner_sig.is_leaf:
                            continue
                        rel_name, _, bare = inner_attr.partition(".")
                        if bare in cat.relation(rel_name).indexed_on:
                            emit(INDEX_NL_JOIN, inner_sig, PropertySpec.index_on(inner_attr),
                                 outer_sig, PropertySpec.none())
            for pred in crossing:
                attr_a, attr_b = _pred_sides(pred, a_set)
                if p.is_none or (p.kind == PROP_SORTED and p.attr in (attr_a, attr_b)):
                    emit(MERGE_JOIN, a_sig, PropertySpec.sorted_on(attr_a),
                         b_sig, PropertySpec.sorted_on(attr_b))
    if not out:
        raise NoAlternatives(f"no operator yields {p} for {e}")
    return out


class SearchUniverse:
    """The reachable (expr, prop) group universe for one (catalog, query) pair.

    Memoizes split output, filters alternatives down to the buildable ones
    (every child group can produce at least one plan), and exposes the
    full-space totals used as pruning/update-ratio denominators.
    """

    def __init__(self, cat: Catalog, query: Query):
        self.catalog = cat
        self.query = query
        self.root: GroupKey = (query.sig, PropertySpec.none())
        self._raw: dict[GroupKey, tuple[Alternative, ...]] = {}
        self._alts: dict[GroupKey, tuple[Alternative, ...]] = {}
        self._buildable: dict[GroupKey, bool] = {}
        self._groups: list[GroupKey] | None = None

    def raw_alternatives(self, group: GroupKey) -> tuple[Alternative, ...]:
        got = self._raw.get(group)
        if got is None:
            e, p = group
            if e.is_leaf:
                got = tuple(leaf_alternatives(e, p, self.catalog))
            else:
                try:
                    got = tuple(split(e, p, self.catalog))
                except NoAlternatives:
                    got = ()
            self._raw[group] = got
        return got

    def buildable(self, group: GroupKey) -> bool:
        got = self._buildable.get(group)
        if got is None:
            got = any(
                all(self.buildable(c) for c in alt.children())
                for alt in self.raw_alternatives(group)
            )
            self._buildable[group] = got
        return got

    def alternatives(self, group: GroupKey) -> tuple[Alternative, ...]:
        got = self._alts.get(group)
        if got is None:
            got = tuple(
                a for a in self.raw_alternatives(group)
                if all(self.buildable(c) for c in a.children())
            )
            self._alts[group] = got
        return got

    @property
    def feasible(self) -> bool:
        return self.buildable(self.root)

    def groups(self) -> list[GroupKey]:
        """Buildable groups reachable from the root, root first, BFS order."""
        if self._groups is None:
            order: list[GroupKey] = []
            seen = {self.root}
            frontier = [self.root]
            while frontier:
                g = frontier.pop(0)
                order.append(g)
                for alt in self.alternatives(g):
                    for child in alt.children():
                        if child not in seen:
                            seen.add(child)
                            frontier.append(child)
            self._groups = order
        return self._groups

    def totals(self) -> tuple[int, int]:
        """(number of groups, number of alternatives) over the full space."""
        gs = self.groups()
        return len(gs), sum(len(self.alternatives(g)) for g in gs)
