"""Base-relation statistics, index metadata, and join-predicate selectivities.

The catalog is the sole source of numbers the cost model consumes.  It is an
immutable value: statistics updates return a new catalog rather than mutating
in place, so a loaded catalog is safe to share read-only.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from functools import cached_property

from .errors import ParseError, UnknownTarget, ValidationError

SCAN_COST = "scan_cost"
JOIN_SELECTIVITY = "join_selectivity"


@dataclass(frozen=True)
class RelationMeta:
    """Statistics and physical metadata for one base relation."""

    name: str
    cardinality: float
    attributes: tuple[str, ...]
    indexed_on: tuple[str, ...] = ()
    sorted_on: str | None = None
    scan_cost_factor: float = 1.0


@dataclass(frozen=True)
class JoinPredicate:
    """An equi-join predicate ``left = right`` with a scalar selectivity.

    ``left`` and ``right`` are qualified attributes of the form ``"R.a"``.
    Lookup is symmetric: the predicate is retrievable from either side.
    """

    left: str
    right: str
    selectivity: float

    @property
    def left_relation(self) -> str:
        return self.left.split(".", 1)[0]

    @property
    def right_relation(self) -> str:
        return self.right.split(".", 1)[0]

    @property
    def name(self) -> str:
        return f"{self.left}={self.right}"

    def relations(self) -> frozenset[str]:
        return frozenset((self.left_relation, self.right_relation))


@dataclass(frozen=True)
class StatUpdate:
    """A multiplicative change to one catalog number.

    ``kind`` is ``"scan_cost"`` (target is a relation name) or
    ``"join_selectivity"`` (target is ``"R.a=S.b"``).  Applying an update and
    then its inverse restores the catalog within one ulp per touched number.
    """

    kind: str
    target: str
    factor: float

    def inverse(self) -> "StatUpdate":
        return replace(self, factor=1.0 / self.factor)

    def target_relations(self) -> frozenset[str]:
        """Relations whose derived statistics this update can touch."""
        if self.kind == SCAN_COST:
            return frozenset((self.target,))
        left, right = self.target.split("=", 1)
        return frozenset((left.split(".", 1)[0], right.split(".", 1)[0]))


@dataclass(frozen=True)
class Catalog:
    relations: tuple[RelationMeta, ...]
    predicates: tuple[JoinPredicate, ...]

    @cached_property
    def _by_name(self) -> dict[str, RelationMeta]:
        return {r.name: r for r in self.relations}

    @cached_property
    def _pred_index(self) -> dict[frozenset[str], tuple[JoinPredicate, ...]]:
        idx: dict[frozenset[str], list[JoinPredicate]] = {}
        for p in self.predicates:
            idx.setdefault(p.relations(), []).append(p)
        return {k: tuple(v) for k, v in idx.items()}

    @cached_property
    def adjacency(self) -> dict[str, frozenset[str]]:
        adj: dict[str, set[str]] = {r.name: set() for r in self.relations}
        for p in self.predicates:
            adj[p.left_relation].add(p.right_relation)
            adj[p.right_relation].add(p.left_relation)
        return {k: frozenset(v) for k, v in adj.items()}

    def relation(self, name: str) -> RelationMeta:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownTarget(f"unknown relation {name!r}") from None

    def predicates_between(self, r1: str, r2: str) -> tuple[JoinPredicate, ...]:
        return self._pred_index.get(frozenset((r1, r2)), ())

    def crossing_predicates(self, left: frozenset[str] | tuple[str, ...],
                            right: frozenset[str] | tuple[str, ...]) -> tuple[JoinPredicate, ...]:
        """All predicates with one endpoint in ``left`` and the other in ``right``.

        Returned in canonical (left, right) string order so selectivity
        products are reproducible.
        """
        lset, rset = set(left), set(right)
        out = [
            p for p in self.predicates
            if (p.left_relation in lset and p.right_relation in rset)
            or (p.left_relation in rset and p.right_relation in lset)
        ]
        out.sort(key=lambda p: (p.left, p.right))
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "relations": [
                {
                    "name": r.name,
                    "cardinality": r.cardinality,
                    "attributes": list(r.attributes),
                    "indexed_on": list(r.indexed_on),
                    "sorted_on": r.sorted_on,
                    "scan_cost_factor": r.scan_cost_factor,
                }
                for r in self.relations
            ],
            "predicates": [
                {"left": p.left, "right": p.right, "selectivity": p.selectivity}
                for p in self.predicates
            ],
        }

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_RELATION_KEYS = {"name", "cardinality", "attributes", "indexed_on", "sorted_on", "scan_cost_factor"}
_PREDICATE_KEYS = {"left", "right", "selectivity"}
_CATALOG_KEYS = {"relations", "predicates"}
_UPDATE_KEYS = {"kind", "target", "factor"}


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise ParseError(f"unknown keys {sorted(extra)} in {where}")


def _qualified(attr: str, where: str) -> tuple[str, str]:
    if attr.count(".") != 1:
        raise ParseError(f"attribute {attr!r} in {where} must be qualified as 'R.a'")
    rel, a = attr.split(".", 1)
    return rel, a


def catalog_from_dict(data: dict) -> Catalog:
    """Build and validate a catalog from the JSON object layout."""
    if not isinstance(data, dict):
        raise ParseError("catalog root must be a JSON object")
    _reject_unknown(data, _CATALOG_KEYS, "catalog")
    relations = []
    for obj in data.get("relations", []):
        _reject_unknown(obj, _RELATION_KEYS, f"relation {obj.get('name')!r}")
        try:
            relations.append(RelationMeta(
                name=obj["name"],
                cardinality=float(obj["cardinality"]),
                attributes=tuple(obj["attributes"]),
                indexed_on=tuple(obj.get("indexed_on", ())),
                sorted_on=obj.get("sorted_on"),
                scan_cost_factor=float(obj.get("scan_cost_factor", 1.0)),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed relation entry: {exc}") from exc
    predicates = []
    for obj in data.get("predicates", []):
        _reject_unknown(obj, _PREDICATE_KEYS, "predicate")
        try:
            predicates.append(JoinPredicate(
                left=obj["left"], right=obj["right"],
                selectivity=float(obj["selectivity"]),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed predicate entry: {exc}") from exc
    cat = Catalog(relations=tuple(relations), predicates=tuple(predicates))
    validate_catalog(cat)
    return cat


def validate_catalog(cat: Catalog) -> None:
    if not cat.relations:
        raise ValidationError("catalog declares no relations")
    names = [r.name for r in cat.relations]
    if len(set(names)) != len(names):
        raise ValidationError("relation names are not unique")
    for r in cat.relations:
        if r.cardinality < 1:
            raise ValidationError(f"relation {r.name}: cardinality must be >= 1")
        if r.scan_cost_factor <= 0:
            raise ValidationError(f"relation {r.name}: scan_cost_factor must be positive")
        attrs = set(r.attributes)
        if r.sorted_on is not None and r.sorted_on not in attrs:
            raise ValidationError(f"relation {r.name}: sorted_on {r.sorted_on!r} not an attribute")
        for a in r.indexed_on:
            if a not in attrs:
                raise ValidationError(f"relation {r.name}: indexed_on {a!r} not an attribute")
    declared = set(names)
    for p in cat.predicates:
        for side in (p.left, p.right):
            rel, attr = _qualified(side, "predicate")
            if rel not in declared:
                raise ValidationError(f"predicate references undeclared relation {rel!r}")
            if attr not in cat.relation(rel).attributes:
                raise ValidationError(f"predicate references undeclared attribute {side!r}")
        if p.left_relation == p.right_relation:
            raise ValidationError(f"predicate {p.name} joins a relation with itself")
        if not (0.0 < p.selectivity <= 1.0):
            raise ValidationError(f"predicate {p.name}: selectivity must be in (0, 1]")


def load_catalog(path: str) -> Catalog:
    """Parse and validate a catalog file; deterministic for identical bytes."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read catalog file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"catalog file {path} is not valid JSON: {exc}") from exc
    return catalog_from_dict(data)


def load_updates(path: str) -> list[StatUpdate]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read updates file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"updates file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise ParseError("updates file must be a JSON array")
    out = []
    for obj in data:
        _reject_unknown(obj, _UPDATE_KEYS, "update")
        try:
            u = StatUpdate(kind=obj["kind"], target=obj["target"], factor=float(obj["factor"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed update entry: {exc}") from exc
        if u.kind not in (SCAN_COST, JOIN_SELECTIVITY):
            raise ParseError(f"unknown update kind {u.kind!r}")
        if u.factor <= 0:
            raise ValidationError(f"update factor must be positive, got {u.factor}")
        out.append(u)
    return out


def _find_predicate(cat: Catalog, target: str) -> JoinPredicate:
    if "=" not in target:
        raise UnknownTarget(f"join_selectivity target {target!r} must look like 'R.a=S.b'")
    left, right = target.split("=", 1)
    for p in cat.predicates:
        if {p.left, p.right} == {left, right}:
            return p
    raise UnknownTarget(f"no predicate {target!r} in catalog")


def apply_update(cat: Catalog, u: StatUpdate) -> Catalog:
    """Return a catalog with the one targeted number multiplied by ``u.factor``.

    Everything else is carried over bit-identically.
    """
    if u.factor <= 0:
        raise ValidationError("update factor must be positive")
    if u.kind == SCAN_COST:
        rel = cat.relation(u.target)
        new_rel = replace(rel, scan_cost_factor=rel.scan_cost_factor * u.factor)
        rels = tuple(new_rel if r.name == u.target else r for r in cat.relations)
        return Catalog(relations=rels, predicates=cat.predicates)
    if u.kind == JOIN_SELECTIVITY:
        pred = _find_predicate(cat, u.target)
        new_pred = replace(pred, selectivity=pred.selectivity * u.factor)
        preds = tuple(new_pred if p is pred else p for p in cat.predicates)
        return Catalog(relations=cat.relations, predicates=preds)
    raise UnknownTarget(f"unknown update kind {u.kind!r}")
