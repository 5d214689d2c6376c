from __future__ import annotations

import pytest

from incropt.algebra import Query
from incropt.catalog import Catalog, JoinPredicate, RelationMeta, validate_catalog
from incropt.fixtures import q3s, q5s, q8joins


@pytest.fixture(scope="session")
def q3s_fixture():
    return q3s()


@pytest.fixture(scope="session")
def q5s_fixture():
    return q5s()


@pytest.fixture(scope="session")
def q8joins_fixture():
    return q8joins()


def tiny_catalog() -> tuple[Catalog, Query]:
    """Two relations, one predicate; small enough to check by hand."""
    cat = Catalog(
        relations=(
            RelationMeta("C", 1500.0, ("ck", "seg"), indexed_on=("ck",)),
            RelationMeta("O", 15000.0, ("ok", "ck"), indexed_on=("ok", "ck")),
        ),
        predicates=(JoinPredicate("C.ck", "O.ck", 0.001),),
    )
    validate_catalog(cat)
    return cat, Query(("C", "O"))


@pytest.fixture()
def co_fixture():
    return tiny_catalog()
