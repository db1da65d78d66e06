"""Shared fixtures: the standard generated world and small schema kits."""

from __future__ import annotations

import pytest

from oneedit.fixtures import FixtureSizes, generate_fixture
from oneedit.triples import RelationSchema, SchemaRegistry


STANDARD_SEED = 7


@pytest.fixture(scope="session")
def standard_fixture(tmp_path_factory):
    """The seed-7 world every ordering/acceptance test runs against.

    Generated once per session; tests must treat the directory as
    read-only (run scenarios on it, never rewrite its files).
    """
    out = tmp_path_factory.mktemp("fixture7")
    fx = generate_fixture(STANDARD_SEED, str(out), FixtureSizes())
    return fx


@pytest.fixture(scope="session")
def small_fixture(tmp_path_factory):
    """A fixture small enough that every eval suite has <= 20 cases."""
    out = tmp_path_factory.mktemp("fixture_small")
    fx = generate_fixture(
        STANDARD_SEED, str(out), FixtureSizes(subjects=3, locality_cases=5, rules=2, users=3)
    )
    return fx


def presidency_schemas() -> SchemaRegistry:
    """Schemas for the running example: a president, a spouse, inverses."""
    return SchemaRegistry(
        [
            RelationSchema("President", reversible=True, inverse="PresidentOf", functional=True),
            RelationSchema("PresidentOf", reversible=True, inverse="President", functional=True),
            RelationSchema("Wife", reversible=True, inverse="Husband", functional=True),
            RelationSchema("Husband", reversible=True, inverse="Wife", functional=True),
            RelationSchema("Spouse", functional=True),
            RelationSchema("FirstLady", functional=True),
            RelationSchema("BornIn", functional=True),
            RelationSchema("Child", functional=False),
            RelationSchema("Capital", functional=True),
        ]
    )
