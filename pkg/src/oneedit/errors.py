"""Exception types shared across the package.

Everything raised on purpose derives from OneEditError so callers (CLI,
service) can map failures to exit codes / HTTP statuses in one place.
"""

from __future__ import annotations


class OneEditError(Exception):
    """Base class for all deliberate failures."""


class MalformedTriple(OneEditError):
    """A triple field is empty after canonicalization."""


class UnknownRelation(OneEditError):
    """A triple names a relation with no registered schema."""


class BadSchema(OneEditError):
    """A relation schema violates its own consistency rules."""


class BadRule(OneEditError):
    """A logical rule fails structural validation."""


class RuleRelationUnknown(OneEditError):
    """A rule references a relation the graph has no schema for."""


class NonFunctionalRelation(OneEditError):
    """Coverage conflict detection only applies to functional relations."""


class KeyNotActive(OneEditError):
    """Rollback target is unknown or was already rolled back."""


class UnresolvableRollback(OneEditError):
    """Strict mode: a conflicting triple has no active cache entry to roll back."""


class EmptyCategory(OneEditError):
    """A metric was requested over zero cases."""


class InfeasibleFixture(OneEditError):
    """Requested fixture sizes cannot produce a self-consistent world."""


class FixtureError(OneEditError):
    """A fixture/config file is missing, unreadable, or malformed."""


class ScenarioAssertionError(OneEditError):
    """A scenario's declared metric assertions did not hold."""
