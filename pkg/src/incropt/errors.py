"""Exception types shared across the package."""


class IncroptError(Exception):
    """Base class for all package errors."""


class ParseError(IncroptError):
    """A catalog, query, updates, or state file is malformed."""


class ValidationError(IncroptError):
    """A parsed input violates a structural invariant."""


class UnknownTarget(IncroptError):
    """A statistics update names a relation or predicate that does not exist."""


class NoAlternatives(IncroptError):
    """No physical operator can produce the requested property for an expression."""


class InfeasibleQuery(IncroptError):
    """No plan exists for the query (e.g. disconnected join graph)."""


class TooLarge(IncroptError):
    """The query exceeds the size budget of an exhaustive enumerator."""


class NotQuiescent(IncroptError):
    """State was read while deltas were still pending."""


class NonTermination(IncroptError):
    """The delta fixpoint exceeded its processing ceiling; indicates a wiring bug."""


class StateMismatch(IncroptError):
    """A saved optimizer state does not match the supplied catalog or is corrupted."""
