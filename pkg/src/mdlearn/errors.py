"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point lies outside the domain of a proxy function or projection."""


class UnboundedError(ValueError):
    """A supremum was requested over an unbounded set."""


class CapacityError(RuntimeError):
    """An exact computation would exceed a configured size cap.

    ``cap`` names the limit that was hit so callers can report it.
    """

    def __init__(self, cap: str, limit, requested):
        self.cap = cap
        self.limit = limit
        self.requested = requested
        super().__init__(f"capacity cap '{cap}' exceeded: requested {requested}, limit {limit}")


class ProtocolError(RuntimeError):
    """A stateful object was driven outside its allowed protocol."""
