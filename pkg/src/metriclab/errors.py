"""Exception types shared across the package."""


class FormatError(ValueError):
    """A data file could not be parsed; message carries the line number."""


class DegenerateDomainError(ValueError):
    """A domain cannot be normalized (characteristic size is not positive)."""


class InvalidStateError(RuntimeError):
    """An operation was called on an object in the wrong state."""


class ResourceLimitError(RuntimeError):
    """A combinatorial search would exceed its configured budget."""


class ProtocolError(RuntimeError):
    """A black-box search algorithm violated the oracle protocol."""


class KatetovViolation(Exception):
    """A candidate one-point extension violates the Katetov constraints.

    Attributes carry the first offending pair so callers can inspect it.
    """

    def __init__(self, i, j, kind, lhs, rhs):
        self.pair = (i, j)
        self.kind = kind  # "difference" or "sum"
        self.lhs = lhs
        self.rhs = rhs
        super().__init__(
            f"Katetov {kind} constraint violated on pair ({i}, {j}): "
            f"{lhs:.12g} vs {rhs:.12g}"
        )


class UniquenessViolation(Exception):
    """A finalized adversary query does not have the intended unique nearest neighbor."""

    def __init__(self, x0, argmin):
        self.x0 = x0
        self.argmin = argmin
        super().__init__(f"finalized query nearest to {sorted(argmin)}, wanted unique {x0}")
