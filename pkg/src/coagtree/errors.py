"""Exception types shared across the package."""


class CoagTreeError(Exception):
    """Base class for all package errors."""


class InvalidCode(CoagTreeError, ValueError):
    """A digit sequence that is not the level word-code of a planar binary tree."""


class LeafTree(CoagTreeError, ValueError):
    """Operation needs a tree with at least one vertex."""


class ResourceLimit(CoagTreeError):
    """Request exceeds a configured size cap (grade cap, oracle cost guard)."""


class GridMismatch(CoagTreeError, ValueError):
    """Grid functions live on different grids."""


class UnsupportedKernel(CoagTreeError, ValueError):
    """Kernel cannot be handled by the factorised product."""


class NonFiniteValue(CoagTreeError, ArithmeticError):
    """Overflow or NaN in a solver state; signals blow-up or gelation proximity."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DomainError(CoagTreeError, ValueError):
    """Argument outside the domain of a closed-form formula."""


class NoConvergence(CoagTreeError, ArithmeticError):
    """Iterative solver failed to converge."""


class ConfigError(CoagTreeError, ValueError):
    """Invalid run configuration; ``field`` names the offending entry."""

    def __init__(self, message, field=None, line=None):
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line
