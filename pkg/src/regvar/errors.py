"""Exception types shared across the package.

The CLI maps these onto exit codes: InputError subclasses are usage or
parse problems (exit 2), the diagnostic errors signal that the requested
computation is undefined or starved for data (exit 3).
"""
from __future__ import annotations


class InputError(ValueError):
    """Malformed arguments: dimension mismatches, bad ranges, bad files."""


class DimensionMismatchError(InputError):
    """A point, box or matrix has the wrong number of coordinates."""


class DomainError(InputError):
    """Point outside the domain of a change of variables."""


class CostGuardError(InputError):
    """A brute-force oracle was asked for more than desk-scale work."""


class SparseGraphError(RuntimeError):
    """Rejection sampling could not populate the graph within its budget."""

    def __init__(self, achieved: int, requested: int, trials: int):
        self.achieved = achieved
        self.requested = requested
        self.trials = trials
        super().__init__(
            f"graph sampling produced {achieved}/{requested} points "
            f"after {trials} trials; the graph is empty or too thin in the box"
        )


class IsolatedPointError(RuntimeError):
    """No graph neighbors found at the smallest neighborhood scale."""


class UndersampledError(RuntimeError):
    """Too few points for a meaningful scaling fit (all counts saturated)."""
