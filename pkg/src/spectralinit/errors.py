"""Exception types shared across the package."""

from __future__ import annotations


class SpectralInitError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(SpectralInitError, ValueError):
    """Incompatible or invalid dimensions."""


class ArgumentError(SpectralInitError, ValueError):
    """Invalid argument value."""


class ModeError(SpectralInitError, ValueError):
    """Operation requested in a mode the graph does not support."""


class ParseError(SpectralInitError, ValueError):
    """Malformed record in an input file."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class MixedDimension(SpectralInitError, ValueError):
    """2D and 3D records mixed in one file."""


class DisconnectedGraph(SpectralInitError):
    """The measurement graph (or a Laplacian's support graph) is not connected."""


class TopologyMismatch(SpectralInitError, ValueError):
    """Two graphs expected to share topology and precisions do not."""


class NonPositiveGap(SpectralInitError, ValueError):
    """A spectral gap that must be positive is zero or negative."""


class NoConvergence(SpectralInitError, RuntimeError):
    """Iterative solver exhausted its budget.

    Carries the iteration count, the best residual reached, and optionally
    the best iterate produced so far.
    """

    def __init__(self, iterations: int, best_residual: float, best=None):
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(best residual {best_residual:.3e})"
        )
        self.iterations = iterations
        self.best_residual = best_residual
        self.best = best
