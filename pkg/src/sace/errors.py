"""Exception types shared across the package."""


class SaceError(Exception):
    """Base class for all package-specific errors."""


class NonFiniteError(SaceError, ValueError):
    """Input contains NaN or infinite entries."""


class ConstantColumnError(SaceError, ValueError):
    """A design-matrix column has zero variance and cannot be scaled."""

    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column} is constant (zero variance)")


class DimensionMismatchError(SaceError, ValueError):
    """Array shapes do not agree."""


class BadDError(SaceError, ValueError):
    """Adjustment parameter d must lie in [0, 1]."""


class BadGammaError(SaceError, ValueError):
    """Concavity parameter gamma leaves a coordinate subproblem non-convex."""


class NoConvergenceError(SaceError, RuntimeError):
    """Coordinate descent hit the sweep limit.

    Carries the best iterate so callers can degrade gracefully.
    """

    def __init__(self, result, max_sweeps):
        self.result = result
        self.max_sweeps = max_sweeps
        super().__init__(f"no convergence within {max_sweeps} sweeps "
                         f"(max KKT violation {result.kkt.max_violation:.3e})")


class RankDeficientError(SaceError, ValueError):
    """Design submatrix restricted to a support is rank deficient."""

    def __init__(self, indices):
        self.indices = tuple(indices)
        super().__init__(f"X restricted to {self.indices} is rank deficient")


class UnachievableError(SaceError, RuntimeError):
    """No penalty level in the searched range selects the requested cardinality.

    Carries the closest fit found so pipelines can fall back with a flag.
    """

    def __init__(self, k, closest_k, closest_lambda, closest_fit):
        self.k = k
        self.closest_k = closest_k
        self.closest_lambda = closest_lambda
        self.closest_fit = closest_fit
        super().__init__(f"no lambda yields exactly {k} nonzeros; "
                         f"closest is {closest_k} at lambda={closest_lambda:.6g}")


class PanelError(SaceError, ValueError):
    """Base class for price-panel ingestion problems."""


class ParseError(PanelError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class EmptyPanelError(PanelError):
    pass


class NonMonotoneDatesError(PanelError):
    pass


class TooShortError(PanelError):
    """Panel has fewer rows than one train+test window."""


class TooFewSamplesError(SaceError, ValueError):
    """Tracking error needs at least two observations."""
