"""Error types raised across the estimation pipeline."""


class SimulationError(Exception):
    """Base class for all package-specific errors."""


class InvalidConfigError(SimulationError):
    """A system configuration violates a structural constraint."""


class SolverDivergedError(SimulationError):
    """An iterative solver produced non-finite messages.

    Carries the iteration index at which divergence was detected.
    """

    def __init__(self, message, iterations):
        super().__init__(message)
        self.iterations = iterations


class DegenerateAnglesError(SimulationError):
    """Steering matrix too ill-conditioned to project onto."""


class InsufficientPeaksError(SimulationError):
    """A pseudo-spectrum exposed fewer peaks than paths to pair.

    Carries the index of the offending propagation path.
    """

    def __init__(self, message, path_index):
        super().__init__(message)
        self.path_index = path_index


class SubarrayConfigError(SimulationError):
    """Spatial-smoothing subarray sizes violate their inequalities."""


class UnderdeterminedError(SimulationError):
    """Fewer measurements than unknowns in a direct LS stage."""


class NumericalError(SimulationError):
    """A dense linear-algebra kernel failed to converge."""


class UndefinedMetricError(SimulationError):
    """A metric was requested on empty inputs."""
