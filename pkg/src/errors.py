"""Exception hierarchy with CLI exit codes"""
from typing import Optional


class QILabError(Exception):
    """Base error; exit_code is what the CLI returns when it escapes"""
    exit_code = 2


class UsageError(QILabError):
    """Invalid flags, parameters or config file"""
    exit_code = 1


class ComputationError(QILabError):
    """A construction or measurement could not be carried out"""
    exit_code = 2


class SizeCapError(ComputationError):
    """Point count would exceed the configured cap"""

    def __init__(self, count: float, cap: int, what: str = "net"):
        self.count = count
        self.cap = cap
        super().__init__(f"{what} would need {count:.3g} points (cap {cap}); coarsen the mesh or lower R")


MeshTooFineError = SizeCapError


class EmptyGenerationError(ComputationError):
    pass


class EmptyMapError(ComputationError):
    pass


class DegenerateDomainError(ComputationError):
    pass


class BoundaryMapUndefinedError(ComputationError):
    pass


class NetMismatchError(ComputationError):
    pass


class DisconnectedError(ComputationError):
    """Kernel or adjacency graph has more than one component"""

    def __init__(self, n_components: int, what: str = "net"):
        self.n_components = n_components
        super().__init__(f"{what} is disconnected ({n_components} components)")


class WrongNetError(ComputationError):
    pass


class NoEdgesError(ComputationError):
    pass


class PoleOrBelowError(ComputationError):
    pass


class CoincidentPointsError(ComputationError):
    pass


class NonpositiveCError(ComputationError):
    pass


class NoC1EstimateError(ComputationError):
    pass


class TooFewPointsError(ComputationError):
    pass


class NonpositiveValuesError(ComputationError):
    pass


class ExperimentError(ComputationError):
    """A module error raised while running one R of an experiment"""

    def __init__(self, experiment: str, R: float, cause: QILabError):
        self.experiment = experiment
        self.R = R
        self.exit_code = cause.exit_code
        super().__init__(f"{experiment} failed at R={R:g}: {cause}")


class AcceptanceFailure(QILabError):
    """An acceptance threshold was not met in --assert mode"""
    exit_code = 3

    def __init__(self, experiment: str, failures: list, detail: Optional[dict] = None):
        self.experiment = experiment
        self.failures = list(failures)
        self.detail = detail or {}
        super().__init__(f"{experiment}: " + "; ".join(self.failures))
