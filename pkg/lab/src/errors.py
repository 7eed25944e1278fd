from typing import Any, Dict, List, Optional


class NlsLabError(Exception):
    kind = "error"
    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        return {"error": self.kind, "message": self.message, **self.details}


class ConfigurationError(NlsLabError):
    kind = "configuration"
    exit_code = 2


class GridMismatch(ConfigurationError):
    kind = "grid_mismatch"


class RegimeError(ConfigurationError):
    kind = "regime"


class NumericError(NlsLabError):
    kind = "numeric"
    exit_code = 3


class SingularityError(NumericError):
    kind = "singularity"


class InfeasibleScalingError(NumericError):
    kind = "infeasible_scaling"


class IntegrationFailure(NumericError):
    """Raised when a time step produces non-finite values.

    The trajectory recorded up to the failing step is kept on the exception
    so callers can report partial results.
    """

    kind = "integration_failure"

    def __init__(self, message: str, step: int, trajectory: Optional[Any] = None):
        super().__init__(message, step=step)
        self.step = step
        self.trajectory = trajectory


class MassDriftError(IntegrationFailure):
    kind = "mass_drift"


class OracleViolation(NlsLabError):
    kind = "oracle_violation"
    exit_code = 4

    def __init__(self, message: str, reports: List[Any]):
        super().__init__(message, violations=[r.dict() for r in reports])
        self.reports = reports
