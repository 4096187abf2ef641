"""Exception types raised across the package."""


class IsacError(Exception):
    """Base class for package errors."""


class InvalidArgument(IsacError, ValueError):
    pass


class InvalidGeometry(IsacError, ValueError):
    pass


class InvalidExpansionPoint(IsacError, ValueError):
    """An SCA expansion point at which the surrogate is undefined or degenerate."""


class EstimationImpossible(IsacError):
    """Fisher information is singular, so no finite CRB exists."""


class SingularCovariance(IsacError, ValueError):
    pass


class DegenerateTopology(IsacError, ValueError):
    pass


class ScenarioInfeasible(IsacError):
    pass


class RankOneRecoveryFailed(IsacError):
    pass


class SolverFailure(IsacError):
    """A conic subproblem did not return an optimal point.

    ``tag`` names the subproblem or constraint family that failed.
    """

    def __init__(self, tag, status, detail=""):
        self.tag = tag
        self.status = status
        msg = f"{tag}: solver status {status}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
