"""Sensing-enhanced secure beamforming for multi-BS ISAC networks."""

from .errors import (
    DegenerateTopology,
    EstimationImpossible,
    InvalidArgument,
    InvalidExpansionPoint,
    InvalidGeometry,
    IsacError,
    RankOneRecoveryFailed,
    ScenarioInfeasible,
    SingularCovariance,
    SolverFailure,
)
from .metrics import BeamformingSolution
from .scenario import GeometrySpec, Scenario, SystemConfig, build_scenario

__all__ = [
    "BeamformingSolution",
    "DegenerateTopology",
    "EstimationImpossible",
    "GeometrySpec",
    "InvalidArgument",
    "InvalidExpansionPoint",
    "InvalidGeometry",
    "IsacError",
    "RankOneRecoveryFailed",
    "Scenario",
    "ScenarioInfeasible",
    "SingularCovariance",
    "SolverFailure",
    "SystemConfig",
    "build_scenario",
]
