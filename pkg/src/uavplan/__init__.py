"""Energy-aware flight planning for UAV object-detection missions."""

from .decision import Candidate, Recommendation, brute_force_decide, decide, decide_single_model
from .energy import EnergyBreakdown, system_energy
from .errors import InfeasibleError, ParseError, PlanningError, PlanningWarning, UnknownModelError, ValidationError
from .profiles import (
    CameraProfile,
    EdgeDeviceProfile,
    EdgeModelProfile,
    FlightParams,
    MissionProfiles,
    ModelPerfTable,
    RatePoint,
    TaskSpec,
    UavProfile,
    load_profiles,
    load_tables,
    save_profiles,
)

__version__ = "0.1.0"

__all__ = [
    "CameraProfile",
    "Candidate",
    "EdgeDeviceProfile",
    "EdgeModelProfile",
    "EnergyBreakdown",
    "FlightParams",
    "InfeasibleError",
    "MissionProfiles",
    "ModelPerfTable",
    "ParseError",
    "PlanningError",
    "PlanningWarning",
    "RatePoint",
    "Recommendation",
    "TaskSpec",
    "UavProfile",
    "UnknownModelError",
    "ValidationError",
    "brute_force_decide",
    "decide",
    "decide_single_model",
    "load_profiles",
    "load_tables",
    "save_profiles",
    "system_energy",
]
