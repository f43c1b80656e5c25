"""Closed-form energy densities of a detection flight.

All energies are in Wh/km². For a flight at altitude ``h`` (m) and speed
``v`` (m/s) the camera sweeps ``theta*h*v`` m² per second, so covering one
km² takes ``1e6 / (theta*h*v)`` seconds. The UAV's share is
``E / (alpha*h*v)``; the edge device's share splits that time between
running (fraction ``r/r_max``) and standby.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

from .errors import ValidationError, warn
from .profiles import CameraProfile, EdgeDeviceProfile, FlightParams, MissionProfiles, UavProfile

M2_PER_KM2 = 1e6


@dataclass(frozen=True)
class EnergyBreakdown:
    p_uav: float
    p_edge_run: float
    p_edge_standby: float
    p_system: float

    @property
    def p_edge(self) -> float:
        return self.p_edge_run + self.p_edge_standby

    def to_dict(self) -> dict:
        return {
            "p_uav": self.p_uav,
            "p_edge_run": self.p_edge_run,
            "p_edge_standby": self.p_edge_standby,
            "p_system": self.p_system,
        }


def _positive(value: float, name: str) -> None:
    if not value > 0:
        raise ValidationError(name, "must be > 0", module="energy_model")


def footprint_area(camera: CameraProfile, h: float) -> float:
    """Rectangular ground footprint in m² from the camera half-angles."""
    _positive(h, "h")
    if not camera.has_angles:
        raise ValidationError("camera.theta_x", "footprint area needs theta_x and theta_y", module="energy_model")
    return 4.0 * math.tan(camera.theta_x) * math.tan(camera.theta_y) * h * h


def footprint_width(camera: CameraProfile, h: float) -> float:
    _positive(h, "h")
    return camera.theta * h


def uav_energy(uav: UavProfile, h: float, v: float) -> float:
    _positive(h, "h")
    _positive(v, "v")
    return uav.benchmark_energy / (uav.alpha * h * v)


def detection_seconds_per_km2(camera: CameraProfile, h: float, v: float) -> float:
    _positive(h, "h")
    _positive(v, "v")
    return M2_PER_KM2 / (camera.theta * h * v)


def duty_cycled_energy(seconds: float, r: float, r_max: float, p_run: float, p_standby: float) -> tuple[float, float]:
    """Split ``seconds`` of device time into (running, standby) energy."""
    duty = r / r_max
    return duty * seconds * p_run, (1.0 - duty) * seconds * p_standby


def edge_energy(
    camera: CameraProfile,
    device: EdgeDeviceProfile,
    model_id: str,
    h: float,
    v: float,
    r: float,
) -> tuple[float, float]:
    """Return (running, standby) edge energy in Wh/km²."""
    model = device.model(model_id)
    if r < 0:
        raise ValidationError("r", "must be >= 0", module="energy_model")
    if r > model.r_max:
        raise ValidationError("r", f"rate {r} exceeds r_max={model.r_max} of {model_id!r}", module="energy_model")
    seconds = detection_seconds_per_km2(camera, h, v)
    return duty_cycled_energy(seconds, r, model.r_max, model.p_run, device.p_standby)


def system_energy(profiles: MissionProfiles, params: FlightParams) -> EnergyBreakdown:
    p_uav = uav_energy(profiles.uav, params.h, params.v)
    run, standby = edge_energy(profiles.camera, profiles.edge, params.model_id, params.h, params.v, params.r)
    return EnergyBreakdown(p_uav, run, standby, p_uav + run + standby)


def standby_coefficient(profiles: MissionProfiles) -> float:
    """``k`` such that full-standby system energy is ``k / (h*v)``."""
    return (
        profiles.uav.benchmark_energy / profiles.uav.alpha
        + M2_PER_KM2 * profiles.edge.p_standby / profiles.camera.theta
    )


def full_rate_coefficient(profiles: MissionProfiles, model_id: str) -> float:
    """``k`` such that system energy at ``r = r_max`` is ``k / (h*v)``."""
    model = profiles.edge.model(model_id)
    return profiles.uav.benchmark_energy / profiles.uav.alpha + M2_PER_KM2 * model.p_run / profiles.camera.theta


def highest_power_model(profiles: MissionProfiles) -> str:
    return max(profiles.edge.models, key=lambda m: m.p_run).model_id


def equal_energy_altitude(profiles: MissionProfiles, p_target: float, v: float) -> float:
    """Altitude at which a full-standby flight at speed ``v`` spends ``p_target`` Wh/km²."""
    _positive(p_target, "p_target")
    _positive(v, "v")
    return standby_coefficient(profiles) / (p_target * v)


@dataclass(frozen=True)
class AltitudeRange:
    n: int
    threshold_altitude: float
    p_target: float
    spacing: float


def derive_altitude_range(
    profiles: MissionProfiles,
    altitudes,
    v_max: float | None = None,
    p_target: float | None = None,
) -> AltitudeRange:
    """Number of grid steps below the top altitude worth searching.

    The target energy defaults to a full-rate flight of the most power-hungry
    model at the top altitude and ``v_max``; the threshold altitude is where a
    full-standby flight costs the same. ``n = ceil((max H - h*) / dh)`` with
    ``dh`` the median grid spacing, clamped to at least 1.
    """
    heights = [float(h) for h in altitudes]
    if len(heights) < 2:
        raise ValidationError("altitudes", "need at least two altitudes to derive a range", module="energy_model")
    steps = [b - a for a, b in zip(heights, heights[1:])]
    if any(s <= 0 for s in steps):
        raise ValidationError("altitudes", "must be strictly increasing", module="energy_model")
    spacing = statistics.median(steps)
    if max(steps) - min(steps) > 1e-9 * spacing:
        warn("energy_model", f"altitude grid is not uniform; using median spacing {spacing:g} m")
    v = profiles.uav.v_max if v_max is None else v_max
    top = heights[-1]
    if p_target is None:
        p_target = full_rate_coefficient(profiles, highest_power_model(profiles)) / (top * v)
    threshold = equal_energy_altitude(profiles, p_target, v)
    if threshold > top:
        warn("energy_model", f"threshold altitude {threshold:.2f} m lies above the grid top {top:g} m; using n=1")
        return AltitudeRange(1, threshold, p_target, spacing)
    # guard against ceil() of values like 2.0000000000000004
    steps_below = round((top - threshold) / spacing, 9)
    n = max(1, math.ceil(steps_below))
    return AltitudeRange(n, threshold, p_target, spacing)
