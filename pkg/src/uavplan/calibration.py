"""Through-origin least-squares fits of the camera and UAV coefficients.

Both relations pass through the origin, so each fit has a single unknown
and a closed-form normal equation: ``k = sum(x*y) / sum(x*x)``.
"""

from __future__ import annotations

import csv
import math
import os
import statistics
from dataclasses import dataclass
from typing import Sequence

from .energy import M2_PER_KM2
from .errors import ParseError, ValidationError
from .profiles import CameraProfile

MODULE = "calibration"
CV_WARNING_THRESHOLD = 0.15

FOOTPRINT_HEADER = ("h_m", "l_m")
ENDURANCE_HEADER = ("h_m", "v_mps", "t_s", "E_wh")


@dataclass(frozen=True)
class FootprintSample:
    h: float
    l: float

    def __post_init__(self):
        if not (self.h > 0 and self.l > 0):
            raise ValidationError("h" if not self.h > 0 else "l", "must be > 0", module=MODULE)


@dataclass(frozen=True)
class EnduranceSample:
    """Straight flight at altitude ``h`` and speed ``v`` lasting ``t`` s on ``E`` Wh."""

    h: float
    v: float
    t: float
    E: float

    def __post_init__(self):
        for name in ("h", "v", "t", "E"):
            if not getattr(self, name) > 0:
                raise ValidationError(name, "must be > 0", module=MODULE)


@dataclass(frozen=True)
class FitResult:
    value: float
    residual_rms: float
    sample_count: int
    cv: float | None = None

    def to_dict(self) -> dict:
        out = {"value": self.value, "residual_rms": self.residual_rms, "sample_count": self.sample_count}
        if self.cv is not None:
            out["cv"] = self.cv
        return out


def slope_through_origin(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of ``y ~ k*x`` and the RMS residual."""
    sxx = math.fsum(xi * xi for xi in x)
    if sxx == 0:
        raise ValidationError("samples", "all regressors are zero", module=MODULE)
    k = math.fsum(xi * yi for xi, yi in zip(x, y)) / sxx
    rms = math.sqrt(math.fsum((yi - k * xi) ** 2 for xi, yi in zip(x, y)) / len(x))
    return k, rms


def _min_samples(samples: Sequence) -> None:
    if len(samples) < 2:
        raise ValidationError("samples", f"need at least 2 samples, got {len(samples)}", module=MODULE)


def fit_theta(samples: Sequence[FootprintSample]) -> FitResult:
    """Fit ``l = theta*h``; the residual is in meters of ground width."""
    _min_samples(samples)
    k, rms = slope_through_origin([s.h for s in samples], [s.l for s in samples])
    return FitResult(k, rms, len(samples))


def observed_energy_density(sample: EnduranceSample, camera: CameraProfile) -> float:
    """Wh/km² implied by one endurance sample: E over the swept area."""
    return M2_PER_KM2 * sample.E / (camera.theta * sample.h * sample.v * sample.t)


def fit_alpha(samples: Sequence[EnduranceSample], camera: CameraProfile) -> FitResult:
    """Fit ``alpha`` from ``P = (E/alpha) / (h*v)``.

    Regresses the observed density against ``1/(h*v)``; the slope is
    ``E/alpha``. ``cv`` is the coefficient of variation of the flight times
    (sample standard deviation over mean).
    """
    _min_samples(samples)
    energy = samples[0].E
    for i, s in enumerate(samples):
        if s.E != energy:
            raise ValidationError(f"samples[{i}].E", f"energy {s.E} differs from {energy}; logs must share E",
                                  module=MODULE)
    x = [1.0 / (s.h * s.v) for s in samples]
    y = [observed_energy_density(s, camera) for s in samples]
    k, rms = slope_through_origin(x, y)
    times = [s.t for s in samples]
    cv = statistics.stdev(times) / statistics.fmean(times)
    return FitResult(energy / k, rms, len(samples), cv)


# -- CSV logs ------------------------------------------------------------------------

def _read_rows(path: str | os.PathLike, header: tuple[str, ...]) -> list[tuple[int, list[float]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise ParseError(str(path), exc.strerror or str(exc), module=MODULE) from exc
    if not rows or tuple(c.strip() for c in rows[0]) != header:
        raise ParseError(str(path), f"expected header {','.join(header)}", line=1, module=MODULE)
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(str(path), f"expected {len(header)} columns, got {len(row)}", line=lineno, module=MODULE)
        try:
            values = [float(c) for c in row]
        except ValueError:
            raise ParseError(str(path), f"non-numeric value in {row!r}", line=lineno, module=MODULE) from None
        if not all(math.isfinite(v) and v > 0 for v in values):
            raise ParseError(str(path), f"values must be positive and finite: {row!r}", line=lineno, module=MODULE)
        out.append((lineno, values))
    return out


def read_footprint_log(path: str | os.PathLike) -> list[FootprintSample]:
    return [FootprintSample(*values) for _, values in _read_rows(path, FOOTPRINT_HEADER)]


def read_endurance_log(path: str | os.PathLike) -> list[EnduranceSample]:
    return [EnduranceSample(*values) for _, values in _read_rows(path, ENDURANCE_HEADER)]


def write_footprint_log(samples: Sequence[FootprintSample], path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(FOOTPRINT_HEADER)
        writer.writerows((repr(s.h), repr(s.l)) for s in samples)


def write_endurance_log(samples: Sequence[EnduranceSample], path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ENDURANCE_HEADER)
        writer.writerows((repr(s.h), repr(s.v), repr(s.t), repr(s.E)) for s in samples)
