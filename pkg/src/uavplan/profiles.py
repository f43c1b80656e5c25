"""Calibrated hardware descriptors, performance tables and task settings.

Units are fixed here and never converted elsewhere: meters, m/s, Hz, Wh,
Wh/s and Wh/km². ``UavProfile.alpha`` already absorbs the m² to km²
factor, so ``E / (alpha * h * v)`` is an energy density in Wh/km².

Everything is loaded from JSON documents (see ``docs/formats.md``) and is
immutable once constructed.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, NamedTuple, Sequence

from .errors import ParseError, UnknownModelError, ValidationError, warn


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ValidationError(path, message)


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(path, f"expected a number, got {type(value).__name__}")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(path, "must be finite")
    return value


def _text(value: Any, path: str) -> str:
    if not isinstance(value, str) or not value:
        raise ValidationError(path, "expected a non-empty string")
    return value


def _mapping(value: Any, path: str, allowed: Iterable[str], required: Iterable[str] = ()) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise ValidationError(path, f"expected an object, got {type(value).__name__}")
    allowed = set(allowed)
    for key in value:
        if key not in allowed:
            raise ValidationError(_join(path, key), "unknown field")
    for key in required:
        if key not in value:
            raise ValidationError(_join(path, key), "missing required field")
    return value


def _sequence(value: Any, path: str) -> Sequence[Any]:
    if isinstance(value, (str, bytes)) or not isinstance(value, Sequence):
        raise ValidationError(path, "expected a list")
    return value


def _join(prefix: str, key: str | int) -> str:
    if isinstance(key, int):
        return f"{prefix}[{key}]"
    return f"{prefix}.{key}" if prefix else key


def _nested(prefix: str):
    """Re-raise ValidationErrors from a constructor with ``prefix`` prepended."""

    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if isinstance(exc, ValidationError):
                raise exc.prefixed(prefix) from exc.__cause__
            return False

    return _Ctx()


@dataclass(frozen=True)
class CameraProfile:
    """Footprint coefficient of a camera.

    ``theta`` is ground width per meter of altitude and is the value every
    computation uses. ``theta_x``/``theta_y`` are optional half-angles in
    radians used only for the rectangular footprint area; ``theta`` is not
    checked against ``2*tan(theta_x)``.
    """

    theta: float
    theta_x: float | None = None
    theta_y: float | None = None

    def __post_init__(self):
        _require(self.theta > 0, "theta", "must be > 0")
        for name in ("theta_x", "theta_y"):
            angle = getattr(self, name)
            if angle is not None:
                _require(0 < angle < math.pi / 2, name, "must lie in (0, pi/2)")

    @property
    def has_angles(self) -> bool:
        return self.theta_x is not None and self.theta_y is not None


@dataclass(frozen=True)
class UavProfile:
    alpha: float
    benchmark_energy: float
    v_max: float

    def __post_init__(self):
        _require(self.alpha > 0, "alpha", "must be > 0")
        _require(self.benchmark_energy > 0, "benchmark_energy", "must be > 0")
        _require(self.v_max > 0, "v_max", "must be > 0")


@dataclass(frozen=True)
class EdgeModelProfile:
    model_id: str
    p_run: float
    r_max: float

    def __post_init__(self):
        _require(self.p_run > 0, "p_run", "must be > 0")
        _require(self.r_max > 0, "r_max", "must be > 0")


@dataclass(frozen=True)
class EdgeDeviceProfile:
    p_standby: float
    models: tuple[EdgeModelProfile, ...]

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        _require(self.p_standby > 0, "p_standby", "must be > 0")
        _require(len(self.models) > 0, "models", "at least one model is required")
        seen = set()
        for i, model in enumerate(self.models):
            _require(model.model_id not in seen, f"models[{i}].model_id", f"duplicate model_id {model.model_id!r}")
            seen.add(model.model_id)
        slowest = min(self.models, key=lambda m: m.p_run)
        _require(
            self.p_standby < slowest.p_run,
            "p_standby",
            f"must be below the smallest p_run ({slowest.p_run} of {slowest.model_id!r})",
        )

    def model(self, model_id: str) -> EdgeModelProfile:
        for model in self.models:
            if model.model_id == model_id:
                return model
        raise UnknownModelError("model_id", f"unknown model {model_id!r}")

    @property
    def model_ids(self) -> tuple[str, ...]:
        return tuple(m.model_id for m in self.models)


class RatePoint(NamedTuple):
    """One measured (score, sampling rate) pair at the table's benchmark speed."""

    perf: float
    rate: float


@dataclass(frozen=True)
class ModelPerfTable:
    """Task-completion scores of one model per altitude, measured at speed ``v_s``."""

    model_id: str
    v_s: float
    altitudes: tuple[float, ...]
    perf_max: tuple[float, ...]
    perf_r: tuple[tuple[RatePoint, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "altitudes", tuple(float(h) for h in self.altitudes))
        object.__setattr__(self, "perf_max", tuple(float(p) for p in self.perf_max))
        object.__setattr__(
            self,
            "perf_r",
            tuple(tuple(RatePoint(float(p), float(r)) for p, r in row) for row in self.perf_r),
        )
        _require(self.v_s > 0, "v_s", "must be > 0")
        _require(len(self.altitudes) > 0, "altitudes", "at least one altitude is required")
        for i, h in enumerate(self.altitudes):
            _require(h > 0, f"altitudes[{i}]", "must be > 0")
            if i:
                _require(h > self.altitudes[i - 1], f"altitudes[{i}]", "altitudes must be strictly increasing")
        _require(
            len(self.perf_max) == len(self.altitudes),
            "perf_max",
            f"length {len(self.perf_max)} does not match {len(self.altitudes)} altitudes",
        )
        _require(
            len(self.perf_r) == len(self.altitudes),
            "perf_r",
            f"length {len(self.perf_r)} does not match {len(self.altitudes)} altitudes",
        )
        for i, pmax in enumerate(self.perf_max):
            _require(0 <= pmax <= 1, f"perf_max[{i}]", "must lie in [0, 1]")
            for j, point in enumerate(self.perf_r[i]):
                _require(0 <= point.perf <= 1, f"perf_r[{i}][{j}].perf", "must lie in [0, 1]")
                _require(point.perf <= pmax, f"perf_r[{i}][{j}].perf", f"exceeds perf_max[{i}]={pmax}")
                _require(point.rate > 0, f"perf_r[{i}][{j}].rate", "must be > 0")

    def is_perf_max_monotone(self) -> bool:
        return all(b <= a for a, b in zip(self.perf_max, self.perf_max[1:]))


@dataclass(frozen=True)
class TaskSpec:
    perf_min: float
    beta: float = 1.0
    n: int | None = None

    def __post_init__(self):
        _require(0 <= self.perf_min <= 1, "perf_min", "must lie in [0, 1]")
        _require(self.beta >= 1, "beta", "must be >= 1")
        if self.n is not None:
            _require(isinstance(self.n, int) and self.n >= 0, "n", "must be a non-negative integer")


@dataclass(frozen=True)
class FlightParams:
    """One point of the search space: detection model, altitude, speed and rate."""

    model_id: str
    h: float
    v: float
    r: float

    def __post_init__(self):
        _require(self.h > 0, "h", "must be > 0")
        _require(self.v > 0, "v", "must be > 0")
        _require(self.r >= 0, "r", "must be >= 0")


@dataclass(frozen=True)
class MissionProfiles:
    camera: CameraProfile
    uav: UavProfile
    edge: EdgeDeviceProfile
    tables: tuple[ModelPerfTable, ...] = ()
    task: TaskSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "tables", tuple(self.tables))
        for i, table in enumerate(self.tables):
            check_table(table, self.edge, prefix=f"tables[{i}]")

    def with_tables(self, tables: Iterable[ModelPerfTable]) -> "MissionProfiles":
        return MissionProfiles(self.camera, self.uav, self.edge, tuple(tables), self.task)

    def with_task(self, task: TaskSpec | None) -> "MissionProfiles":
        return MissionProfiles(self.camera, self.uav, self.edge, self.tables, task)


def check_table(table: ModelPerfTable, edge: EdgeDeviceProfile, prefix: str = "", warn_monotone: bool = True) -> None:
    """Cross-check a table against the edge device: known model, rates within r_max."""
    try:
        model = edge.model(table.model_id)
    except UnknownModelError:
        raise UnknownModelError(_join(prefix, "model_id"), f"unknown model {table.model_id!r}") from None
    for i, row in enumerate(table.perf_r):
        for j, point in enumerate(row):
            if point.rate > model.r_max:
                raise ValidationError(
                    _join(prefix, f"perf_r[{i}][{j}].rate"),
                    f"rate {point.rate} exceeds r_max={model.r_max} of {model.model_id!r}",
                )
    if warn_monotone and not table.is_perf_max_monotone():
        warn("profiles", f"{prefix or table.model_id}: perf_max increases with altitude somewhere; "
                         "the altitude scan stops at the first failing altitude")


# -- dict conversion -----------------------------------------------------------------

def camera_from_dict(data: Any, path: str = "camera") -> CameraProfile:
    data = _mapping(data, path, ("theta", "theta_x", "theta_y"), ("theta",))
    angles = {k: _number(data[k], _join(path, k)) for k in ("theta_x", "theta_y") if data.get(k) is not None}
    theta = _number(data["theta"], _join(path, "theta"))
    with _nested(path):
        return CameraProfile(theta=theta, **angles)


def uav_from_dict(data: Any, path: str = "uav") -> UavProfile:
    keys = ("alpha", "benchmark_energy", "v_max")
    data = _mapping(data, path, keys, keys)
    values = {k: _number(data[k], _join(path, k)) for k in keys}
    with _nested(path):
        return UavProfile(**values)


def edge_from_dict(data: Any, path: str = "edge") -> EdgeDeviceProfile:
    data = _mapping(data, path, ("p_standby", "models"), ("p_standby", "models"))
    models = []
    for i, item in enumerate(_sequence(data["models"], _join(path, "models"))):
        mpath = f"{path}.models[{i}]"
        item = _mapping(item, mpath, ("model_id", "p_run", "r_max"), ("model_id", "p_run", "r_max"))
        model_id = _text(item["model_id"], _join(mpath, "model_id"))
        p_run = _number(item["p_run"], _join(mpath, "p_run"))
        r_max = _number(item["r_max"], _join(mpath, "r_max"))
        with _nested(mpath):
            models.append(EdgeModelProfile(model_id=model_id, p_run=p_run, r_max=r_max))
    p_standby = _number(data["p_standby"], _join(path, "p_standby"))
    with _nested(path):
        return EdgeDeviceProfile(p_standby=p_standby, models=tuple(models))


def table_from_dict(data: Any, path: str = "table") -> ModelPerfTable:
    keys = ("model_id", "v_s", "altitudes", "perf_max", "perf_r")
    data = _mapping(data, path, keys, keys)
    altitudes = [_number(h, f"{path}.altitudes[{i}]") for i, h in enumerate(_sequence(data["altitudes"], _join(path, "altitudes")))]
    perf_max = [_number(p, f"{path}.perf_max[{i}]") for i, p in enumerate(_sequence(data["perf_max"], _join(path, "perf_max")))]
    perf_r = []
    for i, row in enumerate(_sequence(data["perf_r"], _join(path, "perf_r"))):
        points = []
        for j, item in enumerate(_sequence(row, f"{path}.perf_r[{i}]")):
            ppath = f"{path}.perf_r[{i}][{j}]"
            item = _mapping(item, ppath, ("perf", "rate"), ("perf", "rate"))
            points.append(RatePoint(_number(item["perf"], _join(ppath, "perf")), _number(item["rate"], _join(ppath, "rate"))))
        perf_r.append(tuple(points))
    model_id = _text(data["model_id"], _join(path, "model_id"))
    v_s = _number(data["v_s"], _join(path, "v_s"))
    with _nested(path):
        return ModelPerfTable(
            model_id=model_id,
            v_s=v_s,
            altitudes=tuple(altitudes),
            perf_max=tuple(perf_max),
            perf_r=tuple(perf_r),
        )


def task_from_dict(data: Any, path: str = "task") -> TaskSpec:
    data = _mapping(data, path, ("perf_min", "beta", "n"), ("perf_min",))
    n = data.get("n")
    if n is not None and (isinstance(n, bool) or not isinstance(n, int)):
        raise ValidationError(_join(path, "n"), "must be a non-negative integer")
    perf_min = _number(data["perf_min"], _join(path, "perf_min"))
    beta = _number(data.get("beta", 1.0), _join(path, "beta"))
    with _nested(path):
        return TaskSpec(perf_min=perf_min, beta=beta, n=n)


def profiles_from_dict(data: Any) -> MissionProfiles:
    data = _mapping(data, "", ("camera", "uav", "edge", "tables", "task"), ("camera", "uav", "edge"))
    camera = camera_from_dict(data["camera"])
    uav = uav_from_dict(data["uav"])
    edge = edge_from_dict(data["edge"])
    tables = tuple(
        table_from_dict(t, f"tables[{i}]") for i, t in enumerate(_sequence(data.get("tables", []), "tables"))
    )
    task = task_from_dict(data["task"]) if data.get("task") is not None else None
    return MissionProfiles(camera, uav, edge, tables, task)


def table_to_dict(table: ModelPerfTable) -> dict:
    return {
        "model_id": table.model_id,
        "v_s": table.v_s,
        "altitudes": list(table.altitudes),
        "perf_max": list(table.perf_max),
        "perf_r": [[{"perf": p.perf, "rate": p.rate} for p in row] for row in table.perf_r],
    }


def profiles_to_dict(profiles: MissionProfiles) -> dict:
    camera = {"theta": profiles.camera.theta}
    if profiles.camera.theta_x is not None:
        camera["theta_x"] = profiles.camera.theta_x
    if profiles.camera.theta_y is not None:
        camera["theta_y"] = profiles.camera.theta_y
    out = {
        "camera": camera,
        "uav": {
            "alpha": profiles.uav.alpha,
            "benchmark_energy": profiles.uav.benchmark_energy,
            "v_max": profiles.uav.v_max,
        },
        "edge": {
            "p_standby": profiles.edge.p_standby,
            "models": [{"model_id": m.model_id, "p_run": m.p_run, "r_max": m.r_max} for m in profiles.edge.models],
        },
    }
    if profiles.task is not None:
        task = {"perf_min": profiles.task.perf_min, "beta": profiles.task.beta}
        if profiles.task.n is not None:
            task["n"] = profiles.task.n
        out["task"] = task
    if profiles.tables:
        out["tables"] = [table_to_dict(t) for t in profiles.tables]
    return out


# -- files -----------------------------------------------------------------------------

def read_json(path: str | os.PathLike, module: str = "profiles") -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(str(path), exc.strerror or str(exc), module=module) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(str(path), exc.msg, line=exc.lineno, module=module) from exc


def write_json(data: Any, path: str | os.PathLike) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=False)
        fh.write("\n")


def load_profiles(path: str | os.PathLike) -> MissionProfiles:
    """Load and validate a profiles document.

    Raises ParseError for unreadable/malformed JSON and ValidationError
    (naming the offending field path) for the first violated invariant.
    """
    return profiles_from_dict(read_json(path))


def save_profiles(profiles: MissionProfiles, path: str | os.PathLike) -> None:
    write_json(profiles_to_dict(profiles), path)


def load_tables(path: str | os.PathLike) -> tuple[ModelPerfTable, ...]:
    """Load performance tables from a file (one table or a list) or a directory of ``*.json``."""
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    if not files:
        raise ParseError(str(path), "no *.json tables found")
    tables = []
    for file in files:
        data = read_json(file)
        items = data if isinstance(data, list) else [data]
        for i, item in enumerate(items):
            prefix = f"{file.name}[{i}]" if isinstance(data, list) else file.name
            tables.append(table_from_dict(item, prefix))
    return tuple(tables)


def save_table(table: ModelPerfTable, path: str | os.PathLike) -> None:
    write_json(table_to_dict(table), path)
