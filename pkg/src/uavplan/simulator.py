"""Deterministic lawnmower-scan simulator for desk-scale experiments.

A scene is a rectangle of static objects. The UAV sweeps parallel strips
one footprint wide, sampling frames every ``v/r`` meters of path. Geometry
runs on integer nanometers so that two flights with the same ``v/r`` ratio
visit bit-identical sample positions. Each (object, sample) detection is a
Bernoulli draw whose uniform variate is a hash of the seed, the object and
the sample's path position quantized to 0.1 m, never of the sample index,
so scaling speed and rate together reproduces the same detections exactly.

The per-sample detection probability is logistic in altitude:
``1 / (1 + exp(-steepness * (p50 - h) / p50))`` per (model, class).
"""

from __future__ import annotations

import hashlib
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .calibration import EnduranceSample, FootprintSample
from .energy import M2_PER_KM2
from .errors import ValidationError
from .metrics import Box, DetectionTrace, GroundTruthTracks
from .profiles import (
    CameraProfile,
    FlightParams,
    MissionProfiles,
    ModelPerfTable,
    RatePoint,
    read_json,
)
from .sampling import RateSearchConfig, search

MODULE = "simulator"

NM_PER_M = 10**9
CELL_NM = 10**8  # 0.1 m randomness cell
IMAGE_PX = 1024.0
DEFAULT_OBJECT_SIZE_M = {"car": 4.5, "person": 0.6}
FALLBACK_OBJECT_SIZE_M = 1.0

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SceneSpec:
    width_km: float
    length_km: float
    density: Mapping[str, float]
    seed: int = 0
    object_size_m: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.width_km > 0:
            raise ValidationError("width_km", "must be > 0", module=MODULE)
        if not self.length_km > 0:
            raise ValidationError("length_km", "must be > 0", module=MODULE)
        for cls, rho in self.density.items():
            if not rho >= 0:
                raise ValidationError(f"density.{cls}", "must be >= 0", module=MODULE)
        for cls, size in self.object_size_m.items():
            if not size > 0:
                raise ValidationError(f"object_size_m.{cls}", "must be > 0", module=MODULE)

    def size_of(self, cls: str) -> float:
        return self.object_size_m.get(cls, DEFAULT_OBJECT_SIZE_M.get(cls, FALLBACK_OBJECT_SIZE_M))

    def with_seed(self, seed: int) -> "SceneSpec":
        return SceneSpec(self.width_km, self.length_km, dict(self.density), seed, dict(self.object_size_m))


@dataclass(frozen=True, eq=False)
class Scene:
    """Objects on the ground; positions are integer nanometers from the scene corner."""

    spec: SceneSpec
    x_nm: np.ndarray
    y_nm: np.ndarray
    classes: tuple[str, ...]
    track_ids: tuple[str, ...]

    @property
    def width_nm(self) -> int:
        return round(self.spec.width_km * 1000 * NM_PER_M)

    @property
    def length_nm(self) -> int:
        return round(self.spec.length_km * 1000 * NM_PER_M)

    def __len__(self) -> int:
        return len(self.track_ids)

    def to_bytes(self) -> bytes:
        head = "\n".join(f"{t},{c}" for t, c in zip(self.track_ids, self.classes)).encode()
        return head + b"\0" + self.x_nm.astype("<i8").tobytes() + self.y_nm.astype("<i8").tobytes()

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


def generate_scene(spec: SceneSpec) -> Scene:
    """Poisson number of objects per class, placed uniformly at random."""
    rng = np.random.default_rng(spec.seed & _MASK64)
    area = spec.width_km * spec.length_km
    width_m, length_m = spec.width_km * 1000, spec.length_km * 1000
    xs, ys, classes, ids = [], [], [], []
    for cls in sorted(spec.density):
        count = int(rng.poisson(spec.density[cls] * area))
        xs.append(np.floor(rng.uniform(0, width_m, count) * NM_PER_M).astype(np.int64))
        ys.append(np.floor(rng.uniform(0, length_m, count) * NM_PER_M).astype(np.int64))
        classes.extend([cls] * count)
        ids.extend(f"{cls}-{i:05d}" for i in range(count))
    x = np.concatenate(xs) if xs else np.zeros(0, np.int64)
    y = np.concatenate(ys) if ys else np.zeros(0, np.int64)
    return Scene(spec, x, y, tuple(classes), tuple(ids))


@dataclass(frozen=True)
class DetectabilityModel:
    """Logistic per-sample detection probability per (model_id, class)."""

    params: Mapping[tuple[str, str], tuple[float, float]]

    def __post_init__(self):
        for (model_id, cls), (p50, steep) in self.params.items():
            if not p50 > 0:
                raise ValidationError(f"{model_id}.{cls}.p50_altitude", "must be > 0", module=MODULE)
            if not steep > 0:
                raise ValidationError(f"{model_id}.{cls}.steepness", "must be > 0", module=MODULE)

    def probability(self, model_id: str, cls: str, h: float) -> float:
        try:
            p50, steep = self.params[(model_id, cls)]
        except KeyError:
            raise ValidationError(f"{model_id}.{cls}", "no detectability entry", module=MODULE) from None
        if h == p50:
            return 0.5
        z = steep * (p50 - h) / p50
        if math.isinf(z):
            return 1.0 if z > 0 else 0.0
        if z < -700:
            return 0.0
        return 1.0 / (1.0 + math.exp(-z))

    @property
    def model_ids(self) -> tuple[str, ...]:
        return tuple(sorted({m for m, _ in self.params}))


def detectability_from_dict(data) -> DetectabilityModel:
    if not isinstance(data, Mapping) or not isinstance(data.get("models"), Mapping):
        raise ValidationError("models", "expected {models: {model_id: {class: {...}}}}", module=MODULE)
    params = {}
    for model_id, per_class in data["models"].items():
        for cls, entry in per_class.items():
            try:
                params[(model_id, cls)] = (float(entry["p50_altitude"]), float(entry["steepness"]))
            except (KeyError, TypeError, ValueError):
                raise ValidationError(f"models.{model_id}.{cls}", "expected {p50_altitude, steepness}",
                                      module=MODULE) from None
    return DetectabilityModel(params)


def scene_spec_from_dict(data) -> SceneSpec:
    try:
        return SceneSpec(
            width_km=float(data["width_km"]),
            length_km=float(data["length_km"]),
            density={str(k): float(v) for k, v in data["density"].items()},
            seed=int(data.get("seed", 0)),
            object_size_m={str(k): float(v) for k, v in data.get("object_size_m", {}).items()},
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ValidationError("scene", f"malformed scene spec ({exc})", module=MODULE) from None


def load_detectability(path) -> DetectabilityModel:
    return detectability_from_dict(read_json(path, module=MODULE))


def load_scene_spec(path) -> SceneSpec:
    return scene_spec_from_dict(read_json(path, module=MODULE))


# -- randomness --------------------------------------------------------------------

def _splitmix(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def keyed_uniform(seed: int, salt: int, objects: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Uniform [0, 1) variates that depend only on (seed, salt, object, cell)."""
    with np.errstate(over="ignore"):
        base = _splitmix(np.array([(seed & _MASK64) ^ (salt & _MASK64)], dtype=np.uint64))
        z = _splitmix(base ^ objects.astype(np.uint64))
        z = _splitmix(z ^ cells.astype(np.uint64))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def _salt(model_id: str) -> int:
    return zlib.crc32(model_id.encode())


# -- scanning ----------------------------------------------------------------------

@dataclass(frozen=True)
class _Scan:
    width_nm: int
    depth_nm: int
    spacing_nm: int
    length_nm: int
    n_strips: int
    n_samples: int


def _scan(scene: Scene, camera: CameraProfile, params: FlightParams) -> _Scan:
    if not params.r > 0:
        raise ValidationError("r", "simulated flights need a positive sampling rate", module=MODULE)
    width = round(camera.theta * params.h * NM_PER_M)
    depth = round(2 * params.h * math.tan(camera.theta_y) * NM_PER_M) if camera.has_angles else width
    spacing = max(1, round(params.v / params.r * NM_PER_M))
    length = scene.length_nm
    n_strips = -(-scene.width_nm // width)
    n_samples = (n_strips * length) // spacing + 1
    return _Scan(width, depth, spacing, length, n_strips, n_samples)


def _visible_pairs(scene: Scene, scan: _Scan) -> tuple[np.ndarray, np.ndarray]:
    """All (object index, sample index) pairs with the object inside the footprint."""
    if len(scene) == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    strip = scene.x_nm // scan.width_nm
    along = np.where(strip % 2 == 0, scene.y_nm, scan.length_nm - scene.y_nm)
    s_obj = strip * scan.length_nm + along
    half = scan.depth_nm // 2
    lo = np.maximum(strip * scan.length_nm, s_obj - half)
    hi = np.minimum((strip + 1) * scan.length_nm - 1, s_obj + half)
    k_lo = -(-lo // scan.spacing_nm)
    k_hi = hi // scan.spacing_nm
    counts = np.maximum(k_hi - k_lo + 1, 0)
    objects = np.repeat(np.arange(len(scene), dtype=np.int64), counts)
    offsets = np.arange(objects.size, dtype=np.int64) - np.repeat(np.cumsum(counts) - counts, counts)
    samples = np.repeat(k_lo, counts) + offsets
    return objects, samples


def _detect(scene: Scene, detectability: DetectabilityModel, params: FlightParams, scan: _Scan,
            objects: np.ndarray, samples: np.ndarray) -> np.ndarray:
    probs = {cls: detectability.probability(params.model_id, cls, params.h) for cls in set(scene.classes)}
    p = np.array([probs[scene.classes[i]] for i in range(len(scene))], dtype=np.float64)
    cells = samples * scan.spacing_nm // CELL_NM
    u = keyed_uniform(scene.spec.seed, _salt(params.model_id), objects, cells)
    return u < p[objects]


def detection_set(scene: Scene, camera: CameraProfile, detectability: DetectabilityModel,
                  params: FlightParams) -> frozenset[tuple[int, str]]:
    """(sample index, track id) for every detection of a flight."""
    scan = _scan(scene, camera, params)
    objects, samples = _visible_pairs(scene, scan)
    hit = _detect(scene, detectability, params, scan, objects, samples)
    return frozenset((int(k), scene.track_ids[int(i)]) for i, k in zip(objects[hit], samples[hit]))


def simulated_recall(scene: Scene, camera: CameraProfile, detectability: DetectabilityModel,
                     params: FlightParams) -> float:
    """Recall of a flight without materializing its trace; equals evaluating the full trace."""
    if len(scene) == 0:
        return 1.0
    scan = _scan(scene, camera, params)
    objects, samples = _visible_pairs(scene, scan)
    hit = _detect(scene, detectability, params, scan, objects, samples)
    return np.unique(objects[hit]).size / len(scene)


def endurance_sample(profiles: MissionProfiles, h: float, v: float, noise: float = 0.0, seed: int = 0
                     ) -> EnduranceSample:
    """Flight time on the benchmark energy, ``1e6*alpha/theta`` s, with optional multiplicative noise."""
    t = M2_PER_KM2 * profiles.uav.alpha / profiles.camera.theta
    if noise:
        rng = np.random.default_rng([seed & _MASK64, round(h * 1000), round(v * 1000)])
        t *= max(1e-3, 1.0 + noise * rng.standard_normal())
    return EnduranceSample(h, v, t, profiles.uav.benchmark_energy)


@dataclass(frozen=True)
class SimulatedFlight:
    params: FlightParams
    trace: DetectionTrace
    truth: GroundTruthTracks
    energy_log: EnduranceSample
    sample_spacing_m: float

    def detections(self) -> frozenset[tuple[int, tuple]]:
        """Frame index and box content of every detection; timestamps excluded."""
        return frozenset(
            (k, (b.x_min, b.y_min, b.x_max, b.y_max, b.class_label))
            for k, (_, boxes) in enumerate(self.trace.frames)
            for b in boxes
        )


def _pixel_box(scene: Scene, scan: _Scan, obj: int, sample: int) -> Box:
    s = sample * scan.spacing_nm
    strip = s // scan.length_nm
    along = s - strip * scan.length_nm
    y_c = along if strip % 2 == 0 else scan.length_nm - along
    x_c = strip * scan.width_nm + scan.width_nm // 2
    scale = IMAGE_PX / scan.width_nm
    height_px = IMAGE_PX * scan.depth_nm / scan.width_nm
    u = (int(scene.x_nm[obj]) - x_c + scan.width_nm // 2) * scale
    w = (int(scene.y_nm[obj]) - y_c + scan.depth_nm // 2) * scale
    half = scene.spec.size_of(scene.classes[obj]) * NM_PER_M / 2 * scale
    return Box(max(0.0, u - half), max(0.0, w - half), min(IMAGE_PX, u + half), min(height_px, w + half),
               scene.classes[obj])


def simulate_flight(
    scene: Scene,
    profiles: MissionProfiles,
    detectability: DetectabilityModel,
    params: FlightParams,
    endurance_noise: float = 0.0,
) -> SimulatedFlight:
    """Fly one lawnmower mission and emit its trace, ground truth and endurance record.

    Frames are taken every ``1/r`` seconds. Ground truth annotates every
    in-footprint object in each sampled frame; objects that no frame sees
    get one annotation at the moment the footprint centre passes over them,
    so they still count as missed tracks.
    """
    scan = _scan(scene, profiles.camera, params)
    objects, samples = _visible_pairs(scene, scan)
    hit = _detect(scene, detectability, params, scan, objects, samples)
    times = [k / params.r for k in range(scan.n_samples)]

    truth_frames: dict[float, list[tuple[str, Box]]] = {t: [] for t in times}
    det_frames: list[list[Box]] = [[] for _ in range(scan.n_samples)]
    order = np.lexsort((objects, samples))
    for idx in order:
        i, k = int(objects[idx]), int(samples[idx])
        box = _pixel_box(scene, scan, i, k)
        truth_frames[times[k]].append((scene.track_ids[i], box))
        if hit[idx]:
            det_frames[k].append(box)

    seen = set(objects.tolist())
    for i in range(len(scene)):
        if i in seen:
            continue
        strip = int(scene.x_nm[i]) // scan.width_nm
        along = int(scene.y_nm[i]) if strip % 2 == 0 else scan.length_nm - int(scene.y_nm[i])
        s_obj = strip * scan.length_nm + along
        t = s_obj / NM_PER_M / params.v
        half = scene.spec.size_of(scene.classes[i]) * IMAGE_PX / (scan.width_nm / NM_PER_M) / 2
        x_off = (int(scene.x_nm[i]) - strip * scan.width_nm) / scan.width_nm * IMAGE_PX
        centre = IMAGE_PX * scan.depth_nm / scan.width_nm / 2
        box = Box(max(0.0, x_off - half), centre - half, min(IMAGE_PX, x_off + half), centre + half, scene.classes[i])
        truth_frames.setdefault(t, []).append((scene.track_ids[i], box))

    trace = DetectionTrace(tuple((t, tuple(d)) for t, d in zip(times, det_frames)))
    truth = GroundTruthTracks.from_frames(truth_frames.items())
    energy = endurance_sample(profiles, params.h, params.v, endurance_noise, scene.spec.seed)
    return SimulatedFlight(params, trace, truth, energy, scan.spacing_nm / NM_PER_M)


# -- tables and logs -----------------------------------------------------------------

def mean_recall(scenes: Sequence[Scene], camera: CameraProfile, detectability: DetectabilityModel,
                params: FlightParams) -> float:
    return math.fsum(simulated_recall(s, camera, detectability, params) for s in scenes) / len(scenes)


def build_perf_table(
    scenes: Sequence[Scene],
    profiles: MissionProfiles,
    detectability: DetectabilityModel,
    model_id: str,
    altitudes: Sequence[float],
    rates: Sequence[float] | None = None,
    v_s: float = 5.0,
    *,
    r1: float | None = None,
    epsilon: float | None = None,
    max_workers: int | None = None,
) -> ModelPerfTable:
    """Measure mean recall per (altitude, rate) over a scene ensemble at speed ``v_s``.

    Pass ``rates`` for a fixed grid, or ``r1``/``epsilon`` to probe each
    altitude with the rate search and keep every probed rate. Rates above the
    model's ``r_max`` are dropped.
    """
    if not scenes:
        raise ValidationError("scenes", "need at least one scene", module=MODULE)
    r_max = profiles.edge.model(model_id).r_max
    camera = profiles.camera

    def grid_row(h: float) -> tuple[RatePoint, ...]:
        return tuple(
            RatePoint(mean_recall(scenes, camera, detectability, FlightParams(model_id, h, v_s, r)), r)
            for r in sorted(set(rates)) if r <= r_max
        )

    def search_row(h: float) -> tuple[RatePoint, ...]:
        result = search(RateSearchConfig(
            r1=min(r1, r_max), epsilon=epsilon, r_cap=r_max,
            recall_oracle=lambda r: mean_recall(scenes, camera, detectability, FlightParams(model_id, h, v_s, r)),
        ))
        return tuple(RatePoint(p, r) for r, p in sorted(result.evaluations) if r <= r_max)

    if rates is not None:
        row_fn = grid_row
    elif r1 is not None and epsilon is not None:
        row_fn = search_row
    else:
        raise ValidationError("rates", "give a rate grid or r1 and epsilon", module=MODULE)

    with ThreadPoolExecutor(max_workers=max_workers or 1) as pool:
        rows = list(pool.map(row_fn, [float(h) for h in altitudes]))
    perf_max = [max((p.perf for p in row), default=0.0) for row in rows]
    return ModelPerfTable(model_id, v_s, tuple(float(h) for h in altitudes), tuple(perf_max), tuple(rows))


def footprint_log(camera: CameraProfile, altitudes: Sequence[float], noise: float = 0.0, seed: int = 0,
                  repeats: int = 1) -> list[FootprintSample]:
    """Ground-width measurements ``l = theta*h`` with optional relative Gaussian noise."""
    rng = np.random.default_rng(seed & _MASK64)
    out = []
    for _ in range(repeats):
        for h in altitudes:
            l = camera.theta * h
            if noise:
                l *= max(1e-3, 1.0 + noise * rng.standard_normal())
            out.append(FootprintSample(float(h), float(l)))
    return out


def endurance_log(profiles: MissionProfiles, altitudes: Sequence[float], speeds: Sequence[float],
                  noise: float = 0.0, seed: int = 0) -> list[EnduranceSample]:
    return [endurance_sample(profiles, float(h), float(v), noise, seed) for h in altitudes for v in speeds]
