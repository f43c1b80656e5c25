"""Shared fixtures and random generators for the test suite."""

from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np

from uavplan.decision import decide
from uavplan.errors import InfeasibleError
from uavplan.profiles import (
    CameraProfile,
    EdgeDeviceProfile,
    EdgeModelProfile,
    MissionProfiles,
    ModelPerfTable,
    RatePoint,
    TaskSpec,
    UavProfile,
)

DATA = Path(__file__).resolve().parent.parent / "data"

E_WH = 2.02
ALPHA = 1.57e-4
THETA = 1.617
P_RUN = 0.00537
P_STANDBY = 0.00168


def table_v_profiles(r_max: float = 10.0, v_max: float = 10.0) -> MissionProfiles:
    """The reference hardware with a single full-power model."""
    return MissionProfiles(
        CameraProfile(THETA),
        UavProfile(ALPHA, E_WH, v_max),
        EdgeDeviceProfile(P_STANDBY, (EdgeModelProfile("m1024", P_RUN, r_max),)),
    )


MODEL_POOL = (("a", 0.0050, 8.0), ("b", 0.0052, 4.0), ("c", 0.0054, 2.0), ("d", 0.0060, 1.0))
ALTITUDE_GRID = tuple(float(h) for h in range(20, 110, 10))


def random_profiles(rng: np.random.Generator, n_models: int) -> MissionProfiles:
    picks = sorted(rng.choice(len(MODEL_POOL), size=n_models, replace=False))
    models = tuple(EdgeModelProfile(*MODEL_POOL[i]) for i in picks)
    return MissionProfiles(
        CameraProfile(THETA),
        UavProfile(ALPHA, E_WH, float(rng.choice([6.0, 8.0, 10.0]))),
        EdgeDeviceProfile(P_STANDBY, models),
    )


def random_table(rng: np.random.Generator, model: EdgeModelProfile, monotone: bool = False) -> ModelPerfTable:
    """A table with coarse score and rate grids so that ties are common."""
    count = int(rng.integers(3, 10))
    start = int(rng.integers(0, len(ALTITUDE_GRID) - count + 1))
    altitudes = ALTITUDE_GRID[start:start + count]
    rate_grid = [model.r_max * f for f in (0.125, 0.25, 0.5, 0.75, 1.0)]
    rows, perf_max = [], []
    for _ in altitudes:
        k = int(rng.integers(1, 9))
        rates = rng.choice(rate_grid, size=k)
        perfs = np.round(rng.integers(10, 21, size=k) * 0.05, 2)
        rows.append(tuple(RatePoint(float(p), float(r)) for p, r in zip(perfs, rates)))
        perf_max.append(float(max(perfs)))
    if monotone:
        # rebuild each row under a non-increasing ceiling
        ceiling, new_rows, new_max = 1.0, [], []
        for row in rows:
            capped = tuple(RatePoint(min(p.perf, ceiling), p.rate) for p in row)
            top = max(p.perf for p in capped)
            new_rows.append(capped)
            new_max.append(top)
            ceiling = top
        rows, perf_max = new_rows, new_max
    return ModelPerfTable(model.model_id, float(rng.choice([2.5, 5.0])), altitudes, tuple(perf_max), tuple(rows))


def random_case(rng: np.random.Generator, monotone: bool = False):
    """(tables, profiles, task) with 1-4 models, 3-9 altitudes and 1-8 rate entries per altitude."""
    profiles = random_profiles(rng, int(rng.integers(1, 5)))
    tables = [random_table(rng, m, monotone) for m in profiles.edge.models]
    n = None if rng.random() < 0.3 else int(rng.integers(0, 4))
    task = TaskSpec(float(rng.choice([0.5, 0.6, 0.7, 0.8, 0.9])), float(rng.choice([1.0, 1.02, 1.05, 1.2])), n)
    return tables, profiles, task


def satisfies_window_assumption(tables, profiles, task) -> bool:
    """True when every candidate below a model's search window costs more than beta times the windowed minimum.

    Under this condition the windowed and the exhaustive enumeration keep the
    same beta-survivors, so they must choose the same flight.
    """
    from uavplan.decision import highest_feasible_index, make_candidate, resolve_n

    try:
        windowed = decide(tables, profiles, task)
    except InfeasibleError:
        return False
    limit = task.beta * windowed.energy_min
    for table in tables:
        if not table.is_perf_max_monotone():
            return False
        top = highest_feasible_index(table.perf_max, task.perf_min)
        lowest = max(0, top - resolve_n(table, profiles, task)) if top >= 0 else len(table.altitudes)
        for i in range(lowest):
            for point in table.perf_r[i]:
                if point.perf >= task.perf_min:
                    c = make_candidate(table, profiles, table.altitudes[i], point.perf, point.rate)
                    if not c.energy > limit:
                        return False
    return True


def window_safe_cases(seed: int, count: int):
    """Rejection-sample ``count`` cases that satisfy :func:`satisfies_window_assumption`."""
    rng = np.random.default_rng(seed)
    for _ in itertools.count():
        case = random_case(rng, monotone=True)
        if satisfies_window_assumption(*case):
            yield case
            count -= 1
            if count == 0:
                return
