"""Exit criteria for the package, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary prints
one PASS/FAIL line per criterion.
"""

import math
import random
import statistics
import time

import numpy as np
import pytest

from helpers import ALPHA, E_WH, THETA, window_safe_cases, random_case, table_v_profiles
from test_metrics import best_matching, random_frame
from uavplan.calibration import EnduranceSample, FootprintSample, fit_alpha, fit_theta
from uavplan.decision import brute_force_decide, decide
from uavplan.energy import (
    derive_altitude_range,
    edge_energy,
    equal_energy_altitude,
    full_rate_coefficient,
    standby_coefficient,
    system_energy,
    uav_energy,
)
from uavplan.errors import InfeasibleError
from uavplan.metrics import Box, DetectionTrace, GroundTruthTracks, evaluate, iou, match_frame
from uavplan.profiles import (
    CameraProfile,
    EdgeDeviceProfile,
    EdgeModelProfile,
    FlightParams,
    MissionProfiles,
    ModelPerfTable,
    RatePoint,
    TaskSpec,
    UavProfile,
)
from uavplan.report import load_and_compare
from uavplan.sampling import RateSearchConfig, search
from uavplan.simulator import (
    DetectabilityModel,
    SceneSpec,
    detection_set,
    generate_scene,
    load_detectability,
    load_scene_spec,
    simulate_flight,
    simulated_recall,
)

pytestmark = pytest.mark.filterwarnings("ignore::uavplan.errors.PlanningWarning")

ALTITUDES = range(20, 101, 10)
SPEEDS = [1, 3, 5, 7, 9]


@pytest.mark.acceptance(1, "closed-form energy coefficients within 1e-2")
def test_closed_form_coefficients():
    p = table_v_profiles()
    h, v = 100.0, 10.0
    run, _ = edge_energy(p.camera, p.edge, "m1024", h, v, p.edge.model("m1024").r_max)
    _, idle = edge_energy(p.camera, p.edge, "m1024", h, v, 0.0)
    got = {
        "uav": uav_energy(p.uav, h, v) * h * v,
        "run": run * h * v,
        "standby": idle * h * v,
        "full": full_rate_coefficient(p, "m1024"),
        "idle": standby_coefficient(p),
    }
    expected = {"uav": 12866.242, "run": 3320.965, "standby": 1038.961, "full": 16187.207, "idle": 13905.203}
    for key, value in expected.items():
        assert abs(got[key] - value) <= 1e-2, key


@pytest.mark.acceptance(2, "edge energy curve 2.282 + 10.39/v at h=100, r=v, r_max=10")
def test_edge_curve():
    p = table_v_profiles(r_max=10.0)
    for v in range(1, 11):
        run, standby = edge_energy(p.camera, p.edge, "m1024", 100, v, float(v))
        assert abs(run + standby - (2.282 + 10.39 / v)) <= 1e-2


@pytest.mark.acceptance(3, "equal-energy altitude and altitude range n")
def test_altitude_analysis():
    p = table_v_profiles()
    assert 81.8 <= equal_energy_altitude(p, 16.787, 10) <= 83.8
    assert derive_altitude_range(p, ALTITUDES, p_target=16.787).n == 2
    # target computed from the full-rate coefficient at 100 m and 10 m/s
    formula = derive_altitude_range(p, ALTITUDES)
    assert formula.threshold_altitude == pytest.approx(85.9, abs=0.01)
    assert formula.n == 2


@pytest.mark.acceptance(4, "calibration recovers theta and alpha; CV diagnostic")
def test_calibration_recovery():
    camera = CameraProfile(THETA)
    t_ref = 1e6 * ALPHA / THETA
    clean_f = [FootprintSample(h, THETA * h) for h in ALTITUDES for _ in range(5)]
    clean_e = [EnduranceSample(h, v, t_ref, E_WH) for h in ALTITUDES for v in SPEEDS]
    assert fit_theta(clean_f).value == pytest.approx(THETA, rel=1e-6)
    assert fit_alpha(clean_e, camera).value == pytest.approx(ALPHA, rel=1e-6)

    # one fixed stream, drawn in a fixed order: endurance, footprint, then the CV set
    rng = np.random.default_rng(0)
    noisy_e = [EnduranceSample(h, v, t_ref * (1 + 0.05 * rng.standard_normal()), E_WH)
               for h in ALTITUDES for v in SPEEDS]
    noisy_f = [FootprintSample(h, THETA * h * (1 + 0.05 * rng.standard_normal()))
               for h in ALTITUDES for _ in range(5)]
    dispersed = [EnduranceSample(h, v, t_ref * (1 + 0.0623 * rng.standard_normal()), E_WH)
                 for h in ALTITUDES for v in SPEEDS]
    assert len(noisy_e) == len(noisy_f) == 45
    assert abs(fit_alpha(noisy_e, camera).value / ALPHA - 1) <= 0.02
    assert abs(fit_theta(noisy_f).value / THETA - 1) <= 0.02
    assert abs(fit_alpha(dispersed, camera).cv - 0.0623) <= 0.01


@pytest.mark.acceptance(5, "decide equals the brute-force oracles")
def test_decision_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(20240601)
    feasible = 0
    for _ in range(1000):
        tables, profiles, task = random_case(rng)
        try:
            got = decide(tables, profiles, task)
        except InfeasibleError as exc:
            with pytest.raises(InfeasibleError) as info:
                brute_force_decide(tables, profiles, task, prune=True)
            assert info.value.best_perf_max == exc.best_perf_max
            continue
        feasible += 1
        assert got == brute_force_decide(tables, profiles, task, prune=True)
    assert feasible >= 500
    for tables, profiles, task in window_safe_cases(seed=77, count=200):
        pruned = decide(tables, profiles, task)
        full = brute_force_decide(tables, profiles, task, prune=False)
        assert full.chosen == pruned.chosen
        assert full.energy_min == pruned.energy_min
    assert time.perf_counter() - start < 60


def scaled_case(tables, profiles, c):
    profiles = MissionProfiles(
        profiles.camera,
        UavProfile(profiles.uav.alpha, profiles.uav.benchmark_energy, profiles.uav.v_max * c),
        EdgeDeviceProfile(profiles.edge.p_standby,
                          tuple(EdgeModelProfile(m.model_id, m.p_run, m.r_max * c) for m in profiles.edge.models)),
    )
    tables = [
        ModelPerfTable(t.model_id, t.v_s * c, t.altitudes, t.perf_max,
                       tuple(tuple(RatePoint(p.perf, p.rate * c) for p in row) for row in t.perf_r))
        for t in tables
    ]
    return tables, profiles


@pytest.mark.acceptance(6, "proportional speed and rate scaling")
def test_proportional_scaling():
    profiles = table_v_profiles(r_max=20.0, v_max=40.0)
    det = DetectabilityModel({("m1024", "person"): (40.0, 6.0), ("m1024", "car"): (90.0, 6.0)})
    rng = np.random.default_rng(6)
    for seed in range(100):
        scene = generate_scene(SceneSpec(0.2, 0.3, {"person": 300, "car": 60}, seed=seed))
        h, v, r = float(rng.uniform(15, 80)), float(rng.uniform(1, 10)), float(rng.uniform(0.2, 5))
        base = detection_set(scene, profiles.camera, det, FlightParams("m1024", h, v, r))
        for c in (0.5, 2.0, 3.0):
            assert detection_set(scene, profiles.camera, det, FlightParams("m1024", h, v * c, r * c)) == base
        if seed < 10:
            flights = [simulate_flight(scene, profiles, det, FlightParams("m1024", h, v * c, r * c))
                       for c in (1.0, 0.5, 2.0, 3.0)]
            assert len({f.detections() for f in flights}) == 1

    cases = 0
    while cases < 200:
        tables, profiles, task = random_case(rng)
        task = TaskSpec(task.perf_min, task.beta, task.n if task.n is not None else 2)
        try:
            base = decide(tables, profiles, task).chosen
        except InfeasibleError:
            continue
        cases += 1
        for c in (0.5, 2.0, 3.0):
            other = decide(*scaled_case(tables, profiles, c), task).chosen
            assert (other.params.model_id, other.params.h, other.perf) == (base.params.model_id, base.params.h,
                                                                           base.perf)


@pytest.mark.acceptance(7, "perf_max falls with altitude; p_system falls with speed")
def test_altitude_and_speed_trends(data_dir):
    profiles = table_v_profiles(r_max=1.749)
    spec = load_scene_spec(data_dir / "scene_person.json")
    det = load_detectability(data_dir / "detectability.json")
    scenes = [generate_scene(spec.with_seed(s)) for s in range(30)]
    rates = (0.25, 0.5, 1.0, 1.749)
    perf_max, se = [], []
    for h in ALTITUDES:
        per_rate = [[simulated_recall(s, profiles.camera, det, FlightParams("m1024", h, 5.0, r)) for s in scenes]
                    for r in rates]
        best = max(per_rate, key=statistics.fmean)
        perf_max.append(statistics.fmean(best))
        se.append(statistics.stdev(best) / math.sqrt(len(best)))
    for i in range(len(perf_max) - 1):
        pooled = math.hypot(se[i], se[i + 1])
        assert perf_max[i + 1] <= perf_max[i] + pooled, (i, perf_max)

    rng = np.random.default_rng(3)
    for _ in range(3):
        p_standby = float(rng.uniform(0.001, 0.003))
        models = (EdgeModelProfile("m", p_standby * float(rng.uniform(1.2, 4)), float(rng.uniform(1, 20))),)
        profiles = MissionProfiles(CameraProfile(float(rng.uniform(0.5, 2.5))),
                                   UavProfile(float(rng.uniform(5e-5, 5e-4)), float(rng.uniform(1, 5)), 20.0),
                                   EdgeDeviceProfile(p_standby, models))
        h, r = float(rng.uniform(20, 100)), float(rng.uniform(0, models[0].r_max))
        energies = [system_energy(profiles, FlightParams("m", h, float(v), r)).p_system
                    for v in np.linspace(0.5, 20, 20)]
        assert all(b < a for a, b in zip(energies, energies[1:]))


@pytest.mark.acceptance(8, "metric fixtures; greedy matching equals exhaustive assignment")
def test_metric_fixtures_and_matching():
    def car(*xy):
        return Box(*xy, "car")

    truth = GroundTruthTracks.from_frames([(0.0, [("c", car(0, 0, 10, 10))]), (1.0, [("c", car(0, 0, 10, 10))])])
    r = evaluate(DetectionTrace(((0.0, (car(0, 0, 10, 8),)), (1.0, ()))), truth)
    assert (r.tp1, r.fp, r.tp2, r.fn, r.precision, r.recall) == (1, 0, 1, 0, 1.0, 1.0)

    truth = GroundTruthTracks.from_frames([(0.0, [("c", car(0, 0, 10, 10))])])
    r = evaluate(DetectionTrace(((0.0, (car(0, 0, 10, 4),)),)), truth)
    assert (r.tp1, r.fp, r.tp2, r.fn, r.precision, r.recall) == (0, 1, 0, 1, 0.0, 0.0)

    truth = GroundTruthTracks.from_frames([(0.0, [(f"t{i}", car(20 * i, 0, 20 * i + 10, 10)) for i in range(3)])])
    r = evaluate(DetectionTrace(()), truth)
    assert (r.recall, r.precision, r.precision_defined) == (0.0, 1.0, False)

    rng = random.Random(500)
    for _ in range(500):
        dets, truths = random_frame(rng)
        matches = match_frame(dets, [(str(j), t) for j, t in enumerate(truths)])
        count, total = best_matching(dets, truths)
        assert len(matches) == count
        assert sum(iou(dets[i], truths[j]) for i, j in matches) == pytest.approx(total)


def staircase(rng, r1, r_star):
    """Non-decreasing step oracle with its plateau at ``r_star``; steps are closer than ``r1``."""
    edges, x = [], 0.0
    while True:
        x += rng.uniform(0.1, 0.9) * r1
        if x >= r_star:
            break
        edges.append(x)
    levels = np.sort(rng.uniform(0.05, 0.9, len(edges) + 1))

    def oracle(r):
        if r >= r_star:
            return 0.95
        return float(levels[np.searchsorted(edges, r, side="right")])

    return oracle


@pytest.mark.acceptance(9, "rate search hand trace and plateau edge within epsilon")
def test_rate_search():
    trace = {0.25: 0.2, 0.5: 0.5, 1.0: 0.8, 2.0: 0.8, 0.75: 0.65, 0.875: 0.75}
    result = search(RateSearchConfig(0.25, 0.2, trace.__getitem__))
    assert [r for r, _ in result.evaluations] == [0.25, 0.5, 1.0, 2.0, 0.75, 0.875]
    assert (result.rate, result.recall) == (1.0, 0.8)

    rng = np.random.default_rng(9)
    for _ in range(200):
        r1 = float(rng.uniform(0.05, 1.0))
        r_star = r1 * float(rng.uniform(1.05, 40))
        epsilon = float(rng.uniform(0.005, 0.3))
        oracle = staircase(rng, r1, r_star)
        result = search(RateSearchConfig(r1, epsilon, oracle))
        step = epsilon / 10
        grid = np.arange(r1, 2 * r_star + 2 * step, step)
        values = [oracle(r) for r in grid]
        edge = float(grid[values.index(max(values))])
        assert abs(result.rate - edge) <= epsilon
        doublings = math.ceil(math.log2(r_star / r1))
        r_final = r1 * 2**doublings
        assert result.oracle_calls <= 2 + doublings + max(0, math.ceil(math.log2((r_final / 2) / epsilon)))


@pytest.mark.acceptance(10, "comparative report savings 17.07% and 26.6%")
def test_report_savings(data_dir):
    car, person = load_and_compare(data_dir / "measured_tables_vi_vii.json")
    assert f"{car.max_saving:.2%}" == "17.07%"
    assert f"{person.max_saving:.1%}" == "26.6%"


@pytest.mark.acceptance(11, "median decide latency under 1 ms")
def test_decision_latency(data_dir):
    from uavplan.profiles import load_profiles

    profiles = load_profiles(data_dir / "table_v_profiles.json")
    rng = np.random.default_rng(11)
    tables = []
    for m in profiles.edge.models:
        rates = [m.r_max * f for f in (0.1, 0.25, 0.4, 0.6, 0.8, 1.0)]
        perf = np.sort(rng.uniform(0.5, 1.0, 9))[::-1]
        rows = tuple(tuple(RatePoint(float(p * f), r) for f, r in zip((0.9, 0.93, 0.96, 0.98, 1.0, 1.0), rates))
                     for p in perf)
        tables.append(ModelPerfTable(m.model_id, 5.0, tuple(float(h) for h in ALTITUDES),
                                     tuple(max(x.perf for x in row) for row in rows), rows))
    task = TaskSpec(0.6, 1.05, 2)
    decide(tables, profiles, task)
    samples = []
    for _ in range(300):
        t0 = time.perf_counter()
        decide(tables, profiles, task)
        samples.append(time.perf_counter() - t0)
    median = statistics.median(samples)
    print(f"median decide latency {median * 1e3:.4f} ms")
    assert median < 1e-3
