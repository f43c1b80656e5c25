import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavplan.errors import ValidationError
from uavplan.metrics import Box, DetectionTrace, GroundTruthTracks
from uavplan.sampling import RateSearchConfig, initial_rate, search, subsample_trace, trace_recall_oracle

HAND_TRACE = {0.25: 0.2, 0.5: 0.5, 1.0: 0.8, 2.0: 0.8, 0.75: 0.65, 0.875: 0.75}


def test_initial_rate_examples():
    assert initial_rate(30, 10) == pytest.approx(0.333, abs=1e-3)
    assert initial_rate(7.5, 7.5) == 1.0
    assert initial_rate(58.14, 5) == pytest.approx(0.086, abs=1e-4)
    with pytest.raises(ValidationError):
        initial_rate(0, 5)


def test_hand_trace():
    result = search(RateSearchConfig(0.25, 0.2, HAND_TRACE.__getitem__))
    assert [r for r, _ in result.evaluations] == [0.25, 0.5, 1.0, 2.0, 0.75, 0.875]
    assert (result.rate, result.recall, result.oracle_calls) == (1.0, 0.8, 6)


def test_constant_oracle_returns_bisected_r1_plateau():
    calls = []

    def oracle(r):
        calls.append(r)
        return 0.9

    result = search(RateSearchConfig(1.0, 0.1, oracle))
    assert result.recall == 0.9
    # doubling stops at once; bisection then walks r_top down towards r1/2
    assert calls[:2] == [1.0, 2.0]
    assert 0.5 < result.rate <= 0.5 + 0.1
    assert len(calls) == len(set(calls))


def test_wide_epsilon_skips_bisection():
    result = search(RateSearchConfig(0.25, 5.0, HAND_TRACE.__getitem__))
    assert result.rate == 1.0
    assert [r for r, _ in result.evaluations] == [0.25, 0.5, 1.0, 2.0]


def test_rate_cap_stops_doubling():
    result = search(RateSearchConfig(1.0, 0.01, lambda r: min(r, 10) / 10, r_cap=3.0))
    assert max(r for r, _ in result.evaluations) == 3.0
    assert result.rate == 3.0


def test_oracle_errors_propagate():
    def oracle(r):
        raise RuntimeError("camera offline")

    with pytest.raises(RuntimeError, match="offline"):
        search(RateSearchConfig(1.0, 0.1, oracle))


@pytest.mark.parametrize("kwargs", [{"r1": 0, "epsilon": 1}, {"r1": 1, "epsilon": 0}, {"r1": -1, "epsilon": 1}])
def test_config_validation(kwargs):
    with pytest.raises(ValidationError):
        RateSearchConfig(recall_oracle=lambda r: 1.0, **kwargs)


def plateau_oracle(r_star, low, high, gamma):
    """Strictly increasing below ``r_star`` with a jump to a flat ``high`` at and above it."""

    def oracle(r):
        if r >= r_star:
            return high
        return low + (high - 0.05 - low) * (r / r_star) ** gamma

    return oracle


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.05, 1.0),
    st.floats(1.05, 60),
    st.floats(0.005, 0.5),
    st.floats(0.3, 3),
)
def test_returns_plateau_edge_within_epsilon(r1, ratio, epsilon, gamma):
    r_star = r1 * ratio
    oracle = plateau_oracle(r_star, 0.1, 0.95, gamma)
    result = search(RateSearchConfig(r1, epsilon, oracle))
    assert result.recall == max(v for _, v in result.evaluations)
    assert result.recall == 0.95
    assert r_star <= result.rate <= r_star + epsilon
    assert result.rate <= 2 * r_star
    doublings = math.ceil(math.log2(r_star / r1))
    r_final = r1 * 2**doublings
    assert result.oracle_calls <= 2 + doublings + max(0, math.ceil(math.log2((r_final / 2) / epsilon)))


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(st.floats(0.01, 20), st.floats(0, 1), min_size=1, max_size=12), st.floats(0.01, 1), st.floats(0.001, 1))
def test_result_invariants_for_any_oracle(table, r1, epsilon):
    keys = np.array(sorted(table))

    def oracle(r):
        # arbitrary, non-monotone step function
        return table[float(keys[min(np.searchsorted(keys, r), len(keys) - 1)])]

    result = search(RateSearchConfig(r1, epsilon, oracle))
    rates = [r for r, _ in result.evaluations]
    assert result.rate in rates
    assert len(rates) == len(set(rates)) == result.oracle_calls
    assert result.recall == dict(result.evaluations)[result.rate]


def line_trace(n_frames=21, rate=2.0):
    """Track k is visible and detected only in frame k."""
    truth, frames = [], []
    for k in range(n_frames):
        box = Box(0, 0, 10, 10, "person")
        t = k / rate
        truth.append((t, [(f"p{k}", box)]))
        frames.append((t, (box,)))
    return DetectionTrace(tuple(frames)), GroundTruthTracks.from_frames(truth)


def test_subsample_keeps_nearest_frames():
    trace, _ = line_trace()
    half = subsample_trace(trace, 1.0)
    assert [t for t, _ in half.frames] == [k * 1.0 for k in range(11)]
    assert subsample_trace(trace, 2.0) is trace
    assert subsample_trace(trace, 50.0) is trace
    with pytest.raises(ValidationError):
        subsample_trace(trace, 0)


def test_trace_oracle_recall_grows_with_rate():
    trace, truth = line_trace()
    oracle = trace_recall_oracle(trace, truth)
    assert oracle(2.0) == 1.0
    assert oracle(1.0) == pytest.approx(11 / 21)
    assert oracle(0.5) < oracle(1.0)
