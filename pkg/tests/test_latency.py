import math

import pytest
from hypothesis import given, strategies as st

from nmplab.errors import DomainError
from nmplab.latency import (
    LatencyBudget,
    LinkParams,
    PlayabilityClass,
    classify,
    propagation_delay,
    total_latency,
    transmission_delay,
)


@pytest.mark.parametrize("bits, bw, expected", [
    (4096, 5e6, 0.8192),
    (0, 5e6, 0.0),
    (4096, 10e6, 0.4096),
])
def test_transmission_delay(bits, bw, expected):
    assert transmission_delay(bits, bw) == pytest.approx(expected, abs=1e-12)


def test_transmission_delay_matches_rounded_published_value():
    assert round(transmission_delay(4096, 5e6), 3) == 0.819


@pytest.mark.parametrize("bw", [0, -1.0])
def test_transmission_delay_rejects_non_positive_bandwidth(bw):
    with pytest.raises(DomainError):
        transmission_delay(4096, bw)


@pytest.mark.parametrize("dist, expected", [(1_000_000, 5.0), (0, 0.0), (500_000, 2.5)])
def test_propagation_delay(dist, expected):
    assert propagation_delay(dist, 2e8) == expected


def test_propagation_delay_rejects_bad_speed():
    with pytest.raises(DomainError):
        propagation_delay(1.0, 0.0)


@pytest.mark.parametrize("proc, expected", [(20, 25.8192), (135, 140.8192)])
def test_total_latency_reference_paths(proc, expected):
    budget = total_latency(LinkParams(4096, 5e6, 1e6, processing_delay_ms=proc))
    assert budget.total_ms == pytest.approx(expected, abs=1e-9)
    assert budget.propagation_ms == 5.0


def test_total_latency_all_zero():
    assert total_latency(LinkParams(0, 5e6, 0, processing_delay_ms=0)).total_ms == 0


def test_link_params_validation():
    with pytest.raises(DomainError):
        LinkParams(4096, 0, 1e6)
    with pytest.raises(DomainError):
        LinkParams(4096, 5e6, 1e6, processing_delay_ms=-1)


@pytest.mark.parametrize("total, expected", [
    (25.82, PlayabilityClass.REAL_TIME_ENSEMBLE),
    (140.82, PlayabilityClass.DEGRADED),
    (30.0, PlayabilityClass.PLAYABLE),
    (49.999, PlayabilityClass.PLAYABLE),
    (50.0, PlayabilityClass.DEGRADED),
    (0.0, PlayabilityClass.REAL_TIME_ENSEMBLE),
])
def test_classify(total, expected):
    assert classify(LatencyBudget.from_components(0, 0, total)) is expected


def test_classify_custom_thresholds_and_validation():
    assert classify(25.0, (20.0, 40.0)) is PlayabilityClass.PLAYABLE
    with pytest.raises(DomainError):
        classify(25.0, (40.0, 20.0))


positive = st.floats(min_value=1e-3, max_value=1e12, allow_nan=False)
nonneg = st.floats(min_value=0, max_value=1e9, allow_nan=False)
bits = st.integers(min_value=0, max_value=10**9)


@given(bits, positive, nonneg, nonneg)
def test_additivity(b, bw, dist, proc):
    budget = total_latency(LinkParams(b, bw, dist, processing_delay_ms=proc))
    s = budget.transmission_ms + budget.propagation_ms + budget.processing_ms
    assert math.isclose(budget.total_ms, s, abs_tol=1e-9)
    assert min(budget.transmission_ms, budget.propagation_ms, budget.processing_ms) >= 0


@given(bits, bits, positive, positive, nonneg, nonneg, nonneg, nonneg)
def test_monotonicity(b1, b2, bw1, bw2, d1, d2, p1, p2):
    lo = total_latency(LinkParams(min(b1, b2), max(bw1, bw2), min(d1, d2), processing_delay_ms=min(p1, p2)))
    hi = total_latency(LinkParams(max(b1, b2), min(bw1, bw2), max(d1, d2), processing_delay_ms=max(p1, p2)))
    assert lo.total_ms <= hi.total_ms


@given(st.integers(min_value=0, max_value=10**9), positive)
def test_scale_property(b, bw):
    assert math.isclose(transmission_delay(2 * b, 2 * bw), transmission_delay(b, bw), rel_tol=1e-12)


@given(st.floats(min_value=0, max_value=1e4, allow_nan=False))
def test_classes_exhaustive_and_exclusive(total):
    budget = LatencyBudget.from_components(0, 0, total)
    cls = classify(budget)
    assert cls is classify(total)
    assert (total < 30) == (cls is PlayabilityClass.REAL_TIME_ENSEMBLE)
    assert (30 <= total < 50) == (cls is PlayabilityClass.PLAYABLE)
