import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sp_integrate
from scipy.special import erf, gammaln

from orlicz_lab.errors import QuadratureFailure
from orlicz_lab.logsum import LogMeanAccumulator, tree_merge
from orlicz_lab.quadrature import composite_rule, integrate
from orlicz_lab.reports import ExperimentReport, SCHEMA_VERSION, finite_or_none, missing_fields
from orlicz_lab.special import (
    log_gamma_tilt,
    log_gammainc_lower,
    log_lp_ball_volume,
    log_normal_sf,
    mills_value,
)


# Quadrature

def test_integrate_polynomial_exact():
    assert integrate(lambda x: x ** 5 - 3.0 * x, -1.0, 2.0) == pytest.approx(63.0 / 6.0 - 4.5, rel=1e-13)


def test_integrate_peaked():
    value = integrate(lambda x: np.exp(-100.0 * (x - 0.3) ** 2), 0.0, 1.0)
    assert value == pytest.approx(math.sqrt(math.pi) / 20.0 * (erf(7.0) + erf(3.0)), rel=1e-10)


def test_integrate_budget():
    with pytest.raises(QuadratureFailure) as info:
        integrate(lambda x: np.sin(1.0 / np.maximum(x, 1e-300)), 0.0, 1.0, max_panels=5)
    assert len(info.value.estimates) == 2


def test_composite_rule_weights_sum_to_length():
    nodes, weights = composite_rule(np.array([0.0, 0.5, 2.0, 3.0]), 8)
    assert nodes.shape == weights.shape == (24,)
    assert weights.sum() == pytest.approx(3.0, rel=1e-14)


# Special functions

@pytest.mark.parametrize("t", [0.0, 1.0, 5.0, 40.0])
def test_mills_value_bounds(t):
    value = float(mills_value(t))
    if t == 0.0:
        assert value == pytest.approx(math.sqrt(math.pi / 2.0), rel=1e-14)
        return
    assert t / (1.0 + t * t) <= value * (1.0 + 1e-12)
    assert value <= (1.0 / t) * (1.0 + 1e-12)


def test_log_normal_sf_far_tail():
    assert log_normal_sf(40.0) == pytest.approx(-800.0 - math.log(40.0 * math.sqrt(2.0 * math.pi)), abs=1e-3)


def test_log_lp_ball_volume_disc():
    assert log_lp_ball_volume(2.0, 2, 1.0) == pytest.approx(math.log(math.pi), rel=1e-14)
    assert log_lp_ball_volume(1.0, 3, 1.0) == pytest.approx(math.log(8.0 / 6.0), rel=1e-14)
    assert log_lp_ball_volume(1.0, 3, 0.0) == -math.inf


def test_log_gammainc_lower_series_branch():
    # P(k, z) ~ z^k / Gamma(k + 1) for tiny z
    k, z = 50.0, 1e-8
    expected = k * math.log(z) - float(gammaln(k + 1.0)) - z * k / (k + 1.0)
    assert log_gammainc_lower(k, z) == pytest.approx(expected, rel=1e-10)
    assert log_gammainc_lower(2.0, 0.0) == -math.inf


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 50.0), st.floats(0.01, 100.0))
def test_log_gammainc_lower_is_a_log_probability(k, z):
    value = log_gammainc_lower(k, z)
    assert value <= 1e-12


@pytest.mark.parametrize("c", [0.5, 1.0, 1.5])
def test_log_gamma_tilt_against_direct_quadrature(c):
    k, rate, x = 3.0, 1.0, 4.0

    def density(g):
        return math.exp(c * g - rate * g + (k - 1.0) * math.log(g) + k * math.log(rate) - float(gammaln(k)))

    direct, _ = sp_integrate.quad(density, 0.0, x, epsabs=0.0, epsrel=1e-12)
    assert log_gamma_tilt(k, rate, c, x) == pytest.approx(math.log(direct), rel=1e-9)


# Log-domain accumulation

def test_tree_merge_equals_single_accumulator():
    rng = np.random.default_rng(5)
    draws = rng.normal(-200.0, 3.0, size=1000)
    single = LogMeanAccumulator()
    single.add(draws)
    shards = []
    for part in np.array_split(draws, 7):
        acc = LogMeanAccumulator()
        acc.add(part)
        shards.append(acc)
    merged = tree_merge(shards)
    assert merged.count == single.count == 1000
    assert merged.log_mean == pytest.approx(single.log_mean, rel=1e-13)
    assert merged.log_standard_error == pytest.approx(single.log_standard_error, rel=1e-9)


def test_accumulator_all_rejected():
    acc = LogMeanAccumulator()
    acc.add(np.full(10, -np.inf))
    assert acc.count == 10
    assert acc.hits == 0
    assert acc.log_mean == -math.inf
    assert acc.relative_variance == math.inf


def test_accumulator_constant_weights():
    acc = LogMeanAccumulator()
    acc.add(np.full(100, -1000.0))
    assert acc.log_mean == pytest.approx(-1000.0, rel=1e-14)
    assert acc.relative_variance == pytest.approx(0.0, abs=1e-10)


def test_tree_merge_empty():
    assert tree_merge([]).count == 0


# Reports

def test_experiment_payload_uses_pass_key():
    report = ExperimentReport(name="demo", passed=True)
    payload = report.payload()
    assert payload["pass"] is True
    assert payload["schema_version"] == SCHEMA_VERSION
    assert missing_fields("experiment", payload) == []


def test_finite_or_none():
    cleaned = finite_or_none({"a": math.inf, "b": [1.0, -math.inf, math.nan], "c": {"d": 2}})
    assert cleaned == {"a": None, "b": [1.0, None, None], "c": {"d": 2}}


def test_missing_fields_reports_absent_keys():
    assert "log_volume" in missing_fields("volume", {"schema_version": 1})
