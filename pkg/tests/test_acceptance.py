"""End-to-end runs at acceptance sizes (marked slow)."""

import itertools
import json
import math

import pytest

from orlicz_lab.cli import main
from orlicz_lab.lab import clt_exp_experiment, cross_polytope_marginal_tv, marginal_tv_experiment
from orlicz_lab.sampler import predict_acceptance, sample_uniform_ball
from orlicz_lab.tilt import build_tilted
from orlicz_lab.volume import (
    BallSpec,
    exp_gaussian_closed_form,
    exp_gaussian_integral,
    log_volume_asymptotic,
    log_volume_closed_form,
    log_volume_convolution,
    log_volume_mc,
)
from orlicz_lab.young import parse_young

pytestmark = pytest.mark.slow


@pytest.mark.parametrize("p", [2, 4])
@pytest.mark.parametrize("n", [50, 200, 800])
@pytest.mark.parametrize("alpha", [-1.0, 0.0, 1.0])
def test_asymptotic_matches_lp_volume(p, n, alpha):
    tm = build_tilted(parse_young(f"pow:{p}"), 1.0)
    spec = BallSpec.at_alpha(tm, n, alpha)
    gap = log_volume_asymptotic(spec).log_value - log_volume_closed_form(spec).log_value
    assert abs(math.expm1(gap)) <= 3.0 / math.sqrt(n)


@pytest.mark.parametrize("p", [2, 4])
@pytest.mark.parametrize("alpha", [-1.0, 1.0])
def test_gaussian_factor_is_needed(p, alpha):
    n = 800
    tm = build_tilted(parse_young(f"pow:{p}"), 1.0)
    spec = BallSpec.at_alpha(tm, n, alpha)
    gap = log_volume_asymptotic(spec).log_value - log_volume_closed_form(spec).log_value
    assert abs(math.expm1(gap + 0.5 * alpha ** 2)) > 3.0 / math.sqrt(n)


@pytest.mark.parametrize("spec", ["pow:1", "pow:2", "pow:4"])
@pytest.mark.parametrize("n", [2, 4, 8])
@pytest.mark.parametrize("scale", [0.5, 1.0, 1.5])
def test_oracle_triangle_small_n(spec, n, scale):
    psi = parse_young(spec)
    E = scale * n * build_tilted(psi, 1.0).m
    ball = BallSpec.solved(psi, n, E)
    exact = log_volume_closed_form(ball).log_value
    assert log_volume_convolution(ball).log_value == pytest.approx(exact, abs=1e-3)
    mc = log_volume_mc(ball, rng=n, samples=10**6)
    assert abs(mc.log_value - exact) <= 4.0 * mc.diagnostics["standard_error"]


def exp_gaussian_grid():
    grid = [
        (s, alpha, lam)
        for s, alpha, lam in itertools.product(
            [0.5, 0.75, 1.0, 1.5, 2.0], [-1.0, -0.5, 0.0, 0.5, 1.0], [1.5, 2.0, 5.0, 10.0, 20.0])
        if lam * s - alpha / s > 1.0
    ]
    return grid[:100]


def test_exp_gaussian_grid():
    grid = exp_gaussian_grid()
    assert len(grid) == 100
    for s, alpha, lam in grid:
        value = exp_gaussian_closed_form(s, alpha, lam)
        assert value == pytest.approx(exp_gaussian_integral(s, alpha, lam), rel=1e-10)
        z = lam * s - alpha / s
        scaled = math.sqrt(2.0 * math.pi) * value * math.exp(alpha ** 2 / (2.0 * s ** 2)) * s
        assert abs(scaled - 1.0) <= 2.0 * (1.0 + abs(alpha) / s) / z


def test_boundary_layer_is_exponential(capsys):
    code = main(["--quiet", "boundary", "--psi", "pow:1", "--n", "200", "--E", "200",
                 "--samples", "100000", "--seed", "0"])
    payload = json.loads(capsys.readouterr().out)
    assert code == 0
    assert payload["pass"] is True
    assert payload["statistics"]["ks"] <= 0.05
    assert payload["statistics"]["min_distance"] >= 0.0


def test_cross_polytope_marginal_tv_shrinks(abs_psi):
    tv_400 = cross_polytope_marginal_tv(1.0, 1.0, 400.0, 400)
    tv_1600 = cross_polytope_marginal_tv(1.0, 1.0, 1600.0, 1600)
    assert tv_400 <= 0.05
    assert tv_1600 < tv_400
    report = marginal_tv_experiment(abs_psi, 1.0, 1600, 1)
    assert report.passed
    assert report.statistics["tv_exact"] < tv_400


@pytest.mark.parametrize("psi, E", [("pow:2", "8"), ("pow:4", "4")])
def test_psi2_chain_five_directions(capsys, psi, E):
    code = main(["--quiet", "psi2", "--psi", psi, "--n", "16", "--E", E,
                 "--samples", "1000000", "--directions", "5", "--seed", "0"])
    payload = json.loads(capsys.readouterr().out)
    assert code == 0
    rows = payload["statistics"]["rows"]
    assert len(rows) == 5
    assert any(row["norm"] == pytest.approx(2.0) for row in rows)
    assert all(row["L_le_M"] and row["M_le_R"] for row in rows)


def test_psi2_rejects_abs(capsys):
    code = main(["--quiet", "psi2", "--psi", "pow:1", "--n", "16", "--E", "16", "--samples", "1000"])
    assert code == 1
    assert "psi" in capsys.readouterr().err.lower()


def test_acceptance_rate_at_n_256(sq_psi):
    spec = BallSpec.solved(sq_psi, 256, 128.0)
    batch = sample_uniform_ball(spec, rng=1, count=2000)
    assert batch.acceptance_rate == pytest.approx(predict_acceptance(spec), rel=0.1)


def test_clt_band_for_exponential(exp_tilt):
    report = clt_exp_experiment(exp_tilt, 0.5, 1.0, [100, 1000, 10_000, 100_000])
    assert report.passed
    assert report.statistics["band_ratio"] <= 3.0


def test_marginal_tv_small_for_gaussian_family(sq_psi):
    report = marginal_tv_experiment(sq_psi, 1.0, 400, 2)
    assert report.passed
    assert report.statistics["tv"] <= 0.05
    assert not report.flags
