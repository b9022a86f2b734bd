import math
import warnings

import numpy as np
import pytest

from orlicz_lab.errors import BracketFailure, DomainError
from orlicz_lab.tilt import (
    build_tilted,
    char_modulus,
    char_modulus_many,
    estimate_cramer,
    sample_1d,
    solve_lambda,
    tilted_mean,
)
from orlicz_lab.young import parse_young


def test_gaussian_moments(gauss_tilt):
    assert gauss_tilt.log_z == pytest.approx(0.5 * math.log(math.pi), abs=1e-10)
    assert gauss_tilt.m == pytest.approx(0.5, rel=1e-10)
    assert gauss_tilt.sigma2 == pytest.approx(0.5, rel=1e-9)


def test_exponential_moments(abs_psi):
    tm = build_tilted(abs_psi, 2.0)
    assert tm.log_z == pytest.approx(0.0, abs=1e-10)
    assert tm.m == pytest.approx(0.5, rel=1e-10)
    assert tm.sigma2 == pytest.approx(0.25, rel=1e-9)


def test_quartic_mean(quartic_psi):
    assert build_tilted(quartic_psi, 1.0).m == pytest.approx(0.25, rel=1e-9)


def test_cosh_build_is_warning_free():
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        tm = build_tilted(parse_young("coshm1"), 1.0)
    assert math.isfinite(tm.log_z)
    assert np.all(np.isfinite(tm.cdf_t))


def test_tilted_mean_matches_build(quartic_psi):
    log_z, m = tilted_mean(quartic_psi, 1.3)
    tm = build_tilted(quartic_psi, 1.3)
    assert log_z == tm.log_z
    assert m == tm.m


def test_measure_invariants(exp_tilt, gauss_tilt):
    for tm in (exp_tilt, gauss_tilt):
        assert tm.sigma2 > 0.0
        assert tm.nu3 >= 1.0
        assert tm.cdf_u[0] == pytest.approx(0.0, abs=1e-10)
        assert tm.cdf_u[-1] == pytest.approx(1.0, abs=1e-10)
        assert np.all(np.diff(tm.cdf_u) > 0.0)
        assert tm.cdf_t.size >= 4096


def test_exponential_third_moment(exp_tilt):
    # Y = Exp(1) - 1: E|Y|^3 = 12/e - 2
    assert exp_tilt.nu3 == pytest.approx(12.0 / math.e - 2.0, rel=1e-6)


def test_doubled_order_consistency(sq_psi, gauss_tilt):
    refined = build_tilted(sq_psi, 1.0, {"quad_order": 32})
    assert abs(refined.m - gauss_tilt.m) <= 1e-9 * (1.0 + gauss_tilt.m)


def test_mean_decreases_in_lambda():
    psi = parse_young("coshm1")
    means = [build_tilted(psi, lam).m for lam in (0.25, 0.5, 1.0, 2.0, 4.0)]
    assert all(a > b for a, b in zip(means, means[1:]))


def test_scaling_law(sq_psi, gauss_tilt):
    # Psi(2t) = 4 t^2: Z scales by 1/2, m is unchanged
    scaled = build_tilted(parse_young("mix:4:pow:2"), 1.0)
    assert scaled.log_z == pytest.approx(gauss_tilt.log_z - math.log(2.0), abs=1e-10)
    assert scaled.m == pytest.approx(gauss_tilt.m, rel=1e-10)


@pytest.mark.parametrize("spec, target, lam", [("pow:1", 0.5, 2.0), ("pow:2", 0.5, 1.0)])
def test_solve_lambda_closed_forms(spec, target, lam):
    tm = solve_lambda(parse_young(spec), target)
    assert tm.lam == pytest.approx(lam, rel=1e-9)
    assert abs(tm.m - target) <= 1e-9 * target


def test_solve_lambda_cosh_fixed_point():
    psi = parse_young("coshm1")
    tm = solve_lambda(psi, 1.0)
    assert tm.m == pytest.approx(1.0, rel=1e-9)
    assert build_tilted(psi, tm.lam).m == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("spec", ["mix:1:pow:4:0.5:pow:1", "shiftpow:3:0.5", "coshm1"])
def test_round_trip(spec):
    psi = parse_young(spec)
    m = build_tilted(psi, 1.7).m
    assert solve_lambda(psi, m).lam == pytest.approx(1.7, rel=1e-7)


def test_bracket_failure(abs_psi):
    with pytest.raises(BracketFailure):
        solve_lambda(abs_psi, 0.01, {"lambda_max": 4.0})


def test_domain_errors(abs_psi):
    with pytest.raises(DomainError):
        build_tilted(abs_psi, 0.0)
    with pytest.raises(DomainError):
        solve_lambda(abs_psi, -1.0)


def test_sample_means(gauss_tilt, abs_psi, sq_psi):
    x = sample_1d(gauss_tilt, 7, 100_000)
    assert sq_psi.eval(x).mean() == pytest.approx(0.5, abs=0.01)
    y = sample_1d(build_tilted(abs_psi, 2.0), 7, 100_000)
    assert np.abs(y).mean() == pytest.approx(0.25, abs=0.01)


def test_sample_reproducible(exp_tilt):
    assert sample_1d(exp_tilt, 11, 1)[0] == sample_1d(exp_tilt, 11, 1)[0]
    assert np.array_equal(sample_1d(exp_tilt, 3, 50), sample_1d(exp_tilt, np.random.default_rng(3), 50))


def test_sample_count_must_be_positive(exp_tilt):
    with pytest.raises(DomainError):
        sample_1d(exp_tilt, 0, 0)


def test_char_modulus_at_zero(exp_tilt):
    assert char_modulus(exp_tilt, 0.0) == 1.0


def test_char_modulus_symmetric(gauss_tilt):
    assert char_modulus(gauss_tilt, -1.3) == char_modulus(gauss_tilt, 1.3)


def test_char_modulus_exponential(exp_tilt):
    # Y = Exp(1) - 1: |phi(t)| = (1 + t^2)^{-1/2}
    ts = np.array([0.5, 1.0, 3.0])
    assert np.allclose(char_modulus_many(exp_tilt, ts), 1.0 / np.sqrt(1.0 + ts ** 2), atol=1e-8)


def test_char_modulus_gaussian_refined(sq_psi, gauss_tilt):
    refined = build_tilted(sq_psi, 1.0, {"quad_order": 32})
    assert char_modulus(gauss_tilt, 1.0) == pytest.approx(
        char_modulus(refined, 1.0, {"quad_order": 32}), abs=1e-8)
    # Psi(X) ~ Gamma(1/2, 1): |phi_Y(t)| = (1 + 2 t^2)^{-1/4} with sigma^2 = 1/2
    assert char_modulus(gauss_tilt, 1.0) == pytest.approx(3.0 ** -0.25, abs=1e-8)


def test_char_modulus_decays(gauss_tilt):
    assert char_modulus(gauss_tilt, 40.0) < 0.5


def test_cramer_exponential(exp_tilt):
    params = estimate_cramer(exp_tilt, 1.0, 10.0)
    assert params.epsilon == pytest.approx(1.0 - 1.0 / math.sqrt(2.0), abs=1e-7)
    assert params.t_at_max == pytest.approx(1.0)


def test_cramer_gaussian(gauss_tilt):
    params = estimate_cramer(gauss_tilt, 1.0, 10.0)
    assert 0.0 < params.epsilon <= 1.0


def test_cramer_needs_ordered_grid(exp_tilt):
    with pytest.raises(DomainError):
        estimate_cramer(exp_tilt, 2.0, 1.0)
