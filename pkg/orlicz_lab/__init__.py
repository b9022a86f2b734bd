"""Orlicz Lab - Orlicz-ball volumes, uniform sampling and limit-law experiments."""

from .config import DEFAULT_CONFIG, get_config
from .errors import OrliczError
from .lab import (
    boundary_exp_test,
    clt_exp_experiment,
    kls_moment_norm,
    level_bounds,
    level_interval,
    level_membership,
    marginal_tv_experiment,
    nguyen_wang_check,
    psi2_laplace_check,
)
from .reports import ExperimentReport, VolumeReport
from .sampler import SampleBatch, predict_acceptance, sample_uniform_ball
from .tilt import TiltedMeasure, build_tilted, char_modulus, estimate_cramer, solve_lambda
from .volume import (
    BallSpec,
    LogVolume,
    exp_gaussian_closed_form,
    log_volume,
    log_volume_asymptotic,
    log_volume_convolution,
    log_volume_mc,
    mills_ratio_bounds,
    section_function,
)
from .young import YoungFunction, parse_young, psi2_test

__all__ = [
    "DEFAULT_CONFIG",
    "get_config",
    "OrliczError",
    "YoungFunction",
    "parse_young",
    "psi2_test",
    "TiltedMeasure",
    "build_tilted",
    "solve_lambda",
    "char_modulus",
    "estimate_cramer",
    "BallSpec",
    "LogVolume",
    "log_volume",
    "log_volume_asymptotic",
    "log_volume_convolution",
    "log_volume_mc",
    "exp_gaussian_closed_form",
    "mills_ratio_bounds",
    "section_function",
    "SampleBatch",
    "sample_uniform_ball",
    "predict_acceptance",
    "ExperimentReport",
    "VolumeReport",
    "boundary_exp_test",
    "marginal_tv_experiment",
    "clt_exp_experiment",
    "level_interval",
    "level_membership",
    "level_bounds",
    "nguyen_wang_check",
    "kls_moment_norm",
    "psi2_laplace_check",
]
