"""Configuration settings for orlicz-lab."""

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# Base directory of the package
BASE_DIR = Path(__file__).parent

# Default configuration
DEFAULT_CONFIG = {
    # Quadrature (composite Gauss-Legendre panels)
    "quad_rel_tol": 1e-11,
    "quad_abs_tol": 1e-15,
    "quad_order": 16,
    "quad_min_panels": 64,
    "quad_max_panels": 8192,
    "tail_log_cutoff": 46.0,  # integrand below e^-46 ~ 1e-20 is dropped

    # Inverse-CDF table
    "cdf_panels": 2048,  # per branch
    "cdf_log_cutoff": 36.0,

    # Young audit
    "audit_grid_points": 1001,
    "audit_half_width": 50.0,
    "convexity_tol": 1e-10,

    # Root finding for lambda
    "lambda_min": 1e-12,
    "lambda_max": 1e12,
    "lambda_rel_tol": 1e-12,

    # Sampling
    "chunk_values": 2_000_000,  # proposal coordinates drawn per chunk
    "budget_factor": 1e4,
    "min_accepted": 30,
    "workers": 1,

    # Convolution oracle
    "convolution_cells": 4000,
    "convolution_max_dim": 12,
    "grid_tolerance": 1e-2,

    # Lab thresholds
    "ks_bias_coef": 0.65,
    "ks_noise_coef": 1.36,
    "clt_band": 3.0,
    "clt_bound": 10.0,
    "max_rel_se": 0.05,
    "mc_sigmas": 3.0,
    "tv_threshold": 0.05,
    "tv_histogram_bins": 20,
    "cramer_delta": 1.0,
    "cramer_t_max": 10.0,

    # Output
    "schema_path": str(BASE_DIR / "schema" / "report_schema.json"),
}

# Environment overrides
if os.environ.get("ORLICZ_WORKERS"):
    DEFAULT_CONFIG["workers"] = int(os.environ["ORLICZ_WORKERS"])
if os.environ.get("ORLICZ_CHUNK_VALUES"):
    DEFAULT_CONFIG["chunk_values"] = int(os.environ["ORLICZ_CHUNK_VALUES"])


def get_config(key: str, default=None):
    """Get a configuration value."""
    return DEFAULT_CONFIG.get(key, default)


def merged_config(config: dict = None) -> dict:
    """Return the defaults with `config` overrides applied."""
    return {**DEFAULT_CONFIG, **(config or {})}
