"""
Command-line front end.

Usage:
    python run_lab.py volume --psi pow:1 --n 100 --E 100 --method asymptotic
    python run_lab.py solve-lambda --psi pow:2 --m 0.5
    python run_lab.py boundary --psi pow:1 --n 200 --E 200 --samples 100000 --seed 0
"""

import argparse
import json
import logging
import math
import sys
from typing import Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .config import get_config
from .errors import NotYoung, OrliczError, ParseError
from .lab import (
    boundary_exp_test,
    clt_exp_experiment,
    kls_moment_norm,
    level_bounds,
    level_interval,
    level_membership,
    marginal_tv_experiment,
    psi2_laplace_check,
)
from .reports import SCHEMA_VERSION, ExperimentReport, Stopwatch, VolumeReport, finite_or_none
from .sampler import predict_acceptance, sample_uniform_ball
from .tilt import build_tilted, solve_lambda
from .volume import BallSpec, log_volume
from .young import GRAMMAR, parse_young, psi2_test

logger = logging.getLogger(__name__)

COMMANDS = ("volume", "solve-lambda", "sample", "boundary", "marginals", "level", "clt", "psi2", "audit")
LEVEL_COMMANDS = {"volume", "sample", "boundary", "psi2"}

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2
DEFAULT_SAMPLES = 100_000


class RunConfig(BaseModel):
    """One CLI invocation. The level is given by exactly one of E, m or alpha (with lambda)."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    command: Literal["volume", "solve-lambda", "sample", "boundary", "marginals",
                     "level", "clt", "psi2", "audit"]
    psi_spec: str = "pow:1"
    n: Optional[int] = Field(default=None, ge=1)
    E: Optional[float] = Field(default=None, gt=0.0)
    m: Optional[float] = Field(default=None, gt=0.0)
    alpha: Optional[float] = None
    lam: Optional[float] = Field(default=None, gt=0.0, alias="lambda")
    method: Literal["asymptotic", "mc", "convolution", "closed_form"] = "asymptotic"
    samples: Optional[int] = Field(default=None, ge=1)
    seed: int = 0
    workers: int = Field(default=1, ge=1)
    output: Literal["json", "csv"] = "json"
    k: int = Field(default=1, ge=1)
    ell: float = Field(default=0.5, gt=0.0)
    n_list: list[int] = Field(default_factory=lambda: [100, 1000, 10000])
    eps: float = Field(default=0.2, gt=0.0, lt=1.0)
    directions: int = Field(default=5, ge=1)
    strict: bool = True

    @model_validator(mode="after")
    def _check_level(self):
        if self.command in LEVEL_COMMANDS:
            if self.n is None:
                raise ValueError(f"{self.command} needs --n")
            given = [name for name in ("E", "m", "alpha") if getattr(self, name) is not None]
            if len(given) != 1:
                raise ValueError("Give exactly one of --E, --m or --alpha (with --lambda)")
            if self.alpha is not None and self.lam is None:
                raise ValueError("--alpha needs --lambda")
            if self.m is not None and self.lam is not None:
                raise ValueError("--m solves lambda; drop --lambda or use --E")
        if self.command in {"marginals", "level"} and self.n is None:
            raise ValueError(f"{self.command} needs --n")
        if self.command == "marginals" and (self.E is not None or self.m is not None):
            raise ValueError("marginals sets its level with --alpha and --lambda; drop --E / --m")
        if self.command == "solve-lambda" and self.m is None and (self.E is None or self.n is None):
            raise ValueError("solve-lambda needs --m, or --E with --n")
        return self

    @property
    def sample_count(self) -> int:
        return self.samples or DEFAULT_SAMPLES


class LabArgumentParser(argparse.ArgumentParser):
    """Prints the usage and the Young function grammar, then exits 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}\nYoung function grammar: {GRAMMAR}", file=sys.stderr)
        sys.exit(EXIT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    parser = LabArgumentParser(
        prog="run_lab.py",
        description="Orlicz-ball volumes, uniform sampling and limit-law experiments",
    )
    parser.add_argument("command", choices=COMMANDS, help="Operation to run")
    parser.add_argument("--psi", dest="psi_spec", type=str, default="pow:1",
                        help=f"Young function ({GRAMMAR})")
    parser.add_argument("--n", type=int, default=None, help="Dimension")
    parser.add_argument("--E", type=float, default=None, help="Level E of the ball")
    parser.add_argument("--m", type=float, default=None, help="Mean per coordinate; E = m n")
    parser.add_argument("--alpha", type=float, default=None,
                        help="Standardized offset; E = m n + alpha sigma sqrt(n) (needs --lambda)")
    parser.add_argument("--lambda", dest="lam", type=float, default=None, help="Tilt lambda")
    parser.add_argument("--method", type=str, default="asymptotic",
                        choices=["asymptotic", "mc", "convolution", "closed_form"],
                        help="Volume method (default: asymptotic)")
    parser.add_argument("--samples", type=int, default=None,
                        help=f"Monte Carlo samples / points (default: {DEFAULT_SAMPLES}; "
                             "clt uses only the exact oracle unless given)")
    parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    parser.add_argument("--workers", type=int, default=get_config("workers"),
                        help="Worker shards; part of the reproducibility contract")
    parser.add_argument("--output", type=str, default="json", choices=["json", "csv"],
                        help="Output format (default: json)")
    parser.add_argument("--k", type=int, default=1, help="Marginal dimension (marginals)")
    parser.add_argument("--ell", type=float, default=0.5, help="Tilt strength l (clt)")
    parser.add_argument("--n-list", type=str, default="100,1000,10000",
                        help="Comma-separated dimensions (clt)")
    parser.add_argument("--eps", type=float, default=0.2, help="Interval shrink factor (level)")
    parser.add_argument("--directions", type=int, default=5, help="Number of directions (psi2)")
    parser.add_argument("--no-strict", dest="strict", action="store_false",
                        help="Flag dimensions below the validity floor instead of failing (clt)")
    parser.add_argument("--quiet", action="store_true", help="No progress line on stderr")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    fields = {key: value for key, value in vars(args).items() if key not in {"quiet", "verbose"}}
    fields["n_list"] = [int(part) for part in args.n_list.split(",") if part]
    return RunConfig(**fields)


def _level_spec(config: RunConfig, psi) -> BallSpec:
    """Resolve E and the tilt from the level specifier."""
    n = config.n
    if config.alpha is not None:
        return BallSpec.at_alpha(build_tilted(psi, config.lam), n, config.alpha)
    if config.m is not None:
        return BallSpec(psi=psi, n=n, E=config.m * n, tm=solve_lambda(psi, config.m))
    if config.lam is not None:
        return BallSpec(psi=psi, n=n, E=config.E, tm=build_tilted(psi, config.lam))
    return BallSpec.solved(psi, n, config.E)


def psi2_directions(n: int, count: int, seed: int) -> list[np.ndarray]:
    """e_1, then (2/sqrt n)(1,...,1), then unit directions drawn from the seed."""
    directions = [np.eye(n)[0], np.full(n, 2.0 / math.sqrt(n))]
    rng = np.random.default_rng([seed, n])
    while len(directions) < count:
        a = rng.standard_normal(n)
        directions.append(a / np.linalg.norm(a))
    return directions[:count]


def _audit(config: RunConfig) -> dict:
    try:
        psi = parse_young(config.psi_spec)
    except NotYoung as e:
        return {"checks": {"young": False, "witness": list(e.witness or [])}, "pass": False,
                "message": str(e)}

    tm = build_tilted(psi, 1.0)
    refined = build_tilted(psi, 1.0, {"quad_order": 2 * get_config("quad_order")})
    round_trip = solve_lambda(psi, tm.m)
    checks = {
        "young": True,
        "quadrature_consistent": abs(refined.m - tm.m) <= 1e-9 * (1.0 + tm.m),
        "round_trip": abs(round_trip.lam - 1.0) <= 1e-7,
        "nu3_at_least_one": tm.nu3 >= 1.0 - 1e-12,
        "cdf_table": bool(abs(tm.cdf_u[0]) <= 1e-10 and abs(tm.cdf_u[-1] - 1.0) <= 1e-10
                          and np.all(np.diff(tm.cdf_u) > 0.0)),
    }
    info = {"psi2": bool(psi.is_even and psi2_test(psi)), "log_z_at_1": tm.log_z,
            "m_at_1": tm.m, "sigma2_at_1": tm.sigma2}
    if abs(tm.log_z) <= 1e-9:
        info["kls_moment_norm"] = kls_moment_norm(psi)
    return {"checks": checks, "info": info, "pass": all(checks.values())}


def run(config: RunConfig) -> tuple[int, dict, Optional[pd.DataFrame]]:
    """
    Dispatch one command.

    Returns:
        (exit code, JSON payload, optional CSV frame); the code is 0 on
        success and 2 when an experiment or the audit fails
    """
    frame = None
    with Stopwatch() as watch:
        if config.command == "audit":
            payload = {"command": "audit", "psi": config.psi_spec, **_audit(config)}
            passed = payload["pass"]
        else:
            psi = parse_young(config.psi_spec)
            if config.command == "solve-lambda":
                payload, passed = _solve_lambda(config, psi), True
            elif config.command == "volume":
                payload, passed = _volume(config, psi), True
            elif config.command == "sample":
                payload, frame = _sample(config, psi)
                passed = True
            else:
                report = _experiment(config, psi)
                payload, passed = report.payload(), report.passed

    payload = {"schema_version": SCHEMA_VERSION, **payload, "duration_ms": watch.ms}
    return (EXIT_OK if passed else EXIT_FAILED), finite_or_none(payload), frame


def _solve_lambda(config: RunConfig, psi) -> dict:
    target = config.m if config.m is not None else config.E / config.n
    return {"command": "solve-lambda", **solve_lambda(psi, target).summary()}


def _volume(config: RunConfig, psi) -> dict:
    spec = _level_spec(config, psi)
    result = log_volume(spec, config.method, rng=config.seed, samples=config.sample_count,
                        workers=config.workers)
    report = VolumeReport(
        psi=psi.spec, n=spec.n, E=spec.E, lam=spec.tm.lam if spec.tm else None,
        alpha=spec.alpha, method=result.method, log_volume=result.log_value,
        volume=result.value, diagnostics=result.diagnostics, seed=config.seed,
        workers=config.workers,
    )
    return report.payload()


def _sample(config: RunConfig, psi) -> tuple[dict, pd.DataFrame]:
    spec = _level_spec(config, psi)
    batch = sample_uniform_ball(spec, rng=config.seed, count=config.sample_count, workers=config.workers)
    solved = spec.with_tilt(solve_lambda(psi, spec.E / spec.n))
    payload = {
        "command": "sample", "psi": psi.spec, "n": spec.n, "E": spec.E, "lambda": batch.lam,
        "count": batch.count, "proposals_used": batch.proposals_used,
        "acceptance_rate": batch.acceptance_rate,
        "predicted_acceptance": predict_acceptance(solved),
        "seed": config.seed, "workers": batch.workers, "points": batch.points.tolist(),
    }
    return payload, batch.to_frame()


def _experiment(config: RunConfig, psi) -> ExperimentReport:
    if config.command == "boundary":
        return boundary_exp_test(_level_spec(config, psi), rng=config.seed,
                                 samples=config.sample_count, workers=config.workers)

    if config.command == "marginals":
        return marginal_tv_experiment(psi, config.lam or 1.0, config.n, config.k, rng=config.seed,
                                      samples=config.sample_count, alpha=config.alpha or 0.0,
                                      workers=config.workers)

    if config.command == "clt":
        tm = build_tilted(psi, config.lam or 1.0)
        return clt_exp_experiment(tm, config.ell, config.alpha or 0.0, config.n_list,
                                  rng=config.seed, samples=config.samples or 0, strict=config.strict)

    if config.command == "psi2":
        spec = _level_spec(config, psi)
        return psi2_laplace_check(spec, rng=config.seed,
                                  directions=psi2_directions(spec.n, config.directions, config.seed),
                                  samples=config.sample_count, workers=config.workers)

    return _level(config, psi)


def _level(config: RunConfig, psi) -> ExperimentReport:
    with Stopwatch() as watch:
        interval = level_interval(psi, config.n, config.eps)
        grid = [level_membership(psi, config.n, E) for E in interval.grid()]
        bounds = level_bounds(psi, config.n)
        statistics = {
            "m1": interval.m1, "sigma1": interval.sigma1,
            "lo": interval.lo, "hi": interval.hi,
            "grid": [{"E": item.E, "member": item.member, "log_margin": item.log_margin}
                     for item in grid],
            "level_lo": bounds.lo, "level_hi": bounds.hi,
            "level_length": bounds.length, "length_bound": bounds.length_bound,
        }
        if config.E is not None:
            probe = level_membership(psi, config.n, config.E)
            statistics["probe"] = {"E": probe.E, "member": probe.member, "log_margin": probe.log_margin}
    return ExperimentReport(
        name="level",
        params={"psi": psi.spec, "n": config.n, "eps": config.eps},
        statistics=statistics,
        thresholds={"log_margin": 0.0},
        passed=all(item.member for item in grid),
        duration_ms=watch.ms,
    )


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Not serializable: {type(value).__name__}")


def to_frame(payload: dict) -> pd.DataFrame:
    """Tidy table: one row per measurement for experiments with rows, else one row."""
    statistics = payload.get("statistics")
    rows = statistics.get("rows") if isinstance(statistics, dict) else None
    if rows:
        frame = pd.DataFrame(rows)
        frame.insert(0, "name", payload.get("name"))
        return frame
    flat = {key: value for key, value in payload.items() if not isinstance(value, (dict, list))}
    for key in ("statistics", "diagnostics", "checks", "info", "params"):
        for inner, value in (payload.get(key) or {}).items():
            if not isinstance(value, (dict, list)):
                flat[f"{key}.{inner}"] = value
    return pd.DataFrame([flat])


def emit(payload: dict, output: str, frame: pd.DataFrame = None, stream=None) -> None:
    """Write the payload as sorted JSON, or as CSV with CRLF line ends."""
    stream = stream or sys.stdout
    if output == "csv":
        (frame if frame is not None else to_frame(payload)).to_csv(
            stream, index=False, lineterminator="\r\n")
    else:
        stream.write(json.dumps(payload, sort_keys=True, indent=2, allow_nan=False,
                                default=_json_default) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        config = config_from_args(args)
        logger.debug("Run config: %s", config.model_dump(by_alias=True))
        code, payload, frame = run(config)
    except (OrliczError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        if isinstance(e, (ParseError, ValidationError)):
            print(f"Young function grammar: {GRAMMAR}", file=sys.stderr)
        return EXIT_ERROR

    emit(payload, config.output, frame)
    if not args.quiet:
        status = "ok" if code == EXIT_OK else "FAILED"
        print(f"orlicz-lab {config.command} psi={config.psi_spec}: {status} "
              f"in {payload['duration_ms']:.0f} ms", file=sys.stderr)
    return code
