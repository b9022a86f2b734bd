"""Report models and the frozen JSON field list."""

import json
import math
import time
from functools import lru_cache
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field

from .config import get_config

SCHEMA_VERSION = 1


class ExperimentReport(BaseModel):
    """
    Outcome of one lab experiment.

    `passed` is serialized as "pass" and is decided only by the values in
    `statistics` compared against `thresholds`.
    """

    model_config = ConfigDict(populate_by_name=True)

    name: str
    params: dict[str, Any] = Field(default_factory=dict)
    statistics: dict[str, Any] = Field(default_factory=dict)
    thresholds: dict[str, float] = Field(default_factory=dict)
    passed: bool = Field(alias="pass")
    flags: list[str] = Field(default_factory=list)
    sample_size: int = 0
    seed: Optional[int] = None
    workers: int = 1
    duration_ms: float = 0.0

    def payload(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **self.model_dump(by_alias=True)}


class VolumeReport(BaseModel):
    """Output of the `volume` command."""

    model_config = ConfigDict(populate_by_name=True)

    command: str = "volume"
    psi: str
    n: int
    E: float
    lam: Optional[float] = Field(default=None, alias="lambda")
    alpha: Optional[float] = None
    method: str
    log_volume: float
    volume: Optional[float] = None
    diagnostics: dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    workers: int = 1
    duration_ms: float = 0.0

    def payload(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **self.model_dump(by_alias=True)}


def finite_or_none(value):
    """Replace non-finite floats by None, recursively, so the JSON stays strict."""
    if isinstance(value, dict):
        return {key: finite_or_none(inner) for key, inner in value.items()}
    if isinstance(value, (list, tuple)):
        return [finite_or_none(inner) for inner in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class Stopwatch:
    """Context manager measuring wall time in milliseconds."""

    def __enter__(self):
        self._start = time.perf_counter()
        self.ms = 0.0
        return self

    def __exit__(self, *exc):
        self.ms = (time.perf_counter() - self._start) * 1000.0
        return False


@lru_cache(maxsize=1)
def load_schema() -> dict:
    """The shipped schema: required top-level keys per payload kind."""
    with open(get_config("schema_path"), "r") as f:
        return json.load(f)


def missing_fields(kind: str, payload: dict) -> list[str]:
    """Schema keys absent from a payload (empty when it conforms)."""
    return [key for key in load_schema()["kinds"][kind] if key not in payload]
