"""Young functions: parsing, evaluation, inverses and convexity audits.

Grammar (no whitespace, colon-separated fields):

    pow:<p>                      |t|^p, p >= 1
    coshm1                       cosh(t) - 1
    shiftpow:<p>:<c>             |t-c|^p - |c|^p + p|c|^(p-1) sign(c) t, p > 1
    mix:<a1>:<k1>:<a2>:<k2>...   sum of a_i * builtin_i, a_i > 0
"""

import logging
import re
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from .config import get_config
from .errors import DomainError, NotYoung, ParseError

logger = logging.getLogger(__name__)

GRAMMAR = (
    "pow:<p> (p >= 1) | coshm1 | shiftpow:<p>:<c> (p > 1) | "
    "mix:<a1>:<k1>[:<a2>:<k2>...] (a_i > 0, k_i one of the builtins)"
)

_DECIMAL = re.compile(r"^\d+(\.\d+)?$")
_SIGNED_DECIMAL = re.compile(r"^-?\d+(\.\d+)?$")
_COEFFICIENT = re.compile(r"^\d+(\.\d+)?([eE][-+]?\d+)?$")

# Bisection iteration cap; enough to walk the whole double exponent range
_MAX_BRACKET_STEPS = 2200
_MAX_BISECT_STEPS = 200


class YoungTerm(BaseModel):
    """One weighted builtin inside a Young function."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["pow", "coshm1", "shiftpow"]
    weight: float = 1.0
    p: float = 1.0
    c: float = 0.0

    def value(self, t: np.ndarray) -> np.ndarray:
        if self.kind == "pow":
            out = np.abs(t) ** self.p
        elif self.kind == "coshm1":
            with np.errstate(over="ignore"):
                out = 2.0 * np.sinh(t / 2.0) ** 2
        else:
            c, p = self.c, self.p
            out = np.abs(t - c) ** p - abs(c) ** p + p * abs(c) ** (p - 1) * np.sign(c) * t
            out = np.maximum(out, 0.0)
        return self.weight * out

    def deriv(self, t: np.ndarray) -> np.ndarray:
        """Right derivative."""
        if self.kind == "pow":
            if self.p == 1.0:
                out = np.where(t >= 0, 1.0, -1.0)
            else:
                out = self.p * np.abs(t) ** (self.p - 1) * np.sign(t)
        elif self.kind == "coshm1":
            with np.errstate(over="ignore"):
                out = np.sinh(t)
        else:
            c, p = self.c, self.p
            out = p * np.abs(t - c) ** (p - 1) * np.sign(t - c) + p * abs(c) ** (p - 1) * np.sign(c)
        return self.weight * out


class YoungFunction(BaseModel):
    """
    A validated Young function Psi, a finite conic combination of builtins.

    Values are immutable and safe to share between workers.
    """

    model_config = ConfigDict(frozen=True)

    spec: str
    terms: tuple[YoungTerm, ...]

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        """Evaluate Psi(t); scalars in, scalars out."""
        arr = np.asarray(t, dtype=float)
        out = sum(term.value(arr) for term in self.terms)
        return float(out) if np.ndim(out) == 0 else out

    def deriv(self, t):
        """Right derivative Psi'(t)."""
        arr = np.asarray(t, dtype=float)
        out = sum(term.deriv(arr) for term in self.terms)
        return float(out) if np.ndim(out) == 0 else out

    def inv_pos(self, y):
        return inverse_pos(self, y)

    def inv_neg(self, y):
        return inverse_neg(self, y)

    @property
    def kind(self) -> str:
        return self.spec

    @property
    def is_even(self) -> bool:
        return all(term.kind != "shiftpow" or term.c == 0.0 for term in self.terms)

    @property
    def breakpoints(self) -> list[float]:
        """Points where Psi may fail to be smooth."""
        points = {0.0}
        points.update(term.c for term in self.terms if term.kind == "shiftpow")
        return sorted(points)

    @property
    def power_law(self) -> Optional[tuple[float, float]]:
        """(a, p) when Psi(t) = a|t|^p, else None."""
        if not all(term.kind == "pow" for term in self.terms):
            return None
        exponents = {term.p for term in self.terms}
        if len(exponents) != 1:
            return None
        return sum(term.weight for term in self.terms), exponents.pop()


class ConvexityCheck(BaseModel):
    """Result of a slope convexity test; truthy when it passed."""

    model_config = ConfigDict(frozen=True)

    passed: bool
    witness: Optional[tuple[float, float, float]] = None

    def __bool__(self) -> bool:
        return self.passed


def _parse_builtin(tokens: list[str], i: int) -> tuple[YoungTerm, int]:
    if i >= len(tokens):
        raise ParseError(f"Expected a builtin after position {i}. Grammar: {GRAMMAR}")
    name = tokens[i]

    if name == "coshm1":
        return YoungTerm(kind="coshm1"), i + 1

    if name == "pow":
        if i + 1 >= len(tokens) or not _DECIMAL.match(tokens[i + 1]):
            raise ParseError(f"pow needs a decimal exponent p >= 1. Grammar: {GRAMMAR}")
        p = float(tokens[i + 1])
        if p < 1.0:
            raise ParseError(f"pow exponent must be >= 1, got {p}")
        return YoungTerm(kind="pow", p=p), i + 2

    if name == "shiftpow":
        if i + 2 >= len(tokens) or not _DECIMAL.match(tokens[i + 1]) \
                or not _SIGNED_DECIMAL.match(tokens[i + 2]):
            raise ParseError(f"shiftpow needs <p>:<c>. Grammar: {GRAMMAR}")
        p, c = float(tokens[i + 1]), float(tokens[i + 2])
        if p <= 1.0:
            raise ParseError(f"shiftpow exponent must be > 1, got {p}")
        return YoungTerm(kind="shiftpow", p=p, c=c), i + 3

    raise ParseError(f"Unknown builtin '{name}'. Grammar: {GRAMMAR}")


def _slope_violation(x: np.ndarray, y: np.ndarray, tol: float) -> Optional[int]:
    """Index i of the first triple (i, i+1, i+2) breaking convexity, or None."""
    x1, x2, x3 = x[:-2], x[1:-1], x[2:]
    y1, y2, y3 = y[:-2], y[1:-1], y[2:]
    chord = y1 + (y3 - y1) * (x2 - x1) / (x3 - x1)
    bad = np.nonzero(y2 - chord > tol * (1.0 + np.abs(y2)))[0]
    return int(bad[0]) if bad.size else None


def audit_young(psi: YoungFunction, config: dict = None) -> None:
    """
    Check Psi(0) = 0, positivity and convexity on a symmetric grid.

    Args:
        psi: Function to audit
        config: Optional overrides for the grid and tolerance

    Raises:
        NotYoung: With the first witness point or triple found
    """
    cfg = config or {}
    half_width = cfg.get("audit_half_width", get_config("audit_half_width"))
    points = cfg.get("audit_grid_points", get_config("audit_grid_points"))
    tol = cfg.get("convexity_tol", get_config("convexity_tol"))

    grid = np.linspace(-half_width, half_width, points)
    grid = np.union1d(grid, psi.breakpoints)
    values = psi.eval(grid)

    at_zero = psi.eval(0.0)
    if at_zero != 0.0:
        raise NotYoung(f"{psi.spec}: Psi(0) = {at_zero!r}, expected 0", witness=(0.0, at_zero))

    if not np.all(np.isfinite(values)):
        idx = int(np.nonzero(~np.isfinite(values))[0][0])
        raise NotYoung(f"{psi.spec}: non-finite value at t={grid[idx]!r}", witness=(grid[idx],))

    nonzero = grid != 0.0
    bad = np.nonzero(nonzero & (values <= 0.0))[0]
    if bad.size:
        t = float(grid[bad[0]])
        raise NotYoung(f"{psi.spec}: Psi({t!r}) = {values[bad[0]]!r} is not positive",
                       witness=(t, float(values[bad[0]])))

    idx = _slope_violation(grid, values, tol)
    if idx is not None:
        triple = tuple(float(v) for v in grid[idx:idx + 3])
        raise NotYoung(f"{psi.spec}: convexity fails on triple {triple}", witness=triple)


def parse_young(spec: str, config: dict = None) -> YoungFunction:
    """
    Parse and audit a Young function spec.

    Args:
        spec: Text following the mini-grammar, e.g. "mix:1:pow:4:0.5:pow:1"
        config: Optional audit overrides

    Returns:
        A validated YoungFunction

    Raises:
        ParseError: If the text does not follow the grammar
        NotYoung: If the audit finds a positivity or convexity violation
    """
    if not isinstance(spec, str) or not spec:
        raise ParseError(f"Empty Young function spec. Grammar: {GRAMMAR}")
    if re.search(r"\s", spec):
        raise ParseError(f"Whitespace is not allowed in '{spec}'. Grammar: {GRAMMAR}")

    tokens = spec.split(":")
    terms = []

    if tokens[0] == "mix":
        i = 1
        while i < len(tokens):
            if not _COEFFICIENT.match(tokens[i]):
                raise ParseError(f"Bad mix coefficient '{tokens[i]}'. Grammar: {GRAMMAR}")
            weight = float(tokens[i])
            if weight <= 0.0:
                raise ParseError(f"mix coefficients must be > 0, got {weight}")
            term, i = _parse_builtin(tokens, i + 1)
            terms.append(term.model_copy(update={"weight": weight}))
        if not terms:
            raise ParseError(f"mix needs at least one <a>:<kind> pair. Grammar: {GRAMMAR}")
    else:
        term, i = _parse_builtin(tokens, 0)
        if i != len(tokens):
            raise ParseError(f"Trailing fields in '{spec}'. Grammar: {GRAMMAR}")
        terms.append(term)

    psi = YoungFunction(spec=spec, terms=tuple(terms))
    audit_young(psi, config)
    logger.debug("parsed %s into %d term(s)", spec, len(terms))
    return psi


def _closed_form_inverse(psi: YoungFunction, y: np.ndarray) -> Optional[np.ndarray]:
    law = psi.power_law
    if law is not None:
        a, p = law
        return (y / a) ** (1.0 / p)
    if all(term.kind == "coshm1" for term in psi.terms):
        a = sum(term.weight for term in psi.terms)
        return 2.0 * np.arcsinh(np.sqrt(y / (2.0 * a)))
    return None


def _bisect_inverse(psi: YoungFunction, y: np.ndarray, direction: float) -> np.ndarray:
    """Solve Psi(direction * t) = y for t >= 0, elementwise."""
    y = np.asarray(y, dtype=float)
    lo = np.zeros_like(y)
    hi = np.ones_like(y)

    # Scale the bracket by doubling / halving from 1
    for _ in range(_MAX_BRACKET_STEPS):
        small = psi.eval(direction * hi) < y
        if not np.any(small):
            break
        hi = np.where(small, hi * 2.0, hi)
    for _ in range(_MAX_BRACKET_STEPS):
        half = hi / 2.0
        big = (psi.eval(direction * half) >= y) & (half > 0.0) & (y > 0.0)
        if not np.any(big):
            break
        hi = np.where(big, half, hi)
    lo = np.where(y > 0.0, hi / 2.0, 0.0)

    for _ in range(_MAX_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        done = (mid <= lo) | (mid >= hi)
        if np.all(done):
            break
        below = psi.eval(direction * mid) < y
        lo = np.where(below & ~done, mid, lo)
        hi = np.where(~below & ~done, mid, hi)

    # Pick the endpoint with the smaller residual
    res_lo = np.abs(psi.eval(direction * lo) - y)
    res_hi = np.abs(psi.eval(direction * hi) - y)
    out = np.where(res_lo <= res_hi, lo, hi)
    return np.where(y == 0.0, 0.0, out)


def inverse_pos(psi: YoungFunction, y):
    """
    Inverse of Psi restricted to [0, inf).

    Uses the closed form for pure power and cosh kinds, otherwise a
    safeguarded bisection on [0, t_hi] with t_hi found by doubling.

    Args:
        psi: Young function
        y: Level(s) >= 0

    Returns:
        t >= 0 with Psi(t) = y (scalar in, scalar out)
    """
    arr = np.asarray(y, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError("inverse_pos needs y >= 0")
    out = _closed_form_inverse(psi, arr)
    if out is None:
        out = _bisect_inverse(psi, arr, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def inverse_neg(psi: YoungFunction, y):
    """Inverse of Psi restricted to (-inf, 0]; returns t <= 0."""
    arr = np.asarray(y, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError("inverse_neg needs y >= 0")
    if psi.is_even:
        out = -np.asarray(inverse_pos(psi, arr))
    else:
        out = -_bisect_inverse(psi, arr, -1.0)
    return float(out) if np.ndim(out) == 0 else out


def sublevel_length(psi: YoungFunction, s):
    """Lebesgue measure of {t : Psi(t) <= s}."""
    arr = np.asarray(s, dtype=float)
    out = np.asarray(inverse_pos(psi, arr)) - np.asarray(inverse_neg(psi, arr))
    return float(out) if np.ndim(out) == 0 else out


def psi2_test(psi: YoungFunction, grid=None, config: dict = None) -> ConvexityCheck:
    """
    Check that u -> Psi(sqrt(u)) is convex on a grid of positive reals.

    Args:
        psi: Even Young function
        grid: Positive, increasing points (default: 1000 points in [1e-3, 100])
        config: Optional tolerance override

    Returns:
        ConvexityCheck with the violating triple (in u) on failure

    Raises:
        DomainError: If psi is not even
    """
    if not psi.is_even:
        raise DomainError(f"{psi.spec} is not even; the psi_2 test needs an even function")
    tol = (config or {}).get("convexity_tol", get_config("convexity_tol"))
    u = np.linspace(1e-3, 100.0, 1000) if grid is None else np.sort(np.asarray(grid, dtype=float))
    if np.any(u <= 0.0):
        raise DomainError("psi2_test grid must be positive")

    idx = _slope_violation(u, psi.eval(np.sqrt(u)), tol)
    if idx is None:
        return ConvexityCheck(passed=True)
    return ConvexityCheck(passed=False, witness=tuple(float(v) for v in u[idx:idx + 3]))
