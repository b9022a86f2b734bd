import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orlicz_lab.errors import DomainError, NotYoung, ParseError
from orlicz_lab.young import (
    YoungFunction,
    YoungTerm,
    audit_young,
    inverse_neg,
    inverse_pos,
    parse_young,
    psi2_test,
    sublevel_length,
)


def test_parse_builtins():
    assert parse_young("pow:2").eval(3.0) == 9.0
    assert parse_young("pow:1").eval(-2.5) == 2.5
    assert parse_young("coshm1").eval(1.0) == pytest.approx(math.cosh(1.0) - 1.0, rel=1e-14)


def test_parse_mix_evaluates_conic_combination():
    psi = parse_young("mix:1:pow:4:0.5:pow:1")
    assert psi.eval(1.0) == pytest.approx(1.5)
    assert psi.eval(-2.0) == pytest.approx(16.0 + 1.0)
    assert len(psi.terms) == 2


@pytest.mark.parametrize("spec", [
    "", "pow", "pow:0.5", "pow:-2", "pow 2", "pow:2:3", "cosh", "mix", "mix:",
    "mix:-1:pow:1", "mix:1", "mix:1:pow", "shiftpow:1:0", "shiftpow:2",
])
def test_parse_rejects_malformed(spec):
    with pytest.raises(ParseError):
        parse_young(spec)


def test_parse_error_mentions_grammar():
    with pytest.raises(ParseError, match="Grammar"):
        parse_young("foo:1")


def test_audit_reports_witness():
    bad = YoungFunction(spec="neg", terms=(YoungTerm(kind="pow", p=2.0, weight=-1.0),))
    with pytest.raises(NotYoung) as info:
        audit_young(bad)
    assert info.value.witness is not None


def test_shiftpow_removes_tangent():
    # |t-1|^2 - 1 + 2t = t^2
    psi = parse_young("shiftpow:2:1")
    assert psi.eval(3.0) == pytest.approx(9.0)
    assert psi.eval(0.0) == 0.0
    assert not psi.is_even
    assert 1.0 in psi.breakpoints


def test_right_derivative_at_kink(abs_psi):
    assert abs_psi.deriv(0.0) == 1.0
    assert abs_psi.deriv(-1.0) == -1.0


@pytest.mark.parametrize("spec, y, expected", [
    ("pow:2", 4.0, 2.0),
    ("pow:1", 0.0, 0.0),
    ("mix:1:pow:4:0.5:pow:1", 1.5, 1.0),
    ("coshm1", math.cosh(2.0) - 1.0, 2.0),
])
def test_inverse_pos(spec, y, expected):
    assert inverse_pos(parse_young(spec), y) == pytest.approx(expected, rel=1e-10, abs=1e-15)


@pytest.mark.parametrize("spec", ["pow:1.5", "coshm1", "mix:1:pow:4:0.5:pow:1", "shiftpow:2:1"])
def test_inverse_pos_round_trip(spec):
    psi = parse_young(spec)
    y = np.linspace(0.0, 1e3, 201)
    t = np.asarray(inverse_pos(psi, y))
    assert np.all(np.abs(psi.eval(t) - y) <= 1e-12 * (1.0 + y))


def test_inverse_neg_asymmetric():
    psi = parse_young("shiftpow:2:1")
    assert inverse_neg(psi, 4.0) == pytest.approx(-2.0, rel=1e-10)
    assert inverse_pos(psi, 4.0) == pytest.approx(2.0, rel=1e-10)


def test_inverse_methods_and_call(quartic_psi):
    y = 5.0
    t = quartic_psi.inv_pos(y)
    assert quartic_psi(t) == pytest.approx(y, rel=1e-12)
    assert quartic_psi.inv_neg(y) == pytest.approx(-t, rel=1e-12)
    assert quartic_psi.kind == quartic_psi.spec


def test_inverse_rejects_negative_level(sq_psi):
    with pytest.raises(DomainError):
        inverse_pos(sq_psi, -1.0)


def test_sublevel_length(abs_psi, sq_psi):
    assert sublevel_length(abs_psi, 3.0) == pytest.approx(6.0)
    assert sublevel_length(sq_psi, 4.0) == pytest.approx(4.0)


@pytest.mark.parametrize("p, expected", [(1, False), (1.5, False), (2, True), (3, True), (4, True)])
def test_psi2_test_power(p, expected):
    assert bool(psi2_test(parse_young(f"pow:{p}"))) is expected


def test_psi2_test_failure_has_triple():
    check = psi2_test(parse_young("pow:1"))
    assert not check
    assert len(check.witness) == 3


def test_psi2_test_cosh_passes():
    assert psi2_test(parse_young("coshm1"))


def test_psi2_test_needs_even():
    with pytest.raises(DomainError):
        psi2_test(parse_young("shiftpow:2:1"))


decimal_exponent = st.integers(min_value=10, max_value=60).map(lambda k: f"{k // 10}.{k % 10}")
coefficient = st.integers(min_value=1, max_value=500).map(lambda k: f"{k / 100:g}")
builtin = st.one_of(decimal_exponent.map(lambda p: f"pow:{p}"), st.just("coshm1"))


@given(decimal_exponent)
def test_pow_grammar_parses_and_passes_audit(p):
    psi = parse_young(f"pow:{p}")
    assert psi.spec == f"pow:{p}"
    assert psi.eval(0.0) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(coefficient, builtin), min_size=1, max_size=3))
def test_mix_grammar_parses(pairs):
    spec = "mix:" + ":".join(f"{a}:{k}" for a, k in pairs)
    psi = parse_young(spec)
    assert len(psi.terms) == len(pairs)
    assert psi.is_even


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(min_value=0.0, max_value=1e4), min_size=2, max_size=20), coefficient)
def test_inverse_pos_monotone(levels, a):
    psi = parse_young(f"mix:{a}:pow:3:1:pow:1")
    y = np.sort(np.asarray(levels))
    t = np.asarray(inverse_pos(psi, y))
    assert np.all(np.diff(t) >= -1e-12 * (1.0 + t[1:]))
    assert np.all(np.abs(psi.eval(t) - y) <= 1e-12 * (1.0 + y))
