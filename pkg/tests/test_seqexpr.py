import math

import pytest
from hypothesis import given, settings, strategies as st

from gwve.seqexpr import (
    SeqExprDomainError,
    SeqExprError,
    SeqExprSyntaxError,
    UnknownIdentifierError,
    eval_seq_expr,
    parse_seq_expr,
    to_source,
)


def test_ratio_at_three():
    assert eval_seq_expr("n/(n-1)", 3) == 1.5


def test_exponential_ratio_at_one():
    v = eval_seq_expr("exp(-sqrt(n))/exp(-sqrt(n-1))", 1)
    assert v == pytest.approx(math.exp(-1), rel=1e-15)


def test_half_power():
    assert eval_seq_expr("1/(2*n^0.5)", 4) == 0.25


def test_exp_sqrt():
    assert eval_seq_expr("exp(sqrt(n))", 9) == pytest.approx(math.exp(3), rel=1e-15)


def test_syntax_error_reports_offset():
    with pytest.raises(SeqExprSyntaxError) as err:
        parse_seq_expr("n+*2")
    assert err.value.offset == 2
    assert err.value.expected


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError):
        parse_seq_expr("m + 1")


def test_division_by_zero_is_domain_error():
    with pytest.raises(SeqExprDomainError):
        eval_seq_expr("n/(n-1)", 1)


@pytest.mark.parametrize("text", ["log(n-1)", "sqrt(1-n-1)", "(0-n)^0.5", "exp(1000*n)"])
def test_out_of_domain_never_nan(text):
    with pytest.raises(SeqExprError):
        eval_seq_expr(text, 1)


def test_power_is_right_associative():
    assert eval_seq_expr("2^3^2", 1) == 2.0**9


def test_unary_minus_binds_weaker_than_power():
    assert eval_seq_expr("-n^2", 3) == -9.0


def test_left_associative_subtraction_and_division():
    assert eval_seq_expr("n-2-3", 10) == 5.0
    assert eval_seq_expr("n/2/5", 10) == 1.0


def test_pow_function_and_integer_fast_path():
    assert eval_seq_expr("pow(n, 3)", 2) == 8.0
    assert eval_seq_expr("(0-n)^3", 2) == -8.0


def test_utf8_bytes_accepted():
    assert parse_seq_expr(b"n+1")(2) == 3.0


numbers = st.floats(min_value=0.01, max_value=100, allow_nan=False).map(lambda x: round(x, 3))


@st.composite
def expressions(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(st.one_of(st.just("n"), numbers.map(repr)))
    kind = draw(st.sampled_from(["+", "-", "*", "/", "neg", "sqrt", "exp", "log", "pow"]))
    a = draw(expressions(depth=depth - 1))
    if kind in "+-*/":
        b = draw(expressions(depth=depth - 1))
        return f"({a}){kind}({b})"
    if kind == "neg":
        return f"-({a})"
    if kind == "pow":
        return f"pow({a}, 2)"
    return f"{kind}({a})"


@settings(max_examples=300, deadline=None)
@given(expressions(), st.integers(min_value=1, max_value=1000))
def test_round_trip_is_bit_exact(text, n):
    e = parse_seq_expr(text)
    e2 = parse_seq_expr(to_source(e))
    assert to_source(e2) == to_source(e)
    try:
        v = e(n)
    except SeqExprError:
        with pytest.raises(SeqExprError):
            e2(n)
        return
    v2 = e2(n)
    assert v2 == v or (math.isnan(v) and math.isnan(v2))


@given(numbers, numbers, numbers)
def test_multiplication_precedes_addition(a, b, c):
    lhs = eval_seq_expr(f"{a!r}+{b!r}*{c!r}", 1)
    rhs = eval_seq_expr(f"{a!r}+({b!r}*{c!r})", 1)
    assert lhs == rhs
