import math

import pytest
from hypothesis import given, settings, strategies as st

from fracstab.expr import (
    ArityError, BinOp, Call, ExprDomainError, ExprSyntaxError, FUNCTIONS, Neg, Num,
    UnboundVariableError, UnknownFunctionError, Var, compile_vector, evaluate, free_vars, parse,
    serialize,
)

VARS = ["t", "x1", "x2", "d1_1", "d2_3"]


def ev(src, **env):
    return evaluate(parse(src), env)


# --- parse / evaluate examples -------------------------------------------------------

def test_parse_examples():
    assert parse("t - 1") == BinOp("-", Var("t"), Num(1.0))
    assert ev("2+3*4^2") == 50
    e = parse("x2 * spow(x1, 4/3)")
    assert e == BinOp("*", Var("x2"), Call("spow", (Var("x1"), BinOp("/", Num(4.0), Num(3.0)))))


def test_eval_examples():
    assert ev("t - 1", t=3) == 2
    assert ev("spow(x1, 4/3)", x1=-8) == pytest.approx(-16, rel=1e-14)
    assert ev("gamma(5)") == pytest.approx(24, rel=1e-14)


def test_precedence_and_associativity():
    assert ev("2^3^2") == 512
    assert ev("-2^2") == -4
    assert ev("(-2)^2") == 4
    assert ev("8/4/2") == 1
    assert ev("10-4-3") == 3
    assert ev("2*-3") == -6
    assert ev("2^-1") == 0.5
    assert ev("1.5e2 + .5") == 150.5
    assert ev("  1 +\t2 ") == 3


def test_functions():
    assert ev("sin(0) + cos(0)") == 1
    assert ev("exp(ln(2))") == pytest.approx(2)
    assert ev("abs(-3) * sgn(-3)") == -3
    assert ev("sgn(0)") == 0


def test_free_vars_examples():
    assert free_vars(parse("t - 1")) == {"t"}
    assert free_vars(parse("x2 * spow(x1, 4/3)")) == {"x1", "x2"}
    assert free_vars(parse("d1_1 + d2_2")) == {"d1_1", "d2_2"}
    assert free_vars(parse("3")) == frozenset()


# --- errors -------------------------------------------------------------------------------

@pytest.mark.parametrize("src,offset", [
    ("1 +", 3), ("(1", 2), ("1 2", 2), ("*2", 0), ("x1 + )", 5), ("", 0), ("2 $ 3", 2),
    ("1 +\u00a0é", 5),  # no-break space (2 bytes in UTF-8) is whitespace; é is rejected
])
def test_syntax_error_offsets(src, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse(src)
    assert info.value.offset == offset


def test_syntax_error_expected_set():
    with pytest.raises(ExprSyntaxError) as info:
        parse("(1")
    assert ")" in info.value.expected
    with pytest.raises(ExprSyntaxError) as info:
        parse("1 +")
    assert {"number", "identifier", "("} <= info.value.expected


def test_unknown_function_and_arity():
    with pytest.raises(UnknownFunctionError) as info:
        parse("1 + foo(2)")
    assert info.value.offset == 4
    with pytest.raises(ArityError):
        parse("spow(1)")
    with pytest.raises(ArityError):
        parse("sin(1, 2)")


def test_eval_errors():
    with pytest.raises(UnboundVariableError):
        ev("x1 + 1")
    for src in ("ln(0)", "ln(-1)", "gamma(0)", "gamma(-2.5)", "1/0", "(-8)^(1/3)", "exp(1000)", "0^-1"):
        with pytest.raises(ExprDomainError):
            ev(src)


# --- serialize ------------------------------------------------------------------------

def test_serialize_examples():
    assert serialize(parse("t-1")) == "t - 1"
    e = parse("-(x1)^2")
    assert parse(serialize(e)) == e
    assert serialize(parse("spow(x2,2/5)")) == "spow(x2, 2 / 5)"
    assert serialize(parse("(a-b)-(c-d)")) == "a - b - (c - d)"
    assert serialize(parse("(a^b)^c")) == "(a ^ b) ^ c"
    assert serialize(parse("a^(b^c)")) == "a ^ b ^ c"
    assert serialize(parse("(-a)^2")) == "(-a) ^ 2"
    assert serialize(parse("--a")) == "- -a"


numbers = st.one_of(
    st.integers(0, 1000).map(float),
    st.floats(0, 1e6, allow_nan=False, allow_infinity=False),
    st.floats(1e-12, 1e-3),
    st.just(1e300),
).map(Num)
variables = st.sampled_from(VARS).map(Var)


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.builds(BinOp, st.sampled_from("+-*/^"), children, children),
        st.builds(lambda name, a, b: Call(name, (a, b)[:FUNCTIONS[name]]),
                  st.sampled_from(sorted(FUNCTIONS)), children, children),
    )


def _depth(e):
    if isinstance(e, (Num, Var)):
        return 0
    if isinstance(e, Neg):
        return 1 + _depth(e.operand)
    if isinstance(e, BinOp):
        return 1 + max(_depth(e.left), _depth(e.right))
    return 1 + max(_depth(a) for a in e.args)


asts = st.recursive(numbers | variables, _extend, max_leaves=24).filter(lambda e: _depth(e) <= 6)


@settings(max_examples=1000, deadline=None)
@given(asts)
def test_round_trip(e):
    assert parse(serialize(e)) == e


def fully_parenthesized_python(e):
    """Independent evaluator: every node bracketed, handed to Python's own parser."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{fully_parenthesized_python(e.operand)})"
    op = "**" if e.op == "^" else e.op
    return f"({fully_parenthesized_python(e.left)} {op} {fully_parenthesized_python(e.right)})"


small_numbers = st.integers(0, 9).map(float).map(Num)
arith = st.recursive(
    small_numbers | variables,
    lambda c: st.one_of(
        c.map(Neg),
        st.builds(BinOp, st.sampled_from("+-*"), c, c),
        st.builds(lambda a, k: BinOp("^", a, Num(float(k))), c, st.integers(0, 3)),
    ),
    max_leaves=20,
)
ENV = {"t": 0.75, "x1": -1.25, "x2": 2.5, "d1_1": 0.5, "d2_3": -3.0}


@settings(max_examples=500, deadline=None)
@given(arith)
def test_precedence_oracle(e):
    ref = eval(fully_parenthesized_python(e), {}, dict(ENV))
    try:
        got = evaluate(parse(serialize(e)), ENV)
    except ExprDomainError:
        assert not math.isfinite(ref)
        return
    assert got == ref


@settings(max_examples=200, deadline=None)
@given(x=st.floats(1e-6, 1e6), p=st.floats(-5, 5))
def test_spow_odd(x, p):
    e = parse("spow(x1, p)")
    try:
        pos = evaluate(e, {"x1": x, "p": p})
    except ExprDomainError:
        return
    assert evaluate(e, {"x1": -x, "p": p}) == -pos


@settings(max_examples=300, deadline=None)
@given(asts)
def test_compiled_matches_interpreter(e):
    env = {"t": 0.5, "x1": 1.5, "x2": -0.25, "d1_1": 2.0, "d2_3": 0.125}
    f = compile_vector([e], "env", lambda name: f"env[{name!r}]")
    try:
        ref = evaluate(e, env)
    except ExprDomainError:
        with pytest.raises(ExprDomainError):
            f(env)
        return
    assert f(env) == (ref,)


def test_number_literals_are_nonnegative():
    with pytest.raises(ValueError):
        Num(-1.0)
    assert parse("-3") == Neg(Num(3.0))
