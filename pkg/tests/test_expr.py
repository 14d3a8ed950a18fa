import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from szabo_forge.expr import (ONE, ZERO, Add, Const, DomainError, ExprSyntaxError, Func, Neg, Pow,
                              Var, diff, evaluate, evaluate_batch, linear_combination, parse,
                              simplify, to_text, variables)
from szabo_forge.smallnum import fd_partial

U = ("u1", "u2")


def ev(text, point=(0.3, -0.7)):
    return evaluate(parse(text, U), point)


@pytest.mark.parametrize("text, value", [
    ("1 + 2*3", 7.0),
    ("(1 + 2)*3", 9.0),
    ("2^3^2", 512.0),
    ("-2^2", -4.0),
    ("8/4/2", 1.0),
    ("10 - 3 - 2", 5.0),
    ("2^-1", 0.5),
    ("1.5e1", 15.0),
    ("sqrt(16) + exp(0) + log(1) + cos(0) + sin(0)", 6.0),
])
def test_parse_constants(text, value):
    assert ev(text) == value


def test_parse_variables_and_structure():
    e = parse("u1*u2 + u2^2", U)
    assert variables(e) == {0, 1}
    assert ev("u1*u2 + u2^2") == 0.3 * -0.7 + (-0.7) ** 2
    assert isinstance(parse("-u1^2", U), Neg)
    assert isinstance(parse("-u1^2", U).arg, Pow)


def test_custom_coordinate_names():
    e = parse("x*y", ("x", "y"))
    assert evaluate(e, (2.0, 3.0)) == 6.0
    with pytest.raises(ValueError):
        parse("1", ("sin", "y"))


@pytest.mark.parametrize("text, offset", [
    ("u1 +", 4),
    ("u1 + * 2", 5),
    ("foo + 1", 0),
    ("sin", 0),
    ("sin(u1, u2)", 6),
    ("u1(2)", 2),
    ("u1^1.5", 4),
    ("(u1", 3),
    ("u1 u2", 3),
])
def test_syntax_errors_report_offset(text, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse(text, U)
    assert info.value.offset == offset
    assert str(info.value).endswith(f"at offset {offset}")


def test_offset_is_in_bytes():
    with pytest.raises(ExprSyntaxError) as info:
        parse("u1 + é", U)
    assert info.value.offset == 5
    with pytest.raises(ExprSyntaxError) as info:
        parse("é + $", ("é",))
    assert info.value.offset == 5


def test_domain_error_names_subtree():
    e = parse("1 + log(u1)", U)
    with pytest.raises(DomainError) as info:
        evaluate(e, (-1.0, 0.0))
    assert to_text(info.value.subtree) == "log(u1)"
    assert info.value.point == (-1.0, 0.0)
    with pytest.raises(DomainError):
        evaluate(parse("1/u2", U), (1.0, 0.0))


def test_evaluate_batch_matches_pointwise():
    e = parse("sin(u1)*u2^3 - exp(u2)/(2 + u1^2)", U)
    pts = np.random.default_rng(1).uniform(-2, 2, (30, 2))
    batch = evaluate_batch(e, pts)
    assert batch.shape == (30,)
    for q, v in zip(pts, batch):
        assert evaluate(e, q) == v


def test_evaluate_rejects_short_point():
    with pytest.raises(IndexError):
        evaluate(parse("u2", U), (1.0,))


def test_smart_constructors_fold_and_eliminate():
    x = Var(0, "u1")
    assert x + ZERO is x
    assert x * ONE is x
    assert (x * ZERO) == ZERO
    assert (Const(2.0) * Const(3.0)) == Const(6.0)
    assert (-Const(2.0)) == Const(-2.0)
    assert x ** 1 is x
    assert x ** 0 == ONE


def test_linear_combination():
    x, y = Var(0, "u1"), Var(1, "u2")
    e = linear_combination([(2.0, x), (-1.0, y), (0.0, x)])
    assert evaluate(e, (1.0, 5.0)) == -3.0


@pytest.mark.parametrize("text", [
    "u1^3*u2 - 2*u1*u2^2",
    "sin(u1*u2) + cos(u1)^2",
    "exp(u1 - u2)/(3 + u2^2)",
    "log(2 + u1^2)*sqrt(3 + u2)",
    "u1^-2 + u2",
])
def test_diff_matches_finite_differences(text):
    e = parse(text, U)
    pts = np.random.default_rng(3).uniform(0.5, 1.5, (50, 2))
    f = lambda q: evaluate(e, q)
    for i in range(2):
        d = evaluate_batch(diff(e, i), pts)
        fd = np.array([fd_partial(f, q, i) for q in pts])
        np.testing.assert_allclose(d, fd, rtol=1e-7, atol=1e-8)


def test_diff_second_order_mixed():
    e = parse("u1^2*u2^3", U)
    d12 = diff(diff(e, 0), 1)
    d21 = diff(diff(e, 1), 0)
    for q in [(0.3, 0.4), (-1.2, 2.0)]:
        assert evaluate(d12, q) == pytest.approx(6 * q[0] * q[1] ** 2)
        assert evaluate(d21, q) == pytest.approx(evaluate(d12, q))


def test_diff_of_constant_and_other_variable():
    assert diff(parse("u2^2", U), 0) == ZERO
    assert diff(parse("3", U), 1) == ZERO


# ---------------------------------------------------------------- random trees

LEAVES = st.one_of(
    st.sampled_from([Var(0, "u1"), Var(1, "u2")]),
    st.floats(-5, 5, allow_nan=False).map(lambda v: Const(round(v, 3))),
)


def _extend(children):
    return st.one_of(
        st.tuples(children, children).map(lambda t: t[0] + t[1]),
        st.tuples(children, children).map(lambda t: t[0] - t[1]),
        st.tuples(children, children).map(lambda t: t[0] * t[1]),
        st.tuples(children, children).map(lambda t: t[0] / t[1]),
        children.map(lambda c: Neg(c)),
        st.tuples(children, st.integers(-3, 4)).map(lambda t: Pow(t[0], t[1])),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "log", "sqrt"]), children).map(
            lambda t: Func(t[0], t[1])),
    )


TREES = st.recursive(LEAVES, _extend, max_leaves=12)
POINT = (0.37, -1.21)


def _value(e):
    try:
        return evaluate(e, POINT)
    except DomainError:
        return None


@settings(max_examples=300, deadline=None)
@given(TREES)
def test_print_parse_round_trip(e):
    back = parse(to_text(e), U)
    assert _value(back) == _value(e)


@settings(max_examples=300, deadline=None)
@given(TREES)
def test_simplify_idempotent_and_value_preserving(e):
    s = simplify(e)
    assert simplify(s) == s
    a, b = _value(e), _value(s)
    if a is not None:
        # identity elimination may remove a failing subtree (0 * log(-1)) but never changes a value
        assert b == a


@settings(max_examples=200, deadline=None)
@given(TREES)
def test_structural_equality_and_hash(e):
    again = parse(to_text(e), U)
    if again == e:
        assert hash(again) == hash(e)
    assert e == e
    assert (e + ZERO) == e


def test_parsed_tree_keeps_shape():
    e = parse("u1 + 0", U)
    assert isinstance(e, Add)
    assert simplify(e) == Var(0, "u1")
