import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biasedsplines.errors import ExpressionDomainError, ExpressionSyntaxError, UnboundIdentifierError
from biasedsplines.expressions import eval_with_partials, parse_expression
from biasedsplines.hyperdual import HyperDual


def test_precedence_and_power():
    assert parse_expression("1 + 2 * 3 ^ 2").evaluate({}) == 19
    assert parse_expression("-2^2").evaluate({}) == -4
    assert parse_expression("2^-1").evaluate({}) == 0.5
    assert parse_expression("(1 + 2) / 4").evaluate({}) == 0.75


def test_functions_and_bindings():
    e = parse_expression("cos(phi)^2 + k * sqrt(x)")
    assert e.identifiers == {"phi", "k", "x"}
    assert np.isclose(e(phi=np.pi / 3, k=2.0, x=4.0), 0.25 + 4.0)


def test_array_bindings_broadcast():
    e = parse_expression("x * y")
    out = e.evaluate({"x": np.arange(3.0), "y": 2.0})
    assert np.array_equal(out, [0.0, 2.0, 4.0])


@pytest.mark.parametrize("text, offset", [("1 +", 3), ("sin(x", 5), ("2 $ 3", 2), ("", 0), ("1 2", 2)])
def test_syntax_errors_carry_offsets(text, offset):
    with pytest.raises(ExpressionSyntaxError) as err:
        parse_expression(text)
    assert err.value.offset == offset


def test_unbound_identifier():
    with pytest.raises(UnboundIdentifierError) as err:
        parse_expression("a + bee").evaluate({"a": 1.0})
    assert err.value.name == "bee"


@pytest.mark.parametrize("text", ["sqrt(0 - 1)", "1 / (x - x)"])
def test_domain_errors(text):
    with pytest.raises(ExpressionDomainError):
        parse_expression(text).evaluate({"x": 1.0})


def test_partials_are_exact():
    e = parse_expression("sin(x) * y^3 + exp(x * y)")
    x, y = 0.3, -0.7
    val, grad, hess = eval_with_partials(e, {"x": x, "y": y})
    assert np.isclose(val, np.sin(x) * y**3 + np.exp(x * y), rtol=1e-15)
    gx = np.cos(x) * y**3 + y * np.exp(x * y)
    gy = 3 * np.sin(x) * y**2 + x * np.exp(x * y)
    assert np.allclose(grad, [gx, gy], rtol=1e-14)
    hxx = -np.sin(x) * y**3 + y * y * np.exp(x * y)
    hxy = 3 * np.cos(x) * y**2 + (1 + x * y) * np.exp(x * y)
    hyy = 6 * np.sin(x) * y + x * x * np.exp(x * y)
    assert np.allclose(hess, [[hxx, hxy], [hxy, hyy]], rtol=1e-13)


def test_partials_ignore_unused_names():
    _, grad, hess = eval_with_partials(parse_expression("2 * a"), {"a": 1.0, "b": 5.0})
    assert np.array_equal(grad, [2.0, 0.0])
    assert not hess.any()


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_hyperdual_matches_product_rule(a, b):
    x = HyperDual(a, 1.0, 1.0, 0.0)
    f = x * x.sin() + b
    assert np.isclose(f.b, np.sin(a) + a * np.cos(a), atol=1e-12)
    assert np.isclose(f.d, 2 * np.cos(a) - a * np.sin(a), atol=1e-12)


def test_hyperdual_division_and_power():
    x = HyperDual(2.0, 1.0, 1.0, 0.0)
    f = 1.0 / x
    assert np.isclose(f.b, -0.25) and np.isclose(f.d, 0.25)
    g = x.power(3.0)
    assert (g.a, g.b, g.d) == (8.0, 12.0, 12.0)
