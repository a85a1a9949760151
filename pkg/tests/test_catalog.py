"""Geometry grammar, builtins, and hyperbolic closed forms."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import curvatur.catalog as cat
import curvatur.curves as cv
import curvatur.intrinsic as ig
import curvatur.numkit as nk
import curvatur.surface_patch as sp


# ---------------------------------------------------------------------------
# expressions
# ---------------------------------------------------------------------------


def test_eval_expr_matches_math():
    fn = cat.parse_expression("sin(u)*v^2 + pi/2", variables=("u", "v"))
    assert fn(0.7, 1.3) == pytest.approx(
        math.sin(0.7) * 1.69 + math.pi / 2, abs=1e-14)


def test_parse_expression_works_on_jets():
    fn = cat.parse_expression("exp(s)*s", variables=("s",))
    j = fn(nk.Jet.variable(0.4, 0, 1, 2))
    assert j.value == pytest.approx(0.4 * math.exp(0.4), abs=1e-14)
    assert j.partial((1,)) == pytest.approx(1.4 * math.exp(0.4), abs=1e-14)


def test_parse_expression_rejects_trailing_input():
    with pytest.raises(cat.ParseError):
        cat.parse_expression("1 + 2 3")


def test_parse_expression_rejects_unbound_names():
    with pytest.raises(nk.PreconditionError):
        cat.parse_expression("a*s", variables=("s",))
    fn = cat.parse_expression("a*s", variables=("s",), params={"a": 2.0})
    assert fn(3.0) == pytest.approx(6.0)


def leaf_exprs():
    return st.one_of(
        st.floats(min_value=0.0, max_value=9.0,
                  allow_nan=False).map(lambda v: cat.Num(round(v, 3))),
        st.sampled_from(["u", "v", "a", "pi"]).map(cat.Name))


def exprs():
    return st.recursive(
        leaf_exprs(),
        lambda sub: st.one_of(
            st.tuples(st.sampled_from(["+", "-", "*", "/", "^"]), sub, sub)
            .map(lambda t: cat.Binary(t[0], t[1], t[2])),
            sub.map(lambda e: cat.Unary("-", e)),
            st.tuples(st.sampled_from(list(cat.FUNCTIONS)), sub)
            .map(lambda t: cat.Call(t[0], t[1]))),
        max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(exprs())
def test_printed_expressions_parse_back(e):
    text = cat.print_expr(e)
    parser = cat._Parser(cat.tokenize(text))
    back = parser.parse_expr()
    assert parser.peek().kind == "eof"
    assert back == e


# ---------------------------------------------------------------------------
# documents
# ---------------------------------------------------------------------------


def test_parse_geometry_surface_document():
    spec = cat.parse_geometry("""
        # paraboloid of revolution
        param a = 0.5
        surface bowl (u,v in [-1,1]x[-1,1]) = (u, v, a*(u^2 + v^2))
    """)
    assert spec.kind == "surface"
    assert spec.coords == ("u", "v")
    assert spec.params == {"a": 0.5}
    patch = spec.build()
    assert isinstance(patch, sp.SurfacePatch)
    assert np.allclose(patch.point(0.4, -0.2), [0.4, -0.2, 0.1], atol=1e-14)


def test_parse_geometry_metric_document():
    spec = cat.parse_geometry(
        "metric m (x,y in [0.1,2]x[0.1,2]) = [[1+x^2, x*y], [x*y, 2]]")
    chart = spec.build()
    assert isinstance(chart, ig.MetricChart)
    g = chart.g_at(np.array([0.5, 1.0]))
    assert np.allclose(g, [[1.25, 0.5], [0.5, 2.0]], atol=1e-14)


def test_parse_geometry_curve_document():
    spec = cat.parse_geometry("curve c (t in [0,1]) = (t, t^2)")
    curve = spec.build()
    assert isinstance(curve, cv.ParamCurve)
    assert curve.dim == 2


@pytest.mark.parametrize("text, needle", [
    ("surface s (u,v in [0,1]x[0,1]) = (u, v, w)", "unbound"),
    ("curve c (t in [1,0]) = (t, t)", "empty"),
    ("surface s (u,v in [0,1]x[0,1]) = (u, v, 0", "end of input"),
    ("curve c (t in [0,1]) = (t, @)", "unexpected character"),
    ("", "no geometry declaration"),
])
def test_malformed_documents_raise(text, needle):
    with pytest.raises((cat.ParseError, nk.PreconditionError)) as exc:
        cat.parse_geometry(text).build()
    assert needle in str(exc.value)


def test_parse_error_carries_location():
    bad = "surface s (u,v in [0,1]x[0,1]) =\n  (u, v, 1 +)"
    with pytest.raises(cat.ParseError) as exc:
        cat.parse_geometry(bad)
    assert exc.value.line == 2
    assert exc.value.col == 13
    assert exc.value.expected


def test_non_spd_metric_warns_but_builds():
    spec = cat.parse_geometry(
        "metric bad (x,y in [-1,1]x[-1,1]) = [[x, 0], [0, 1]]")
    spec.build()
    assert any("positive definite" in w for w in spec.warnings)


# ---------------------------------------------------------------------------
# builtins
# ---------------------------------------------------------------------------


def test_all_builtins_build():
    kinds = {"curve": cv.ParamCurve, "surface": sp.SurfacePatch,
             "metric": ig.MetricChart}
    for name in cat.BUILTIN_NAMES:
        spec = cat.builtin(name)
        obj = spec.build()
        assert isinstance(obj, kinds[spec.kind]), name
        assert not spec.warnings, (name, spec.warnings)


def test_unknown_builtin_message_lists_names():
    with pytest.raises(nk.PreconditionError) as exc:
        cat.builtin("nosuch")
    assert "sphere" in str(exc.value)


def test_unknown_parameter_rejected():
    with pytest.raises(nk.PreconditionError):
        cat.builtin("sphere", {"Q": 2.0})


def test_builtin_periods_attached():
    assert cat.builtin("sphere").periods == (2 * math.pi, None)
    assert cat.builtin("torus").periods == (2 * math.pi, 2 * math.pi)
    assert cat.builtin("revolution").periods == (2 * math.pi, None)


def test_expression_parameter_builtin():
    spec = cat.builtin("revolution", {"f": "3+cos(v)"})
    patch = spec.build()
    # K = -f'' / (f (1 + f'^2)^2) at v = 0.2
    v = 0.2
    f, fp, fpp = 3 + math.cos(v), -math.sin(v), -math.cos(v)
    rep = sp.principal_at(patch, (0.5, v))
    assert rep.gauss == pytest.approx(-fpp / (f * (1 + fp * fp) ** 2),
                                      abs=1e-10)


def test_scaled_sphere_params():
    spec = cat.builtin("sphere", {"R": 2.0})
    rep = sp.principal_at(spec.build(), (1.0, 1.0))
    assert rep.gauss == pytest.approx(0.25, abs=1e-10)


# ---------------------------------------------------------------------------
# hyperbolic closed forms
# ---------------------------------------------------------------------------


def test_hyperbolic_distance_formula():
    z1, z2 = complex(0, 1), complex(3, 1)
    expected = math.acosh(1 + abs(z2 - z1) ** 2 / (2 * z1.imag * z2.imag))
    assert cat.hyperbolic_distance(z1, z2) == pytest.approx(expected,
                                                            abs=1e-14)
    assert cat.hyperbolic_distance(z2, z1) == pytest.approx(expected,
                                                            abs=1e-14)
    assert cat.hyperbolic_distance(z1, z1) == 0.0


def test_hyperbolic_distance_isometries():
    z1, z2 = complex(0.3, 0.8), complex(-1.2, 2.5)
    d = cat.hyperbolic_distance(z1, z2)
    assert cat.hyperbolic_distance(z1 + 5, z2 + 5) == pytest.approx(d,
                                                                    abs=1e-12)
    assert cat.hyperbolic_distance(-1 / z1, -1 / z2) == pytest.approx(
        d, abs=1e-12)


def test_hyperbolic_right_triangle_pythagoras():
    P = complex(0.0, 1.0)
    a, b = 0.7, 1.1
    A, B = cat.hyperbolic_right_triangle(P, a, b)
    assert cat.hyperbolic_distance(P, A) == pytest.approx(a, abs=1e-12)
    assert cat.hyperbolic_distance(P, B) == pytest.approx(b, abs=1e-12)
    c = cat.hyperbolic_distance(A, B)
    assert math.cosh(c) == pytest.approx(math.cosh(a) * math.cosh(b),
                                         abs=1e-12)


def test_hyperbolic_circle_length():
    assert cat.hyperbolic_circle_length(1.5) == pytest.approx(
        2 * math.pi * math.sinh(1.5), abs=1e-14)
