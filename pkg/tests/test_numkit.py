"""Jets, quadrature, ODE integration, extrapolation, and eigen helpers."""

import math

import numpy as np
import pytest

import curvatur.numkit as nk


def f_ref(x, y):
    return math.sin(x * y) + x * x * math.exp(y)


def test_jet_partials_match_hand_derivatives():
    x, y = 0.7, -0.3
    xj, yj = nk.Jet.variables([x, y], order=3)
    j = nk.sin(xj * yj) + xj * xj * nk.exp(yj)
    e = math.exp(y)
    s, c = math.sin(x * y), math.cos(x * y)
    assert j.value == pytest.approx(f_ref(x, y), abs=1e-15)
    assert j.partial((1, 0)) == pytest.approx(y * c + 2 * x * e, abs=1e-14)
    assert j.partial((0, 1)) == pytest.approx(x * c + x * x * e, abs=1e-14)
    assert j.partial((2, 0)) == pytest.approx(-y * y * s + 2 * e, abs=1e-14)
    assert j.partial((0, 2)) == pytest.approx(-x * x * s + x * x * e, abs=1e-14)
    assert j.partial((1, 1)) == pytest.approx(c - x * y * s + 2 * x * e,
                                              abs=1e-14)


def test_jet_division_and_sqrt():
    t = nk.Jet.variable(2.0, 0, 1, 4)
    j = nk.sqrt(t * t + 1.0) / t
    # d/dt sqrt(t^2+1)/t = 1/sqrt(t^2+1) - sqrt(t^2+1)/t^2 at t=2
    expected = 1 / math.sqrt(5) - math.sqrt(5) / 4
    assert j.partial((1,)) == pytest.approx(expected, abs=1e-14)


def test_compose1d_chain_rule():
    t = nk.Jet.variable(0.4, 0, 1, 3)
    inner = t * t + 1.0
    outer = nk.Jet.variable(inner.value, 0, 1, 3)
    composed = nk.compose1d(nk.log(outer), inner)
    direct = nk.log(t * t + 1.0)
    assert np.allclose(composed.coef, direct.coef, atol=1e-14)


def test_invert_univariate_round_trip():
    t0 = 0.3
    t = nk.Jet.variable(t0, 0, 1, 3)
    j = nk.exp(t) - 1.0                  # strictly monotone near t0
    inv = nk.invert_univariate(j, t0)
    back = nk.compose1d(inv, j)
    ident = nk.Jet.variable(t0, 0, 1, 3)
    assert np.allclose(back.coef, ident.coef, atol=1e-12)
    with pytest.raises(nk.PreconditionError):
        nk.invert_univariate(nk.Jet.variable(t0, 0, 1, 4), t0)


def test_derivative_antiderivative_round_trip():
    t = nk.Jet.variable(1.1, 0, 1, 3)
    j = nk.sin(t) * t
    back = nk.derivative1d(nk.antiderivative1d(j, 5.0))
    assert np.allclose(back.coef, nk.truncate(j, 3).coef, atol=1e-14)


def test_jet_order_bounds():
    with pytest.raises(nk.PreconditionError):
        nk.Jet.variables([0.0, 0.0], order=5)
    with pytest.raises(nk.PreconditionError):
        nk.Jet.variables([0.0], order=0)


def test_gauss_legendre_polynomial_exactness():
    xs, ws = nk.gauss_legendre(5, 0.0, 2.0)
    # 5 nodes integrate degree 9 exactly: int_0^2 x^9 dx = 102.4
    assert float(np.sum(ws * xs ** 9)) == pytest.approx(102.4, abs=1e-11)


def test_quadrature_smooth():
    val, err = nk.quadrature(math.exp, 0.0, 1.0, tol=1e-12)
    assert val == pytest.approx(math.e - 1.0, abs=1e-12)
    assert err < 1e-10


def test_quadrature2d_separable():
    val, _ = nk.quadrature2d(lambda x, y: math.sin(x) * y,
                             0.0, math.pi, 0.0, 2.0, tol=1e-10)
    assert val == pytest.approx(4.0, abs=1e-8)


def test_integrate_ode_exponential():
    prob = nk.OdeProblem(lambda t, y: y, np.array([1.0]), (0.0, 1.0),
                         rtol=1e-12, atol=1e-14)
    traj = nk.integrate_ode(prob)
    assert traj.final[0] == pytest.approx(math.e, abs=1e-10)
    assert traj.eval(0.5)[0] == pytest.approx(math.sqrt(math.e), abs=1e-9)


def test_integrate_ode_must_hit_and_forward_only():
    prob = nk.OdeProblem(lambda t, y: -y, np.array([1.0]), (0.0, 2.0),
                         rtol=1e-10, atol=1e-12)
    traj = nk.integrate_ode(prob, must_hit=[0.7])
    assert any(abs(t - 0.7) < 1e-12 for t in traj.ts)
    back = nk.OdeProblem(lambda t, y: y, np.array([1.0]), (1.0, 0.0),
                         rtol=1e-10, atol=1e-12)
    with pytest.raises(nk.PreconditionError):
        nk.integrate_ode(back)


def test_integrate_ode_blowup_raises():
    prob = nk.OdeProblem(lambda t, y: y * y, np.array([1.0]), (0.0, 2.0),
                         rtol=1e-10, atol=1e-12)
    with pytest.raises(nk.NumericalError):
        nk.integrate_ode(prob)


def test_richardson_even_powers():
    hs = np.array([0.4, 0.2, 0.1, 0.05])
    fs = math.pi + 3 * hs ** 2 - 2 * hs ** 4
    res = nk.richardson(nk.ExtrapolationLadder(hs, fs, p=2))
    assert res.value == pytest.approx(math.pi, abs=1e-12)
    assert res.error < 1e-10
    assert res.monotone


def test_richardson_requires_halving():
    with pytest.raises(nk.PreconditionError):
        nk.richardson(nk.ExtrapolationLadder(np.array([0.4, 0.3]),
                                             np.array([1.0, 1.0]), p=2))


def test_generalized_symmetric_eigen():
    q = np.array([[2.0, 1.0], [1.0, 3.0]])
    g = np.array([[1.0, 0.2], [0.2, 2.0]])
    lams, vecs, tie = nk.generalized_symmetric_eigen(q, g)
    assert not tie
    assert lams[0] >= lams[1]
    for k in range(2):
        resid = q @ vecs[:, k] - lams[k] * (g @ vecs[:, k])
        assert np.abs(resid).max() < 1e-12
    gram = vecs.T @ g @ vecs
    assert np.allclose(gram, np.eye(2), atol=1e-12)


def test_generalized_eigen_tie():
    g = np.array([[1.5, 0.3], [0.3, 0.9]])
    lams, vecs, tie = nk.generalized_symmetric_eigen(2.0 * g, g)
    assert tie
    assert np.allclose(lams, [2.0, 2.0], atol=1e-12)
    assert np.allclose(vecs.T @ g @ vecs, np.eye(2), atol=1e-12)


def test_vector_helpers():
    assert nk.vtriple([1, 0, 0], [0, 1, 0], [0, 0, 1]) == pytest.approx(1.0)
    assert nk.vtriple([1, 0, 0], [2, 0, 0], [0, 0, 1]) == pytest.approx(0.0)
    assert np.allclose(nk.vcross([1, 0, 0], [0, 1, 0]), [0, 0, 1])
    assert nk.vdot([1, 2, 3], [4, 5, 6]) == pytest.approx(32.0)


def test_pmap_preserves_order():
    old = nk.get_thread_count()
    try:
        nk.set_thread_count(3)
        assert nk.pmap(lambda k: k * k, range(10)) == [k * k for k in range(10)]
    finally:
        nk.set_thread_count(old)
