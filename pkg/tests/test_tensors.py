"""Riemann and Ricci tensors, their oracles, and covariant calculus."""

import math

import numpy as np
import pytest

import curvatur.catalog as cat
import curvatur.intrinsic as ig
import curvatur.tensors as tn


@pytest.fixture(scope="module")
def halfplane():
    return cat.builtin("lobachevsky_halfplane").build()


@pytest.fixture(scope="module")
def s3():
    return cat.builtin("s3_round").build()


def test_halfplane_riemann_closed_form(halfplane):
    x = np.array([0.4, 2.0])
    riem = tn.riemann_at(halfplane, x)
    # constant curvature -1: R_1212 = K (g11 g22 - g12^2) = -1/y^4
    assert riem.R_down[0, 1, 0, 1] == pytest.approx(-1 / 16, abs=1e-12)
    assert "R^i_jkl" in riem.convention


def test_riemann_symmetries(halfplane):
    riem = tn.riemann_at(halfplane, np.array([-1.0, 3.0]))
    r = riem.R_down
    assert np.abs(r + r.transpose(1, 0, 2, 3)).max() < 1e-12
    assert np.abs(r + r.transpose(0, 1, 3, 2)).max() < 1e-12
    assert np.abs(r - r.transpose(2, 3, 0, 1)).max() < 1e-12
    bianchi = r + r.transpose(0, 2, 3, 1) + r.transpose(0, 3, 1, 2)
    assert np.abs(bianchi).max() < 1e-12


def test_sphere_sectional_curvature_is_one():
    chart = ig.pullback_metric(cat.builtin("sphere").build())
    for x in [np.array([1.0, 0.9]), np.array([4.0, 2.0])]:
        sigma = tn.sectional_at(chart, x, np.array([1.0, 0.2]),
                                np.array([-0.3, 1.0]))
        assert sigma == pytest.approx(1.0, abs=1e-10)


def test_sphere_ricci_proportional_to_metric():
    chart = ig.pullback_metric(cat.builtin("sphere").build())
    x = np.array([2.0, 1.2])
    ric = tn.ricci_at(chart, x)
    assert np.abs(2 * ric.rho - ric.tau * ric.g).max() < 1e-10
    assert ric.tau == pytest.approx(2.0, abs=1e-10)


def test_s3_round_curvature(s3):
    x = np.array([0.2, -0.3, 0.5])
    ric = tn.ricci_at(s3, x)
    assert ric.tau == pytest.approx(6.0, abs=1e-10)
    assert np.abs(ric.rho - 2 * ric.g).max() < 1e-10
    riem = tn.riemann_at(s3, x)
    u = np.array([1.0, 0.0, 0.2])
    v = np.array([0.1, 1.0, -0.4])
    w = np.array([-0.3, 0.6, 1.0])
    g = riem.g
    # constant curvature one: R(u,v)w = <v,w> u - <u,w> v
    rhs = (v @ g @ w) * u - (u @ g @ w) * v
    assert np.abs(riem.action(u, v, w) - rhs).max() < 1e-9


def test_holonomy_oracle_flat_chart():
    plane = ig.pullback_metric(cat.builtin("plane").build())
    x = np.array([0.3, -0.2])
    m, err = tn.riemann_holonomy_oracle(plane, x, np.array([1.0, 0.0]),
                                        np.array([0.0, 1.0]))
    assert np.abs(m).max() < 1e-9
    assert err < 1e-6


def test_holonomy_oracle_matches_components(halfplane):
    x = np.array([0.3, 2.0])
    u, v = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    riem = tn.riemann_at(halfplane, x)
    m, err = tn.riemann_holonomy_oracle(halfplane, x, u, v)
    assert np.abs(m - riem.operator(u, v)).max() < max(1e-3, 10 * err)


def test_volume_oracle_matches_ricci():
    chart = ig.pullback_metric(cat.builtin("sphere").build())
    x = np.array([2.0, 1.3])
    ric = tn.ricci_at(chart, x)
    rho, err = tn.ricci_volume_oracle(chart, x)
    assert np.abs(rho - ric.rho).max() < 5e-3


def test_second_bianchi_residual(halfplane):
    resid, scale = tn.second_bianchi_residual(halfplane, np.array([0.2, 1.5]))
    assert resid < 1e-4


def linear_field(coeffs, const):
    coeffs = np.asarray(coeffs, dtype=float)
    const = np.asarray(const, dtype=float)

    def fn(xj):
        return [sum(coeffs[r, i] * xj[i] for i in range(len(xj)))
                + const[r] * xj[0] ** 0 for r in range(len(const))]

    return tn.Field("vector", fn)


def test_commutator_is_antisymmetrized_derivative(halfplane):
    X = linear_field([[0.5, -0.2], [0.1, 0.3]], [1.0, 0.2])
    Y = linear_field([[-0.3, 0.7], [0.4, -0.1]], [0.5, 1.5])
    x = np.array([0.6, 1.8])
    lhs = tn.field_values(tn.commutator(X, Y), x, order=2)
    rhs = tn.field_values(tn.directional(halfplane, X, Y), x, order=3) \
        - tn.field_values(tn.directional(halfplane, Y, X), x, order=3)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_metric_is_parallel(halfplane):
    nabla_g = tn.covariant_derivative(halfplane, tn.metric_field(halfplane))
    vals = tn.field_values(nabla_g, np.array([0.7, 2.2]), order=3)
    assert np.abs(vals).max() < 1e-12


def test_exact_covector_is_closed(halfplane):
    f = tn.Field("scalar", lambda xj: xj[0] ** 2 * xj[1] + xj[1] ** 2)
    df = tn.covariant_derivative(halfplane, f)
    ddf = tn.exterior_derivative(df)
    vals = tn.field_values(ddf, np.array([0.5, 1.5]), order=3)
    assert np.abs(vals).max() < 1e-12


def test_closed_covector_integrates_back(halfplane):
    # phi = d(x^2 y) has components (2xy, x^2)
    phi = tn.Field("covector",
                   lambda xj: [2.0 * xj[0] * xj[1], xj[0] ** 2])
    box = [(0.2, 1.0), (1.0, 2.0)]
    pot = tn.potential_on_box(phi, box)
    for pt in [(0.5, 1.5), (0.9, 1.2)]:
        got = pot(np.array(pt)) - pot(np.array([0.2, 1.0]))
        want = (pt[0] ** 2 * pt[1]) - (0.2 ** 2 * 1.0)
        assert got == pytest.approx(want, abs=1e-8)


def test_non_closed_covector_is_flagged(halfplane):
    phi = tn.Field("covector", lambda xj: [xj[1], 0.0 * xj[0]])
    d = tn.field_values(tn.exterior_derivative(phi),
                        np.array([0.5, 1.5]), order=2)
    assert np.abs(d).max() > 0.5
