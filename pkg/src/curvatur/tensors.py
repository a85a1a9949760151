"""Curvature tensors and covariant calculus on metric charts.

The Riemann tensor here is assembled from Christoffel symbols and their
exact derivatives, with the index convention

    R^i_{jkl} = d_k Gamma^i_{lj} - d_l Gamma^i_{kj}
                + sum_m (Gamma^i_{km} Gamma^m_{lj} - Gamma^i_{lm} Gamma^m_{kj})

paired as (R(u, v) w)^i = R^i_{jkl} w^j u^k v^l.  With this choice the unit
sphere has R_1212 = +sin^2(rho) and sectional curvature +1, and the
holonomy of a small parallelogram spanned by (h u, h v), traversed with the
v-side first, is E + h^2 R(u, v) + O(h^3).  Two independent oracles are
provided: parallelogram holonomy for the full tensor and geodesic-cube
volumes for the Ricci form.  Neither shares code with the Christoffel
route beyond the geodesic integrator itself.

Fields (scalar, vector, covector, bilinear) are callables from coordinate
jets to jet components, which makes covariant derivatives composable to
the depth the jet order allows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import numkit as nk
from . import intrinsic as ig
from .numkit import Jet, PreconditionError


_CONVENTION = ("R^i_jkl = d_k Gamma^i_lj - d_l Gamma^i_kj + Gamma^i_km "
               "Gamma^m_lj - Gamma^i_lm Gamma^m_kj; "
               "(R(u,v)w)^i = R^i_jkl w^j u^k v^l")


@dataclass
class RiemannAt:
    """The curvature tensor at a point.

    ``R_up[i,j,k,l]`` holds R^i_{jkl}; ``R_down`` lowers the first index
    with the metric.  ``convention`` records the index/pairing choice so
    downstream comparisons are unambiguous.
    """

    x: np.ndarray
    g: np.ndarray
    R_up: np.ndarray
    R_down: np.ndarray
    convention: str = _CONVENTION

    def operator(self, u, v):
        """Matrix of w -> R(u, v) w in coordinate components."""
        return np.einsum('ijkl,k,l->ij', self.R_up, u, v)

    def action(self, u, v, w):
        return np.einsum('ijkl,j,k,l->i', self.R_up, w, u, v)

    def pairing(self, u, v, w, z):
        """g(R(u, v) w, z)."""
        return float(np.einsum('ijkl,i,j,k,l->', self.R_down, z, w, u, v))


def riemann_at(chart: ig.MetricChart, x) -> RiemannAt:
    """Curvature tensor from Christoffel symbols and their derivatives."""
    x = np.asarray(x, dtype=float)
    gamma, dgamma = ig.christoffel_and_grad(chart, x[:, None])
    gamma = gamma[..., 0]
    dgamma = dgamma[..., 0]
    g = chart.g_at(x)
    R = (np.einsum('kilj->ijkl', dgamma) - np.einsum('likj->ijkl', dgamma)
         + np.einsum('ikm,mlj->ijkl', gamma, gamma)
         - np.einsum('ilm,mkj->ijkl', gamma, gamma))
    R_down = np.einsum('im,mjkl->ijkl', g, R)
    return RiemannAt(x, g, R, R_down)


def sectional_at(chart: ig.MetricChart, x, u, v, riem: Optional[RiemannAt]
                 = None) -> float:
    """Sectional curvature of the plane spanned by u and v at x."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if riem is None:
        riem = riemann_at(chart, x)
    g = riem.g
    uu = u @ g @ u
    vv = v @ g @ v
    uv = u @ g @ v
    area2 = uu * vv - uv * uv
    if area2 <= 1e-12 * max(uu * vv, 1e-300):
        raise PreconditionError("sectional curvature needs independent "
                                "directions")
    return riem.pairing(u, v, v, u) / area2


@dataclass
class RicciAt:
    """Ricci form, its g-raised operator, and the scalar curvature."""

    x: np.ndarray
    g: np.ndarray
    rho: np.ndarray
    rho_tilde: np.ndarray
    tau: float


def ricci_at(chart: ig.MetricChart, x, riem: Optional[RiemannAt] = None):
    """Ricci as the trace rho_jl = R^k_{jkl} of the curvature tensor."""
    x = np.asarray(x, dtype=float)
    if riem is None:
        riem = riemann_at(chart, x)
    rho = np.einsum('kjkl->jl', riem.R_up)
    rho_tilde = np.linalg.solve(riem.g, rho)
    return RicciAt(x, riem.g, rho, rho_tilde, float(np.trace(rho_tilde)))


# ---------------------------------------------------------------------------
# oracle 1: parallelogram holonomy
# ---------------------------------------------------------------------------


def riemann_holonomy_oracle(chart: ig.MetricChart, x, u, v,
                            hs=(0.1, 0.05, 0.025, 0.0125), side_samples=24):
    """R(u, v) as a matrix, from holonomy of shrinking parallelograms.

    The loop exp_x of the boundary of the parallelogram spanned by
    (h u, h v), traversed v-side first, transports the coordinate basis to
    sigma(h) = E + h^2 R(u, v) + O(h^3); the quotient is Richardson
    extrapolated over the halving ladder ``hs``.  Parallel u, v give the
    zero operator by convention.  Returns (matrix, error_estimate).
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    n = chart.dim
    g = chart.g_at(x)
    gram = np.array([[u @ g @ u, u @ g @ v], [u @ g @ v, v @ g @ v]])
    if np.linalg.det(gram) <= 1e-12 * max(gram[0, 0] * gram[1, 1], 1e-300):
        return np.zeros((n, n)), 0.0

    mats = []
    for h in hs:
        corners = [np.zeros(n), h * v, h * (u + v), h * u, np.zeros(n)]
        tang = []
        for a, b in zip(corners[:-1], corners[1:]):
            ss = np.linspace(0.0, 1.0, side_samples, endpoint=False)
            tang.append(a[None, :] + ss[:, None] * (b - a)[None, :])
        tang.append(np.zeros((1, n)))
        T = np.vstack(tang)                       # (4 S + 1, n)
        traj = ig._exp_batch(chart, x, T.T)
        pts = traj.final.reshape(len(T), 2, n)[:, 0, :]
        res = ig.parallel_transport(chart, pts, np.eye(n))
        mats.append((res.final - np.eye(n)) / h ** 2)

    out = np.zeros((n, n))
    err = 0.0
    hs_arr = np.array(hs, dtype=float)
    for i in range(n):
        for j in range(n):
            rr = nk.richardson(nk.ExtrapolationLadder(
                hs_arr, np.array([m[i, j] for m in mats]), p=1, stride=1))
            out[i, j] = rr.value
            err = max(err, rr.error)
    return out, err


# ---------------------------------------------------------------------------
# oracle 2: geodesic-cube volumes for the Ricci form
# ---------------------------------------------------------------------------


def _cube_volume_ladder(chart, P, cols, hs, grid):
    """Riemannian volumes of exp_P(h * cols * [0,1]^n) for each h in hs.

    ``cols`` (n, n) spans the cube in tangent coordinates.  One variational
    batch per cube provides exact Jacobians d exp / d xi, so the volume is
    a pure Gauss-Legendre sum, with interior h read off forced mesh nodes.
    """
    n = chart.dim
    hmax = max(hs)
    xs, ws = nk.gauss_legendre(grid, 0.0, 1.0)
    axes = np.meshgrid(*([xs] * n), indexing="ij")
    XI = np.stack([a.ravel() for a in axes])          # (n, grid^n)
    Wgrid = np.ones_like(axes[0])
    for w in np.meshgrid(*([ws] * n), indexing="ij"):
        Wgrid = Wgrid * w
    Wgrid = Wgrid.ravel()

    U = hmax * (cols @ XI)                            # (n, lanes)
    dU = np.repeat((hmax * cols).T[:, :, None], XI.shape[1], axis=2)
    hits = sorted(set(h / hmax for h in hs if h < hmax))
    traj = ig._exp_batch_variational(chart, P, U, dU, must_hit=hits)
    lanes = XI.shape[1]
    out = {}
    for h in hs:
        t = h / hmax
        i = int(np.argmin(np.abs(traj.ts - t)))
        z = traj.ys[i].reshape(lanes, 2 + 2 * n, n)
        xpt = z[:, 0, :].T
        J = np.moveaxis(z[:, 2:2 + n, :], 0, -1)      # (n cols, n, lanes)
        g = chart.g_at(xpt)
        detg = np.linalg.det(np.moveaxis(g, (0, 1), (-2, -1)))
        Jmat = np.moveaxis(J, (0, 1), (-1, -2))       # (lanes, n, n) cols last
        detJ = np.abs(np.linalg.det(Jmat))
        out[h] = float(np.sum(Wgrid * np.sqrt(np.maximum(detg, 0.0)) * detJ))
    return out


def _cube_systems(n):
    """Tangent cubes whose volume defects determine the Ricci form."""
    if n == 2:
        c, s = math.cos(math.pi / 4), math.sin(math.pi / 4)
        return [np.eye(2), np.diag([1.0, -1.0]),
                np.array([[c, -s], [s, c]])]
    c, s = math.cos(math.pi / 4), math.sin(math.pi / 4)
    r12 = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    r23 = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    r13 = np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])
    return [np.eye(3), np.diag([1.0, -1.0, 1.0]), np.diag([1.0, 1.0, -1.0]),
            np.diag([-1.0, 1.0, 1.0]), r12, r23, r13]


def ricci_volume_oracle(chart: ig.MetricChart, x, hs=(0.2, 0.1, 0.05),
                        grid=6):
    """Ricci form from volume defects of small geodesic cubes.

    For a cube spanned by h-scaled orthonormal combinations C, the volume
    satisfies 6 (h^n - V(h)) / h^(n+2) -> integral of rho(C xi, C xi) over
    the unit cube, a known linear functional of the Ricci entries.  Several
    cubes give a full-rank linear system; defects are Richardson
    extrapolated in h before solving.  Returns (rho_matrix, error_estimate).
    """
    x = np.asarray(x, dtype=float)
    n = chart.dim
    E = chart.orthonormal_basis(x)
    hs = sorted(hs, reverse=True)

    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    rows, rhs, errs = [], [], []
    for C in _cube_systems(n):
        vols = _cube_volume_ladder(chart, x, E @ C, hs, grid)
        defect = [6.0 * (h ** n - vols[h]) / h ** (n + 2) for h in hs]
        rr = nk.richardson(nk.ExtrapolationLadder(
            np.array(hs), np.array(defect), p=1, stride=1))
        rhs.append(rr.value)
        errs.append(rr.error)
        # integral of rho_hat(C xi, C xi) over the unit cube: moments
        # E[xi_a xi_b] = 1/3 (a = b) or 1/4 (a != b)
        row = np.zeros(len(pairs))
        for col, (p, q) in enumerate(pairs):
            acc = 0.0
            for a in range(n):
                for b in range(n):
                    mom = (1.0 / 3.0) if a == b else 0.25
                    w = C[p, a] * C[q, b] + (C[q, a] * C[p, b] if p != q
                                             else 0.0)
                    acc += w * mom
            row[col] = acc
        rows.append(row)

    A = np.array(rows)
    b = np.array(rhs)
    vech, *_ = np.linalg.lstsq(A, b, rcond=None)
    rho_hat = np.zeros((n, n))
    for col, (p, q) in enumerate(pairs):
        rho_hat[p, q] = rho_hat[q, p] = vech[col]
    Einv = np.linalg.inv(E)
    rho = Einv.T @ rho_hat @ Einv
    return rho, float(max(errs))


# ---------------------------------------------------------------------------
# jet-valued fields and covariant calculus
# ---------------------------------------------------------------------------


@dataclass
class Field:
    """A tensor field given by a jet evaluator.

    ``fn`` maps a list of coordinate jets to components: a single jet for
    scalars, a list for vectors/covectors, nested lists for bilinear
    forms and (1,1) tensors.  Evaluating through jets keeps fields
    composable under differentiation; each covariant derivative consumes
    one order of the incoming jets.
    """

    kind: str                    # scalar | vector | covector | bilinear | mixed
    fn: Callable
    name: str = ""

    def __call__(self, xj):
        return self.fn(xj)

    def at(self, x, order=0):
        x = np.asarray(x, dtype=float)
        return self.fn(list(Jet.variables(x, max(order, 1))))


def _vals(obj):
    if isinstance(obj, Jet):
        return obj.value
    return np.array([_vals(o) for o in obj])


def field_values(field: Field, x, order=1):
    """Component values of a field at a point (plain arrays)."""
    return _vals(field.at(np.asarray(x, dtype=float), order=order))


def _align(jets):
    """Truncate a collection of jets to the smallest order among them."""
    m = min(j.order for j in jets)
    return [nk.truncate(j, m) for j in jets]


def _inv_jet_matrix(g):
    """Inverse of a 2x2 or 3x3 jet matrix via the adjugate."""
    n = len(g)
    if n == 2:
        det = g[0][0] * g[1][1] - g[0][1] * g[1][0]
        inv = det.reciprocal()
        return [[g[1][1] * inv, -(g[0][1] * inv)],
                [-(g[1][0] * inv), g[0][0] * inv]]
    a, b, c = g[0]
    d, e, f = g[1]
    gg, h, i = g[2]
    A = e * i - f * h
    B = -(d * i - f * gg)
    C = d * h - e * gg
    det = a * A + b * B + c * C
    inv = det.reciprocal()
    D = -(b * i - c * h)
    E = a * i - c * gg
    F = -(a * h - b * gg)
    G = b * f - c * e
    H = -(a * f - c * d)
    I = a * e - b * d
    return [[A * inv, D * inv, G * inv],
            [B * inv, E * inv, H * inv],
            [C * inv, F * inv, I * inv]]


def christoffel_jets(chart: ig.MetricChart, xj):
    """Christoffel symbols as jets, one order below the metric entries."""
    n = chart.dim
    rows = chart._gfn(list(xj))
    gj = []
    for i in range(n):
        row = []
        for j in range(n):
            e = rows[i][j]
            if not isinstance(e, Jet):
                e = xj[0]._like_const(np.asarray(e, dtype=float)
                                      * np.ones_like(xj[0].coef[0]))
            row.append(e)
        gj.append(row)
    m = min(gj[i][j].order for i in range(n) for j in range(n)) - 1
    dg = [[[nk.truncate(nk.derivative_nd(gj[i][j], k), m)
            for j in range(n)] for i in range(n)] for k in range(n)]
    gtr = [[nk.truncate(gj[i][j], m) for j in range(n)] for i in range(n)]
    ginv = _inv_jet_matrix(gtr)
    gamma = []
    for k in range(n):
        mat = []
        for i in range(n):
            row = []
            for j in range(n):
                acc = None
                for l in range(n):
                    term = ginv[k][l] * (dg[i][l][j] + dg[j][l][i]
                                         - dg[l][i][j])
                    acc = term if acc is None else acc + term
                row.append(acc * 0.5)
            mat.append(row)
        gamma.append(mat)
    return gamma                                   # [k][i][j]


def commutator(X: Field, Y: Field) -> Field:
    """Lie bracket [X, Y]^i = X^j d_j Y^i - Y^j d_j X^i of vector fields."""
    if X.kind != "vector" or Y.kind != "vector":
        raise PreconditionError("commutator takes vector fields")

    def fn(xj):
        n = len(xj)
        Xc = X.fn(list(xj))
        Yc = Y.fn(list(xj))
        m = min(c.order for c in list(Xc) + list(Yc)) - 1
        out = []
        for i in range(n):
            acc = None
            for j in range(n):
                t = (nk.truncate(Xc[j], m) * nk.truncate(
                    nk.derivative_nd(Yc[i], j), m)
                    - nk.truncate(Yc[j], m) * nk.truncate(
                        nk.derivative_nd(Xc[i], j), m))
                acc = t if acc is None else acc + t
            out.append(acc)
        return out

    return Field("vector", fn, name=f"[{X.name},{Y.name}]")


def covariant_derivative(chart: ig.MetricChart, field: Field) -> Field:
    """Covariant derivative; the extra (last) index is the direction.

    Layouts: scalar -> covector (d_j f); vector -> mixed T^i_j; covector
    -> bilinear T_ij = d_j phi_i - Gamma^k_ij phi_k; bilinear ->
    T_ijk = d_k b_ij - Gamma^l_ki b_lj - Gamma^l_kj b_il.
    """
    n = chart.dim

    if field.kind == "scalar":
        def fn(xj):
            f = field.fn(list(xj))
            return [nk.derivative_nd(f, j) for j in range(n)]
        return Field("covector", fn, name=f"grad {field.name}")

    if field.kind == "vector":
        def fn(xj):
            v = field.fn(list(xj))
            gamma = christoffel_jets(chart, xj)
            m = min(min(c.order for c in v) - 1, gamma[0][0][0].order)
            vt = [nk.truncate(c, m) for c in v]
            out = []
            for i in range(n):
                row = []
                for j in range(n):
                    acc = nk.truncate(nk.derivative_nd(v[i], j), m)
                    for k in range(n):
                        acc = acc + nk.truncate(gamma[i][k][j], m) * vt[k]
                    row.append(acc)
                out.append(row)
            return out
        return Field("mixed", fn, name=f"nabla {field.name}")

    if field.kind == "covector":
        def fn(xj):
            ph = field.fn(list(xj))
            gamma = christoffel_jets(chart, xj)
            m = min(min(c.order for c in ph) - 1, gamma[0][0][0].order)
            pt = [nk.truncate(c, m) for c in ph]
            out = []
            for i in range(n):
                row = []
                for j in range(n):
                    acc = nk.truncate(nk.derivative_nd(ph[i], j), m)
                    for k in range(n):
                        acc = acc - nk.truncate(gamma[k][i][j], m) * pt[k]
                    row.append(acc)
                out.append(row)
            return out
        return Field("bilinear", fn, name=f"nabla {field.name}")

    if field.kind == "bilinear":
        def fn(xj):
            b = field.fn(list(xj))
            gamma = christoffel_jets(chart, xj)
            m = min(min(b[i][j].order for i in range(n) for j in range(n))
                    - 1, gamma[0][0][0].order)
            bt = [[nk.truncate(b[i][j], m) for j in range(n)]
                  for i in range(n)]
            out = []
            for i in range(n):
                mat = []
                for j in range(n):
                    row = []
                    for k in range(n):
                        acc = nk.truncate(nk.derivative_nd(b[i][j], k), m)
                        for l in range(n):
                            acc = acc - nk.truncate(gamma[l][k][i], m) \
                                * bt[l][j]
                            acc = acc - nk.truncate(gamma[l][k][j], m) \
                                * bt[i][l]
                        row.append(acc)
                    mat.append(row)
                out.append(mat)
            return out
        return Field("trilinear", fn, name=f"nabla {field.name}")

    raise PreconditionError(f"cannot differentiate field kind {field.kind}")


def directional(chart: ig.MetricChart, X: Field, field: Field) -> Field:
    """nabla_X of a scalar or vector field, as a field."""
    n = chart.dim
    D = covariant_derivative(chart, field)

    if field.kind == "scalar":
        def fn(xj):
            d = D.fn(list(xj))
            Xc = X.fn(list(xj))
            js = _align(list(d) + list(Xc))
            acc = None
            for j in range(n):
                t = js[n + j] * js[j]
                acc = t if acc is None else acc + t
            return acc
        return Field("scalar", fn, name=f"D_{X.name} {field.name}")

    if field.kind == "vector":
        def fn(xj):
            d = D.fn(list(xj))            # T^i_j
            Xc = X.fn(list(xj))
            m = min(d[0][0].order, min(c.order for c in Xc))
            out = []
            for i in range(n):
                acc = None
                for j in range(n):
                    t = nk.truncate(d[i][j], m) * nk.truncate(Xc[j], m)
                    acc = t if acc is None else acc + t
                out.append(acc)
            return out
        return Field("vector", fn, name=f"D_{X.name} {field.name}")

    raise PreconditionError("directional derivative supports scalar and "
                            "vector fields")


def metric_field(chart: ig.MetricChart) -> Field:
    """The metric itself as a bilinear field."""

    def fn(xj):
        n = chart.dim
        rows = chart._gfn(list(xj))
        out = []
        for i in range(n):
            row = []
            for j in range(n):
                e = rows[i][j]
                if not isinstance(e, Jet):
                    e = xj[0]._like_const(np.asarray(e, dtype=float)
                                          * np.ones_like(xj[0].coef[0]))
                row.append(e)
            out.append(row)
        return out

    return Field("bilinear", fn, name="g")


def exterior_derivative(phi: Field) -> Field:
    """(d phi)_ij = d_i phi_j - d_j phi_i, no combinatorial factor."""
    if phi.kind != "covector":
        raise PreconditionError("exterior derivative here takes covectors")

    def fn(xj):
        n = len(xj)
        p = phi.fn(list(xj))
        m = min(c.order for c in p) - 1
        out = []
        for i in range(n):
            row = []
            for j in range(n):
                row.append(nk.truncate(nk.derivative_nd(p[j], i), m)
                           - nk.truncate(nk.derivative_nd(p[i], j), m))
            out.append(row)
        return out

    return Field("bilinear", fn, name=f"d {phi.name}")


def alt_of_nabla(chart: ig.MetricChart, phi: Field) -> Field:
    """Antisymmetrization of nabla phi; equals d phi by Gamma symmetry."""
    D = covariant_derivative(chart, phi)

    def fn(xj):
        n = len(xj)
        t = D.fn(list(xj))
        return [[t[j][i] - t[i][j] for j in range(n)] for i in range(n)]

    return Field("bilinear", fn, name=f"alt nabla {phi.name}")


def potential_on_box(phi: Field, box, base=None, tol=1e-10):
    """A potential for a closed covector field on a coordinate box.

    Integrates phi first along the x-axis from the base corner, then along
    each remaining axis.  If phi is exact (d phi = 0), the gradient of the
    result reproduces phi; the caller checks that.  Returns a scalar
    callable f(x).
    """
    n = len(box)
    base = np.array([lo for lo, hi in box]) if base is None else \
        np.asarray(base, dtype=float)

    def comp(k, x):
        def f(s):
            pt = x.copy()
            pt[k] = s
            # order 2 leaves headroom for phi being itself a derived field
            jets = list(Jet.variables(pt, 2))
            return float(phi.fn(jets)[k].value)
        return f

    def f(x):
        x = np.asarray(x, dtype=float)
        total = 0.0
        cur = base.copy()
        for k in range(n):
            if abs(x[k] - cur[k]) > 0:
                val, _ = nk.quadrature(comp(k, np.where(
                    np.arange(n) > k, base, x).astype(float)), cur[k], x[k],
                    tol=tol)
                total += val
            cur[k] = x[k]
        return total

    return f


def second_bianchi_residual(chart: ig.MetricChart, x, step=1e-3):
    """Max residual of the cyclic identity for the covariant derivative of R.

    nabla_m R^i_jkl is built from central differences of :func:`riemann_at`
    (the one finite-difference step in this module, by design) plus the
    exact Christoffel correction terms; the residual of

        nabla_m R^i_jkl + nabla_k R^i_jlm + nabla_l R^i_jmk = 0

    is returned relative to the largest component of nabla R.
    """
    x = np.asarray(x, dtype=float)
    n = chart.dim
    R0 = riemann_at(chart, x)
    gamma = ig.christoffel_at(chart, x[:, None])[..., 0]

    dR = np.zeros((n, n, n, n, n))
    for m in range(n):
        e = np.zeros(n)
        e[m] = step
        Rp = riemann_at(chart, x + e).R_up
        Rm = riemann_at(chart, x - e).R_up
        dR[m] = (Rp - Rm) / (2 * step)

    R = R0.R_up
    # nabla_m R^i_jkl = d_m R + Gamma^i_am R^a_jkl - Gamma^a_jm R^i_akl
    #                   - Gamma^a_km R^i_jal - Gamma^a_lm R^i_jka
    nab = (dR
           + np.einsum('iam,ajkl->mijkl', gamma, R)
           - np.einsum('ajm,iakl->mijkl', gamma, R)
           - np.einsum('akm,ijal->mijkl', gamma, R)
           - np.einsum('alm,ijka->mijkl', gamma, R))
    # cyclic in (m, k, l): add nabla_k R^i_jlm and nabla_l R^i_jmk
    term2 = np.einsum('kijlm->mijkl', nab)
    term3 = np.einsum('lijmk->mijkl', nab)
    resid = nab + term2 + term3
    # locally symmetric spaces have nabla R = 0, so guard the scale with
    # the tensor magnitude itself
    scale = max(np.abs(nab).max(), np.abs(R).max(), 1e-300)
    return float(np.abs(resid).max() / scale), float(np.abs(nab).max())
