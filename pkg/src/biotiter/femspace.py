"""P1 displacement, lowest-order Raviart-Thomas flux and P0 pressure spaces.

The flux degree of freedom on an edge is the integral of the normal component
over that edge, taken against the edge's global normal. With that choice the
divergence of a basis field on a cell is ``sign / |K|``, so the discrete
``(div q, w)`` pairing carries no quadrature or mesh-size factor.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on the reference triangle (0,0), (1,0), (0,1).

    ``points`` are barycentric coordinates (n, 3); weights sum to 1/2.
    """

    points: np.ndarray
    weights: np.ndarray
    order: int

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, 1:]


def _sym_points(*orbits):
    pts, wts = [], []
    for kind, w, *abc in orbits:
        if kind == "s3":
            pts.append((1 / 3, 1 / 3, 1 / 3))
            wts.append(w)
        elif kind == "s21":
            a = abc[0]
            b = 1.0 - 2.0 * a
            for p in ((a, a, b), (a, b, a), (b, a, a)):
                pts.append(p)
                wts.append(w)
    return np.array(pts), 0.5 * np.array(wts)


_DUNAVANT_4 = _sym_points(
    ("s21", 0.223381589678011, 0.445948490915965),
    ("s21", 0.109951743655322, 0.091576213509771),
)
_DUNAVANT_2 = _sym_points(("s21", 1 / 3, 1 / 6))
_CENTROID = _sym_points(("s3", 1.0))


def quadrature(order: int = 4) -> QuadratureRule:
    """Positive-weight rule exact for polynomials of degree ``order`` (1..4).

    Orders 3 and 4 share the 6-point Dunavant rule.
    """
    if order == 1:
        pts, w = _CENTROID
    elif order == 2:
        pts, w = _DUNAVANT_2
    elif order in (3, 4):
        pts, w = _DUNAVANT_4
    else:
        raise ValueError(f"unsupported quadrature order {order}; choose 1..4")
    return QuadratureRule(pts.copy(), w.copy(), order)


# Gauss-Legendre on [0, 1], exact to degree 5, for edge integrals.
_GL_T = 0.5 * (1.0 + np.array([-np.sqrt(3 / 5), 0.0, np.sqrt(3 / 5)]))
_GL_W = 0.5 * np.array([5 / 9, 8 / 9, 5 / 9])


def _check_geometry(coords):
    coords = np.asarray(coords, dtype=float)
    a = coords[..., 1, :] - coords[..., 0, :]
    b = coords[..., 2, :] - coords[..., 0, :]
    area = 0.5 * (a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0])
    if np.any(np.abs(area) <= 1e-14 * np.maximum(1.0, np.sum(a * a, axis=-1))):
        raise ValueError("degenerate (zero-area) cell")
    return coords, area


def eval_p1_basis(coords, points=None):
    """Hat functions of a triangle.

    Parameters
    ----------
    coords : (3, 2) vertex coordinates (or (nc, 3, 2))
    points : barycentric evaluation points (n, 3); defaults to the vertices

    Returns
    -------
    values : (n, 3) hat values at ``points``
    grads : (3, 2) constant gradients (or (nc, 3, 2))
    """
    coords, area = _check_geometry(coords)
    B = np.stack([coords[..., 1, :] - coords[..., 0, :], coords[..., 2, :] - coords[..., 0, :]], axis=-1)
    Binv = np.linalg.inv(B)  # rows are grad(lambda_1), grad(lambda_2)
    g12 = Binv
    g0 = -g12.sum(axis=-2, keepdims=True)
    grads = np.concatenate([g0, g12], axis=-2)
    if points is None:
        points = np.eye(3)
    return np.asarray(points, dtype=float).copy(), grads


def eval_rt0_basis(coords, points, signs=(1.0, 1.0, 1.0)):
    """Lowest-order Raviart-Thomas fields of a triangle.

    Field i belongs to the edge opposite vertex i and equals
    ``sign_i (x - x_i) / (2 |K|)``: unit outward flux through its own edge,
    zero through the other two.

    Returns
    -------
    values : (n, 3, 2) field values at the barycentric ``points``
    divergence : (3,) constant divergences ``sign_i / |K|``
    """
    coords, area = _check_geometry(coords)
    if area <= 0:
        raise ValueError("cell must be positively oriented")
    signs = np.asarray(signs, dtype=float)
    x = np.asarray(points, dtype=float) @ coords  # (n, 2)
    vals = (x[:, None, :] - coords[None, :, :]) / (2.0 * area)
    vals = vals * signs[None, :, None]
    return vals, signs / area


def edge_flux(coords, field_values_fn, edge: int) -> float:
    """Integral of ``f . n_out`` over local edge ``edge`` (opposite that vertex)."""
    coords = np.asarray(coords, dtype=float)
    p0 = coords[(edge + 1) % 3]
    p1 = coords[(edge + 2) % 3]
    d = p1 - p0
    n = np.array([d[1], -d[0]])  # |n| = edge length; outward for ccw cells
    pts = p0[None, :] + _GL_T[:, None] * d[None, :]
    f = np.asarray(field_values_fn(pts[:, 0], pts[:, 1]))
    return float(np.sum(_GL_W * (f[0] * n[0] + f[1] * n[1])))


class SpaceTriple:
    """Degree-of-freedom layout of the three-field discretisation.

    Global vector ordering is ``[u (2 per vertex, interleaved), q (1 per
    edge), p (1 per cell)]``.
    """

    def __init__(self, mesh: Mesh, quad_order: int = 4):
        self.mesh = mesh
        self.quad = quadrature(quad_order)
        self.n_u = 2 * mesh.n_vertices
        self.n_q = mesh.n_edges
        self.n_p = mesh.n_cells
        self.n = self.n_u + self.n_q + self.n_p
        self.u_slice = slice(0, self.n_u)
        self.q_slice = slice(self.n_u, self.n_u + self.n_q)
        self.p_slice = slice(self.n_u + self.n_q, self.n)

        coords = mesh.cell_coords
        self.areas = mesh.areas
        _, self.grads = eval_p1_basis(coords)  # (nc, 3, 2)
        self.signs = mesh.cell_edge_signs  # (nc, 3)
        # u dofs per cell: (nc, 3, 2) -> 2*vertex + component
        self.u_dofs = 2 * mesh.cells[:, :, None] + np.arange(2)[None, None, :]
        self.q_dofs = self.n_u + mesh.cell_edges
        self.p_dofs = self.n_u + self.n_q + np.arange(mesh.n_cells)

    # -- quadrature helpers --------------------------------------------------

    @cached_property
    def quad_points(self) -> np.ndarray:
        """(nc, nq, 2) physical quadrature points."""
        return np.einsum("qa,cad->cqd", self.quad.points, self.mesh.cell_coords)

    @cached_property
    def quad_weights(self) -> np.ndarray:
        """(nc, nq) physical weights (reference weights times 2|K|)."""
        return 2.0 * self.areas[:, None] * self.quad.weights[None, :]

    @cached_property
    def rt_values(self) -> np.ndarray:
        """(nc, nq, 3, 2) signed RT0 basis values at quadrature points."""
        X = self.quad_points
        coords = self.mesh.cell_coords
        vals = (X[:, :, None, :] - coords[:, None, :, :]) / (2.0 * self.areas[:, None, None, None])
        return vals * self.signs[:, None, :, None]

    @cached_property
    def rt_moments(self) -> np.ndarray:
        """(nc, 3, 3, 2, 2) integrals of phi_i[m] * phi_j[n] over each cell."""
        phi = self.rt_values
        return np.einsum("cq,cqim,cqjn->cijmn", self.quad_weights, phi, phi)

    @cached_property
    def rt_means(self) -> np.ndarray:
        """(nc, 3, 2) integrals of each signed RT0 field over its cell."""
        c = self.mesh.centroids
        coords = self.mesh.cell_coords
        return 0.5 * (c[:, None, :] - coords) * self.signs[:, :, None]

    # -- field evaluation ----------------------------------------------------

    def cell_grad_u(self, u: np.ndarray) -> np.ndarray:
        """(nc, 2, 2) displacement gradients, G[c, i, j] = d u_i / d x_j."""
        U = u[self.u_dofs]  # (nc, 3, 2) nodal values
        return np.einsum("cai,caj->cij", U, self.grads)

    def cell_div_u(self, u: np.ndarray) -> np.ndarray:
        G = self.cell_grad_u(u)
        return G[:, 0, 0] + G[:, 1, 1]

    def cell_div_q(self, q: np.ndarray) -> np.ndarray:
        return np.einsum("ci,ci->c", self.signs, q[self.mesh.cell_edges]) / self.areas

    def eval_u(self, u: np.ndarray) -> np.ndarray:
        """(nc, nq, 2) displacement at quadrature points."""
        U = u[self.u_dofs]
        return np.einsum("qa,cai->cqi", self.quad.points, U)

    def eval_q(self, q: np.ndarray) -> np.ndarray:
        """(nc, nq, 2) flux at quadrature points."""
        return np.einsum("cqim,ci->cqm", self.rt_values, q[self.mesh.cell_edges])

    # -- interpolation -------------------------------------------------------

    def interpolate_u(self, fn) -> np.ndarray:
        """Nodal P1 interpolant of ``fn(x, y) -> (ux, uy)``."""
        x, y = self.mesh.vertices.T
        ux, uy = fn(x, y)
        out = np.empty(self.n_u)
        out[0::2] = np.broadcast_to(ux, x.shape)
        out[1::2] = np.broadcast_to(uy, x.shape)
        return out

    def interpolate_q(self, fn) -> np.ndarray:
        """RT0 interpolant: normal flux integrals of ``fn(x, y) -> (qx, qy)``."""
        mesh = self.mesh
        p0 = mesh.vertices[mesh.edges[:, 0]]
        d = mesh.vertices[mesh.edges[:, 1]] - p0
        length = np.hypot(d[:, 0], d[:, 1])
        pts = p0[:, None, :] + _GL_T[None, :, None] * d[:, None, :]
        fx, fy = fn(pts[..., 0], pts[..., 1])
        n = mesh.edge_normals
        fn_n = np.broadcast_to(fx, pts.shape[:2]) * n[:, 0:1] + np.broadcast_to(fy, pts.shape[:2]) * n[:, 1:2]
        return length * (fn_n @ _GL_W)

    def interpolate_p(self, fn) -> np.ndarray:
        """Cell averages of a scalar field."""
        X = self.quad_points
        vals = np.broadcast_to(fn(X[..., 0], X[..., 1]), X.shape[:2])
        return np.einsum("cq,cq->c", self.quad_weights, vals) / self.areas

    # -- mass matrices for the discrete L2 norms ----------------------------

    @cached_property
    def mass_u(self) -> sp.csr_matrix:
        lam = self.quad.points
        local = np.einsum("cq,qa,qb->cab", self.quad_weights, lam, lam)  # scalar P1
        nc = self.mesh.n_cells
        rows, cols, vals = [], [], []
        for comp in range(2):
            d = self.u_dofs[:, :, comp]
            rows.append(np.repeat(d, 3, axis=1).ravel())
            cols.append(np.tile(d, (1, 3)).ravel())
            vals.append(local.reshape(nc, 9).ravel())
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.n_u, self.n_u)
        )

    @cached_property
    def mass_q(self) -> sp.csr_matrix:
        local = np.einsum("cijmm->cij", self.rt_moments)
        e = self.mesh.cell_edges
        rows = np.repeat(e, 3, axis=1).ravel()
        cols = np.tile(e, (1, 3)).ravel()
        return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(self.n_q, self.n_q))

    def norm_u(self, u: np.ndarray) -> float:
        return float(np.sqrt(max(u @ (self.mass_u @ u), 0.0)))

    def norm_q(self, q: np.ndarray) -> float:
        return float(np.sqrt(max(q @ (self.mass_q @ q), 0.0)))

    def norm_p(self, p: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.areas * p * p)))

    # -- errors against closed-form fields ----------------------------------

    def error_p(self, p: np.ndarray, fn) -> float:
        X = self.quad_points
        diff = p[:, None] - fn(X[..., 0], X[..., 1])
        return float(np.sqrt(np.einsum("cq,cq->", self.quad_weights, diff * diff)))

    def error_u(self, u: np.ndarray, fn) -> float:
        X = self.quad_points
        ux, uy = fn(X[..., 0], X[..., 1])
        uh = self.eval_u(u)
        diff2 = (uh[..., 0] - ux) ** 2 + (uh[..., 1] - uy) ** 2
        return float(np.sqrt(np.einsum("cq,cq->", self.quad_weights, diff2)))

    def error_q(self, q: np.ndarray, fn) -> float:
        X = self.quad_points
        qx, qy = fn(X[..., 0], X[..., 1])
        qh = self.eval_q(q)
        diff2 = (qh[..., 0] - qx) ** 2 + (qh[..., 1] - qy) ** 2
        return float(np.sqrt(np.einsum("cq,cq->", self.quad_weights, diff2)))
