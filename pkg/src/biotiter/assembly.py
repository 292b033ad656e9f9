"""Residuals and linearised block systems for the three-field Biot problem.

Unknowns are ordered ``[u, q, p]`` (see :class:`~biotiter.femspace.SpaceTriple`).
The discrete residuals tested against the nodal/edge/cell bases are

* mechanics: ``(Pi(grad u, p), grad v) - (rho_b g + f, v)``
* Darcy: ``(K(u)^-1 q, z) - (p, div z) - (rho_f Upsilon, z)``
* mass: ``(Gamma^n - Gamma^{n-1}, w) + tau (div q, w) - tau (S_f, w)``

with ``Pi``, ``K`` and the content increment taken from the small- or the
large-deformation constitutive law. Because displacement gradients and
pressures are constant on each cell, every nonlinear quantity is a per-cell
constant and the Jacobians are assembled exactly.

Dirichlet displacement rows are replaced by ``u_i - g_i``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import kinematics as kin
from .femspace import SpaceTriple
from .mesh import Mesh
from .model import MaterialParams, NonlinearityModel

_I2 = np.eye(2)
# UNIT[j, l] is the matrix e_j e_l^T
UNIT = np.einsum("jm,ln->jlmn", _I2, _I2)


class Regime(str, enum.Enum):
    SMALL = "small"
    LARGE = "large"


@dataclass
class DiscreteState:
    u: np.ndarray
    q: np.ndarray
    p: np.ndarray
    t: float = 0.0

    @classmethod
    def zeros(cls, space: SpaceTriple, t: float = 0.0) -> "DiscreteState":
        return cls(np.zeros(space.n_u), np.zeros(space.n_q), np.zeros(space.n_p), t)

    @classmethod
    def from_vector(cls, space: SpaceTriple, x: np.ndarray, t: float = 0.0) -> "DiscreteState":
        x = np.asarray(x, dtype=float)
        if x.shape != (space.n,):
            raise ValueError(f"state vector has length {x.shape}, expected {space.n}")
        return cls(x[space.u_slice].copy(), x[space.q_slice].copy(), x[space.p_slice].copy(), t)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.u, self.q, self.p])

    def copy(self) -> "DiscreteState":
        return DiscreteState(self.u.copy(), self.q.copy(), self.p.copy(), self.t)

    def check(self, space: SpaceTriple) -> None:
        if self.u.shape != (space.n_u,) or self.q.shape != (space.n_q,) or self.p.shape != (space.n_p,):
            raise ValueError("state does not match the discrete spaces")


@dataclass
class DirichletData:
    """Constrained displacement dofs and their values as a function of time."""

    dofs: np.ndarray
    values: Callable[[float], np.ndarray]

    @classmethod
    def homogeneous(cls, dofs) -> "DirichletData":
        dofs = np.asarray(dofs, dtype=np.int64)
        return cls(dofs, lambda t: np.zeros(len(dofs)))


@dataclass
class BlockSystem:
    """Sparse linearised system with named field blocks."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    fields: tuple
    slices: dict

    def block(self, row: str, col: str) -> sp.csr_matrix:
        return self.matrix[self.slices[row], :][:, self.slices[col]]


@dataclass
class CellResponse:
    """Per-cell constitutive quantities at one state."""

    Pi: np.ndarray  # (nc, 2, 2)
    content: np.ndarray  # (nc,) content increment per unit area
    Kinv: np.ndarray  # (nc, 2, 2)
    upsilon: np.ndarray  # (nc, 2)
    A: np.ndarray | None = None  # dPi_ik / dG_jl, (nc, 2, 2, 2, 2)
    dPi_dp: np.ndarray | None = None  # (nc, 2, 2)
    dKinv: np.ndarray | None = None  # dKinv_mn / dG_jl, (nc, 2, 2, 2, 2)
    dcontent_dp: np.ndarray | None = None  # (nc,)
    dcontent_dG: np.ndarray | None = None  # (nc, 2, 2)
    dupsilon: np.ndarray | None = None  # dUps_m / dG_jl, (nc, 2, 2, 2)
    J: np.ndarray | None = None


def small_response(G, p, G_old, p_old, params: MaterialParams, model: NonlinearityModel, tangent=True):
    nc = len(G)
    div = G[:, 0, 0] + G[:, 1, 1]
    div_old = G_old[:, 0, 0] + G_old[:, 1, 1]
    Pi = kin.small_strain_stress(G, p, params.mu, params.alpha, model.c)
    content = model.b(p) - model.b(p_old) + params.alpha * (div - div_old)
    Kinv = np.broadcast_to(_I2 / params.k, (nc, 2, 2))
    g = np.asarray(params.gravity, dtype=float)
    r = CellResponse(Pi, content, Kinv, np.broadcast_to(g, (nc, 2)), J=np.ones(nc))
    if tangent:
        sym = params.mu * (np.einsum("ij,kl->ikjl", _I2, _I2) + np.einsum("il,kj->ikjl", _I2, _I2))
        vol = np.einsum("ik,jl->ikjl", _I2, _I2)
        r.A = sym[None] + np.asarray(model.dc(div))[:, None, None, None, None] * vol[None]
        r.dPi_dp = np.broadcast_to(-params.alpha * _I2, (nc, 2, 2))
        r.dKinv = np.zeros((nc, 2, 2, 2, 2))
        r.dcontent_dp = np.asarray(model.db(p), dtype=float) + 0.0 * p
        r.dcontent_dG = np.broadcast_to(params.alpha * _I2, (nc, 2, 2))
        r.dupsilon = np.zeros((nc, 2, 2, 2))
    return r


def large_response(G, p, G_old, p_old, params: MaterialParams, model: NonlinearityModel, tangent=True):
    F = kin.deformation_gradient(G)
    J = np.linalg.det(F)
    kin.check_admissible(J)
    J_old = np.linalg.det(kin.deformation_gradient(G_old))
    E = kin.green_strain(F)
    S_eff = kin.svk_stress(E, params.mu, model.c)
    _, Pi = kin.total_stresses(F, S_eff, p)
    cpphi = params.c_p * params.phi
    content = cpphi * J * (p - p_old) + params.c_alpha * (J - J_old)
    Kinv = kin.inverse_pullback_permeability(F, params.k)
    g = np.asarray(params.gravity, dtype=float)
    ups = kin.gravity_pullback(F, g)
    r = CellResponse(Pi, content, Kinv, ups, J=J)
    if tangent:
        Finv = np.linalg.inv(F)
        # derivatives along the unit directions e_j e_l^T, shape (nc, j, l, ...)
        dPi, _, dJ = kin.directional_derivatives(
            G[:, None, None], p[:, None, None], UNIT[None], 0.0, params.mu, model.c, model.dc, params.k
        )
        r.A = np.einsum("cjlik->cikjl", dPi)
        r.dPi_dp = -J[:, None, None] * np.swapaxes(Finv, 1, 2)
        dF = UNIT[None]
        Fb = F[:, None, None]
        dC = np.swapaxes(dF, -1, -2) @ Fb + np.swapaxes(Fb, -1, -2) @ dF
        trFinvdF = np.einsum("cmn,jlnm->cjl", Finv, UNIT)
        dKinv = dC / (params.k * J[:, None, None, None, None]) - trFinvdF[..., None, None] * Kinv[:, None, None]
        r.dKinv = np.einsum("cjlmn->cmnjl", dKinv)
        r.dcontent_dp = cpphi * J
        r.dcontent_dG = ((cpphi * (p - p_old) + params.c_alpha) * J)[:, None, None] * np.swapaxes(Finv, 1, 2)
        # Upsilon_m = F_jm g_j
        r.dupsilon = np.broadcast_to(np.einsum("ml,j->mjl", _I2, g), (len(G), 2, 2, 2))
    return r


class BiotProblem:
    """Discretised Biot problem: mesh, spaces, data and boundary conditions."""

    def __init__(
        self,
        mesh: Mesh,
        params: MaterialParams,
        model: NonlinearityModel,
        regime: Regime | str = Regime.SMALL,
        dirichlet: DirichletData | None = None,
        forcing: Callable | None = None,
        quad_order: int = 4,
    ):
        self.mesh = mesh
        self.space = SpaceTriple(mesh, quad_order)
        self.params = params
        self.model = model
        self.regime = Regime(regime)
        if dirichlet is None:
            vb = mesh.boundary_vertices()
            dirichlet = DirichletData.homogeneous(np.sort(np.concatenate([2 * vb, 2 * vb + 1])))
        self.dirichlet = dirichlet
        self.forcing = forcing
        self._forcing_cache: dict = {}
        self._build_pattern()

    def with_regime(self, regime) -> "BiotProblem":
        other = BiotProblem.__new__(BiotProblem)
        other.__dict__.update(self.__dict__)
        other.regime = Regime(regime)
        return other

    # -- helpers --------------------------------------------------------------

    def _build_pattern(self):
        s = self.space
        nc = self.mesh.n_cells
        ud = s.u_dofs.reshape(nc, 6)  # local order (a, i) -> 2a + i
        qd = s.q_dofs
        pd = s.p_dofs[:, None]
        self._ud, self._qd, self._pd = ud, qd, pd

        def pair(r, c):
            return (
                np.repeat(r, c.shape[1], axis=1).ravel(),
                np.tile(c, (1, r.shape[1])).ravel(),
            )

        self._pattern = {
            ("u", "u"): pair(ud, ud),
            ("u", "p"): pair(ud, pd),
            ("q", "u"): pair(qd, ud),
            ("q", "q"): pair(qd, qd),
            ("q", "p"): pair(qd, pd),
            ("p", "u"): pair(pd, ud),
            ("p", "q"): pair(pd, qd),
            ("p", "p"): pair(pd, pd),
        }
        lam = s.quad.points
        # W[c, e, a, m] = integral of phi_e[m] * lambda_a
        self._rt_p1 = np.einsum("cq,cqem,qa->ceam", s.quad_weights, s.rt_values, lam)
        self._p1_int = (self.mesh.areas / 3.0)[:, None]  # integral of each hat
        mask = np.zeros(s.n, dtype=bool)
        mask[self.dirichlet.dofs] = True
        self._dir_mask = mask

    def response(self, state: DiscreteState, prev: DiscreteState, tangent=True, regime=None) -> CellResponse:
        s = self.space
        G = s.cell_grad_u(state.u)
        G_old = s.cell_grad_u(prev.u)
        regime = self.regime if regime is None else Regime(regime)
        fn = small_response if regime is Regime.SMALL else large_response
        return fn(G, state.p, G_old, prev.p, self.params, self.model, tangent)

    def forcing_loads(self, t: float):
        """Load vector of the body force on u dofs and cell integrals of S_f."""
        key = float(t)
        if key in self._forcing_cache:
            return self._forcing_cache[key]
        s = self.space
        nc = self.mesh.n_cells
        if self.forcing is None:
            out = (np.zeros(s.n_u), np.zeros(nc))
        else:
            f, S = self.forcing(t)
            X = s.quad_points
            fx, fy = f(X[..., 0], X[..., 1])
            w = s.quad_weights
            lam = s.quad.points
            loc = np.stack(
                [np.einsum("cq,cq,qa->ca", w, np.broadcast_to(fx, w.shape), lam),
                 np.einsum("cq,cq,qa->ca", w, np.broadcast_to(fy, w.shape), lam)],
                axis=2,
            )
            fu = np.bincount(s.u_dofs.ravel(), weights=loc.ravel(), minlength=s.n_u)
            Sc = np.einsum("cq,cq->c", w, np.broadcast_to(S(X[..., 0], X[..., 1]), w.shape))
            out = (fu, Sc)
        if len(self._forcing_cache) > 8:
            self._forcing_cache.clear()
        self._forcing_cache[key] = out
        return out

    def dirichlet_values(self, t: float) -> np.ndarray:
        return np.asarray(self.dirichlet.values(t), dtype=float)

    # -- residuals ------------------------------------------------------------

    def residual_blocks(self, state, prev, tau, regime=None, response=None):
        """Return ``(F_mech, F_darcy, F_mass)`` at ``state`` for the step from ``prev``."""
        if tau <= 0:
            raise ValueError("time step tau must be positive")
        s = self.space
        state.check(s)
        prev.check(s)
        r = response if response is not None else self.response(state, prev, tangent=False, regime=regime)
        nc = self.mesh.n_cells
        areas = s.areas
        prm = self.params
        g = np.asarray(prm.gravity, dtype=float)

        # mechanics
        loc = areas[:, None, None] * np.einsum("cik,cak->cai", r.Pi, s.grads)
        loc = loc - prm.rho_b * self._p1_int[:, :, None] * g[None, None, :]
        Fu = np.bincount(s.u_dofs.ravel(), weights=loc.ravel(), minlength=s.n_u)
        fu, Sc = self.forcing_loads(state.t)
        Fu -= fu
        d = self.dirichlet.dofs
        Fu[d] = state.u[d] - self.dirichlet_values(state.t)

        # Darcy
        qloc = state.q[self.mesh.cell_edges]
        Mq = np.einsum("cmn,cijmn->cij", r.Kinv, s.rt_moments)
        dl = np.einsum("cij,cj->ci", Mq, qloc) - state.p[:, None] * s.signs
        dl -= prm.rho_f * np.einsum("cm,cim->ci", r.upsilon, s.rt_means)
        Fq = np.bincount(self.mesh.cell_edges.ravel(), weights=dl.ravel(), minlength=s.n_q)

        # mass
        Fp = areas * r.content + tau * np.einsum("ci,ci->c", s.signs, qloc) - tau * Sc
        return Fu, Fq, Fp

    def residual(self, state, prev, tau, regime=None) -> np.ndarray:
        return np.concatenate(self.residual_blocks(state, prev, tau, regime))

    # -- matrices -------------------------------------------------------------

    def _blocks_newton(self, state, r: CellResponse, tau):
        """Per-cell values of all Jacobian blocks."""
        s = self.space
        gr = s.grads
        areas = s.areas
        nc = self.mesh.n_cells
        prm = self.params
        uu = areas[:, None, None, None, None] * np.einsum("cikjl,cak,cbl->caibj", r.A, gr, gr)
        up = areas[:, None, None] * np.einsum("cik,cak->cai", r.dPi_dp, gr)
        Mq = np.einsum("cmn,cijmn->cij", r.Kinv, s.rt_moments)
        qloc = state.q[self.mesh.cell_edges]
        qu = np.einsum("cf,cmnjl,cefmn,cbl->cebj", qloc, r.dKinv, s.rt_moments, gr)
        qu -= prm.rho_f * np.einsum("cmjl,cem,cbl->cebj", r.dupsilon, s.rt_means, gr)
        qp = -s.signs
        pu = areas[:, None, None] * np.einsum("cjl,cbl->cbj", r.dcontent_dG, gr)
        pq = tau * s.signs
        pp = areas * r.dcontent_dp
        return {
            ("u", "u"): uu.reshape(nc, -1),
            ("u", "p"): up.reshape(nc, -1),
            ("q", "u"): qu.reshape(nc, -1),
            ("q", "q"): Mq.reshape(nc, -1),
            ("q", "p"): qp.reshape(nc, -1),
            ("p", "u"): pu.reshape(nc, -1),
            ("p", "q"): pq.reshape(nc, -1),
            ("p", "p"): pp.reshape(nc, -1),
        }

    def divdiv_values(self) -> np.ndarray:
        """Per-cell values of the (div u, div v) matrix in the (u, u) pattern."""
        s = self.space
        nc = self.mesh.n_cells
        return (s.areas[:, None, None, None, None] * np.einsum("cai,cbj->caibj", s.grads, s.grads)).reshape(nc, -1)

    def _to_matrix(self, values: dict, fields, cell_order=None, dirichlet=True) -> sp.csr_matrix:
        s = self.space
        offsets = {}
        pos = 0
        for f in fields:
            offsets[f] = pos
            pos += {"u": s.n_u, "q": s.n_q, "p": s.n_p}[f]
        base = {"u": 0, "q": s.n_u, "p": s.n_u + s.n_q}
        rows, cols, vals = [], [], []
        for (fr, fc), v in values.items():
            if fr not in fields or fc not in fields:
                continue
            r, c = self._pattern[(fr, fc)]
            v = np.asarray(v, dtype=float)
            if cell_order is not None:
                per = len(r) // self.mesh.n_cells
                idx = (np.asarray(cell_order)[:, None] * per + np.arange(per)[None, :]).ravel()
                r, c, v = r[idx], c[idx], v[cell_order]
            v = v.ravel()
            if dirichlet and fr == "u":
                keep = ~self._dir_mask[r]
                r, c, v = r[keep], c[keep], v[keep]
            rows.append(r - base[fr] + offsets[fr])
            cols.append(c - base[fc] + offsets[fc])
            vals.append(v)
        if dirichlet and "u" in fields:
            d = self.dirichlet.dofs + offsets["u"]
            rows.append(d)
            cols.append(d)
            vals.append(np.ones(len(d)))
        A = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(pos, pos)
        ).tocsr()
        A.sum_duplicates()
        return A

    def _slices(self, fields):
        s = self.space
        out, pos = {}, 0
        for f in fields:
            n = {"u": s.n_u, "q": s.n_q, "p": s.n_p}[f]
            out[f] = slice(pos, pos + n)
            pos += n
        return out

    def newton_system(self, state, prev, tau, regime=None, cell_order=None, dirichlet=True) -> BlockSystem:
        r = self.response(state, prev, tangent=True, regime=regime)
        F = self.residual_blocks(state, prev, tau, response=r)
        values = self._blocks_newton(state, r, tau)
        fields = ("u", "q", "p")
        A = self._to_matrix(values, fields, cell_order, dirichlet)
        return BlockSystem(A, -np.concatenate(F), fields, self._slices(fields))

    def lscheme_system(self, state, prev, tau, lin: "LinearizationParams", regime=None) -> BlockSystem:
        """Monolithic L-scheme matrix; only the Darcy block depends on the state."""
        if not lin.L_p > 0:
            raise ValueError("L-scheme requires a positive L_p")
        s = self.space
        r = self.response(state, prev, tangent=False, regime=regime)
        F = self.residual_blocks(state, prev, tau, response=r)
        values = self.lscheme_values(r, tau, lin)
        fields = ("u", "q", "p")
        A = self._to_matrix(values, fields)
        return BlockSystem(A, -np.concatenate(F), fields, self._slices(fields))

    def lscheme_values(self, r: CellResponse, tau, lin: "LinearizationParams") -> dict:
        s = self.space
        gr = s.grads
        areas = s.areas
        nc = self.mesh.n_cells
        uu = areas[:, None, None, None, None] * np.einsum("ikjl,cak,cbl->caibj", lin.tensor_Lu, gr, gr)
        up = areas[:, None, None] * np.einsum("ik,cak->cai", lin.tensor_Lp, gr)
        Mq = np.einsum("cmn,cijmn->cij", r.Kinv, s.rt_moments)
        qu = np.einsum("mj,cebm->cebj", lin.tensor_Lq, self._rt_p1)
        pu = lin.L_u * areas[:, None, None] * gr
        return {
            ("u", "u"): uu.reshape(nc, -1),
            ("u", "p"): up.reshape(nc, -1),
            ("q", "u"): qu.reshape(nc, -1),
            ("q", "q"): Mq.reshape(nc, -1),
            ("q", "p"): -s.signs,
            ("p", "u"): pu.reshape(nc, -1),
            ("p", "q"): tau * s.signs,
            ("p", "p"): (lin.L_p * areas)[:, None],
        }

    def splitting_flow_system(self, state, prev, tau, L_p=None, regime=None) -> BlockSystem:
        """(q, p) system with the displacement frozen at ``state.u``.

        ``L_p=None`` uses the Newton pressure tangent; a number gives the
        L-scheme variant.
        """
        r = self.response(state, prev, tangent=L_p is None, regime=regime)
        Fu, Fq, Fp = self.residual_blocks(state, prev, tau, response=r)
        s = self.space
        areas = s.areas
        pp = areas * (r.dcontent_dp if L_p is None else L_p)
        values = {
            ("q", "q"): np.einsum("cmn,cijmn->cij", r.Kinv, s.rt_moments).reshape(len(areas), -1),
            ("q", "p"): -s.signs,
            ("p", "q"): tau * s.signs,
            ("p", "p"): pp[:, None],
        }
        fields = ("q", "p")
        A = self._to_matrix(values, fields, dirichlet=False)
        return BlockSystem(A, -np.concatenate([Fq, Fp]), fields, self._slices(fields))

    def splitting_mech_system(self, state, prev, tau, L_s=0.0, tensor_Lu=None, regime=None) -> BlockSystem:
        """Displacement system at ``(state.u, state.p)`` stabilised by ``L_s (div du, div v)``.

        ``state.p`` must already hold the pressure from the flow step.
        ``tensor_Lu=None`` uses the exact mechanics tangent.
        """
        if L_s < 0:
            raise ValueError("L_s must be non-negative")
        r = self.response(state, prev, tangent=tensor_Lu is None, regime=regime)
        Fu, _, _ = self.residual_blocks(state, prev, tau, response=r)
        s = self.space
        nc = self.mesh.n_cells
        if tensor_Lu is None:
            uu = s.areas[:, None, None, None, None] * np.einsum("cikjl,cak,cbl->caibj", r.A, s.grads, s.grads)
        else:
            uu = s.areas[:, None, None, None, None] * np.einsum("ikjl,cak,cbl->caibj", tensor_Lu, s.grads, s.grads)
        uu = uu.reshape(nc, -1) + L_s * self.divdiv_values()
        fields = ("u",)
        A = self._to_matrix({("u", "u"): uu}, fields)
        return BlockSystem(A, -Fu, fields, self._slices(fields))

    def divdiv_matrix(self) -> sp.csr_matrix:
        return self._to_matrix({("u", "u"): self.divdiv_values()}, ("u",), dirichlet=False)


@dataclass
class LinearizationParams:
    """Constant L-scheme data.

    ``tensor_Lu`` is a fourth-order tensor acting on displacement gradients,
    ``tensor_Lp`` and ``tensor_Lq`` are d x d, ``L_p`` multiplies the pressure
    increment in the mass row and ``L_u`` the divergence of the displacement
    increment there.
    """

    tensor_Lu: np.ndarray
    tensor_Lp: np.ndarray
    tensor_Lq: np.ndarray
    L_p: float
    L_u: float

    @classmethod
    def from_lipschitz(cls, params: MaterialParams, model: NonlinearityModel) -> "LinearizationParams":
        """Small-deformation choice: L_p = L_b, and L_c replaces c' in the mechanics."""
        sym = params.mu * (np.einsum("ij,kl->ikjl", _I2, _I2) + np.einsum("il,kj->ikjl", _I2, _I2))
        vol = np.einsum("ik,jl->ikjl", _I2, _I2)
        return cls(sym + model.L_c * vol, -params.alpha * _I2, np.zeros((2, 2)), model.L_b, params.alpha)

    @classmethod
    def from_state(cls, problem: BiotProblem, state: DiscreteState, prev: DiscreteState | None = None, regime=None):
        """Exact tangents at a spatially uniform state (first cell is used)."""
        prev = state if prev is None else prev
        r = problem.response(state, prev, tangent=True, regime=regime)
        # the Darcy-displacement coupling is (dK^-1/du q, z); with q = 0 it vanishes
        Lq = np.zeros((2, 2))
        dcdg = r.dcontent_dG[0]
        return cls(
            np.array(r.A[0]),
            np.array(r.dPi_dp[0]),
            Lq,
            float(r.dcontent_dp[0]),
            float(0.5 * np.trace(dcdg)),
        )
