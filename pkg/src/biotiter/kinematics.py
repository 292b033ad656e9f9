"""Finite-strain tensor algebra for the Saint Venant-Kirchhoff poroelastic solid.

All functions accept stacks of matrices with shape (..., d, d). The
displacement gradient convention is ``G[i, j] = d u_i / d X_j``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: quadrature points with J at or below this value abort the iteration
J_MIN = 0.05


class NonInvertibleDeformation(ValueError):
    """Raised for a singular deformation gradient."""


class ElementInversion(RuntimeError):
    """Raised when the deformation gradient of a cell is (nearly) inverted."""

    def __init__(self, cell: int, J: float):
        super().__init__(f"element inversion in cell {cell}: J = {J:.6g} <= {J_MIN}")
        self.cell = cell
        self.J = J


def _eye(a):
    d = a.shape[-1]
    return np.broadcast_to(np.eye(d), a.shape)


def _T(a):
    return np.swapaxes(a, -1, -2)


def _tr(a):
    return np.trace(a, axis1=-2, axis2=-1)


def _inv(F):
    J = np.linalg.det(F)
    if np.any(np.abs(J) < 1e-300) or not np.all(np.isfinite(J)):
        raise NonInvertibleDeformation("non-invertible deformation gradient")
    return np.linalg.inv(F), J


@dataclass
class KinematicPoint:
    grad_u: np.ndarray
    F: np.ndarray
    J: np.ndarray
    E: np.ndarray

    @classmethod
    def from_grad(cls, grad_u) -> "KinematicPoint":
        F = deformation_gradient(grad_u)
        return cls(np.asarray(grad_u, float), F, np.linalg.det(F), green_strain(F))


def deformation_gradient(grad_u) -> np.ndarray:
    grad_u = np.asarray(grad_u, dtype=float)
    return _eye(grad_u) + grad_u


def green_strain(F) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    return 0.5 * (_T(F) @ F - _eye(F))


def green_strain_from_grad(grad_u) -> np.ndarray:
    G = np.asarray(grad_u, dtype=float)
    return 0.5 * (G + _T(G) + _T(G) @ G)


def svk_stress(E, mu, c) -> np.ndarray:
    """Effective second Piola-Kirchhoff stress ``2 mu E + c(tr E) I``."""
    E = np.asarray(E, dtype=float)
    return 2.0 * mu * E + np.asarray(c(_tr(E)))[..., None, None] * _eye(E)


def total_stresses(F, sigma_eff, p):
    """Total second and first Piola-Kirchhoff stresses.

    ``Sigma = Sigma_eff - p J F^-1 F^-T`` and ``Pi = F Sigma``.
    """
    F = np.asarray(F, dtype=float)
    Finv, J = _inv(F)
    p = np.asarray(p, dtype=float)
    Sigma = sigma_eff - (p * J)[..., None, None] * (Finv @ _T(Finv))
    return Sigma, F @ Sigma


def pullback_permeability(F, k=1.0) -> np.ndarray:
    """``K = J F^-1 k F^-T``; scalar ``k`` means ``k I``."""
    F = np.asarray(F, dtype=float)
    Finv, J = _inv(F)
    kk = np.asarray(k, dtype=float)
    if kk.ndim == 0 or kk.shape[-2:] != F.shape[-2:]:
        kk = kk[..., None, None] * _eye(F)
    return J[..., None, None] * (Finv @ kk @ _T(Finv))


def inverse_pullback_permeability(F, k=1.0) -> np.ndarray:
    """``K^-1 = F^T k^-1 F / J``."""
    F = np.asarray(F, dtype=float)
    J = np.linalg.det(F)
    if np.any(np.abs(J) < 1e-300):
        raise NonInvertibleDeformation("non-invertible deformation gradient")
    kk = np.asarray(k, dtype=float)
    if kk.ndim == 0 or kk.shape[-2:] != F.shape[-2:]:
        kinv = (1.0 / kk)[..., None, None] * _eye(F)
    else:
        kinv = np.linalg.inv(kk)
    return (_T(F) @ kinv @ F) / J[..., None, None]


def fluid_content_rate_coeffs(F, c_p, phi, c_alpha=1.0):
    """Coefficients of the pressure rate and of the volume rate in the content rate.

    Returns ``(c_p J phi, c_alpha)``; the backward-Euler increment is
    ``c_p J phi (p - p_old) + c_alpha (J - J_old)``.
    """
    J = np.linalg.det(np.asarray(F, dtype=float))
    return c_p * J * phi, c_alpha


def gravity_pullback(F, g) -> np.ndarray:
    """``Upsilon = F^T g``."""
    return np.einsum("...ji,...j->...i", np.asarray(F, float), np.asarray(g, float))


def directional_derivatives(grad_u, p, d_grad_u, dp, mu, c, dc, k=1.0):
    """Gateaux derivatives of Pi, K and J along (d_grad_u, dp).

    Returns ``(dPi, dK, dJ)``.
    """
    F = deformation_gradient(grad_u)
    dF = np.asarray(d_grad_u, dtype=float)
    Finv, J = _inv(F)
    p = np.asarray(p, dtype=float)
    dp = np.asarray(dp, dtype=float)

    E = green_strain(F)
    dE = 0.5 * (_T(dF) @ F + _T(F) @ dF)
    trE = _tr(E)
    S_eff = svk_stress(E, mu, c)
    dS_eff = 2.0 * mu * dE + (np.asarray(dc(trE)) * _tr(dE))[..., None, None] * _eye(E)

    cof = J[..., None, None] * _T(Finv)  # J F^-T
    trFinvdF = _tr(Finv @ dF)
    dJ = J * trFinvdF
    dcof = dJ[..., None, None] * _T(Finv) - J[..., None, None] * (_T(Finv) @ _T(dF) @ _T(Finv))

    # Pi = F S_eff - p J F^-T
    dPi = dF @ S_eff + F @ dS_eff - p[..., None, None] * dcof - dp[..., None, None] * cof

    kk = np.asarray(k, dtype=float)
    if kk.ndim == 0 or kk.shape[-2:] != F.shape[-2:]:
        kk = kk[..., None, None] * _eye(F)
    K = J[..., None, None] * (Finv @ kk @ _T(Finv))
    dFinv = -Finv @ dF @ Finv
    dK = trFinvdF[..., None, None] * K + J[..., None, None] * (dFinv @ kk @ _T(Finv) + Finv @ kk @ _T(dFinv))
    return dPi, dK, dJ


def small_strain_stress(grad_u, p, mu, alpha, c) -> np.ndarray:
    """``2 mu eps(u) + c(div u) I - alpha p I``."""
    G = np.asarray(grad_u, dtype=float)
    eps = 0.5 * (G + _T(G))
    return 2.0 * mu * eps + (np.asarray(c(_tr(G))) - alpha * np.asarray(p, float))[..., None, None] * _eye(G)


def check_admissible(J) -> None:
    """Raise :class:`ElementInversion` on the first cell with ``J <= J_MIN``."""
    J = np.asarray(J)
    bad = np.flatnonzero(~(J > J_MIN))
    if bad.size:
        raise ElementInversion(int(bad[0]), float(J[bad[0]]))
