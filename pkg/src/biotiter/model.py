"""Material data, nonlinear coefficient functions and the manufactured solution."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class MaterialParams:
    mu: float = 1.0
    alpha: float = 1.0
    k: float = 1.0
    c_p: float = 1.0
    c_alpha: float = 1.0
    phi: float = 0.5
    rho_b: float = 1.0
    rho_f: float = 1.0
    gravity: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if not self.k > 0:
            raise ValueError("mobility k must be positive")
        if self.c_p < 0:
            raise ValueError("c_p must be non-negative")
        if not 0 < self.phi < 1:
            raise ValueError("porosity must lie in (0, 1)")

    def replace(self, **changes) -> "MaterialParams":
        return replace(self, **changes)


def _sample_bounds(df, lo, hi, n=10001):
    s = np.linspace(lo, hi, n)
    d = df(s)
    return float(np.min(d)), float(np.max(np.abs(d)))


def _lipschitz_of(df, lo, hi, n=10001):
    s = np.linspace(lo, hi, n)
    d = df(s)
    slopes = np.abs(np.diff(d)) / np.diff(s)
    return float(np.max(slopes))


@dataclass(frozen=True)
class NonlinearityModel:
    """The pair b(p), c(xi) with derivatives and sampled structural constants.

    ``alpha_b``/``alpha_c`` are the minima of b', c' over the declared ranges,
    ``L_b``/``L_c`` the Lipschitz constants of b and c themselves (maxima of
    |b'|, |c'|), and ``lipschitz_db``/``lipschitz_dc`` finite-difference
    estimates for the derivatives. ``holder_dc`` flags a c' that is only
    Hoelder continuous.
    """

    name: str
    b: Callable
    db: Callable
    c: Callable
    dc: Callable
    p_range: tuple = (0.0, 0.0625)
    xi_range: tuple = (-0.25, 0.25)
    holder_dc: bool = False
    b_label: str = ""
    c_label: str = ""
    alpha_b: float = field(init=False)
    alpha_c: float = field(init=False)
    L_b: float = field(init=False)
    L_c: float = field(init=False)
    lipschitz_db: float = field(init=False)
    lipschitz_dc: float = field(init=False)

    def __post_init__(self):
        ab, Lb = _sample_bounds(self.db, *self.p_range)
        ac, Lc = _sample_bounds(self.dc, *self.xi_range)
        object.__setattr__(self, "alpha_b", ab)
        object.__setattr__(self, "alpha_c", ac)
        object.__setattr__(self, "L_b", Lb)
        object.__setattr__(self, "L_c", Lc)
        object.__setattr__(self, "lipschitz_db", _lipschitz_of(self.db, *self.p_range))
        object.__setattr__(self, "lipschitz_dc", _lipschitz_of(self.dc, *self.xi_range))

    def with_ranges(self, p_range=None, xi_range=None) -> "NonlinearityModel":
        return replace(
            self,
            p_range=self.p_range if p_range is None else tuple(p_range),
            xi_range=self.xi_range if xi_range is None else tuple(xi_range),
        )

    @property
    def is_linear(self) -> bool:
        return self.name.startswith("linear")


# Ranges spanned by the manufactured solution on [0, 1] x [0, 1], t in [0, 1]:
# p in [0, 1/16], div u in [-1/4, 1/4].
TP1_P_RANGE = (0.0, 0.0625)
TP1_XI_RANGE = (-0.25, 0.25)


def _odd_pow(x, a):
    return np.sign(x) * np.abs(x) ** a


TABLE1 = {
    1: ("exp(p)", "xi^3 + xi"),
    2: ("exp(p)", "xi^3"),
    3: ("exp(p)", "(xi^5)^(1/3) + xi"),
    4: ("p^2", "xi^2"),
}


def table1_case(case: int, p_range=TP1_P_RANGE, xi_range=TP1_XI_RANGE) -> NonlinearityModel:
    """Coefficient pair for one of the four nonlinear test cases."""
    if case not in TABLE1:
        raise ValueError(f"case must be one of 1..4, got {case!r}")
    b_lab, c_lab = TABLE1[case]
    common = dict(name=f"case{case}", p_range=p_range, xi_range=xi_range, b_label=b_lab, c_label=c_lab)
    if case == 4:
        return NonlinearityModel(
            b=lambda p: p * p,
            db=lambda p: 2.0 * p,
            c=lambda x: x * x,
            dc=lambda x: 2.0 * x,
            **common,
        )
    b, db = np.exp, np.exp
    if case == 1:
        return NonlinearityModel(b=b, db=db, c=lambda x: x**3 + x, dc=lambda x: 3.0 * x * x + 1.0, **common)
    if case == 2:
        return NonlinearityModel(b=b, db=db, c=lambda x: x**3, dc=lambda x: 3.0 * x * x, **common)
    return NonlinearityModel(
        b=b,
        db=db,
        c=lambda x: _odd_pow(x, 5.0 / 3.0) + x,
        dc=lambda x: (5.0 / 3.0) * np.abs(x) ** (2.0 / 3.0) + 1.0,
        holder_dc=True,
        **common,
    )


def linear_model(b_slope: float = 1.0, lam: float = 1.0, p_range=(-1.0, 1.0), xi_range=(-1.0, 1.0)):
    """b(p) = b_slope * p, c(xi) = lam * xi."""
    return NonlinearityModel(
        name="linear",
        b=lambda p: b_slope * p,
        db=lambda p: b_slope + 0.0 * p,
        c=lambda x: lam * x,
        dc=lambda x: lam + 0.0 * x,
        p_range=p_range,
        xi_range=xi_range,
        b_label=f"{b_slope:g} p",
        c_label=f"{lam:g} xi",
    )


class ManufacturedSolution:
    """p = t s(x, y), u1 = u2 = t s(x, y), q = -k grad p, s = x(1-x) y(1-y)."""

    def __init__(self, k: float = 1.0):
        self.k = k

    @staticmethod
    def _parts(x, y):
        X = x * (1.0 - x)
        Y = y * (1.0 - y)
        return X, Y, 1.0 - 2.0 * x, 1.0 - 2.0 * y

    def p(self, x, y, t):
        X, Y, _, _ = self._parts(x, y)
        return t * X * Y

    def u(self, x, y, t):
        s = self.p(x, y, t)
        return s, s

    def grad_p(self, x, y, t):
        X, Y, dX, dY = self._parts(x, y)
        return t * dX * Y, t * X * dY

    def q(self, x, y, t):
        gx, gy = self.grad_p(x, y, t)
        return -self.k * gx, -self.k * gy

    def div_u(self, x, y, t):
        X, Y, dX, dY = self._parts(x, y)
        return t * (dX * Y + X * dY)

    def div_q(self, x, y, t):
        X, Y, _, _ = self._parts(x, y)
        return 2.0 * self.k * t * (X + Y)

    def state(self, t):
        """Closed-form fields at time ``t`` as (p, u, q) callables of (x, y)."""
        return (
            lambda x, y: self.p(x, y, t),
            lambda x, y: self.u(x, y, t),
            lambda x, y: self.q(x, y, t),
        )


def manufactured_state(t: float, k: float = 1.0):
    return ManufacturedSolution(k).state(t)


def manufactured_forcing(model: NonlinearityModel, params: MaterialParams, t: float):
    """Body force and fluid source that make the closed form an exact solution.

    Uses the small-deformation stress ``2 mu eps(u) + c(div u) I - alpha p I``.
    Returns callables ``f(x, y) -> (fx, fy)`` and ``S(x, y)``.
    """
    ms = ManufacturedSolution(params.k)
    mu, alpha = params.mu, params.alpha

    def f(x, y):
        X, Y, dX, dY = ms._parts(x, y)
        lap = t * (-2.0 * Y - 2.0 * X)  # Laplacian of either component
        ddiv_x = t * (-2.0 * Y + dX * dY)
        ddiv_y = t * (dX * dY - 2.0 * X)
        cprime = model.dc(t * (dX * Y + X * dY))
        gpx, gpy = t * dX * Y, t * X * dY
        fx = -mu * (lap + ddiv_x) - cprime * ddiv_x + alpha * gpx
        fy = -mu * (lap + ddiv_y) - cprime * ddiv_y + alpha * gpy
        return fx, fy

    def S(x, y):
        X, Y, dX, dY = ms._parts(x, y)
        dp_dt = X * Y
        ddiv_dt = dX * Y + X * dY
        return model.db(t * X * Y) * dp_dt + alpha * ddiv_dt + 2.0 * params.k * t * (X + Y)

    return f, S
