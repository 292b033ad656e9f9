"""Self-checks run by ``biotiter verify``: Jacobian against finite
differences, kinematic identities and consistency of the discretisation
with the manufactured solution."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kinematics as kin
from .assembly import BiotProblem, DiscreteState, Regime
from .mesh import unit_square_mesh
from .model import (
    ManufacturedSolution,
    MaterialParams,
    manufactured_forcing,
    table1_case,
)


#: fitted-slope threshold for the asymptotically quadratic small-strain limit
SMALL_STRAIN_ORDER = 1.95


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: {self.value:.3e} (threshold {self.threshold:.1e}) {self.detail}".rstrip()


def random_state(problem: BiotProblem, rng, scale_u=0.05, t=1.0) -> DiscreteState:
    """Random state whose displacement gradients stay well inside J > 0.5."""
    s = problem.space
    st = DiscreteState(
        scale_u * rng.uniform(-1, 1, s.n_u),
        rng.uniform(-1, 1, s.n_q),
        0.05 * rng.uniform(0, 1, s.n_p),
        t,
    )
    d = problem.dirichlet.dofs
    st.u[d] = problem.dirichlet_values(t)
    return st


def jacobian_error(problem: BiotProblem, state, prev, tau, direction, eps=1e-6) -> float:
    """Relative difference between ``J v`` and a central difference of the residual."""
    A = problem.newton_system(state, prev, tau).matrix
    x = state.vector()
    v = direction / np.linalg.norm(direction)
    s = problem.space

    def R(y):
        return problem.residual(DiscreteState.from_vector(s, y, state.t), prev, tau)

    fd = (R(x + eps * v) - R(x - eps * v)) / (2 * eps)
    jv = A @ v
    return float(np.linalg.norm(jv - fd) / max(np.linalg.norm(jv), 1e-300))


def _jacobian_problem(regime: Regime, case: int) -> BiotProblem:
    params = MaterialParams(k=0.5, gravity=(0.3, -1.0), rho_f=0.7)
    if regime is Regime.SMALL:
        model = table1_case(case)
        return BiotProblem(unit_square_mesh(3), params, model, regime,
                           forcing=lambda t: manufactured_forcing(model, params, t))
    return BiotProblem(unit_square_mesh(3), params, table1_case(case), regime)


def jacobian_suite(n_samples: int = 100, seed: int = 0, tol: float = 1e-6):
    """Random admissible states and directions in both regimes.

    Cases 1, 2 and 4 have smooth nonlinearities; the Hoelder-continuous case
    3 is skipped since a central difference does not converge at div u = 0.
    """
    rng = np.random.default_rng(seed)
    out = []
    for regime in (Regime.SMALL, Regime.LARGE):
        problems = {c: _jacobian_problem(regime, c) for c in (1, 2, 4)}
        worst = 0.0
        for i in range(n_samples):
            prob = problems[(1, 2, 4)[i % 3]]
            tau = float(rng.uniform(0.05, 1.0))
            prev = random_state(prob, rng, t=0.0)
            state = random_state(prob, rng, t=tau)
            v = rng.standard_normal(prob.space.n)
            worst = max(worst, jacobian_error(prob, state, prev, tau, v))
        out.append(CheckResult(f"jacobian[{regime.value}]", worst <= tol, worst, tol, f"{n_samples} samples"))
    return out


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def kinematics_suite(seed: int = 0):
    rng = np.random.default_rng(seed)
    out = []
    mu, c = 1.0, (lambda x: 1.5 * x)

    # rigid rotation: no strain, no effective stress
    thetas = rng.uniform(-math.pi, math.pi, 20)
    F = np.stack([rotation(t) for t in thetas])
    S = kin.svk_stress(kin.green_strain(F), mu, c)
    err = float(np.max(np.abs(F @ S)))
    out.append(CheckResult("rigid-rotation stress", err <= 1e-12, err, 1e-12))

    # identity deformation: pull-backs are the identity maps
    I = np.eye(2)
    k = 0.37
    e1 = np.max(np.abs(kin.pullback_permeability(I, k) - k * I))
    e2 = np.max(np.abs(kin.inverse_pullback_permeability(I, k) - I / k))
    g = rng.standard_normal(2)
    e3 = np.max(np.abs(kin.gravity_pullback(I, g) - g))
    _, Pi = kin.total_stresses(I, np.zeros((2, 2)), 0.8)
    e4 = np.max(np.abs(Pi + 0.8 * I))
    err = float(max(e1, e2, e3, e4))
    out.append(CheckResult("identity pull-backs", err <= 1e-14, err, 1e-14))

    # small-strain limit: the first Piola-Kirchhoff stress of eps*G tends to the linear stress at O(eps^2)
    G = rng.standard_normal((2, 2))
    p = rng.uniform(0.1, 1.0)
    eps = np.array([1e-1, 1e-2, 1e-3])
    errs = []
    for e in eps:
        Fe = kin.deformation_gradient(e * G)
        _, Pi = kin.total_stresses(Fe, kin.svk_stress(kin.green_strain(Fe), mu, c), e * p)
        lin = kin.small_strain_stress(e * G, e * p, mu, 1.0, c)
        errs.append(np.max(np.abs(Pi - lin)))
    order = float(np.polyfit(np.log(eps), np.log(errs), 1)[0])
    # the error is exactly A eps^2 + B eps^3, so the fitted slope is 2 + O(eps)
    out.append(CheckResult("small-strain limit order", order >= SMALL_STRAIN_ORDER, order, SMALL_STRAIN_ORDER))
    return out


def consistency_residual(n: int, tau: float, case: int = 1) -> float:
    """Residual of the interpolated closed-form solution for the step 0 -> tau."""
    params = MaterialParams()
    model = table1_case(case)
    prob = BiotProblem(unit_square_mesh(n), params, model,
                       forcing=lambda t: manufactured_forcing(model, params, t))
    s = prob.space
    ms = ManufacturedSolution(params.k)

    def interp(t):
        u = s.interpolate_u(lambda x, y: ms.u(x, y, t))
        q = s.interpolate_q(lambda x, y: ms.q(x, y, t))
        p = s.interpolate_p(lambda x, y: ms.p(x, y, t))
        return DiscreteState(u, q, p, t)

    prev, state = interp(0.0), interp(tau)
    return float(np.linalg.norm(prob.residual(state, prev, tau)))


def consistency_suite(levels=(4, 8, 16)):
    res = [consistency_residual(n, 1.0 / n) for n in levels]
    h = 1.0 / np.asarray(levels, dtype=float)
    order = float(np.polyfit(np.log(h), np.log(res), 1)[0])
    decreasing = all(b < a for a, b in zip(res, res[1:]))
    return [CheckResult("manufactured consistency order", decreasing and order >= 1.0, order, 1.0,
                        "residuals " + ", ".join(f"{r:.2e}" for r in res))]


def run_all(seed: int = 0, n_samples: int = 100):
    return jacobian_suite(n_samples, seed) + kinematics_suite(seed) + consistency_suite()
