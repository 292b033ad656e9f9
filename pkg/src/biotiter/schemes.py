"""Monolithic/splitting Newton and L-scheme iterations, and convergence diagnostics."""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import BiotProblem, DiscreteState, LinearizationParams, Regime
from .kinematics import ElementInversion
from .linsolve import Factorization, SingularMatrixError
from .model import MaterialParams, NonlinearityModel

NOISE_FLOOR = 1e-12


class SchemeKind(str, enum.Enum):
    MONOLITHIC_NEWTON = "newton"
    SPLITTING_NEWTON = "splitting-newton"
    MONOLITHIC_LSCHEME = "lscheme"
    SPLITTING_LSCHEME = "splitting-lscheme"

    @property
    def is_splitting(self) -> bool:
        return self in (SchemeKind.SPLITTING_NEWTON, SchemeKind.SPLITTING_LSCHEME)

    @property
    def is_lscheme(self) -> bool:
        return self in (SchemeKind.MONOLITHIC_LSCHEME, SchemeKind.SPLITTING_LSCHEME)


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    DIVERGED = "Diverged"
    ELEMENT_INVERSION = "ElementInversion"


@dataclass
class SchemeConfig:
    """Which scheme to run and its parameters.

    ``lin`` holds the L-scheme constants; when it is ``None`` they are chosen
    by :func:`default_linearization` at the start of each solve.
    """

    kind: SchemeKind = SchemeKind.MONOLITHIC_NEWTON
    L_s: float = 0.0
    lin: LinearizationParams | None = None
    tol: float = 1e-8
    max_iter: int = 100
    divergence_factor: float = 1e3

    def __post_init__(self):
        self.kind = SchemeKind(self.kind)
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.L_s < 0:
            raise ValueError("L_s must be non-negative")
        if self.lin is not None and not self.lin.L_p > 0:
            raise ValueError("L-scheme configurations need a positive L_p")

    def replace(self, **changes) -> "SchemeConfig":
        return replace(self, **changes)


@dataclass
class ConvergenceHistory:
    delta_u: list = field(default_factory=list)
    delta_q: list = field(default_factory=list)
    delta_p: list = field(default_factory=list)
    total: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    status: Status | None = None
    message: str = ""

    @property
    def iterations(self) -> int:
        return len(self.total)

    def record(self, du, dq, dp, res, wall):
        self.delta_u.append(du)
        self.delta_q.append(dq)
        self.delta_p.append(dp)
        self.total.append(du + dq + dp)
        self.residual.append(res)
        self.wall_time.append(wall)


def default_linearization(problem: BiotProblem, prev: DiscreteState) -> LinearizationParams:
    """Lipschitz-based constants for small deformation; tangents at ``prev`` otherwise."""
    if problem.regime is Regime.SMALL:
        return LinearizationParams.from_lipschitz(problem.params, problem.model)
    return LinearizationParams.from_state(problem, prev, prev)


def _increment_norms(problem, dx_u, dx_q, dx_p):
    s = problem.space
    return s.norm_u(dx_u), s.norm_q(dx_q), s.norm_p(dx_p)


def solve_time_step(problem: BiotProblem, scheme: SchemeConfig, prev: DiscreteState, tau: float, initial=None):
    """Advance one backward-Euler step from ``prev``.

    The iteration starts from ``initial`` (default: ``prev``) and stops when
    ``||du|| + ||dq|| + ||dp||`` in discrete L2 norms falls below ``scheme.tol``.
    Returns ``(state, history)``.
    """
    if tau <= 0:
        raise ValueError("time step tau must be positive")
    t = prev.t + tau
    it = (prev if initial is None else initial).copy()
    it.t = t
    hist = ConvergenceHistory()
    kind = scheme.kind
    s = problem.space
    frozen_small = problem.regime is Regime.SMALL

    lin = scheme.lin
    if kind.is_lscheme and lin is None:
        lin = default_linearization(problem, prev)

    mono_fact = flow_fact = mech_fact = None
    t0 = time.perf_counter()
    try:
        for i in range(scheme.max_iter):
            if kind is SchemeKind.MONOLITHIC_NEWTON:
                sysm = problem.newton_system(it, prev, tau)
                dx = Factorization(sysm.matrix).solve(sysm.rhs)
                du, dq, dp = dx[s.u_slice], dx[s.q_slice], dx[s.p_slice]
                it.u += du
                it.q += dq
                it.p += dp
            elif kind is SchemeKind.MONOLITHIC_LSCHEME:
                sysm = problem.lscheme_system(it, prev, tau, lin)
                if mono_fact is None or not frozen_small:
                    mono_fact = Factorization(sysm.matrix)
                dx = mono_fact.solve(sysm.rhs)
                du, dq, dp = dx[s.u_slice], dx[s.q_slice], dx[s.p_slice]
                it.u += du
                it.q += dq
                it.p += dp
            else:
                newton = kind is SchemeKind.SPLITTING_NEWTON
                flow = problem.splitting_flow_system(it, prev, tau, L_p=None if newton else lin.L_p)
                if newton or flow_fact is None or not frozen_small:
                    flow_fact = Factorization(flow.matrix)
                dqp = flow_fact.solve(flow.rhs)
                dq, dp = dqp[: s.n_q], dqp[s.n_q :]
                it.q += dq
                it.p += dp
                mech = problem.splitting_mech_system(
                    it, prev, tau, L_s=scheme.L_s, tensor_Lu=None if newton else lin.tensor_Lu
                )
                if newton or mech_fact is None:
                    mech_fact = Factorization(mech.matrix)
                du = mech_fact.solve(mech.rhs)
                it.u += du

            nu, nq, np_ = _increment_norms(problem, du, dq, dp)
            res = float(np.linalg.norm(problem.residual(it, prev, tau)))
            hist.record(nu, nq, np_, res, time.perf_counter() - t0)
            total = hist.total[-1]
            if not math.isfinite(total) or total >= scheme.divergence_factor * max(hist.total[0], 1e-300) and i > 0:
                hist.status = Status.DIVERGED
                hist.message = f"stopping quantity grew to {total:.3e}"
                break
            if total <= scheme.tol:
                hist.status = Status.CONVERGED
                break
        else:
            hist.status = Status.MAX_ITER
            hist.message = f"no convergence in {scheme.max_iter} iterations"
    except ElementInversion as exc:
        hist.status = Status.ELEMENT_INVERSION
        hist.message = str(exc)
    except (SingularMatrixError, FloatingPointError, OverflowError) as exc:
        hist.status = Status.DIVERGED
        hist.message = str(exc)
    return it, hist


@dataclass
class TransientResult:
    states: list
    histories: list
    failed_step: int | None = None

    @property
    def final(self) -> DiscreteState:
        return self.states[-1]

    @property
    def last_history(self) -> ConvergenceHistory:
        return self.histories[-1]

    @property
    def status(self) -> Status:
        return self.histories[-1].status if self.histories else Status.CONVERGED


def n_steps(tau: float, T: float) -> int:
    N = T / tau
    if tau <= 0 or N < 0.5 or abs(N - round(N)) > 1e-9 * max(1.0, N):
        raise ValueError(f"T = {T} is not a positive integer multiple of tau = {tau}")
    return int(round(N))


def run_transient(problem: BiotProblem, scheme: SchemeConfig, initial: DiscreteState, tau: float, T: float):
    """March ``T / tau`` backward-Euler steps, each seeded by the previous solution.

    A step that ends in any status other than Converged stops the march;
    its 1-based index is stored in ``failed_step``.
    """
    N = n_steps(tau, T)
    states = [initial.copy()]
    histories = []
    cur = initial.copy()
    for n in range(1, N + 1):
        cur, hist = solve_time_step(problem, scheme, cur, tau)
        cur.t = initial.t + n * tau  # avoid drift from repeated addition
        states.append(cur.copy())
        histories.append(hist)
        if hist.status is not Status.CONVERGED:
            return TransientResult(states, histories, failed_step=n)
    return TransientResult(states, histories)


@dataclass(frozen=True)
class ConvergenceFit:
    order: float
    contraction: float
    n_used: int
    stagnating: bool

    @property
    def defined(self) -> bool:
        return math.isfinite(self.order)


def fit_convergence_order(history, window: int = 3, floor: float = NOISE_FLOOR) -> ConvergenceFit:
    """Fit ``log e_i = order * log e_{i-1} + c`` over the last ``window`` values.

    Only values above ``floor`` are used. ``contraction`` is the geometric
    mean of the successive ratios in the window. Fewer than three usable
    values gives an undefined (NaN) fit.
    """
    e = np.asarray(history.total if isinstance(history, ConvergenceHistory) else history, dtype=float)
    e = e[np.isfinite(e) & (e > floor)]
    if len(e) < 3:
        return ConvergenceFit(math.nan, math.nan, len(e), False)
    tail = np.log(e[-max(window, 3):])
    x, y = tail[:-1], tail[1:]
    xm = x - x.mean()
    denom = float(xm @ xm)
    order = float(xm @ (y - y.mean()) / denom) if denom > 0 else math.nan
    contraction = float(np.exp(np.mean(y - x)))
    return ConvergenceFit(order, contraction, len(tail), contraction >= 0.99)


def lemma1_bound_holds(a: float, b: float, x0: float) -> bool:
    """``a x0^2 + b <= 1``: the sufficient condition for x_n <= a x_{n-1}^2 + b x_{n-1} to vanish."""
    if a < 0 or b < 0 or x0 < 0:
        raise ValueError("a, b and x0 must be non-negative")
    return a * x0 * x0 + b <= 1.0


def fit_lemma1_coefficients(history) -> tuple:
    """Least-squares non-negative (a, b) with e_i ~ a e_{i-1}^2 + b e_{i-1}."""
    from scipy.optimize import nnls

    e = np.asarray(history.total if isinstance(history, ConvergenceHistory) else history, dtype=float)
    e = e[np.isfinite(e) & (e > NOISE_FLOOR)]
    if len(e) < 3:
        return math.nan, math.nan
    prev, nxt = e[:-1], e[1:]
    # relative residuals so that late iterations count as much as early ones
    A = np.stack([prev * prev / nxt, prev / nxt], axis=1)
    (a, b), _ = nnls(A, np.ones(len(nxt)))
    return float(a), float(b)


def recommended_Ls(params: MaterialParams, model: NonlinearityModel, alpha_b: float | None = None) -> float:
    """Smallest stabilisation with guaranteed convergence of the splitting Newton scheme."""
    if params.alpha == 0:
        return 0.0
    ab = model.alpha_b if alpha_b is None else alpha_b
    if not ab > 0:
        raise ValueError("no guaranteed stabilization: requires alpha_b > 0")
    return params.alpha**2 / ab
