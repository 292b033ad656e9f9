"""Benchmark experiments: the manufactured small-deformation problem and a
2D large-deformation analog of the torsion test (in-plane rotation of the top
edge)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import BiotProblem, DirichletData, DiscreteState, Regime
from .mesh import BoundaryTag, unit_square_mesh
from .model import (
    ManufacturedSolution,
    MaterialParams,
    linear_model,
    manufactured_forcing,
    table1_case,
)
from .schemes import (
    SchemeConfig,
    SchemeKind,
    Status,
    TransientResult,
    fit_convergence_order,
    n_steps,
    recommended_Ls,
    run_transient,
)

PROBLEMS = ("test1", "large2d")

#: permeability of the large-deformation benchmark (strongly coupled regime)
LARGE2D_K = 1e-2


@dataclass
class ExperimentSpec:
    """One run: problem, nonlinearity case, scheme and discretisation.

    ``L_s=None`` selects the default stabilisation: the recommended value
    for the manufactured problem and 1 for the large-deformation one.
    Material fields left as ``None`` take the problem defaults.
    """

    name: str = "experiment"
    problem: str = "test1"
    case: int = 1
    scheme: SchemeKind = SchemeKind.MONOLITHIC_NEWTON
    h: float = 0.1
    tau: float = 0.1
    T: float = 1.0
    L_s: float | None = None
    tol: float = 1e-8
    max_iter: int = 100
    regime: str | None = None
    theta_final: float = math.pi / 16
    mu: float | None = None
    alpha: float | None = None
    k: float | None = None
    c_p: float | None = None
    phi: float | None = None
    lam: float = 1.0
    expect: str = "converged"

    def __post_init__(self):
        self.scheme = SchemeKind(self.scheme)
        if self.problem not in PROBLEMS:
            raise ValueError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.problem == "test1" and self.case not in (1, 2, 3, 4):
            raise ValueError(f"case must be 1..4, got {self.case!r}")
        if not (self.h > 0 and self.tau > 0):
            raise ValueError("h and tau must be positive")
        n = 1.0 / self.h
        if abs(n - round(n)) > 1e-9 * n:
            raise ValueError(f"h = {self.h} must be 1/n for an integer n")
        n_steps(self.tau, self.T)
        if self.expect not in ("converged", "failure", "any"):
            raise ValueError("expect must be converged, failure or any")
        if self.regime is not None:
            Regime(self.regime)

    @property
    def n(self) -> int:
        return int(round(1.0 / self.h))

    def replace(self, **changes) -> "ExperimentSpec":
        return replace(self, **changes)

    def material(self) -> MaterialParams:
        base = MaterialParams() if self.problem == "test1" else MaterialParams(k=LARGE2D_K)
        over = {f: getattr(self, f) for f in ("mu", "alpha", "k", "c_p", "phi") if getattr(self, f) is not None}
        return base.replace(**over)


@dataclass
class ReportRow:
    experiment: str
    scheme: str
    case: int
    h: float
    tau: float
    L_s: float
    iters: int
    order: float
    contraction: float
    err_p: float
    err_u: float
    status: str
    history: list = field(default_factory=list, repr=False)
    delta_u: list = field(default_factory=list, repr=False)
    delta_q: list = field(default_factory=list, repr=False)
    delta_p: list = field(default_factory=list, repr=False)
    failed_step: int | None = None
    message: str = ""
    expect: str = "converged"
    result: TransientResult | None = field(default=None, repr=False, compare=False)

    @property
    def ok(self) -> bool:
        if self.expect == "any":
            return True
        if self.expect == "failure":
            return self.status != Status.CONVERGED.value
        return self.status == Status.CONVERGED.value


REPORT_HEADER = (
    "experiment", "scheme", "case", "h", "tau", "L_s", "iters",
    "order", "contraction", "err_p", "err_u", "status",
)
ITERATION_HEADER = ("experiment", "iter", "delta_u", "delta_q", "delta_p", "total")


def _row(spec: ExperimentSpec, L_s: float, result: TransientResult, err_p=math.nan, err_u=math.nan) -> ReportRow:
    hist = result.last_history
    fit = fit_convergence_order(hist)
    return ReportRow(
        experiment=spec.name,
        scheme=spec.scheme.value,
        case=spec.case if spec.problem == "test1" else 0,
        h=spec.h,
        tau=spec.tau,
        L_s=L_s,
        iters=hist.iterations,
        order=fit.order,
        contraction=fit.contraction,
        err_p=err_p,
        err_u=err_u,
        status=result.status.value,
        history=list(hist.total),
        delta_u=list(hist.delta_u),
        delta_q=list(hist.delta_q),
        delta_p=list(hist.delta_p),
        failed_step=result.failed_step,
        message=hist.message,
        expect=spec.expect,
        result=result,
    )


def build_problem_1(spec: ExperimentSpec) -> BiotProblem:
    params = spec.material()
    model = table1_case(spec.case)
    return BiotProblem(
        unit_square_mesh(spec.n),
        params,
        model,
        spec.regime or Regime.SMALL,
        forcing=lambda t: manufactured_forcing(model, params, t),
    )


def _scheme_config(spec: ExperimentSpec, L_s: float) -> SchemeConfig:
    return SchemeConfig(spec.scheme, L_s=L_s if spec.scheme.is_splitting else 0.0, tol=spec.tol, max_iter=spec.max_iter)


def run_test_problem_1(spec: ExperimentSpec) -> ReportRow:
    """Manufactured solution on the unit square from zero initial data up to T."""
    if spec.problem != "test1":
        raise ValueError("spec is not a test-problem-1 experiment")
    problem = build_problem_1(spec)
    L_s = spec.L_s
    if L_s is None:
        try:
            L_s = recommended_Ls(problem.params, problem.model)
        except ValueError:
            L_s = 1.0
    result = run_transient(problem, _scheme_config(spec, L_s), DiscreteState.zeros(problem.space), spec.tau, spec.T)
    err_p = err_u = math.nan
    if result.failed_step is None:
        ms = ManufacturedSolution(problem.params.k)
        t = result.final.t
        err_p = problem.space.error_p(result.final.p, lambda x, y: ms.p(x, y, t))
        err_u = problem.space.error_u(result.final.u, lambda x, y: ms.u(x, y, t))
    return _row(spec, L_s, result, err_p, err_u)


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def large_deformation_problem(spec: ExperimentSpec) -> BiotProblem:
    """Top edge rotated in-plane about its mid-point, bottom on rollers,
    lateral edges traction free, p = 0 on the whole boundary."""
    mesh = unit_square_mesh(spec.n)
    params = spec.material()
    top = mesh.boundary_vertices(BoundaryTag.TOP)
    bottom = np.setdiff1d(mesh.boundary_vertices(BoundaryTag.BOTTOM), top)
    dofs = np.concatenate([2 * top, 2 * top + 1, 2 * bottom + 1])
    X = mesh.vertices[top] - np.array([0.5, 1.0])
    theta_final = spec.theta_final

    def values(t):
        d = X @ (rotation(theta_final * t) - np.eye(2)).T
        return np.concatenate([d[:, 0], d[:, 1], np.zeros(len(bottom))])

    # the content law c_p J phi dp + c_alpha dJ reduces to b(p) = c_p phi p
    model = linear_model(params.c_p * params.phi, spec.lam)
    regime = spec.regime or Regime.LARGE
    return BiotProblem(mesh, params, model, regime, dirichlet=DirichletData(dofs, values))


def run_large_deformation_2d(spec: ExperimentSpec) -> ReportRow:
    if spec.problem != "large2d":
        raise ValueError("spec is not a large-deformation experiment")
    problem = large_deformation_problem(spec)
    L_s = 1.0 if spec.L_s is None else spec.L_s
    result = run_transient(problem, _scheme_config(spec, L_s), DiscreteState.zeros(problem.space), spec.tau, spec.T)
    return _row(spec, L_s, result)


def run_experiment(spec: ExperimentSpec) -> ReportRow:
    if spec.problem == "test1":
        return run_test_problem_1(spec)
    return run_large_deformation_2d(spec)


SWEEP_AXES = ("tau", "h", "L_s", "case", "scheme")


def _fmt_value(v) -> str:
    if isinstance(v, SchemeKind):
        return v.value
    return f"{v:g}" if isinstance(v, float) else str(v)


def sweep(base: ExperimentSpec, axis: str, values, run=run_experiment, executor=None) -> list:
    """One run per value of ``axis``; all other settings shared.

    Failures are recorded in the row status and the sweep continues. Rows
    come back in the order of ``values`` regardless of ``executor``.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    specs = []
    for v in values:
        if axis == "scheme":
            v = SchemeKind(v)
        elif axis == "case":
            v = int(v)
        else:
            v = float(v)
        specs.append(base.replace(name=f"{base.name}-{axis}={_fmt_value(v)}", **{axis: v}))
    mapper = map if executor is None else executor.map
    return list(mapper(_safe(run), specs))


def _safe(run):
    def wrapped(spec):
        try:
            return run(spec)
        except Exception as exc:  # recorded per row so the sweep continues
            return ReportRow(
                spec.name, spec.scheme.value, spec.case, spec.h, spec.tau,
                math.nan if spec.L_s is None else spec.L_s, 0, math.nan, math.nan,
                math.nan, math.nan, "Error", message=str(exc), expect=spec.expect,
            )

    return wrapped


# -- report output ------------------------------------------------------------


def fmt(x) -> str:
    """16 significant digits for floats; plain text otherwise."""
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return "nan"
        return f"{float(x):.15e}"
    return str(x)


def report_lines(rows) -> list:
    lines = [",".join(REPORT_HEADER)]
    for r in rows:
        lines.append(",".join(fmt(getattr(r, k)) for k in REPORT_HEADER))
    return lines


def iteration_lines(rows) -> list:
    lines = [",".join(ITERATION_HEADER)]
    for r in rows:
        for i, (du, dq, dp, tot) in enumerate(zip(r.delta_u, r.delta_q, r.delta_p, r.history), start=1):
            lines.append(",".join([r.experiment, str(i), fmt(du), fmt(dq), fmt(dp), fmt(tot)]))
    return lines
