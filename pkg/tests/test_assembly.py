import numpy as np
import pytest
import scipy.sparse as sp

from biotiter.assembly import BiotProblem, DirichletData, DiscreteState, LinearizationParams, Regime
from biotiter.mesh import unit_square_mesh
from biotiter.model import MaterialParams, linear_model, manufactured_forcing, table1_case
from biotiter.verify import consistency_residual, jacobian_error, random_state


def make(regime="small", case=1, n=3, **kw):
    params = MaterialParams(**kw)
    model = table1_case(case)
    return BiotProblem(unit_square_mesh(n), params, model, regime,
                       forcing=lambda t: manufactured_forcing(model, params, t))


@pytest.mark.parametrize("regime", ["small", "large"])
@pytest.mark.parametrize("case", [1, 2, 4])
def test_jacobian_matches_finite_differences(regime, case):
    prob = make(regime, case, gravity=(0.2, -1.0), k=0.3)
    rng = np.random.default_rng(case)
    for _ in range(3):
        prev = random_state(prob, rng, t=0.0)
        state = random_state(prob, rng, t=0.4)
        assert jacobian_error(prob, state, prev, 0.4, rng.standard_normal(prob.space.n)) < 1e-6


@pytest.mark.parametrize("regime", ["small", "large"])
def test_jacobian_hoelder_case_away_from_zero_dilation(regime):
    # case 3 has c' ~ |div u|^(2/3): finite differences need div u bounded away from 0
    mesh = unit_square_mesh(3)
    prob = BiotProblem(mesh, MaterialParams(), table1_case(3), regime,
                       dirichlet=DirichletData.homogeneous(np.array([0, 1])))
    rng = np.random.default_rng(7)
    for _ in range(3):
        prev = random_state(prob, rng, t=0.0)
        state = random_state(prob, rng, t=0.4)
        state.u = 0.05 * mesh.vertices.ravel() + 0.002 * rng.uniform(-1, 1, state.u.shape)
        state.u[:2] = 0.0
        assert np.abs(prob.space.cell_div_u(state.u)).min() > 0.05
        assert jacobian_error(prob, state, prev, 0.4, rng.standard_normal(prob.space.n)) < 1e-6


def test_assembly_independent_of_cell_order():
    prob = make("large")
    rng = np.random.default_rng(0)
    state, prev = random_state(prob, rng), random_state(prob, rng, t=0.0)
    A = prob.newton_system(state, prev, 0.5).matrix
    perm = rng.permutation(prob.mesh.n_cells)
    B = prob.newton_system(state, prev, 0.5, cell_order=perm).matrix
    assert abs(A - B).max() <= 1e-13 * abs(A).max()


def test_block_structure():
    prob = make("small")
    z = DiscreteState.zeros(prob.space)
    tau = 0.3
    sysm = prob.newton_system(z, z, tau, dirichlet=False)
    qp, pq = sysm.block("q", "p"), sysm.block("p", "q")
    # the mass row carries the time step
    assert abs(pq + tau * qp.T).max() < 1e-14
    assert abs(sysm.block("q", "q") - sysm.block("q", "q").T).max() < 1e-14
    assert sysm.matrix.shape == (prob.space.n, prob.space.n)


def test_dirichlet_rows():
    prob = make("small")
    z = DiscreteState.zeros(prob.space, t=0.1)
    A = prob.newton_system(z, z, 0.1).matrix.tocsr()
    for d in prob.dirichlet.dofs[:5]:
        row = A.getrow(d)
        assert row.nnz == 1 and row[0, d] == 1.0
    F = prob.residual(DiscreteState(np.ones(prob.space.n_u), z.q, z.p, 0.1), z, 0.1)
    assert np.allclose(F[prob.dirichlet.dofs], 1.0)


def test_lscheme_equals_newton_for_linear_model():
    params = MaterialParams()
    model = linear_model(0.8, 1.5)
    prob = BiotProblem(unit_square_mesh(3), params, model)
    rng = np.random.default_rng(1)
    state, prev = random_state(prob, rng), random_state(prob, rng, t=0.0)
    lin = LinearizationParams.from_lipschitz(params, model)
    A = prob.newton_system(state, prev, 0.2).matrix
    B = prob.lscheme_system(state, prev, 0.2, lin).matrix
    assert abs(A - B).max() < 1e-12


def test_from_state_reproduces_initial_tangent():
    prob = BiotProblem(unit_square_mesh(2), MaterialParams(), linear_model(0.5), Regime.LARGE)
    z = DiscreteState.zeros(prob.space)
    lin = LinearizationParams.from_state(prob, z)
    A = prob.newton_system(z, z, 0.1).matrix
    B = prob.lscheme_system(z, z, 0.1, lin).matrix
    assert abs(A - B).max() < 1e-12


def test_lscheme_requires_positive_Lp():
    prob = make()
    z = DiscreteState.zeros(prob.space)
    lin = LinearizationParams.from_lipschitz(prob.params, table1_case(4))
    lin.L_p = 0.0
    with pytest.raises(ValueError):
        prob.lscheme_system(z, z, 0.1, lin)


def test_splitting_blocks_match_monolithic():
    prob = make("small")
    rng = np.random.default_rng(2)
    state, prev = random_state(prob, rng), random_state(prob, rng, t=0.0)
    full = prob.newton_system(state, prev, 0.2)
    flow = prob.splitting_flow_system(state, prev, 0.2)
    s = prob.space
    assert abs(flow.matrix - full.matrix[s.n_u:, s.n_u:]).max() < 1e-13
    mech = prob.splitting_mech_system(state, prev, 0.2, L_s=0.0)
    assert abs(mech.matrix - full.matrix[: s.n_u, : s.n_u]).max() < 1e-13
    stab = prob.splitting_mech_system(state, prev, 0.2, L_s=2.0)
    diff = stab.matrix - mech.matrix
    inner = np.setdiff1d(np.arange(s.n_u), prob.dirichlet.dofs)
    D = prob.divdiv_matrix()
    assert abs(diff[inner][:, inner] - 2.0 * D[inner][:, inner]).max() < 1e-13


def test_consistency_with_manufactured_solution():
    r = [consistency_residual(n, 1.0 / n) for n in (4, 8, 16)]
    assert r[0] > r[1] > r[2]


def test_large_regime_rejects_inverted_cells():
    from biotiter.kinematics import ElementInversion

    prob = make("large", n=2)
    z = DiscreteState.zeros(prob.space)
    u = -1.2 * np.tile(prob.mesh.vertices, 1).ravel()  # F = -0.2 I
    with pytest.raises(ElementInversion):
        prob.residual(DiscreteState(u, z.q, z.p, 0.1), z, 0.1)


def test_custom_dirichlet():
    mesh = unit_square_mesh(2)
    dd = DirichletData(np.array([0, 1]), lambda t: np.array([t, 2 * t]))
    prob = BiotProblem(mesh, MaterialParams(), linear_model(), dirichlet=dd)
    z = DiscreteState.zeros(prob.space, t=0.5)
    F = prob.residual(z, z, 0.5)
    assert np.allclose(F[:2], [-0.5, -1.0])
