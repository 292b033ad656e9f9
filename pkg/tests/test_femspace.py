import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biotiter.femspace import SpaceTriple, edge_flux, eval_p1_basis, eval_rt0_basis, quadrature
from biotiter.mesh import unit_square_mesh


def _monomial_integral(a, b):
    # integral of x^a y^b over the reference triangle
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_quadrature_exactness(order):
    rule = quadrature(order)
    assert rule.weights.sum() == pytest.approx(0.5)
    assert np.all(rule.weights > 0)
    x, y = rule.xy.T
    for a in range(order + 1):
        for b in range(order + 1 - a):
            assert rule.weights @ (x**a * y**b) == pytest.approx(_monomial_integral(a, b), abs=1e-14)


def test_quadrature_bad_order():
    with pytest.raises(ValueError):
        quadrature(7)


tri = st.lists(st.floats(-2, 2), min_size=6, max_size=6).map(lambda v: np.array(v).reshape(3, 2))


def _ccw(c):
    a, b = c[1] - c[0], c[2] - c[0]
    return 0.5 * (a[0] * b[1] - a[1] * b[0])


@given(tri)
@settings(max_examples=50, deadline=None)
def test_p1_gradients(c):
    if _ccw(c) < 1e-3:
        return
    _, g = eval_p1_basis(c)
    assert np.allclose(g.sum(axis=0), 0.0, atol=1e-10)
    # hat a is 1 at vertex a and 0 at the others: grad . (x_b - x_a) = -1
    for a in range(3):
        for b in range(3):
            if a != b:
                assert g[a] @ (c[b] - c[a]) == pytest.approx(-1.0)


@given(tri)
@settings(max_examples=50, deadline=None)
def test_rt0_unit_flux(c):
    if _ccw(c) < 1e-3:
        return
    area = _ccw(c)
    for i in range(3):
        def field(x, y, i=i):
            return ((x - c[i, 0]) / (2 * area), (y - c[i, 1]) / (2 * area))

        for j in range(3):
            assert edge_flux(c, field, j) == pytest.approx(1.0 if i == j else 0.0, abs=1e-10)
    vals, div = eval_rt0_basis(c, np.eye(3), signs=[1, -1, 1])
    assert np.allclose(div * area, [1, -1, 1])
    assert vals.shape == (3, 3, 2)


def test_degenerate_cell_rejected():
    c = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(ValueError):
        eval_p1_basis(c)


@pytest.fixture(scope="module")
def space():
    return SpaceTriple(unit_square_mesh(3))


def test_sizes(space):
    m = space.mesh
    assert space.n == 2 * m.n_vertices + m.n_edges + m.n_cells


def test_linear_fields_are_reproduced(space):
    fu = lambda x, y: (1 + 2 * x - y, 3 * y)
    u = space.interpolate_u(fu)
    assert space.error_u(u, fu) < 1e-13
    assert np.allclose(space.cell_grad_u(u), [[2.0, -1.0], [0.0, 3.0]])
    fq = lambda x, y: (0.5 + x, 2.0 - 3 * y)  # in RT0: a + b (x, y) needs b_x = b_y; use a general RT0 field below
    gq = lambda x, y: (0.5 + 2 * x, -1.0 + 2 * y)
    q = space.interpolate_q(gq)
    assert space.error_q(q, gq) < 1e-13
    assert np.allclose(space.cell_div_q(q), 4.0)
    assert space.error_q(space.interpolate_q(fq), fq) > 1e-3


def test_mass_matrices(space):
    one = space.interpolate_u(lambda x, y: (1.0, 0.0))
    assert space.norm_u(one) == pytest.approx(1.0)
    q = space.interpolate_q(lambda x, y: (1.0, 2.0))
    assert space.norm_q(q) == pytest.approx(math.sqrt(5.0))
    assert space.norm_p(np.full(space.n_p, 3.0)) == pytest.approx(3.0)


def test_interpolate_p_is_cell_average(space):
    p = space.interpolate_p(lambda x, y: x * y)
    assert np.sum(space.areas * p) == pytest.approx(0.25)
