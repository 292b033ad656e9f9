import math

import numpy as np
import pytest
import sympy as sp

from biotiter.model import (
    ManufacturedSolution,
    MaterialParams,
    linear_model,
    manufactured_forcing,
    table1_case,
)


def test_table1_constants():
    m1 = table1_case(1)
    assert m1.alpha_b == pytest.approx(1.0)
    assert m1.L_b == pytest.approx(math.exp(1 / 16), rel=1e-12)
    assert m1.alpha_c == pytest.approx(1.0)
    assert m1.L_c == pytest.approx(3 / 16 + 1, rel=1e-12)
    assert table1_case(2).alpha_c == pytest.approx(0.0, abs=1e-12)
    m4 = table1_case(4)
    assert m4.alpha_b == pytest.approx(0.0)
    assert m4.L_b == pytest.approx(0.125)
    assert table1_case(3).holder_dc


@pytest.mark.parametrize("case", [0, 5, "1"])
def test_bad_case(case):
    with pytest.raises(ValueError):
        table1_case(case)


@pytest.mark.parametrize("case", [1, 2, 3, 4])
def test_derivatives_match(case):
    m = table1_case(case)
    x = np.linspace(-0.24, 0.24, 7) + 1e-3
    h = 1e-6
    assert np.allclose((m.c(x + h) - m.c(x - h)) / (2 * h), m.dc(x), atol=1e-7)
    p = np.linspace(0.001, 0.06, 5)
    assert np.allclose((m.b(p + h) - m.b(p - h)) / (2 * h), m.db(p), atol=1e-7)


def test_material_validation():
    with pytest.raises(ValueError):
        MaterialParams(k=0.0)
    assert MaterialParams().replace(mu=2.0).mu == 2.0


def test_flux_at_sample_point():
    # q = -k grad p with p = t x(1-x) y(1-y)
    qx, qy = ManufacturedSolution(1.0).q(0.5, 0.25, 1.0)
    assert qx == pytest.approx(0.0)
    assert qy == pytest.approx(-0.125)


def test_ranges_cover_solution():
    ms = ManufacturedSolution()
    x, y = np.meshgrid(np.linspace(0, 1, 101), np.linspace(0, 1, 101))
    p = ms.p(x, y, 1.0)
    d = ms.div_u(x, y, 1.0)
    lo, hi = table1_case(1).p_range
    assert lo <= p.min() and p.max() <= hi + 1e-15
    lo, hi = table1_case(1).xi_range
    assert lo - 1e-15 <= d.min() and d.max() <= hi + 1e-15


X, Y, T = sp.symbols("x y t", real=True)
_B = {1: sp.exp, 2: sp.exp, 3: sp.exp, 4: lambda s: s**2}
_C = {
    1: lambda s: s**3 + s,
    2: lambda s: s**3,
    3: lambda s: s * sp.Abs(s) ** sp.Rational(2, 3) + s,
    4: lambda s: s**2,
}


def _oracle(case, mu, alpha, k):
    """Forcing derived symbolically from the strong form."""
    s = X * (1 - X) * Y * (1 - Y)
    p = T * s
    u = sp.Matrix([T * s, T * s])
    grad = sp.Matrix([[sp.diff(u[i], v) for v in (X, Y)] for i in range(2)])
    div = grad.trace()
    stress = mu * (grad + grad.T) + (_C[case](div) - alpha * p) * sp.eye(2)
    f = [-(sp.diff(stress[i, 0], X) + sp.diff(stress[i, 1], Y)) for i in range(2)]
    q = [-k * sp.diff(p, X), -k * sp.diff(p, Y)]
    S = sp.diff(_B[case](p) + alpha * div, T) + sp.diff(q[0], X) + sp.diff(q[1], Y)
    return [sp.lambdify((X, Y, T), e, "numpy") for e in (*f, S)]


@pytest.mark.parametrize("case", [1, 2, 4])
def test_forcing_against_symbolic(case):
    params = MaterialParams(mu=1.3, alpha=0.7, k=2.0)
    fx, fy, S = _oracle(case, params.mu, params.alpha, params.k)
    rng = np.random.default_rng(case)
    x, y = rng.uniform(0, 1, (2, 20))
    t = 0.6
    f, Sf = manufactured_forcing(table1_case(case), params, t)
    gx, gy = f(x, y)
    assert np.allclose(gx, fx(x, y, t), atol=1e-12)
    assert np.allclose(gy, fy(x, y, t), atol=1e-12)
    assert np.allclose(Sf(x, y), S(x, y, t), atol=1e-12)


def test_forcing_case3_away_from_zero_divergence():
    params = MaterialParams()
    fx, fy, S = _oracle(3, 1.0, 1.0, 1.0)
    x = np.array([0.1, 0.2, 0.8])
    y = np.array([0.15, 0.3, 0.9])
    f, Sf = manufactured_forcing(table1_case(3), params, 1.0)
    assert np.allclose(f(x, y), [fx(x, y, 1.0), fy(x, y, 1.0)], atol=1e-12)
    assert np.allclose(Sf(x, y), S(x, y, 1.0), atol=1e-12)


def test_linear_model():
    m = linear_model(0.5, 2.0)
    assert m.is_linear
    assert m.alpha_b == pytest.approx(0.5) and m.L_c == pytest.approx(2.0)
