import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biotiter.mesh import BoundaryTag, Mesh, refine, unit_square_mesh


def test_counts_n2():
    m = unit_square_mesh(2)
    assert (m.n_vertices, m.n_cells, m.n_edges) == (9, 8, 16)
    assert m.h == pytest.approx(np.sqrt(2) / 2)


@given(st.integers(1, 12))
@settings(max_examples=12, deadline=None)
def test_euler_characteristic_and_area(n):
    m = unit_square_mesh(n)
    assert m.n_vertices - m.n_edges + m.n_cells == 1
    assert np.all(m.areas > 0)
    assert m.areas.sum() == pytest.approx(1.0, abs=1e-14)
    m.check()


def test_boundary_tags():
    n = 4
    m = unit_square_mesh(n)
    for tag in (BoundaryTag.TOP, BoundaryTag.BOTTOM):
        assert len(m.boundary_edges(tag)) == n
    assert len(m.boundary_edges(BoundaryTag.LATERAL)) == 2 * n
    top = m.vertices[m.boundary_vertices(BoundaryTag.TOP)]
    assert np.allclose(top[:, 1], 1.0)
    assert len(top) == n + 1


def test_edge_normals_orientation():
    m = unit_square_mesh(3)
    n = m.edge_normals
    assert np.allclose(np.linalg.norm(n, axis=1), 1.0)
    b = m.boundary_edges()
    mid = m.vertices[m.edges[b]].mean(axis=1)
    # outward on the boundary: points away from the square's centre
    assert np.all(np.einsum("ij,ij->i", n[b], mid - 0.5) > 0)
    inner = np.flatnonzero(m.edge_cells[:, 1] >= 0)
    c0, c1 = m.edge_cells[inner].T
    assert np.all(c0 < c1)
    assert np.all(np.einsum("ij,ij->i", n[inner], m.centroids[c1] - m.centroids[c0]) > 0)


def test_local_edge_opposite_vertex():
    m = unit_square_mesh(2)
    for c in range(m.n_cells):
        for i in range(3):
            assert m.cells[c, i] not in m.edges[m.cell_edges[c, i]]


def test_refine():
    m = unit_square_mesh(2)
    r = refine(m)
    assert r.n_cells == 4 * m.n_cells
    assert r.h == pytest.approx(m.h / 2)
    assert r.areas.sum() == pytest.approx(1.0)
    r.check()
    for tag in (BoundaryTag.TOP, BoundaryTag.BOTTOM, BoundaryTag.LATERAL):
        assert r.edge_lengths[r.boundary_edges(tag)].sum() == pytest.approx(
            m.edge_lengths[m.boundary_edges(tag)].sum()
        )


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_invalid_n(bad):
    with pytest.raises(ValueError):
        unit_square_mesh(bad)


def test_check_rejects_clockwise():
    m = unit_square_mesh(1)
    with pytest.raises(ValueError):
        Mesh.from_cells(m.vertices, m.cells[:, ::-1]).check()


def test_dump_header():
    text = unit_square_mesh(1).dump()
    assert text.splitlines()[0] == "vertices 4 cells 2"
