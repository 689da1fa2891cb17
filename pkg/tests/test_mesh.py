import numpy as np
import pytest

from mhdens.errors import MeshFormatError, MeshInvalidError
from mhdens.mesh import (
    Mesh,
    generate_rectangle,
    generate_unit_square,
    read_mesh_ascii,
    write_mesh_ascii,
)


def test_unit_square_counts():
    m = generate_unit_square(2)
    assert m.n_vertices == 9
    assert m.n_cells == 8
    assert len(m.facets) == 8
    m1 = generate_unit_square(1)
    assert m1.n_vertices == 4
    assert m1.n_cells == 2


def test_unit_square_area_and_sizes():
    m = generate_unit_square(10)
    assert abs(m.area - 1.0) < 1e-14
    assert m.spacing == pytest.approx(0.1)
    assert m.mesh_size == pytest.approx(np.sqrt(2) / 10)


def test_unit_square_rejects_zero():
    with pytest.raises(ValueError):
        generate_unit_square(0)


def test_rectangle_area():
    m = generate_rectangle(2.2, 0.41, 22, 4,
                           {"left": 1, "right": 2, "top": 3, "bottom": 3})
    assert abs(m.area - 0.902) < 1e-12


def test_rectangle_minimal():
    m = generate_rectangle(1.0, 1.0, 1, 1, {"left": 1, "right": 1, "top": 1, "bottom": 1})
    assert m.n_cells == 2


def test_rectangle_tags():
    nx, ny = 5, 3
    m = generate_rectangle(1.0, 1.0, nx, ny, {"left": 1, "right": 2, "top": 3, "bottom": 3})
    assert len(m.facets) == 2 * nx + 2 * ny
    assert (m.facet_tags == 3).sum() == 2 * nx
    assert (m.facet_tags == 1).sum() == ny
    assert (m.facet_tags == 2).sum() == ny


def test_rectangle_rejects_bad_dimensions():
    with pytest.raises(ValueError):
        generate_rectangle(-1.0, 1.0, 2, 2, {"left": 1, "right": 1, "top": 1, "bottom": 1})
    with pytest.raises(ValueError):
        generate_rectangle(1.0, 0.0, 2, 2, {"left": 1, "right": 1, "top": 1, "bottom": 1})


def test_ascii_round_trip(tmp_path):
    m = generate_unit_square(4)
    path = tmp_path / "m.msh"
    write_mesh_ascii(m, path)
    m2 = read_mesh_ascii(path)
    np.testing.assert_array_equal(m.vertices, m2.vertices)
    np.testing.assert_array_equal(m.cells, m2.cells)
    np.testing.assert_array_equal(m.facets, m2.facets)
    np.testing.assert_array_equal(m.facet_tags, m2.facet_tags)


def test_clockwise_cell_rejected():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    cells = np.array([[0, 2, 1]])  # clockwise
    facets = np.array([[0, 1], [1, 2], [2, 0]])
    with pytest.raises(MeshInvalidError, match="area"):
        Mesh(verts, cells, facets, np.array([1, 1, 1]))


def test_untagged_boundary_rejected():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    cells = np.array([[0, 1, 2]])
    facets = np.array([[0, 1], [1, 2]])  # hypotenuse missing
    with pytest.raises(MeshInvalidError, match="untagged"):
        Mesh(verts, cells, facets, np.array([1, 1]))


def test_interior_facet_rejected():
    m = generate_unit_square(1)
    # The diagonal (0, 3)-ish interior edge: find it as the shared edge.
    facets = np.vstack([m.facets, [[0, 3]]])
    tags = np.concatenate([m.facet_tags, [9]])
    with pytest.raises(MeshInvalidError):
        Mesh(m.vertices, m.cells, facets, tags)


def test_parse_error_reports_line(tmp_path):
    path = tmp_path / "bad.msh"
    path.write_text("mhdmesh 1\nvertices 2\n0 0\noops bad\n")
    with pytest.raises(MeshFormatError) as err:
        read_mesh_ascii(path)
    assert err.value.line == 4


def test_parse_bad_header(tmp_path):
    path = tmp_path / "bad.msh"
    path.write_text("# comment\nnotamesh 1\n")
    with pytest.raises(MeshFormatError) as err:
        read_mesh_ascii(path)
    assert err.value.line == 2


def test_comments_and_whitespace(tmp_path):
    path = tmp_path / "m.msh"
    path.write_text("""# a triangle
mhdmesh 1
vertices 3
0 0  # origin
1 0
0 1
cells 1
0 1 2
facets 3
0 1 7
1 2 7
2 0 8
""")
    m = read_mesh_ascii(path)
    assert m.n_cells == 1
    assert m.boundary_tags() == [7, 8]


@pytest.mark.parametrize("n", [1, 3, 8])
def test_generated_mesh_invariants(n):
    m = generate_unit_square(n)
    p = m.vertices[m.cells]
    areas = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                   - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    assert (areas > 0).all()
    assert abs(areas.sum() - 1.0) < 1e-12
    # boundary closure: even boundary-edge degree at every boundary vertex
    deg = np.zeros(m.n_vertices, dtype=int)
    for a, b in m.facets:
        deg[a] += 1
        deg[b] += 1
    touched = deg[deg > 0]
    assert (touched % 2 == 0).all()
    assert (touched >= 2).all()


def test_channel_fixture_tags_and_counts():
    # Counts frozen at fixture generation time (tools/make_channel_mesh.py).
    from mhdens.bench import packaged_channel_mesh

    m = packaged_channel_mesh(0.02)
    assert m.boundary_tags() == [1, 2, 3, 4]
    counts = {t: int((m.facet_tags == t).sum()) for t in m.boundary_tags()}
    assert counts == {1: 20, 2: 20, 3: 220, 4: 20}
    assert m.n_vertices == 2312
    assert m.n_cells == 4344
    assert abs(m.area - (2.2 * 0.41 - np.pi * 0.05**2)) < 5e-4
