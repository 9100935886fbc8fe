import numpy as np
import pytest

from bsd2dtn.geometry import (
    boundary_coordinates,
    boundary_probes,
    build_box_mesh,
    make_field,
    same_boundary,
)
from bsd2dtn.helpers import ConfigError, FieldClassError, MeshMismatchError


square = build_box_mesh(2, 2)
cube = build_box_mesh(3, 2)
fine = build_box_mesh(2, 8)


def test_square_counts():
    assert square.n_vertices == 9
    assert len(square.boundary_facets) == 8
    assert square.n_boundary == 8
    assert square.n_interior == 1
    assert square.n_cells == 8


def test_surface_measures():
    assert square.surface_measure == pytest.approx(4.0)
    assert cube.surface_measure == pytest.approx(6.0)
    assert len(cube.boundary_facets) == 48


@pytest.mark.parametrize("mesh", [square, cube, fine])
def test_unit_normals(mesh):
    lengths = np.linalg.norm(mesh.facet_normals, axis=1)
    np.testing.assert_allclose(lengths, 1.0)


@pytest.mark.parametrize("mesh", [square, cube, fine])
def test_volumes_sum_to_one(mesh):
    from bsd2dtn.geometry import simplex_measures

    volumes = simplex_measures(mesh.vertices, mesh.cells)
    assert volumes.sum() == pytest.approx(1.0)
    assert (volumes > 0).all()


def test_boundary_and_interior_partition():
    ids = np.sort(np.concatenate([fine.boundary, fine.interior]))
    np.testing.assert_array_equal(ids, np.arange(fine.n_vertices))
    assert fine.n_boundary == 4 * 8


@pytest.mark.parametrize("n, resolution", [(1, 4), (4, 2), (2, 1), (2, 2.5)])
def test_bad_mesh_requests(n, resolution):
    with pytest.raises(ConfigError):
        build_box_mesh(n, resolution)


def test_check_same():
    square.check_same(build_box_mesh(2, 2))
    with pytest.raises(MeshMismatchError):
        square.check_same(fine)


def test_boundary_coordinates_cover_every_dof():
    face, coords = boundary_coordinates(cube)
    assert (face >= 0).all()
    assert coords.shape == (cube.n_boundary, 2)
    assert ((coords >= 0) & (coords <= 1)).all()


def test_probes_vanish_on_corners():
    probes = boundary_probes(fine, 2)
    assert probes.shape == (8, fine.n_boundary)
    x = fine.vertices[fine.boundary]
    corners = ((x == 0) | (x == 1)).all(axis=1)
    np.testing.assert_allclose(probes[:, corners], 0.0, atol=1e-14)
    # every probe lives on one face only
    assert (np.abs(probes).max(axis=1) > 0.5).all()


def test_probe_order_must_be_positive():
    with pytest.raises(ConfigError):
        boundary_probes(square, 0)


def test_conformal_field():
    field = make_field("conformal", "1 + 0.5*x1", dict(alpha=2.0), fine)
    assert field.values.shape == (fine.n_vertices,)
    g = field.metric_tensor()
    np.testing.assert_allclose(g[:, 0, 0], 1 + 0.5 * fine.vertices[:, 0])
    np.testing.assert_allclose(g[:, 0, 1], 0.0)


def test_metric_from_nested_expressions():
    expr = [["1 + 0.1*x2", "0.1"], ["0.1", "1"]]
    field = make_field("metric", expr, dict(alpha=2.0), fine)
    assert field.values.shape == (fine.n_vertices, 2, 2)


def test_field_outside_class_reports_vertex():
    with pytest.raises(FieldClassError, match="vertex"):
        make_field("conductivity", "1 + 3*x1", dict(alpha=2.0), fine)


def test_potential_needs_ceiling():
    with pytest.raises(FieldClassError):
        make_field("potential", "0.5", dict(), fine)
    with pytest.raises(FieldClassError):
        make_field("potential", "2*x1", dict(ceiling=1.0), fine)


def test_bad_expression():
    with pytest.raises(ConfigError):
        make_field("conformal", "1 + y", dict(alpha=2.0), fine)


def test_same_boundary():
    bump = "1 + 0.5*(x1*(1-x1)*x2*(1-x2))"
    base = make_field("conformal", "1", dict(alpha=2.0), fine)
    perturbed = make_field("conformal", bump, dict(alpha=2.0), fine)
    shifted = make_field("conformal", "1 + 0.1*x1", dict(alpha=2.0), fine)
    assert same_boundary(base, perturbed, fine)
    assert not same_boundary(base, shifted, fine)
