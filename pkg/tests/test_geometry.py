import numpy as np
import pytest

from isonystrom.errors import DomainError, InvalidGeometryError, SingularProjectionError
from isonystrom.geometry import (
    BoundaryCondition, Geometry, NurbsPatch, eval_curve, eval_curve_jacobian, gram_det, perspective_map,
)
from isonystrom.shapes import Circle

from .conftest import flat_square, segment


def test_perspective_map() -> None:
    np.testing.assert_allclose(perspective_map([2.0, 4.0, 2.0]), [1.0, 2.0])
    np.testing.assert_allclose(perspective_map([[1.0, 1.0], [3.0, 3.0]]), [[1.0], [1.0]])
    with pytest.raises(SingularProjectionError):
        perspective_map([1.0, 1.0, 0.0])


def test_circle_points_on_radius(unit_circle: Geometry) -> None:
    patch = unit_circle[0]
    u = np.linspace(0, 1, 37)
    x = patch.points(u)
    np.testing.assert_allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(eval_curve(patch, 0.25), [0.0, 1.0], atol=1e-15)


def test_circle_normals_point_outwards(unit_circle: Geometry) -> None:
    patch = unit_circle[0]
    u = np.linspace(0, 1, 17)
    x, jac = patch.evaluate(u)
    np.testing.assert_allclose(patch.normals(u, jac), x, atol=1e-13)


def test_jacobian_matches_finite_differences(unit_circle: Geometry) -> None:
    patch = unit_circle[0]
    h = 1e-6
    for u in (0.1, 0.3, 0.6, 0.9):
        fd = (eval_curve(patch, u + h) - eval_curve(patch, u - h)) / (2 * h)
        np.testing.assert_allclose(eval_curve_jacobian(patch, u), fd, atol=1e-6)


def test_surface_jacobian_and_normal() -> None:
    patch = flat_square()
    x, jac = patch.evaluate([[0.25, 0.75]])
    np.testing.assert_allclose(x[0], [0.25, 0.75, 0.0])
    np.testing.assert_allclose(jac[0], [[1, 0], [0, 1], [0, 0]])
    np.testing.assert_allclose(patch.normals([[0.25, 0.75]]), [[0, 0, 1]])
    assert gram_det(patch, [0.5, 0.5]) == pytest.approx(1.0)


def test_segment_gram_determinant() -> None:
    patch = segment(3.0)
    np.testing.assert_allclose(patch.gram_det([0.0, 0.5, 1.0]), 3.0)
    np.testing.assert_allclose(patch.normals([0.5]), [[0.0, -1.0]])


def test_orientation_flips_normals() -> None:
    flipped = NurbsPatch([[0, 0], [1, 0]], [0, 0, 1, 1], 1, orientation=-1)
    np.testing.assert_allclose(flipped.normals([0.5]), [[0.0, 1.0]])


def test_parameter_outside_domain() -> None:
    with pytest.raises(DomainError):
        segment().points([1.5])


@pytest.mark.parametrize("kwargs", [
    dict(control_points=[[0, 0], [1, 0]], knots=[0, 0, 1, 1], degree=1, weights=[1, 0]),
    dict(control_points=[[0, 0], [1, 0]], knots=[0, 0, 1, 1], degree=1, weights=[1, -1]),
    dict(control_points=[[0, 0], [1, 0], [2, 0]], knots=[0, 0, 1, 1], degree=1),
    dict(control_points=[[0, 0, 0], [1, 0, 0]], knots=[0, 0, 1, 1], degree=1),
    dict(control_points=[[0, 0], [1, 0]], knots=[0, 0, 1, 1], degree=1, bc="robin"),
    dict(control_points=[[0, 0], [1, 0]], knots=[0, 0, 1, 1], degree=1, orientation=2),
    dict(control_points=[[0, 0], [1, 0]], knots=[0, 0, 1, 1], degree=1, corners=[2.0]),
])
def test_invalid_patches(kwargs) -> None:
    with pytest.raises(InvalidGeometryError):
        NurbsPatch(**kwargs)


def test_degenerate_mapping_detected() -> None:
    collapsed = NurbsPatch([[0, 0], [0, 0]], [0, 0, 1, 1], 1)
    with pytest.raises(InvalidGeometryError):
        collapsed.validate()


def test_mixed_dimensions_rejected() -> None:
    with pytest.raises(InvalidGeometryError):
        Geometry([segment(), flat_square()])


def test_split_circle_junctions_and_interfaces() -> None:
    geometry = Geometry(Circle(radius=0.5, bcs=["dirichlet", "neumann", "dirichlet", "neumann"]).to_patches())
    assert [p.bc for p in geometry] == [BoundaryCondition.DIRICHLET, BoundaryCondition.NEUMANN] * 2
    junctions = geometry.junctions()
    assert [(j.left, j.right) for j in junctions] == [(0, 1), (1, 2), (2, 3), (3, 0)]
    assert all(j.angle < 1e-6 for j in junctions)
    # smooth junctions are no corners, but every junction changes the condition
    assert geometry.corners() == [[], [], [], []]
    assert geometry.bc_interfaces() == [[(0, 0.0), (0, 1.0)]] * 4


def test_open_segment_has_no_junctions() -> None:
    assert Geometry([segment()]).junctions() == []


def test_flagged_corners_kept() -> None:
    patch = NurbsPatch([[0, 0], [1, 0], [1, 1]], [0, 0, 0.5, 1, 1], 1, corners=[0.5])
    geometry = Geometry([patch])
    assert geometry.corners() == [[(0, 0.5)]]
