from dataclasses import dataclass

import numpy as np
import pytest

from isonystrom.assembly import (
    Admissibility, Assembler, AssemblyConfig, BezierSpace, Formulation, assemble, classify, far_entry,
    leaf_moments, local_correction, singular_moment,
)
from isonystrom.errors import InvalidParameterError
from isonystrom.geometry import Geometry
from isonystrom.kernels import KelvinSLP, Kernel, LaplaceDLP, LaplaceSLP, Material, Singularity, kernel_pair
from isonystrom.quadrature import LeafInfo, gauss_legendre

from .conftest import flat_square, point_set, segment


@dataclass(frozen=True)
class PolynomialKernel(Kernel):
    "Smooth stand-in: 1 + y1 + y1^2, independent of x"

    dim: int = 2
    components = 1
    double_layer = False
    singularity = Singularity.LOG

    def __call__(self, x, y, n_y, singular="raise") -> np.ndarray:
        y = np.atleast_2d(y)
        return 1 + y[:, 0] + y[:, 0] ** 2


def _leaf(samples, diameter: float) -> LeafInfo:
    return LeafInfo(0, 0, None, 0, 1, np.asarray(samples, dtype=float), diameter)  # type: ignore[arg-type]


@pytest.mark.parametrize("x,eta,own,expected", [
    ([0.0, 2.0], 2.0, False, Admissibility.FAR),
    ([0.0, 1.0], 2.0, False, Admissibility.NEAR),
    ([0.0, 1.0], 0.5, False, Admissibility.FAR),
    ([0.0, 1.0], 1e-9, False, Admissibility.FAR),
    ([0.5, 0.0], 2.0, True, Admissibility.NEAR),
    ([0.5, 0.0], 1e-9, True, Admissibility.NEAR),
])
def test_classify(x, eta: float, own: bool, expected: Admissibility) -> None:
    leaf = _leaf([[0, 0], [1, 0]], 1.0)
    assert classify(np.array(x), leaf, eta, own=own) is expected


def test_assembly_config_validation() -> None:
    assert AssemblyConfig(formulation="slp").formulation is Formulation.SLP
    with pytest.raises(InvalidParameterError):
        AssemblyConfig(eta=0.0)
    with pytest.raises(InvalidParameterError):
        AssemblyConfig(workers=0)
    with pytest.raises(ValueError):
        AssemblyConfig(formulation="galerkin")


def test_far_entry() -> None:
    points = point_set([flat_square()], 1)
    assert points.y[0] == pytest.approx([0.5, 0.5, 0.0])
    value = far_entry(np.array([0.5, 0.5, -1.0]), points, 0, LaplaceDLP(3))
    assert value == pytest.approx(1 / (4 * np.pi) * points.omega[0])


@pytest.mark.parametrize("order,pdim", [(3, 1), (5, 1), (3, 2), (4, 2)])
def test_bezier_space(order: int, pdim: int) -> None:
    space = BezierSpace(gauss_legendre(order), pdim)
    assert len(space) == order ** pdim
    assert space.matrix.shape == (len(space), len(space))
    np.testing.assert_allclose(space.matrix.sum(axis=0), 1.0, atol=1e-14)


def test_bezier_interpolation_reproduces_polynomials() -> None:
    space = BezierSpace(gauss_legendre(3), 2)

    def p(xi: np.ndarray) -> np.ndarray:
        return xi[:, 0] ** 2 * xi[:, 1] - xi[:, 1] + 3

    coefficients, residual = space.interpolate(p(space.nodes))
    assert residual < 1e-13
    other = np.array([[0.3, -0.9], [1.0, 1.0], [-0.2, 0.4]])
    np.testing.assert_allclose(space.basis(other) @ coefficients, p(other), atol=1e-13)


def test_local_correction_reproduces_smooth_kernel() -> None:
    points = point_set([segment(2.0)], 3)
    leaf = points.leaves[0]
    space = BezierSpace(points.rule, 1)
    kernel = PolynomialKernel()
    x = np.array([5.0, 1.0])
    expected = kernel(x, points.y, points.normal) * points.omega

    correction = local_correction(x, leaf, points, kernel, space)
    np.testing.assert_allclose(correction.weights, expected, rtol=1e-12)
    assert correction.residual < 1e-12

    own = local_correction(points.y[1], leaf, points, kernel, space, xi_self=points.xi[1])
    np.testing.assert_allclose(own.weights, expected, rtol=1e-11)


def test_log_self_moment_closed_form() -> None:
    # -1/(2 pi) * integral of log|y - x| over a segment of length 2 centred on x
    points = point_set([segment(2.0)], 3)
    leaf = points.leaves[0]
    space = BezierSpace(points.rule, 1)
    x = points.y[1]
    np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-15)
    moments = leaf_moments(x, leaf, points, LaplaceSLP(2), space, 1e-12, xi_self=points.xi[1])
    assert moments.sum() == pytest.approx(1 / np.pi, rel=1e-10)
    single = [singular_moment(x, leaf, points, LaplaceSLP(2), space, t, xi_self=points.xi[1]) for t in range(3)]
    np.testing.assert_allclose(single, moments, rtol=1e-12)
    # symmetric test functions around a centred singularity
    assert moments[0] == pytest.approx(moments[2], rel=1e-10)


def test_weakly_singular_self_moment_closed_form() -> None:
    points = point_set([flat_square()], 3)
    leaf = points.leaves[0]
    space = BezierSpace(points.rule, 2)
    centre = 4
    np.testing.assert_allclose(points.y[centre], [0.5, 0.5, 0.0], atol=1e-15)
    moments = leaf_moments(points.y[centre], leaf, points, LaplaceSLP(3), space, 1e-12, xi_self=points.xi[centre])
    assert moments.sum() == pytest.approx(np.log(1 + np.sqrt(2)) / np.pi, rel=1e-9)


def test_double_layer_self_moment_on_circle(circle: Geometry) -> None:
    # on a circle of radius R the double layer kernel is the constant 1 / (4 pi R)
    points = point_set(circle, 3)
    leaf = points.leaves[0]
    space = BezierSpace(points.rule, 1)
    moments = leaf_moments(points.y[1], leaf, points, LaplaceDLP(2), space, 1e-12, xi_self=points.xi[1])
    quarter = np.pi * 0.5 / 2
    assert moments.sum() == pytest.approx(quarter / (4 * np.pi * 0.5), rel=1e-9)


def test_kelvin_self_moment_closed_form() -> None:
    points = point_set([segment(2.0)], 3)
    space = BezierSpace(points.rule, 1)
    material = Material()
    moments = leaf_moments(points.y[1], points.leaves[0], points, KelvinSLP(material), space, 1e-12,
                           xi_self=points.xi[1])
    assert moments.shape == (3, 2, 2)
    nu, mu = material.poisson_ratio, material.shear_modulus
    # integrals of log(1 / r) and of the tangent dyad over the centred segment are both 2
    expected = (2 * (3 - 4 * nu) * np.eye(2) + 2 * np.diag([1.0, 0.0])) / (8 * np.pi * mu * (1 - nu))
    np.testing.assert_allclose(moments.sum(axis=0), expected, rtol=1e-10, atol=1e-14)


def test_double_layer_jump_on_circle(circle: Geometry) -> None:
    points = point_set(circle, 6, refine=1)
    matrices = assemble(points, kernel_pair("laplace2d"), AssemblyConfig(formulation="dlp"))
    assert matrices.V is None
    np.testing.assert_allclose(matrices.K @ np.ones(len(points)), 1.0, atol=1e-7)
    assert matrices.max_residual < 1e-10


def test_elastic_rigid_body_translation(circle: Geometry) -> None:
    points = point_set(circle, 4, refine=1)
    matrices = assemble(points, kernel_pair("lame2d"), AssemblyConfig(formulation="dlp"))
    assert matrices.K.shape == (2 * len(points), 2 * len(points))
    assert matrices.dof_point.tolist()[:4] == [0, 0, 1, 1]
    assert matrices.dof_component.tolist()[:4] == [0, 1, 0, 1]
    for e in np.eye(2):
        u = np.tile(e, len(points))
        np.testing.assert_allclose(matrices.K @ u, u, atol=1e-9)


def test_near_sets_grow_with_eta(circle: Geometry) -> None:
    points = point_set(circle, 4, refine=2)
    kernels = kernel_pair("laplace2d")
    narrow = Assembler(points, kernels, AssemblyConfig(eta=1.0))
    wide = Assembler(points, kernels, AssemblyConfig(eta=4.0))
    for x in points.y:
        assert set(narrow.near_leaves(x)) <= set(wide.near_leaves(x))
    own = points.leaf[0]
    assert own in narrow.near_leaves(points.y[0])
    tiny = Assembler(points, kernels, AssemblyConfig(eta=1e-9))
    assert tiny.near_leaves(points.y[0]).size == 0
    assert tiny.near_leaves(points.y[0], own).tolist() == [own]


def test_tiny_eta_corrects_only_the_own_leaf(circle: Geometry) -> None:
    points = point_set(circle, 4, refine=1)
    kernels = kernel_pair("laplace2d")
    matrices = assemble(points, kernels, AssemblyConfig(eta=1e-9, formulation="slp"))
    assert matrices.near_pairs == len(points)
    i = 5
    leaf = points.leaves[points.leaf[i]]
    off = np.ones(len(points), dtype=bool)
    off[leaf.points] = False
    expected = kernels.single(points.y[i], points.y, points.normal, singular="zero") * points.omega
    np.testing.assert_allclose(matrices.V[i, off], expected[off], rtol=1e-14)
    assert matrices.V[i, i] != 0.0
    moments = leaf_moments(points.y[i], leaf, points, kernels.single, BezierSpace(points.rule, 1), 1e-12,
                           xi_self=points.xi[i])
    assert matrices.V[i, leaf.points].sum() == pytest.approx(moments.sum(), rel=1e-10)


def test_rows_do_not_depend_on_workers(circle: Geometry) -> None:
    points = point_set(circle, 3, refine=1)
    kernels = kernel_pair("laplace2d")
    serial = assemble(points, kernels, AssemblyConfig(formulation="direct"))
    threaded = assemble(points, kernels, AssemblyConfig(formulation="direct", workers=3))
    np.testing.assert_array_equal(serial.V, threaded.V)
    np.testing.assert_array_equal(serial.K, threaded.K)
    assert serial.near_pairs == threaded.near_pairs


def test_operator_lookup(circle: Geometry) -> None:
    points = point_set(circle, 2)
    matrices = assemble(points, kernel_pair("laplace2d"), AssemblyConfig(formulation="slp"))
    assert matrices.operator(Formulation.SLP) is matrices.V
    with pytest.raises(InvalidParameterError):
        matrices.operator(Formulation.DLP)
