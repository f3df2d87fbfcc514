import math

import numpy as np
import pytest

from isonystrom.errors import AccuracyError, InvalidParameterError
from isonystrom.geometry import Geometry
from isonystrom.quadrature import (
    adaptive_integrate, duffy_integrate, gauss_legendre, log_singular_integrate_1d, split_integrate_1d,
)

from .conftest import flat_square, point_set, segment


def test_gauss_legendre_exactness() -> None:
    rule = gauss_legendre(3)
    assert rule.weights.sum() == pytest.approx(2.0)
    assert rule.weights @ rule.nodes ** 4 == pytest.approx(2 / 5)
    assert gauss_legendre(3) is rule


@pytest.mark.parametrize("n", [0, 65])
def test_gauss_legendre_range(n: int) -> None:
    with pytest.raises(InvalidParameterError):
        gauss_legendre(n)


def test_tensor_rule_order() -> None:
    rule = gauss_legendre(2)
    nodes, weights = rule.tensor(2)
    assert nodes.shape == (4, 2)
    np.testing.assert_allclose(nodes[1], [rule.nodes[1], rule.nodes[0]])
    assert weights.sum() == pytest.approx(4.0)


def test_circle_circumference(unit_circle: Geometry) -> None:
    points = point_set(unit_circle, 8, refine=2)
    assert len(points) == 16 * 8
    assert points.omega.sum() == pytest.approx(2 * np.pi, rel=1e-10)


def test_torus_area(torus: Geometry) -> None:
    points = point_set(torus, 8, refine=1)
    assert len(points) == 64 * 64
    assert points.omega.sum() == pytest.approx(4 * np.pi ** 2 * 0.9 * 0.2, rel=1e-6)


def test_point_set_layout() -> None:
    points = point_set([segment(2.0)], 3, refine=1)
    assert len(points.leaves) == 2
    assert points.leaf.tolist() == [0, 0, 0, 1, 1, 1]
    first = points.leaves[0]
    assert (first.start, first.stop) == (0, 3)
    assert first.diameter == pytest.approx(1.0)
    np.testing.assert_allclose(first.samples, [[0, 0], [0.5, 0], [1, 0]])
    np.testing.assert_allclose(points.omega, np.tile(gauss_legendre(3).weights / 2, 2))
    np.testing.assert_allclose(points.y[:3, 0], 0.5 * (gauss_legendre(3).nodes + 1))


def test_surface_point_set() -> None:
    points = point_set([flat_square()], 2, refine=1)
    assert len(points) == 16
    assert points.omega.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(points.normal, np.tile([0, 0, 1], (16, 1)))
    assert points.leaves[0].diameter == pytest.approx(np.sqrt(0.5))


def test_point_distribution_is_reproducible(circle: Geometry) -> None:
    first = point_set(circle, 5, refine=2)
    second = point_set(circle, 5, refine=2)
    for name in ("leaf", "u", "y", "normal", "omega"):
        np.testing.assert_array_equal(getattr(first, name), getattr(second, name))


def test_adaptive_polynomial() -> None:
    result = adaptive_integrate(lambda x: x ** 2, 0.0, 1.0)
    assert result.value == pytest.approx(1 / 3, rel=1e-14)
    assert result.depth == 0


def test_adaptive_sqrt() -> None:
    result = adaptive_integrate(np.sqrt, 0.0, 1.0, tol=1e-6)
    assert result.value == pytest.approx(2 / 3, rel=1e-6)
    assert result.depth > 0


def test_adaptive_two_dimensional_vector() -> None:
    def f(x: np.ndarray) -> np.ndarray:
        return np.stack([x[:, 0] * x[:, 1], np.ones(len(x))], axis=-1)

    result = adaptive_integrate(f, [0.0, 0.0], [1.0, 2.0])
    np.testing.assert_allclose(result.value, [1.0, 2.0], rtol=1e-13)


def test_adaptive_reports_missed_tolerance() -> None:
    with pytest.raises(AccuracyError) as info:
        adaptive_integrate(lambda x: 1 / np.sqrt(x), 0.0, 1.0, tol=1e-14, max_depth=2)
    assert info.value.estimate == pytest.approx(2.0, rel=0.1)
    assert info.value.error > 0


@pytest.mark.parametrize("u0", [0.3, 0.0, 1.0, -0.75])
def test_log_singular(u0: float) -> None:
    def exact(a: float) -> float:
        total = -2.0
        for v in (1 - a, 1 + a):
            if v > 0:
                total += v * math.log(v)
        return total

    value = log_singular_integrate_1d(lambda u: np.log(np.abs(u - u0)), -1.0, 1.0, u0)
    assert value == pytest.approx(exact(u0), rel=1e-11)


def test_adaptive_rejects_non_finite_values() -> None:
    with pytest.raises(AccuracyError, match="not finite"):
        adaptive_integrate(lambda x: np.where(x < 0.3, np.inf, 1.0), 0.0, 1.0)


def test_adaptive_work_is_capped(rng: np.random.Generator) -> None:
    with pytest.raises(AccuracyError, match="evaluations") as info:
        adaptive_integrate(lambda x: 1 + 1e-3 * rng.standard_normal(len(x)), 0.0, 1.0)
    assert info.value.estimate == pytest.approx(1.0, rel=1e-2)


def test_adaptive_accepts_rounding_limited_boxes(rng: np.random.Generator) -> None:
    result = adaptive_integrate(lambda x: 1 + 1e-13 * rng.standard_normal(len(x)), 0.0, 1.0, tol=1e-15)
    assert result.value == pytest.approx(1.0, rel=1e-11)
    assert result.depth < 15


def test_log_singular_vector_valued() -> None:
    def f(u: np.ndarray) -> np.ndarray:
        return np.stack([np.log(np.abs(u - 0.3)), u ** 2], axis=-1)

    value = log_singular_integrate_1d(f, -1.0, 1.0, 0.3)
    assert np.all(np.isfinite(value))
    assert value[1] == pytest.approx(2 / 3, rel=1e-10)


def test_split_integrate_kink() -> None:
    value = split_integrate_1d(lambda u: np.abs(u - 0.25) + np.sign(u - 0.25), -1.0, 1.0, 0.25)
    assert value == pytest.approx(1.25 ** 2 / 2 + 0.75 ** 2 / 2 - 0.5, rel=1e-13)
    with pytest.raises(InvalidParameterError):
        split_integrate_1d(np.abs, 0.0, 1.0, -0.5)


def test_log_singular_point_outside() -> None:
    with pytest.raises(InvalidParameterError):
        log_singular_integrate_1d(np.abs, 0.0, 1.0, 2.0)


def test_duffy_corner() -> None:
    def f(x: np.ndarray) -> np.ndarray:
        return 1 / np.linalg.norm(x, axis=1)

    value = duffy_integrate(f, [0.0, 0.0], [1.0, 1.0], [0.0, 0.0])
    assert value == pytest.approx(2 * math.log(1 + math.sqrt(2)), rel=1e-9)


def test_duffy_interior_point() -> None:
    center = np.array([0.5, 0.5])

    def f(x: np.ndarray) -> np.ndarray:
        return 1 / np.linalg.norm(x - center, axis=1)

    value = duffy_integrate(f, [0.0, 0.0], [1.0, 1.0], center)
    assert value == pytest.approx(4 * math.log(1 + math.sqrt(2)), rel=1e-9)


def test_duffy_vector_valued() -> None:
    def f(x: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(x - [1.0, 0.0], axis=1)
        return np.stack([1 / r, np.ones(len(x))], axis=-1)

    value = duffy_integrate(f, [-1.0, -1.0], [1.0, 1.0], [1.0, 0.0])
    assert value[1] == pytest.approx(4.0)
