import numpy as np
import pytest

from isonystrom.errors import DomainError, InvalidParameterError
from isonystrom.spline import (
    KnotVector, basis_functions, collocation_matrix, eval_basis, eval_basis_derivatives, find_span,
)


@pytest.mark.parametrize("knots,degree,u,span", [
    ([0, 0, 0, 1, 1, 1], 2, 0.4, 2),
    ([0, 0, 0, 1, 1, 1], 2, 1.0, 2),
    ([0, 0, 0, 0, 2, 4, 4, 4, 4], 3, 3.0, 4),
    ([0, 0, 0, 0, 2, 4, 4, 4, 4], 3, 2.0, 4),
    ([0, 0, 0, 0, 2, 4, 4, 4, 4], 3, 0.0, 3),
])
def test_find_span(knots, degree, u, span) -> None:
    assert find_span(KnotVector(knots, degree), u) == span


def test_bernstein_values() -> None:
    basis = eval_basis(KnotVector([0, 0, 0, 1, 1, 1], 2), 0.5)
    np.testing.assert_allclose(basis.values, [0.25, 0.5, 0.25], atol=1e-15)


def test_single_quadratic_bspline() -> None:
    kv = KnotVector([1, 2, 3, 4], 2)
    assert kv.n_basis == 1
    assert eval_basis(kv, 2.0).dense(1)[0] == pytest.approx(0.5)
    assert eval_basis(kv, 2.5).dense(1)[0] == pytest.approx(0.75)


@pytest.mark.parametrize("knots,degree", [
    ([0, 0, 0, 0.3, 0.3, 0.7, 1, 1, 1], 2),
    ([0, 0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1, 1], 3),
    ([-1, -1, 1, 1], 1),
])
def test_partition_of_unity(knots, degree) -> None:
    kv = KnotVector(knots, degree)
    u = np.linspace(*kv.domain, 101)
    C = collocation_matrix(kv, u)
    np.testing.assert_allclose(C.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(C >= -1e-15)


def _random_open_knots(rng: np.random.Generator, degree: int, interior: int) -> KnotVector:
    # jittered uniform interior knots keep every span wider than 0.4 / (interior + 1)
    inner = (np.arange(1, interior + 1) + rng.uniform(-0.3, 0.3, interior)) / (interior + 1)
    return KnotVector([0.0] * (degree + 1) + inner.tolist() + [1.0] * (degree + 1), degree)


@pytest.mark.parametrize("degree", [1, 2, 3, 4, 5])
def test_partition_of_unity_random(degree: int, rng: np.random.Generator) -> None:
    kv = _random_open_knots(rng, degree, 4)
    C = collocation_matrix(kv, rng.uniform(0.0, 1.0, 1000))
    np.testing.assert_allclose(C.sum(axis=1), 1.0, rtol=0, atol=1e-12)


@pytest.mark.parametrize("degree", [1, 2, 3, 4, 5])
def test_derivatives_on_random_knot_vectors(degree: int, rng: np.random.Generator) -> None:
    kv = _random_open_knots(rng, degree, 3)
    u = rng.uniform(0.01, 0.99, 200)
    # degree 1 derivatives jump at the knots
    u = u[np.min(np.abs(u[:, None] - kv.knots[None, :]), axis=1) > 1e-3]
    h = 1e-6
    D = collocation_matrix(kv, u, derivatives=True)
    fd = (collocation_matrix(kv, u + h) - collocation_matrix(kv, u - h)) / (2 * h)
    np.testing.assert_allclose(D, fd, rtol=0, atol=1e-6)


def test_single_quadratic_derivative() -> None:
    kv = KnotVector([1, 2, 3, 4], 2)
    h = 1e-6
    analytic = eval_basis_derivatives(kv, 2.5).dense(1, derivatives=True)
    fd = (eval_basis(kv, 2.5 + h).dense(1) - eval_basis(kv, 2.5 - h).dense(1)) / (2 * h)
    np.testing.assert_allclose(analytic, fd, atol=1e-6)
    assert analytic[0] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("multiplicity", [1, 2, 3])
def test_values_continuous_across_repeated_knot(multiplicity: int) -> None:
    kv = KnotVector([0.0] * 4 + [0.5] * multiplicity + [1.0] * 4, 3)
    left = collocation_matrix(kv, np.array([0.5 - 1e-13]))
    right = collocation_matrix(kv, np.array([0.5]))
    np.testing.assert_allclose(left, right, rtol=0, atol=1e-10)


def test_derivatives_match_finite_differences() -> None:
    kv = KnotVector([0, 0, 0, 0, 0.4, 0.6, 1, 1, 1, 1], 3)
    u = np.array([0.1, 0.35, 0.5, 0.8, 0.95])
    h = 1e-6
    D = collocation_matrix(kv, u, derivatives=True)
    fd = (collocation_matrix(kv, u + h) - collocation_matrix(kv, u - h)) / (2 * h)
    np.testing.assert_allclose(D, fd, atol=1e-6)
    # derivatives of a partition of unity sum to zero
    np.testing.assert_allclose(D.sum(axis=1), 0.0, atol=1e-10)


def test_eval_basis_derivatives_span() -> None:
    kv = KnotVector([0, 0, 1, 2, 2], 1)
    basis = eval_basis_derivatives(kv, 1.5)
    assert basis.span == 2
    np.testing.assert_allclose(basis.values, [0.5, 0.5])
    np.testing.assert_allclose(basis.derivatives, [-1.0, 1.0])


def test_vectorised_matches_scalar() -> None:
    kv = KnotVector([0, 0, 0, 0.5, 1, 1, 1], 2)
    u = np.array([0.1, 0.5, 0.9])
    spans, values, _ = basis_functions(kv, u)
    for k, x in enumerate(u):
        scalar = eval_basis(kv, x)
        assert scalar.span == spans[k]
        np.testing.assert_allclose(scalar.values, values[k])


def test_bezier_knots() -> None:
    kv = KnotVector.bezier(3)
    assert kv.knots.tolist() == [-1, -1, -1, -1, 1, 1, 1, 1]
    assert kv.n_basis == 4
    assert kv.is_open


def test_outside_domain() -> None:
    kv = KnotVector([0, 0, 1, 1], 1)
    with pytest.raises(DomainError):
        find_span(kv, 1.5)
    with pytest.raises(DomainError):
        eval_basis(kv, -0.1)


@pytest.mark.parametrize("knots,degree", [
    ([0, 1, 0.5, 2], 1),
    ([0, 0, 0, 0, 1, 1, 1], 2),
    ([0, 0, 1], 2),
    ([1, 1, 1, 1], 1),
    ([0, 0, 1, 1], -1),
])
def test_invalid_knot_vectors(knots, degree) -> None:
    with pytest.raises(InvalidParameterError):
        KnotVector(knots, degree)
