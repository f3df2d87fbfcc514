"""Knot vectors and B-spline basis evaluation.

All evaluation routines accept arrays of parameters and run the
Cox-de Boor triangle for every point at once; the scalar operations are thin
wrappers around the vectorised ones.
"""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, InvalidParameterError

MAX_DEGREE = 10

# parameters produced by affine maps may overshoot a knot by rounding
DOMAIN_SLACK = 1e-12


class KnotVector:
    "Non-decreasing sequence of knots together with the polynomial degree"

    knots: np.ndarray
    degree: int

    def __init__(self, knots: Sequence[float] | np.ndarray, degree: int):
        knots = np.array(knots, dtype=float)
        degree = int(degree)
        if knots.ndim != 1:
            raise InvalidParameterError("Knot vector must be one-dimensional")
        if not 0 <= degree <= MAX_DEGREE:
            raise InvalidParameterError(f"Degree {degree} outside the supported range 0..{MAX_DEGREE}")
        if len(knots) < degree + 2:
            raise InvalidParameterError(f"Degree {degree} needs at least {degree + 2} knots, got {len(knots)}")
        if not np.all(np.isfinite(knots)):
            raise InvalidParameterError("Knots must be finite")
        if np.any(np.diff(knots) < 0):
            raise InvalidParameterError(f"Knots must be non-decreasing: {knots.tolist()}")
        if knots[0] == knots[-1]:
            raise InvalidParameterError("Knot vector has no non-zero span")
        values, counts = np.unique(knots, return_counts=True)
        if counts.max() > degree + 1:
            bad = values[counts.argmax()]
            raise InvalidParameterError(
                f"Knot {bad} has multiplicity {counts.max()} > degree + 1 = {degree + 1}")

        knots.setflags(write=False)
        self.knots = knots
        self.degree = degree
        self._padded = np.concatenate([
            np.full(degree, knots[0]), knots, np.full(degree, knots[-1])])
        self._last_span = int(np.nonzero(np.diff(knots) > 0)[0][-1])

    @classmethod
    def bezier(cls, degree: int, lower: float = -1.0, upper: float = 1.0) -> KnotVector:
        "Knot vector {lower,...,lower, upper,...,upper} spanning Bernstein polynomials"
        return cls([lower] * (degree + 1) + [upper] * (degree + 1), degree)

    def __repr__(self) -> str:
        return f"KnotVector({self.knots.tolist()}, degree={self.degree})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnotVector):
            return NotImplemented
        return self.degree == other.degree and np.array_equal(self.knots, other.knots)

    def __len__(self) -> int:
        return len(self.knots)

    @property
    def n_basis(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    @property
    def domain(self) -> tuple[float, float]:
        "Interval on which the basis forms a partition of unity"
        p = self.degree
        return float(self.knots[p]), float(self.knots[-p - 1])

    def multiplicity(self, value: float) -> int:
        return int(np.count_nonzero(self.knots == value))

    @property
    def is_open(self) -> bool:
        p = self.degree
        return self.multiplicity(self.knots[0]) == p + 1 and self.multiplicity(self.knots[-1]) == p + 1

    def breakpoints(self) -> np.ndarray:
        "Distinct knot values inside the domain, ends included"
        lo, hi = self.domain
        values = np.unique(self.knots)
        return values[(values >= lo) & (values <= hi)]

    def nonzero_spans(self) -> list[int]:
        "Indices i of the non-zero spans [knots[i], knots[i+1]) inside the domain"
        p = self.degree
        return [i for i in range(p, len(self.knots) - p - 1) if self.knots[i] < self.knots[i + 1]]


class BasisSpan(NamedTuple):
    "The p+1 basis functions that may be non-zero on one knot span"

    span: int
    values: np.ndarray
    derivatives: np.ndarray | None = None

    @property
    def first(self) -> int:
        "Index of the basis function stored in values[0]"
        return self.span - len(self.values) + 1

    def dense(self, n_basis: int, derivatives: bool = False) -> np.ndarray:
        "Scatter into a vector over all basis functions of the knot vector"
        src = self.derivatives if derivatives else self.values
        assert src is not None
        out = np.zeros(n_basis)
        for k, v in enumerate(src):
            i = self.first + k
            if 0 <= i < n_basis:
                out[i] = v
        return out


def find_spans(
    kv: KnotVector,
    u: np.ndarray | float,
    within_domain: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Return the span index of every parameter and the parameters clamped to the knot range.

    Spans are half-open; a parameter equal to the last knot belongs to the
    last non-zero span. With ``within_domain`` the admissible range shrinks
    to the interval on which the basis is complete."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    lo, hi = kv.domain if within_domain else kv.bounds
    slack = DOMAIN_SLACK * (hi - lo)
    outside = ~((u >= lo - slack) & (u <= hi + slack))
    if np.any(outside):
        raise DomainError(f"Parameter {u[outside][0]!r} outside the knot range [{lo}, {hi}]")
    u = np.clip(u, lo, hi)
    spans = np.searchsorted(kv.knots, u, side="right") - 1
    last = kv.n_basis - 1 if within_domain else kv._last_span
    return np.minimum(spans, last), u


def find_span(kv: KnotVector, u: float) -> int:
    spans, _ = find_spans(kv, u)
    return int(spans[0])


def _triangle(t: np.ndarray, s: np.ndarray, u: np.ndarray, degree: int) -> np.ndarray:
    # Cox-de Boor triangle on the padded knots; every denominator is bounded
    # below by the length of the (non-zero) span, so 0/0 never occurs here
    npts = u.shape[0]
    values = np.zeros((degree + 1, npts))
    values[0] = 1.0
    left = np.zeros((degree + 1, npts))
    right = np.zeros((degree + 1, npts))
    for j in range(1, degree + 1):
        left[j] = u - t[s + 1 - j]
        right[j] = t[s + j] - u
        saved = np.zeros(npts)
        for r in range(j):
            temp = values[r] / (right[r + 1] + left[j - r])
            values[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        values[j] = saved
    return values


def basis_functions(
    kv: KnotVector,
    u: np.ndarray | float,
    derivatives: bool = False,
    within_domain: bool = False,
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Evaluate the non-zero basis functions at many parameters.

    Returns ``(spans, values, derivs)`` with ``values[k, a]`` the value of
    basis function ``spans[k] - p + a`` at ``u[k]``."""
    spans, u = find_spans(kv, u, within_domain)
    p = kv.degree
    t = kv._padded
    s = spans + p
    values = _triangle(t, s, u, p).T

    if not derivatives:
        return spans, values, None

    derivs = np.zeros_like(values)
    if p > 0:
        lower = _triangle(t, s, u, p - 1)
        for k in range(p + 1):
            if k >= 1:
                derivs[:, k] += p * lower[k - 1] / (t[s + k] - t[s - p + k])
            if k <= p - 1:
                derivs[:, k] -= p * lower[k] / (t[s + k + 1] - t[s - p + k + 1])
    return spans, values, derivs


def eval_basis(kv: KnotVector, u: float) -> BasisSpan:
    spans, values, _ = basis_functions(kv, u)
    return BasisSpan(int(spans[0]), values[0])


def eval_basis_derivatives(kv: KnotVector, u: float) -> BasisSpan:
    spans, values, derivs = basis_functions(kv, u, derivatives=True)
    assert derivs is not None
    return BasisSpan(int(spans[0]), values[0], derivs[0])


def collocation_matrix(kv: KnotVector, u: np.ndarray, derivatives: bool = False) -> np.ndarray:
    "Dense matrix C[k, i] = N_i(u_k) (or N'_i(u_k)) over all basis functions"
    spans, values, derivs = basis_functions(kv, u, derivatives=derivatives)
    src = derivs if derivatives else values
    assert src is not None
    p = kv.degree
    out = np.zeros((len(spans), kv.n_basis))
    for k, span in enumerate(spans):
        for a in range(p + 1):
            i = span - p + a
            if 0 <= i < kv.n_basis:
                out[k, i] = src[k, a]
    return out
