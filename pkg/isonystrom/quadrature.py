"""Quadrature rules, the global point set and singular integrators.

All integrators take vectorised integrands: ``f(points)`` receives an
array of shape (m, k) (or (m,) in 1D) and returns values of shape (m,) or
(m, c) for c simultaneous integrands.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
import logging
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import AccuracyError, InvalidParameterError
from .geometry import NurbsPatch
from .partition import ElementPartition, LocalElement

logger = logging.getLogger(__name__)

MAX_POINTS = 64
MAX_DEPTH = 30
ADAPTIVE_POINTS = 8
MAX_LEVEL_EVALUATIONS = 1 << 20
# a bisection that keeps at least this fraction of the parent difference is not converging
STALL_RATIO = 0.5
ROUNDOFF_TOL = 1e-8
# log-singular sides are substituted down to L exp(-LOG_CUTOFF) = L 2^-36
LOG_CUTOFF = 36 * np.log(2)
INNER_POINTS = 16
DUFFY_ORDERS = (8, 12, 16, 24, 32, 48, 64)

Integrand = Callable[[np.ndarray], np.ndarray]


class QuadratureRule(NamedTuple):
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def tensor(self, pdim: int) -> tuple[np.ndarray, np.ndarray]:
        "Tensor rule on [-1, 1]^pdim, first direction fastest"
        if pdim == 1:
            return self.nodes[:, None], self.weights
        x1, x2 = np.meshgrid(self.nodes, self.nodes, indexing="xy")
        w1, w2 = np.meshgrid(self.weights, self.weights, indexing="xy")
        return np.stack([x1.ravel(), x2.ravel()], axis=-1), (w1 * w2).ravel()

    def scaled(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        h = (b - a) / 2
        return a + h * (self.nodes + 1), h * self.weights


@lru_cache(maxsize=None)
def gauss_legendre(n_points: int) -> QuadratureRule:
    if not 1 <= n_points <= MAX_POINTS:
        raise InvalidParameterError(f"Gauss-Legendre rules exist here for 1..{MAX_POINTS} points, got {n_points}")
    x, w = np.polynomial.legendre.leggauss(n_points)
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(n_points, x, w)


def _sample_params(element: LocalElement) -> np.ndarray:
    (a1, b1), *rest = element.box
    if not rest:
        return np.array([[a1], [(a1 + b1) / 2], [b1]])
    (a2, b2), = rest
    return np.array(list(product([a1, (a1 + b1) / 2, b1], [a2, (a2 + b2) / 2, b2])))


@dataclass
class LeafInfo:
    index: int
    patch: int
    element: LocalElement
    start: int
    stop: int
    #: physical points at the corners, edge midpoints and centre of the leaf
    samples: np.ndarray
    diameter: float

    @property
    def points(self) -> slice:
        return slice(self.start, self.stop)

    def distance(self, x: np.ndarray) -> np.ndarray:
        "Distance of one or many points to the leaf samples"
        x = np.atleast_2d(x)
        return np.min(np.linalg.norm(x[:, None, :] - self.samples[None, :, :], axis=-1), axis=1)


@dataclass
class QuadraturePointSet:
    rule: QuadratureRule
    patches: list[NurbsPatch]
    leaves: list[LeafInfo]
    #: index of the leaf and of the patch of every point
    leaf: np.ndarray
    patch: np.ndarray
    #: reference, parametric and physical coordinates
    xi: np.ndarray
    u: np.ndarray
    y: np.ndarray
    normal: np.ndarray
    #: Gauss weight, reference-to-parameter Jacobian, Gram determinant, and their product
    w: np.ndarray
    jac_xi: np.ndarray
    gram: np.ndarray
    omega: np.ndarray

    def __len__(self) -> int:
        return len(self.omega)

    @property
    def dim(self) -> int:
        return self.y.shape[1]

    @property
    def points_per_leaf(self) -> int:
        return self.rule.order ** (self.dim - 1)

    @property
    def samples(self) -> np.ndarray:
        return np.stack([leaf.samples for leaf in self.leaves])

    @property
    def diameters(self) -> np.ndarray:
        return np.array([leaf.diameter for leaf in self.leaves])


def distribute_points(partitions: Sequence[ElementPartition], rule: QuadratureRule) -> QuadraturePointSet:
    "Put the tensor rule on every leaf of every partition"
    xi_ref, w_ref = rule.tensor(partitions[0].pdim)
    npl = len(w_ref)

    leaves: list[LeafInfo] = []
    arrays: dict[str, list[np.ndarray]] = {k: [] for k in (
        "leaf", "patch", "xi", "u", "y", "normal", "w", "jac_xi", "gram")}
    start = 0
    for p, partition in enumerate(partitions):
        patch = partition.patch
        elements = partition.leaves()
        params, jacs = [], []
        for element in elements:
            u, jac = element.map_ref_to_param(xi_ref)
            params.append(u)
            jacs.append(np.full(npl, jac))
        u = np.concatenate(params)
        y, J = patch.evaluate(u)
        gram = patch.gram_from_jacobian(J, u)
        normal = patch.normals(u, J)

        sample_params = np.concatenate([_sample_params(e) for e in elements])
        samples = patch.points(sample_params).reshape(len(elements), -1, patch.dim)
        for k, element in enumerate(elements):
            s = samples[k]
            diameter = float(np.max(np.linalg.norm(s[:, None, :] - s[None, :, :], axis=-1)))
            leaves.append(LeafInfo(len(leaves), p, element, start, start + npl, s, diameter))
            start += npl

        first = len(leaves) - len(elements)
        arrays["leaf"].append(np.repeat(np.arange(first, len(leaves)), npl))
        arrays["patch"].append(np.full(len(u), p))
        arrays["xi"].append(np.tile(xi_ref, (len(elements), 1)))
        arrays["u"].append(u)
        arrays["y"].append(y)
        arrays["normal"].append(normal)
        arrays["w"].append(np.tile(w_ref, len(elements)))
        arrays["jac_xi"].append(np.concatenate(jacs))
        arrays["gram"].append(gram)

    cat = {k: np.concatenate(v) for k, v in arrays.items()}
    omega = cat["w"] * cat["jac_xi"] * cat["gram"]
    logger.debug("Distributed %d points on %d leaves", len(omega), len(leaves))
    return QuadraturePointSet(
        rule, [p.patch for p in partitions], leaves, omega=omega, **cat)


class AdaptiveResult(NamedTuple):
    value: np.ndarray | float
    error: float
    depth: int
    evaluations: int


def _box_rule(rule: QuadratureRule, k: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = rule.tensor(k) if k <= 2 else (None, None)
    assert nodes is not None, "adaptive integration supports one or two dimensions"
    return (nodes + 1) / 2, weights / 2 ** k


def adaptive_integrate(
    f: Integrand,
    lower: Sequence[float] | float,
    upper: Sequence[float] | float,
    tol: float = 1e-12,
    max_depth: int = MAX_DEPTH,
    points: int = ADAPTIVE_POINTS,
) -> AdaptiveResult:
    """Integrate over a box by breadth-first bisection.

    Each box is compared with the sum over its 2^k children; boxes whose
    difference is within their share of ``tol * integral(|f|)`` are accepted.
    A box whose difference stops shrinking under bisection is limited by
    rounding in ``f``; it is accepted once the difference is below its share
    of ``ROUNDOFF_TOL * integral(|f|)``.
    Missing the tolerance within ``max_depth`` levels, exceeding
    MAX_LEVEL_EVALUATIONS in one level or meeting non-finite values raises
    AccuracyError with the best estimate.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    k = len(lower)
    scalar = None
    unit_nodes, unit_weights = _box_rule(gauss_legendre(points), k)
    npts = len(unit_weights)
    corners = np.array(list(product([0.0, 0.5], repeat=k)))
    volume = float(np.prod(upper - lower))
    if volume == 0:
        return AdaptiveResult(0.0, 0.0, 0, 0)

    def integrate(lo: np.ndarray, size: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nonlocal scalar, evaluations
        pts = lo[:, None, :] + size[:, None, :] * unit_nodes[None, :, :]
        flat = pts.reshape(-1, k)
        raw = np.asarray(f(flat[:, 0] if k == 1 else flat), dtype=float)
        if scalar is None:
            scalar = raw.ndim == 1
        vals = raw.reshape(len(lo), npts, -1)
        evaluations += vals.shape[0] * npts
        jac = np.prod(size, axis=1)[:, None]
        return (np.einsum("bpc,p->bc", vals, unit_weights) * jac,
                np.einsum("bpc,p->bc", np.abs(vals), unit_weights) * jac)

    def failure(message: str, estimate: np.ndarray, error: float) -> AccuracyError:
        return AccuracyError(message, estimate=estimate[0] if scalar else estimate, error=error)

    evaluations = 0
    lo = lower[None, :]
    size = (upper - lower)[None, :]
    est, abs_est = integrate(lo, size)
    if not np.all(np.isfinite(est)):
        raise failure("Integrand is not finite on the box", est[0], np.inf)
    total = np.zeros(est.shape[1])
    abs_total = abs_est.sum(axis=0)
    error = 0.0
    # difference of the parent box, per child
    previous = np.full(1, np.inf)

    for depth in range(1, max_depth + 1):
        if len(lo) * len(corners) * npts > MAX_LEVEL_EVALUATIONS:
            raise failure(
                f"Adaptive integration needs more than {MAX_LEVEL_EVALUATIONS} evaluations at depth {depth}",
                total + est.sum(axis=0), error + float(np.max(np.abs(est.sum(axis=0)))))
        child_lo = (lo[:, None, :] + corners[None, :, :] * size[:, None, :]).reshape(-1, k)
        child_size = np.repeat(size / 2, len(corners), axis=0)
        child_est, child_abs = integrate(child_lo, child_size)
        if not np.all(np.isfinite(child_est)):
            raise failure(f"Integrand is not finite at depth {depth}", total + est.sum(axis=0), np.inf)
        child_est = child_est.reshape(len(lo), len(corners), -1)
        child_abs = child_abs.reshape(len(lo), len(corners), -1)
        refined = child_est.sum(axis=1)
        abs_total = abs_total - abs_est.sum(axis=0) + child_abs.sum(axis=(0, 1))
        diff = np.max(np.abs(refined - est), axis=1)

        share = np.prod(size, axis=1) / volume
        scale = max(float(np.max(abs_total)), np.finfo(float).tiny)
        converged = diff <= tol * scale * share
        stalled = (diff >= STALL_RATIO * previous) & (diff <= ROUNDOFF_TOL * scale * share)
        done = converged | stalled
        if np.any(stalled & ~converged):
            logger.debug("Accepted %d boxes limited by rounding at depth %d", np.sum(stalled & ~converged), depth)
        total += refined[done].sum(axis=0)
        error += float(diff[done].sum())
        if np.all(done):
            value = total[0] if scalar else total
            return AdaptiveResult(value, error, depth - 1, evaluations)

        keep = ~done
        lo = child_lo.reshape(len(done), len(corners), k)[keep].reshape(-1, k)
        size = child_size.reshape(len(done), len(corners), k)[keep].reshape(-1, k)
        est = child_est[keep].reshape(-1, child_est.shape[-1])
        abs_est = child_abs[keep].reshape(-1, child_abs.shape[-1])
        previous = np.repeat(diff[keep] / len(corners), len(corners))

    raise failure(
        f"Adaptive integration did not reach tol {tol} within depth {max_depth}",
        total + est.sum(axis=0), error + float(np.max(np.abs(est.sum(axis=0)))))


def log_singular_integrate_1d(
    f: Integrand,
    a: float,
    b: float,
    u0: float,
    tol: float = 1e-12,
) -> np.ndarray | float:
    """Integrate over [a, b] an integrand with a logarithmic singularity at u0.

    The interval is split at u0. On each side of length L the substitution
    u = u0 +- L exp(-t), t in [0, T], turns the singularity into a smooth,
    exponentially decaying integrand for adaptive integration; the remaining
    piece of length L exp(-T) next to u0 takes a plain Gauss rule. Nodes stay
    at least ~1e-14 L away from u0, so they never round onto it."""
    if not a <= u0 <= b:
        raise InvalidParameterError(f"Singular point {u0} outside [{a}, {b}]")
    inner_nodes, inner_weights = _box_rule(gauss_legendre(INNER_POINTS), 1)
    total: np.ndarray | float = 0.0
    for length, sign in ((b - u0, 1.0), (u0 - a, -1.0)):
        if length <= 0:
            continue

        def g(t: np.ndarray, length=length, sign=sign) -> np.ndarray:
            offset = length * np.exp(-t)
            vals = np.asarray(f(u0 + sign * offset), dtype=float)
            return vals * (offset if vals.ndim == 1 else offset[:, None])

        outer = adaptive_integrate(g, 0.0, LOG_CUTOFF, tol).value
        delta = length * np.exp(-LOG_CUTOFF)
        inner_vals = np.asarray(f(u0 + sign * delta * inner_nodes[:, 0]), dtype=float)
        inner = delta * np.tensordot(inner_weights, inner_vals, axes=(0, 0))
        if not np.all(np.isfinite(inner)):
            raise AccuracyError(f"Integrand is not finite next to the singular point {u0}", estimate=outer, error=np.inf)
        total = total + outer + inner
    return total


def split_integrate_1d(
    f: Integrand,
    a: float,
    b: float,
    u0: float,
    tol: float = 1e-12,
) -> np.ndarray | float:
    "Integrate over [a, b] an integrand that is bounded but not smooth across u0"
    if not a <= u0 <= b:
        raise InvalidParameterError(f"Singular point {u0} outside [{a}, {b}]")
    total: np.ndarray | float = 0.0
    for lo, hi in ((a, u0), (u0, b)):
        if hi > lo:
            total = total + adaptive_integrate(f, lo, hi, tol).value
    return total


def _triangles(lower: np.ndarray, upper: np.ndarray, point: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    corners = [
        np.array([lower[0], lower[1]]), np.array([upper[0], lower[1]]),
        np.array([upper[0], upper[1]]), np.array([lower[0], upper[1]]),
    ]
    result = []
    for v1, v2 in zip(corners, corners[1:] + corners[:1]):
        a, b = v1 - point, v2 - point
        area = abs(a[0] * b[1] - a[1] * b[0])
        if area > 1e-14 * np.prod(upper - lower):
            result.append((v1, v2))
    return result


def duffy_integrate(
    f: Integrand,
    lower: Sequence[float],
    upper: Sequence[float],
    point: Sequence[float],
    tol: float = 1e-12,
) -> np.ndarray | float:
    """Integrate over a 2D box an integrand with a 1/r singularity at ``point``.

    The box is fanned into triangles around the point; on each triangle the
    Duffy map x = P + s (V1 - P) + s t (V2 - V1) cancels the singularity.
    The Gauss order is raised until two successive results agree, with an
    adaptive fallback on the Duffy square."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    point = np.asarray(point, dtype=float)
    if np.any(point < lower) or np.any(point > upper):
        raise InvalidParameterError(f"Singular point {point} outside the box {lower}..{upper}")

    total: np.ndarray | float = 0.0
    for v1, v2 in _triangles(lower, upper, point):
        e1 = v1 - point
        e2 = v2 - v1
        det = abs(e1[0] * e2[1] - e1[1] * e2[0])

        def g(st: np.ndarray, e1=e1, e2=e2, det=det) -> np.ndarray:
            s, t = st[:, 0], st[:, 1]
            x = point + s[:, None] * e1 + (s * t)[:, None] * e2
            vals = np.asarray(f(x), dtype=float)
            jac = det * s
            return vals * (jac if vals.ndim == 1 else jac[:, None])

        previous = None
        value = None
        for order in DUFFY_ORDERS:
            nodes, weights = _box_rule(gauss_legendre(order), 2)
            vals = np.asarray(g(nodes), dtype=float)
            value = np.tensordot(weights, vals, axes=(0, 0))
            if previous is not None:
                scale = max(float(np.max(np.abs(value))), np.finfo(float).tiny)
                if np.max(np.abs(value - previous)) <= tol * scale:
                    break
            previous = value
        else:
            logger.debug("Duffy order escalation exhausted, switching to adaptive integration")
            value = adaptive_integrate(g, [0.0, 0.0], [1.0, 1.0], tol).value
        total = total + value
    return total
