"""Dense Nystrom matrices with local correction.

Collocation points are the quadrature points. A matrix row is a sum of
plain point evaluations ``kernel(x_i, y_j) * omega_j`` over far leaves and
of corrected weights over near leaves; corrected weights reproduce the
integrals of the Bernstein test functions of a leaf against the true
kernel.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
import logging
import time
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import AccuracyError, InvalidParameterError
from .kernels import Kernel, KernelPair, Singularity
from .quadrature import (
    LeafInfo, QuadraturePointSet, QuadratureRule, adaptive_integrate, duffy_integrate,
    log_singular_integrate_1d, split_integrate_1d,
)
from .spline import KnotVector, collocation_matrix

logger = logging.getLogger(__name__)

# jump of the double layer at smooth boundary points
JUMP = 0.5
RESIDUAL_TOL = 1e-10


class Formulation(str, Enum):
    # first kind, V phi = u
    SLP = "slp"
    # second kind, (1/2 I + K) psi = u
    DLP = "dlp"
    # mixed Cauchy data, V t = (I - K) u
    DIRECT = "direct"


class Admissibility(str, Enum):
    FAR = "far"
    NEAR = "near"


@dataclass
class AssemblyConfig:
    eta: float = 2.0
    moment_tol: float = 1e-12
    formulation: Formulation = Formulation.DLP
    workers: int = 1

    def __post_init__(self):
        self.formulation = Formulation(self.formulation)
        if not self.eta > 0:
            raise InvalidParameterError(f"Admissibility factor must be positive, got {self.eta}")
        if not self.moment_tol > 0:
            raise InvalidParameterError(f"Moment tolerance must be positive, got {self.moment_tol}")
        if self.workers < 1:
            raise InvalidParameterError(f"Need at least one worker, got {self.workers}")


class BezierSpace:
    """Bernstein polynomials of degree n-1 per direction on [-1, 1]^pdim,
    for an n-point rule; the first direction runs fastest"""

    def __init__(self, rule: QuadratureRule, pdim: int):
        self.rule = rule
        self.pdim = pdim
        self.knots = KnotVector.bezier(rule.order - 1)
        self.nodes, _ = rule.tensor(pdim)
        #: N[t, j] = N_t(xi_j)
        self.matrix = self.basis(self.nodes).T
        lu, piv = scipy.linalg.lu_factor(self.matrix, check_finite=False)
        diag = np.abs(np.diag(lu))
        if diag.min() <= np.finfo(float).eps * len(diag) * diag.max():
            logger.warning("Bezier moment matrix is rank deficient, using least squares")
            self._lu = None
        else:
            self._lu = (lu, piv)

    def __len__(self) -> int:
        return self.rule.order ** self.pdim

    def basis(self, xi: np.ndarray) -> np.ndarray:
        "Test functions at reference points, shape (m, len(self))"
        xi = np.asarray(xi, dtype=float).reshape(-1, self.pdim)
        B1 = collocation_matrix(self.knots, xi[:, 0])
        if self.pdim == 1:
            return B1
        B2 = collocation_matrix(self.knots, xi[:, 1])
        return (B2[:, :, None] * B1[:, None, :]).reshape(len(xi), -1)

    def solve(self, rhs: np.ndarray) -> tuple[np.ndarray, float]:
        "Solve N w = rhs for any trailing shape of rhs; returns w and the max-norm residual"
        g = rhs.reshape(len(self), -1)
        if self._lu is not None:
            w = scipy.linalg.lu_solve(self._lu, g, check_finite=False)
        else:
            w = scipy.linalg.lstsq(self.matrix, g)[0]
        residual = float(np.max(np.abs(self.matrix @ w - g))) if g.size else 0.0
        return w.reshape(rhs.shape), residual

    def interpolate(self, data: np.ndarray) -> tuple[np.ndarray, float]:
        "Coefficients c with sum_i N_i(xi_k) c_i = data_k at the nodes, and the residual"
        g = data.reshape(len(self), -1)
        if self._lu is not None:
            c = scipy.linalg.lu_solve(self._lu, g, trans=1, check_finite=False)
        else:
            c = scipy.linalg.lstsq(self.matrix.T, g)[0]
        residual = float(np.max(np.abs(self.matrix.T @ c - g))) if g.size else 0.0
        return c.reshape(data.shape), residual


def classify(x: np.ndarray, leaf: LeafInfo, eta: float, own: bool = False) -> Admissibility:
    """Far iff dist(x, leaf) >= eta * diam(leaf), so a larger eta corrects more leaves.

    ``own`` marks the leaf that contains x, which is always near."""
    if own:
        return Admissibility.NEAR
    dist = float(leaf.distance(x)[0])
    return Admissibility.FAR if dist >= eta * leaf.diameter else Admissibility.NEAR


def far_entry(x: np.ndarray, points: QuadraturePointSet, j: int, kernel: Kernel) -> np.ndarray | float:
    value = kernel(x, points.y[j:j + 1], points.normal[j:j + 1])[0] * points.omega[j]
    return float(value) if np.ndim(value) == 0 else value


def leaf_moments(
    x: np.ndarray,
    leaf: LeafInfo,
    points: QuadraturePointSet,
    kernel: Kernel,
    space: BezierSpace,
    tol: float,
    xi_self: np.ndarray | None = None,
    subtract: bool = False,
    strict: bool = True,
) -> np.ndarray:
    """Integrals of kernel(x, .) times every test function over a leaf.

    ``xi_self`` is the reference coordinate of x when x lies on the leaf.
    With ``subtract`` the test functions are replaced by N_t - N_t(xi_self),
    which removes the principal value part of a strongly singular kernel.
    Without ``strict`` an integration that misses the tolerance logs a
    warning and keeps its best estimate.
    Returns shape (len(space), *kernel.block)."""
    patch = points.patches[leaf.patch]
    element = leaf.element
    pdim = space.pdim
    shift = space.basis(xi_self)[0] if subtract and xi_self is not None else None

    def integrand(xi: np.ndarray) -> np.ndarray:
        u, jac = element.map_ref_to_param(xi)
        y, J = patch.evaluate(u)
        gram = patch.gram_from_jacobian(J)
        k = kernel(x, y, patch.normals(u, J), singular="clamp")
        B = space.basis(xi)
        if shift is not None:
            B = B - shift
        k = k * (gram * jac).reshape(-1, *([1] * len(kernel.block)))
        values = B.reshape(*B.shape, *([1] * len(kernel.block))) * k[:, None]
        return values.reshape(len(B), -1)

    if xi_self is None:
        try:
            value = adaptive_integrate(integrand, [-1.0] * pdim, [1.0] * pdim, tol).value
        except AccuracyError as e:
            if strict:
                raise
            logger.warning("Near evaluation at %s: %s (error estimate %.3g)", np.round(x, 6).tolist(), e, e.error)
            value = e.estimate
    elif pdim == 1 and kernel.singularity is Singularity.LOG:
        value = log_singular_integrate_1d(integrand, -1.0, 1.0, float(np.ravel(xi_self)[0]), tol)
    elif pdim == 1:
        value = split_integrate_1d(integrand, -1.0, 1.0, float(np.ravel(xi_self)[0]), tol)
    else:
        value = duffy_integrate(integrand, [-1.0, -1.0], [1.0, 1.0], np.ravel(xi_self), tol)
    return np.asarray(value).reshape(len(space), *kernel.block)


def singular_moment(
    x: np.ndarray,
    leaf: LeafInfo,
    points: QuadraturePointSet,
    kernel: Kernel,
    space: BezierSpace,
    test_function: int,
    tol: float = 1e-12,
    xi_self: np.ndarray | None = None,
) -> np.ndarray | float:
    "Integral of one test function of the leaf against kernel(x, .)"
    value = leaf_moments(x, leaf, points, kernel, space, tol, xi_self)[test_function]
    return float(value) if np.ndim(value) == 0 else value


class LocalCorrection(NamedTuple):
    weights: np.ndarray
    moments: np.ndarray
    residual: float


def local_correction(
    x: np.ndarray,
    leaf: LeafInfo,
    points: QuadraturePointSet,
    kernel: Kernel,
    space: BezierSpace,
    tol: float = 1e-12,
    xi_self: np.ndarray | None = None,
    strict: bool = True,
) -> LocalCorrection:
    "Weights (kernel folded in) for the points of a near leaf"
    g = leaf_moments(x, leaf, points, kernel, space, tol, xi_self, strict=strict)
    w, residual = space.solve(g)
    return LocalCorrection(w, g, residual)


class RowWeights(NamedTuple):
    values: np.ndarray
    near: int
    residual: float


@dataclass
class SystemMatrices:
    points: QuadraturePointSet
    components: int
    V: np.ndarray | None = None
    #: double layer matrix including the jump
    K: np.ndarray | None = None
    near_pairs: int = 0
    max_residual: float = 0.0
    #: point index and component of every dof
    dof_point: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    dof_component: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def size(self) -> int:
        return len(self.points) * self.components

    def operator(self, formulation: Formulation) -> np.ndarray:
        matrix = {Formulation.SLP: self.V, Formulation.DLP: self.K}.get(Formulation(formulation))
        if matrix is None:
            raise InvalidParameterError(f"No {formulation} operator in this system")
        return matrix

    def direct_system(self, dirichlet: np.ndarray, known: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Block system of V t = (I - K) u with mixed data.

        ``dirichlet`` flags the dofs with prescribed u (the rest have
        prescribed t); ``known`` holds the prescribed value of every dof.
        The unknown of a dof is t where u is given and u where t is given."""
        assert self.V is not None and self.K is not None
        dirichlet = np.asarray(dirichlet, dtype=bool)
        A_u = self.K - np.eye(self.size)
        A = np.where(dirichlet[None, :], self.V, A_u)
        B = np.where(dirichlet[None, :], A_u, self.V)
        return A, -B @ np.asarray(known, dtype=float)


class Assembler:
    def __init__(self, points: QuadraturePointSet, kernels: KernelPair, config: AssemblyConfig | None = None):
        self.points = points
        self.kernels = kernels
        self.config = config if config is not None else AssemblyConfig()
        self.space = BezierSpace(points.rule, points.dim - 1)
        self.samples = points.samples
        self.diameters = points.diameters

    def near_leaves(self, x: np.ndarray, own_leaf: int | None = None) -> np.ndarray:
        "Indices of the leaves classified near, the leaf containing x included"
        d = np.linalg.norm(self.samples - np.asarray(x)[None, None, :], axis=-1).min(axis=1)
        near = d < self.config.eta * self.diameters
        if own_leaf is not None:
            near[own_leaf] = True
        return np.nonzero(near)[0]

    def weights(self, x: np.ndarray, kernel: Kernel, own: int | None = None, strict: bool = True) -> RowWeights:
        """Weights of every point for integrating kernel(x, .) times a density.

        ``own`` is the index of x in the point set when x is a collocation
        point; the jump term is not included."""
        pts = self.points
        tol = self.config.moment_tol
        block = kernel.block
        values = kernel(x, pts.y, pts.normal, singular="zero") * pts.omega.reshape(-1, *([1] * len(block)))
        own_leaf = int(pts.leaf[own]) if own is not None else None
        xi_self = pts.xi[own] if own is not None else None
        near = self.near_leaves(x, own_leaf)
        residual = 0.0

        strong = own_leaf is not None and kernel.singularity is Singularity.STRONG
        for index in near:
            leaf = pts.leaves[index]
            if strong and index == own_leaf:
                continue
            correction = local_correction(
                x, leaf, pts, kernel, self.space, tol, xi_self if index == own_leaf else None, strict)
            values[leaf.points] = correction.weights
            residual = max(residual, correction.residual)

        if strong:
            # the whole closed boundary integrates to the jump; the own leaf takes the remainder
            leaf = pts.leaves[own_leaf]
            values[leaf.points] = 0.0
            remainder = JUMP * np.eye(kernel.components) - values.sum(axis=0)
            g = (self.space.basis(xi_self)[0][:, None, None] * remainder[None]
                 + leaf_moments(x, leaf, pts, kernel, self.space, tol, xi_self, subtract=True))
            w, res = self.space.solve(g)
            values[leaf.points] = w
            residual = max(residual, res)
        return RowWeights(values, len(near), residual)

    def _row(self, i: int) -> dict[str, tuple[np.ndarray, RowWeights]]:
        x = self.points.y[i]
        c = self.kernels.components
        out = {}
        for name, kernel in self._needed():
            rw = self.weights(x, kernel, own=i)
            values = rw.values.copy()
            if kernel.double_layer:
                values[i] = values[i] + JUMP * (np.eye(c) if c > 1 else 1.0)
            row = values if c == 1 else values.transpose(1, 0, 2).reshape(c, -1)
            out[name] = (row, rw)
        return out

    def _needed(self) -> list[tuple[str, Kernel]]:
        formulation = self.config.formulation
        needed = []
        if formulation in (Formulation.SLP, Formulation.DIRECT):
            needed.append(("V", self.kernels.single))
        if formulation in (Formulation.DLP, Formulation.DIRECT):
            needed.append(("K", self.kernels.double))
        return needed

    def assemble(self) -> SystemMatrices:
        pts = self.points
        c = self.kernels.components
        n = len(pts)
        started = time.perf_counter()
        if self.config.workers > 1:
            with ThreadPoolExecutor(self.config.workers) as pool:
                rows = list(pool.map(self._row, range(n)))
        else:
            rows = [self._row(i) for i in range(n)]

        result = SystemMatrices(
            pts, c,
            dof_point=np.repeat(np.arange(n), c),
            dof_component=np.tile(np.arange(c), n))
        for name, _ in self._needed():
            matrix = np.empty((n * c, n * c))
            for i, row in enumerate(rows):
                matrix[i * c:(i + 1) * c] = row[name][0]
                rw = row[name][1]
                result.near_pairs += rw.near
                result.max_residual = max(result.max_residual, rw.residual)
            setattr(result, name, matrix)

        logger.info("Assembled %d dofs in %.2fs", n * c, time.perf_counter() - started)
        logger.debug("Near pairs: %d, max moment residual %.3g", result.near_pairs, result.max_residual)
        if result.max_residual > RESIDUAL_TOL:
            logger.warning("Moment residual %.3g exceeds %.0e", result.max_residual, RESIDUAL_TOL)
        return result


def assemble(points: QuadraturePointSet, kernels: KernelPair, config: AssemblyConfig | None = None) -> SystemMatrices:
    return Assembler(points, kernels, config).assemble()
