"""Dense solves, interior evaluation and Bezier interpolation of results."""
from __future__ import annotations

from dataclasses import dataclass
import logging
from typing import Sequence
import warnings

import numpy as np
import scipy.linalg

from .assembly import Assembler, BezierSpace, Formulation, SystemMatrices
from .errors import InvalidParameterError, SolveError
from .quadrature import LeafInfo, QuadraturePointSet

logger = logging.getLogger(__name__)

CONDITION_WARNING = 1e12


def condition_estimate(lu: np.ndarray, anorm: float) -> float:
    "1-norm condition number estimate from an LU factorisation"
    gecon, = scipy.linalg.get_lapack_funcs(("gecon",), (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    assert info == 0
    return np.inf if rcond == 0 else 1 / rcond


def solve_dense(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """LU solve for square systems, least squares for overdetermined ones.

    Logs a warning when the estimated condition exceeds 1e12."""
    A = np.asarray(matrix, dtype=float)
    b = np.asarray(rhs, dtype=float)
    if A.ndim != 2 or A.shape[0] != b.shape[0]:
        raise InvalidParameterError(f"Matrix of shape {A.shape} does not match right-hand side {b.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise SolveError("System contains non-finite values")
    m, n = A.shape
    if m < n:
        raise SolveError(f"Underdetermined system ({m} equations, {n} unknowns)")

    if m > n:
        x, _, rank, _ = scipy.linalg.lstsq(A, b)
        if rank < n:
            raise SolveError(f"Rank-deficient least squares system (rank {rank} < {n})")
        logger.debug("Least squares solve of a %dx%d system", m, n)
        return x

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    if np.any(np.diag(lu) == 0):
        raise SolveError("Singular matrix")
    cond = condition_estimate(lu, float(np.linalg.norm(A, 1)))
    if cond > CONDITION_WARNING:
        logger.warning("Ill-conditioned system, estimated condition %.3g", cond)
    else:
        logger.debug("Estimated condition %.3g", cond)
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


@dataclass
class Solution:
    formulation: Formulation
    points: QuadraturePointSet
    components: int
    #: layer density (psi or phi); None for the direct formulation
    density: np.ndarray | None = None
    #: Cauchy data at the points, complete after a direct solve
    u: np.ndarray | None = None
    t: np.ndarray | None = None

    def field(self, name: str) -> np.ndarray:
        "One of density, u, t as an array of shape (n,) or (n, components)"
        values = getattr(self, name)
        if values is None:
            raise InvalidParameterError(f"The {self.formulation.value} solution has no {name}")
        return values if self.components == 1 else values.reshape(-1, self.components)


def solve_system(
    matrices: SystemMatrices,
    formulation: Formulation | str,
    u: np.ndarray | None = None,
    t: np.ndarray | None = None,
    dirichlet: np.ndarray | None = None,
) -> Solution:
    """Solve for the density or the missing Cauchy data.

    ``u`` and ``t`` are per-dof vectors; for the direct formulation only the
    prescribed entries (selected by ``dirichlet``) are read."""
    formulation = Formulation(formulation)
    solution = Solution(formulation, matrices.points, matrices.components, u=u, t=t)
    if formulation is Formulation.DIRECT:
        if u is None or t is None or dirichlet is None:
            raise InvalidParameterError("The direct formulation needs u, t and the Dirichlet mask")
        dirichlet = np.asarray(dirichlet, dtype=bool)
        known = np.where(dirichlet, u, t)
        A, rhs = matrices.direct_system(dirichlet, known)
        z = solve_dense(A, rhs)
        solution.u = np.where(dirichlet, u, z)
        solution.t = np.where(dirichlet, z, t)
    else:
        if u is None:
            raise InvalidParameterError("Layer potential formulations need Dirichlet data u")
        solution.density = solve_dense(matrices.operator(formulation), u)
    return solution


def _apply(weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    if weights.ndim == 1:
        return weights @ values
    return np.einsum("jab,jb->a", weights, values)


def interior_eval(solution: Solution, targets: Sequence[Sequence[float]] | np.ndarray, assembler: Assembler) -> np.ndarray:
    """Representation formula at interior points.

    Targets near the boundary get corrected weights from the same
    admissibility test as the assembly. Returns shape (m,) or (m, components)."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    kernels = assembler.kernels
    terms: list[tuple[object, np.ndarray]] = []
    if solution.formulation is Formulation.SLP:
        terms.append((kernels.single, solution.field("density")))
    elif solution.formulation is Formulation.DLP:
        terms.append((kernels.double, solution.field("density")))
    else:
        terms.append((kernels.single, solution.field("t")))
        terms.append((kernels.double, solution.field("u")))

    c = solution.components
    out = np.zeros((len(targets), c))
    for m, x in enumerate(targets):
        for kernel, values in terms:
            weights = assembler.weights(x, kernel, strict=False).values  # type: ignore[arg-type]
            out[m] += np.atleast_1d(_apply(weights, values))
    return out[:, 0] if c == 1 else out


@dataclass
class BezierInterpolant:
    leaf: LeafInfo
    space: BezierSpace
    coefficients: np.ndarray
    residual: float

    def __call__(self, xi: np.ndarray) -> np.ndarray:
        return self.space.basis(xi) @ self.coefficients


def interpolate_results(solution: Solution, leaf: LeafInfo | int, name: str = "u") -> BezierInterpolant:
    "Bezier interpolant of pointwise results over one leaf"
    points = solution.points
    if isinstance(leaf, int):
        leaf = points.leaves[leaf]
    space = BezierSpace(points.rule, points.dim - 1)
    data = solution.field(name)[leaf.points]
    coefficients, residual = space.interpolate(np.asarray(data, dtype=float))
    if not np.all(np.isfinite(coefficients)):
        raise SolveError(f"Degenerate collocation matrix on leaf {leaf.index}")
    return BezierInterpolant(leaf, space, coefficients, residual)


def eval_interpolant(interpolant: BezierInterpolant, xi: np.ndarray | Sequence[float] | float) -> np.ndarray:
    return interpolant(np.asarray(xi, dtype=float))
