"""NURBS boundary patches.

A patch is a rational curve in 2D or a rational tensor-product surface in
3D. Control points are held in homogeneous form ``(w*P, w)``; evaluation
runs the B-spline sums in homogeneous space and projects afterwards.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from enum import Enum
import logging
from math import prod
from typing import Any, Iterator, NamedTuple, Sequence

import numpy as np

from .base import GeometryLoader, YamlObject
from .errors import DomainError, InvalidGeometryError, SingularProjectionError
from .spline import DOMAIN_SLACK, KnotVector, basis_functions

logger = logging.getLogger(__name__)

# one-sided tangents differing by more than this (radians) make a corner
CORNER_ANGLE = 1e-4
# relative distance below which two patch ends are considered joined
JOIN_TOLERANCE = 1e-10


class BoundaryCondition(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


def perspective_map(xh: Sequence[float] | np.ndarray) -> np.ndarray:
    "Project homogeneous coordinates (w*x, w) to x; works along the last axis"
    xh = np.asarray(xh, dtype=float)
    w = xh[..., -1]
    if np.any(w == 0):
        raise SingularProjectionError("Cannot project a homogeneous point with zero weight")
    return xh[..., :-1] / w[..., None]


class PatchSource(ABC):
    "Anything that expands into a list of patches (shapes, included files)"

    @abstractmethod
    def to_patches(self) -> list[NurbsPatch]:
        ...


class NurbsPatch(YamlObject, yamltag="!patch", path_resolver=["patches", None], loader=GeometryLoader):
    dim: int
    knot_vectors: tuple[KnotVector, ...]
    control_net: np.ndarray
    bc: BoundaryCondition
    orientation: int
    flagged_corners: list[tuple[int, float]]

    def __init__(
        self,
        control_points: Any,
        knots: Any,
        degree: int | Sequence[int] | None = None,
        weights: Any = None,
        dim: int | None = None,
        bc: str = "dirichlet",
        orientation: int = 1,
        corners: Sequence[Any] | None = None,
        degrees: Sequence[int] | None = None,
    ):
        if len(knots) == 0:
            raise InvalidGeometryError("Patch has no knots")
        if isinstance(knots[0], (list, tuple, np.ndarray)):
            knot_lists = list(knots)
        else:
            knot_lists = [knots]
        pdim = len(knot_lists)
        if pdim not in (1, 2):
            raise InvalidGeometryError(f"Patches have one or two parametric directions, got {pdim}")

        degs: Any = degrees if degrees is not None else degree
        if degs is None:
            raise InvalidGeometryError("Patch needs a degree")
        if np.isscalar(degs):
            degs = [degs] * pdim
        if len(degs) != pdim:
            raise InvalidGeometryError(f"Got {len(degs)} degrees for {pdim} parametric directions")
        self.knot_vectors = tuple(KnotVector(k, p) for k, p in zip(knot_lists, degs))
        for kv in self.knot_vectors:
            lo, hi = kv.domain
            if not lo < hi:
                raise InvalidGeometryError(f"{kv} has an empty parameter domain")

        shape = tuple(kv.n_basis for kv in self.knot_vectors)
        pts = np.asarray(control_points, dtype=float)
        if pts.ndim < 2:
            raise InvalidGeometryError("Control points must be a list of coordinate tuples")
        d = pts.shape[-1]
        if dim is not None and dim != d:
            raise InvalidGeometryError(f"Patch declares dim {dim} but control points have {d} coordinates")
        if d not in (2, 3):
            raise InvalidGeometryError(f"Spatial dimension must be 2 or 3, got {d}")
        if d - 1 != pdim:
            raise InvalidGeometryError(
                f"A boundary patch in {d}D needs {d - 1} parametric direction(s), got {pdim}")
        if pts.size != prod(shape) * d:
            raise InvalidGeometryError(
                f"Knot vectors need a {'x'.join(map(str, shape))} control net, got {pts.size // d} points")
        pts = pts.reshape(*shape, d)

        if weights is None:
            w = np.ones(shape)
        else:
            w = np.asarray(weights, dtype=float)
            if w.size != prod(shape):
                raise InvalidGeometryError(f"Expected {prod(shape)} weights, got {w.size}")
            w = w.reshape(shape)
        if not np.all(w > 0):
            raise InvalidGeometryError("Weights must be positive")
        self.control_net = np.concatenate([pts * w[..., None], w[..., None]], axis=-1)
        self.control_net.setflags(write=False)
        self.dim = d

        try:
            self.bc = BoundaryCondition(bc)
        except ValueError:
            raise InvalidGeometryError(f"Unknown boundary condition {bc!r}") from None
        if orientation not in (1, -1):
            raise InvalidGeometryError(f"Orientation must be 1 or -1, got {orientation!r}")
        self.orientation = int(orientation)

        self.flagged_corners = []
        for c in corners or []:
            if np.isscalar(c):
                direction, value = 0, float(c)
            else:
                direction, value = int(c[0]), float(c[1])
            if not 0 <= direction < pdim:
                raise InvalidGeometryError(f"Corner direction {direction} out of range")
            lo, hi = self.knot_vectors[direction].domain
            if not lo <= value <= hi:
                raise InvalidGeometryError(f"Corner {value} outside the patch domain [{lo}, {hi}]")
            self.flagged_corners.append((direction, value))

    def __repr__(self) -> str:
        kvs = ", ".join(map(repr, self.knot_vectors))
        return f"NurbsPatch(dim={self.dim}, [{kvs}], bc={self.bc.value}, orientation={self.orientation})"

    @property
    def pdim(self) -> int:
        return len(self.knot_vectors)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(kv.degree for kv in self.knot_vectors)

    @property
    def domain(self) -> list[tuple[float, float]]:
        return [kv.domain for kv in self.knot_vectors]

    @property
    def control_points(self) -> np.ndarray:
        return perspective_map(self.control_net)

    @property
    def weights(self) -> np.ndarray:
        return self.control_net[..., -1]

    def _params(self, params: Any) -> np.ndarray:
        u = np.array(params, dtype=float).reshape(-1, self.pdim)
        for k, kv in enumerate(self.knot_vectors):
            lo, hi = kv.domain
            slack = DOMAIN_SLACK * (hi - lo)
            bad = ~((u[:, k] >= lo - slack) & (u[:, k] <= hi + slack))
            if np.any(bad):
                raise DomainError(f"Parameter {u[bad][0].tolist()} outside the patch domain {self.domain}")
            u[:, k] = np.clip(u[:, k], lo, hi)
        return u

    def evaluate(self, params: Any) -> tuple[np.ndarray, np.ndarray]:
        """Points and Jacobians at many parameters.

        ``params`` has shape (n,) for curves or (n, 2) for surfaces. Returns
        points of shape (n, dim) and Jacobians of shape (n, dim, pdim)."""
        u = self._params(params)
        bases = []
        for k, kv in enumerate(self.knot_vectors):
            spans, N, dN = basis_functions(kv, u[:, k], derivatives=True, within_domain=True)
            idx = spans[:, None] - kv.degree + np.arange(kv.degree + 1)
            bases.append((idx, N, dN))

        if self.pdim == 1:
            idx, N, dN = bases[0]
            P = self.control_net[idx]
            xh = np.einsum("ka,kac->kc", N, P)
            dxh = np.einsum("ka,kac->kc", dN, P)[:, :, None]
        else:
            (idx1, N1, dN1), (idx2, N2, dN2) = bases
            P = self.control_net[idx1[:, :, None], idx2[:, None, :]]
            xh = np.einsum("ka,kb,kabc->kc", N1, N2, P)
            dxh = np.stack([
                np.einsum("ka,kb,kabc->kc", dN1, N2, P),
                np.einsum("ka,kb,kabc->kc", N1, dN2, P),
            ], axis=-1)

        w = xh[:, -1]
        x = xh[:, :-1] / w[:, None]
        # quotient rule for the projected derivative
        jac = (dxh[:, :-1, :] - x[:, :, None] * dxh[:, -1:, :]) / w[:, None, None]
        return x, jac

    def points(self, params: Any) -> np.ndarray:
        return self.evaluate(params)[0]

    def gram_det(self, params: Any) -> np.ndarray:
        "sqrt(det(J^T J)) at many parameters"
        _, jac = self.evaluate(params)
        return self.gram_from_jacobian(jac, params)

    @staticmethod
    def gram_from_jacobian(jac: np.ndarray, params: Any = None) -> np.ndarray:
        if jac.shape[-1] == 1:
            g = np.linalg.norm(jac[:, :, 0], axis=1)
        else:
            G = np.einsum("kdi,kdj->kij", jac, jac)
            det = np.linalg.det(G)
            g = np.sqrt(np.clip(det, 0.0, None))
        bad = ~(g > 0)
        if np.any(bad):
            where = "" if params is None else f" at {np.asarray(params).reshape(len(g), -1)[bad][0].tolist()}"
            raise InvalidGeometryError(f"Degenerate mapping (Gram determinant 0){where}")
        return g

    def normals(self, params: Any, jac: np.ndarray | None = None) -> np.ndarray:
        "Unit normals, pointing outward for counterclockwise curves / right-handed surfaces"
        if jac is None:
            _, jac = self.evaluate(params)
        return _normals(jac, self.orientation)

    def sample_params(self, per_direction: int = 8) -> np.ndarray:
        "Tensor grid of parameters covering the domain, ends included"
        axes = [np.linspace(lo, hi, per_direction) for lo, hi in self.domain]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=-1)

    def validate(self, per_direction: int = 16):
        "Spot-check the Gram determinant on a parameter grid"
        params = self.sample_params(per_direction)
        self.gram_det(params)

    def tangent(self, value: float, side: int) -> np.ndarray:
        "One-sided unit tangent of a curve patch (side -1 from the left, +1 from the right)"
        assert self.pdim == 1
        lo, hi = self.domain[0]
        u = value if side > 0 else value - 1e-8 * (hi - lo)
        _, jac = self.evaluate(np.clip(u, lo, hi))
        t = jac[0, :, 0]
        return t / np.linalg.norm(t)


def _normals(jac: np.ndarray, orientation: int) -> np.ndarray:
    if jac.shape[-1] == 1:
        t = jac[:, :, 0]
        n = np.stack([t[:, 1], -t[:, 0]], axis=-1)
    else:
        n = np.cross(jac[:, :, 0], jac[:, :, 1])
    return orientation * n / np.linalg.norm(n, axis=1, keepdims=True)


def eval_curve(patch: NurbsPatch, u: float) -> np.ndarray:
    return patch.evaluate([u])[0][0]


def eval_curve_jacobian(patch: NurbsPatch, u: float) -> np.ndarray:
    return patch.evaluate([u])[1][0, :, 0]


def eval_surface(patch: NurbsPatch, u: Sequence[float]) -> np.ndarray:
    return patch.evaluate([u])[0][0]


def eval_surface_jacobian(patch: NurbsPatch, u: Sequence[float]) -> np.ndarray:
    return patch.evaluate([u])[1][0]


def gram_det(patch: NurbsPatch, u: float | Sequence[float]) -> float:
    return float(patch.gram_det([u])[0])


def _angle(a: np.ndarray, b: np.ndarray) -> float:
    c = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


class Junction(NamedTuple):
    "The end of one curve patch meeting the start of another (or itself)"

    left: int
    right: int
    angle: float


class Geometry(PatchSource, YamlObject, yamltag="!geometry", path_resolver=[], loader=GeometryLoader):
    patches: list[NurbsPatch]
    name: str | None

    def __init__(self, patches: Sequence[Any], name: str | None = None):
        flat: list[NurbsPatch] = []
        for item in patches:
            if isinstance(item, NurbsPatch):
                flat.append(item)
            elif isinstance(item, PatchSource):
                flat.extend(item.to_patches())
            elif isinstance(item, dict):
                flat.append(NurbsPatch(**item))
            else:
                raise InvalidGeometryError(f"Not a patch: {item!r}")
        if not flat:
            raise InvalidGeometryError("Geometry has no patches")
        dims = {p.dim for p in flat}
        if len(dims) != 1:
            raise InvalidGeometryError(f"Patches mix spatial dimensions {sorted(dims)}")
        self.patches = flat
        self.name = name

    def to_patches(self) -> list[NurbsPatch]:
        return list(self.patches)

    def __len__(self) -> int:
        return len(self.patches)

    def __iter__(self) -> Iterator[NurbsPatch]:
        return iter(self.patches)

    def __getitem__(self, i: int) -> NurbsPatch:
        return self.patches[i]

    @property
    def dim(self) -> int:
        return self.patches[0].dim

    @property
    def pdim(self) -> int:
        return self.dim - 1

    def validate(self, per_direction: int = 16):
        for i, patch in enumerate(self.patches):
            try:
                patch.validate(per_direction)
            except InvalidGeometryError as e:
                raise InvalidGeometryError(f"patch {i}: {e}") from e

    def sample_points(self, per_direction: int = 16) -> np.ndarray:
        return np.concatenate([p.points(p.sample_params(per_direction)) for p in self.patches])

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        pts = np.concatenate([self.sample_points(), *(p.control_points.reshape(-1, self.dim) for p in self.patches)])
        return pts.min(axis=0), pts.max(axis=0)

    def junctions(self) -> list[Junction]:
        "Joined curve patch ends, each end of patch `left` matched to the start of patch `right`"
        if self.pdim != 1:
            return []
        lo, hi = self.bounding_box()
        tol = JOIN_TOLERANCE * max(float(np.linalg.norm(hi - lo)), 1.0)
        result = []
        for i, a in enumerate(self.patches):
            end = eval_curve(a, a.domain[0][1])
            for j, b in enumerate(self.patches):
                start = eval_curve(b, b.domain[0][0])
                if np.linalg.norm(end - start) <= tol:
                    angle = _angle(a.tangent(a.domain[0][1], -1), b.tangent(b.domain[0][0], 1))
                    result.append(Junction(i, j, angle))
                    break
        return result

    def corners(self, angle_tol: float = CORNER_ANGLE) -> list[list[tuple[int, float]]]:
        """Corner locations per patch as (direction, parameter) pairs.

        Candidates are interior breakpoints of multiplicity >= p and joined patch
        ends; a candidate is a corner when its one-sided tangents differ.
        File-flagged corners are always included."""
        found: list[set[tuple[int, float]]] = [set(p.flagged_corners) for p in self.patches]
        if self.pdim == 1:
            for i, patch in enumerate(self.patches):
                kv = patch.knot_vectors[0]
                for value in kv.breakpoints()[1:-1]:
                    if kv.multiplicity(value) < kv.degree:
                        continue
                    if _angle(patch.tangent(value, -1), patch.tangent(value, 1)) > angle_tol:
                        found[i].add((0, float(value)))
            for junction in self.junctions():
                if junction.angle > angle_tol:
                    found[junction.left].add((0, self.patches[junction.left].domain[0][1]))
                    found[junction.right].add((0, self.patches[junction.right].domain[0][0]))
        result = [sorted(s) for s in found]
        if any(result):
            logger.debug("Corners: %s", result)
        return result

    def bc_interfaces(self) -> list[list[tuple[int, float]]]:
        "Patch ends where a Dirichlet patch meets a Neumann patch"
        found: list[set[tuple[int, float]]] = [set() for _ in self.patches]
        for junction in self.junctions():
            a, b = self.patches[junction.left], self.patches[junction.right]
            if a.bc != b.bc:
                found[junction.left].add((0, a.domain[0][1]))
                found[junction.right].add((0, b.domain[0][0]))
        return [sorted(s) for s in found]
