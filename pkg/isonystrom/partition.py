"""Partition of patches into integration elements.

Global elements are the non-zero spans of artificial knot vectors (a
superset of the geometry knots that never defines basis functions). Each
global element may be refined further by refinement points into a tree of
local elements, described by 3x3 affine transformation matrices acting on
the node matrix of the global element.

Curves use the same machinery with a dummy second direction [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
from typing import Iterable, Literal, NamedTuple, Sequence

import numpy as np

from .errors import InvalidParameterError, PlacementError, RefinementError
from .geometry import NurbsPatch

logger = logging.getLogger(__name__)

DUMMY_SPAN = (0.0, 1.0)

GradingEnd = Literal["left", "right", "both"]


class RefinementPoint(NamedTuple):
    coords: tuple[float, ...]
    level: int = 1

    def padded(self) -> np.ndarray:
        "Coordinates in two parametric directions (curves get a dummy 0)"
        c = [float(x) for x in self.coords]
        return np.array(c + [DUMMY_SPAN[0]] * (2 - len(c)))


def node_matrix(lower: Sequence[float], upper: Sequence[float]) -> np.ndarray:
    "Homogeneous corner nodes of a parameter box, in the column order (lo,lo) (hi,hi) (lo,hi) (hi,lo)"
    (a1, a2), (b1, b2) = lower, upper
    return np.array([
        [a1, b1, a1, b1],
        [a2, b2, b2, a2],
        [1.0, 1.0, 1.0, 1.0],
    ])


def _cells(A: np.ndarray, points: Iterable[Sequence[float]]) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    lo = A[:2, 0]
    hi = A[:2, 1]
    full = hi - lo
    cuts = [{float(lo[k]), float(hi[k])} for k in range(2)]
    for p in points:
        for k in range(2):
            assert lo[k] <= p[k] <= hi[k], f"{p} outside {lo}..{hi}"
            cuts[k].add(float(p[k]))
    edges = [sorted(c) for c in cuts]

    result = []
    t2 = 0.0
    for a2, b2 in zip(edges[1], edges[1][1:]):
        l2 = b2 - a2
        t1 = 0.0
        for a1, b1 in zip(edges[0], edges[0][1:]):
            l1 = b1 - a1
            T = np.diag([l1 / full[0], l2 / full[1], 1.0])
            T[0, 2] = lo[0] * (1 - l1 / full[0]) + t1
            T[1, 2] = lo[1] * (1 - l2 / full[1]) + t2
            result.append((T, np.array([a1, a2]), np.array([b1, b2])))
            t1 += l1
        t2 += l2
    return result


def build_transformations(A: np.ndarray, points: Iterable[Sequence[float]]) -> list[np.ndarray]:
    """Transformation matrices of the children of the box with node matrix ``A``.

    The box is cut along both parametric lines through every point; one
    matrix per non-zero cell, first parametric direction fastest."""
    return [T for T, _, _ in _cells(A, points)]


@dataclass(eq=False)
class LocalElement:
    A: np.ndarray
    T: np.ndarray
    T_hat: np.ndarray
    level: int
    pdim: int
    parent: LocalElement | None = None
    children: list[LocalElement] = field(default_factory=list)
    # a point on the upper edge belongs to this element when the edge is the patch end
    closed_upper: tuple[bool, bool] = (False, False)

    @property
    def lower(self) -> np.ndarray:
        return self.A[:2, 0]

    @property
    def upper(self) -> np.ndarray:
        return self.A[:2, 1]

    @property
    def box(self) -> list[tuple[float, float]]:
        "Parameter intervals of the real directions"
        return [(float(self.lower[k]), float(self.upper[k])) for k in range(self.pdim)]

    @property
    def measure(self) -> float:
        "Parametric length or area"
        return float(np.prod(self.upper[:self.pdim] - self.lower[:self.pdim]))

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def contains(self, point: Sequence[float]) -> bool:
        for k in range(2):
            if point[k] < self.lower[k]:
                return False
            if point[k] > self.upper[k] or (point[k] == self.upper[k] and not self.closed_upper[k]):
                return False
        return True

    def map_ref_to_param(self, xi: np.ndarray) -> tuple[np.ndarray, float]:
        """Affine image of reference coordinates in [-1, 1]^pdim.

        Returns parameters of shape (n, pdim) and the constant Jacobian
        determinant of the map."""
        xi = np.asarray(xi, dtype=float).reshape(-1, self.pdim)
        lo = self.lower[:self.pdim]
        half = (self.upper[:self.pdim] - lo) / 2
        return lo + half * (xi + 1), float(np.prod(half))

    def map_param_to_ref(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(-1, self.pdim)
        lo = self.lower[:self.pdim]
        half = (self.upper[:self.pdim] - lo) / 2
        return (u - lo) / half - 1


def accumulate(leaf: LocalElement, A0: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    "Product of the per-level transformations from the leaf up to its root, and the leaf node matrix"
    T_hat = np.eye(3)
    node = leaf
    while node.parent is not None:
        T_hat = T_hat @ node.T
        node = node.parent
    if A0 is None:
        A0 = node.A
    return T_hat, T_hat @ A0


class LocalElementTree:
    "Refinement tree of one global element"

    root: LocalElement
    leaves: list[LocalElement]

    def __init__(self, A0: np.ndarray, pdim: int, closed_upper: tuple[bool, bool] = (True, True)):
        self.root = LocalElement(A0, np.eye(3), np.eye(3), 0, pdim, closed_upper=closed_upper)
        self.leaves = [self.root]

    def add_level(self, points: Sequence[RefinementPoint], level: int):
        "Split the current leaves by the refinement points of the next level"
        frontier = []
        for node in self.leaves:
            inside = [p.padded() for p in points if node.contains(p.padded())]
            if not inside:
                frontier.append(node)
                continue
            for T, lower, upper in _cells(node.A, inside):
                closed = tuple(
                    bool(node.closed_upper[k] and upper[k] == node.upper[k]) for k in range(2))
                # corners taken from the cut values so siblings share edges exactly
                child = LocalElement(
                    node_matrix(lower, upper), T, T @ node.T_hat, level, node.pdim,
                    parent=node, closed_upper=closed)  # type: ignore[arg-type]
                node.children.append(child)
                frontier.append(child)
        self.leaves = frontier


def graded_values(a: float, b: float, n: int, q: float, end: GradingEnd | None) -> np.ndarray:
    """Interior knots subdividing [a, b] into n pieces graded towards one or both ends.

    ``end=None`` subdivides uniformly."""
    if n < 1:
        raise InvalidParameterError(f"Need at least one sub-element, got {n}")
    if q < 1:
        raise InvalidParameterError(f"Grading exponent must be >= 1, got {q}")
    s = np.arange(1, n) / n
    if end is None:
        return a + (b - a) * s
    if end == "left":
        return a + (b - a) * s ** q
    if end == "right":
        return (b - (b - a) * s ** q)[::-1]
    if end == "both":
        if n < 2:
            return np.empty(0)
        mid = (a + b) / 2
        half = n // 2
        return np.concatenate([
            graded_values(a, mid, half, q, "left"), [mid], graded_values(mid, b, n - half, q, "right")])
    raise InvalidParameterError(f"Unknown grading end {end!r}")


class ElementPartition:
    "Artificial knot vectors of one patch plus its refinement points"

    patch: NurbsPatch
    knots: list[np.ndarray]
    refinement_points: list[RefinementPoint]

    def __init__(self, patch: NurbsPatch):
        self.patch = patch
        self.knots = [np.array(kv.knots) for kv in patch.knot_vectors]
        self.refinement_points = []
        self._trees: list[LocalElementTree] | None = None

    @property
    def pdim(self) -> int:
        return self.patch.pdim

    def copy(self) -> ElementPartition:
        other = ElementPartition(self.patch)
        other.knots = [k.copy() for k in self.knots]
        other.refinement_points = list(self.refinement_points)
        return other

    def span_indices(self, direction: int) -> list[tuple[int, float, float]]:
        "Non-zero spans of the artificial knot vector inside the patch domain, as (index, lo, hi)"
        knots = self.knots[direction]
        lo, hi = self.patch.domain[direction]
        return [
            (i, float(knots[i]), float(knots[i + 1]))
            for i in range(len(knots) - 1)
            if knots[i] < knots[i + 1] and lo <= knots[i] and knots[i + 1] <= hi
        ]

    def spans(self, direction: int) -> list[tuple[float, float]]:
        if direction >= self.pdim:
            return [DUMMY_SPAN]
        return [(a, b) for _, a, b in self.span_indices(direction)]

    def insert_knots(self, direction: int, values: Iterable[float]):
        "Insert unique knots strictly inside existing non-zero spans"
        if not 0 <= direction < self.pdim:
            raise RefinementError(f"Direction {direction} out of range for a {self.pdim}-parametric patch")
        values = np.asarray(list(values), dtype=float)
        if len(values) == 0:
            return
        if len(np.unique(values)) != len(values):
            raise RefinementError(f"Duplicate knots in {values.tolist()}")
        spans = self.span_indices(direction)
        for v in values:
            if not any(a < v < b for _, a, b in spans):
                raise RefinementError(f"Knot {v} is not strictly inside a non-zero span of {self.knots[direction].tolist()}")
        self.knots[direction] = np.sort(np.concatenate([self.knots[direction], values]))
        self._trees = None

    def refine_uniform(self, times: int = 1):
        "Halve every element in every parametric direction"
        for _ in range(times):
            for direction in range(self.pdim):
                self.insert_knots(direction, [(a + b) / 2 for a, b in self.spans(direction)])

    def grade_towards(self, direction: int, span: int, n: int, q: float, end: GradingEnd):
        """Subdivide span ``span`` (an index into the artificial knot vector)
        into n sub-elements graded towards one of its ends"""
        if n < 2:
            raise InvalidParameterError(f"Grading needs n >= 2, got {n}")
        if q < 1:
            raise InvalidParameterError(f"Grading exponent must be >= 1, got {q}")
        knots = self.knots[direction]
        if not (0 <= span < len(knots) - 1 and knots[span] < knots[span + 1]):
            raise RefinementError(f"{span} is not a non-zero span of {knots.tolist()}")
        self.insert_knots(direction, graded_values(knots[span], knots[span + 1], n, q, end))

    def subdivide(
        self,
        direction: int,
        n: int,
        targets: Sequence[float] = (),
        graded_n: int | None = None,
        q: float = 1.0,
    ):
        """Split every element into n equal pieces, except elements touching a
        target location, which get ``graded_n`` pieces graded towards it"""
        values: list[float] = []
        for _, a, b in self.span_indices(direction):
            at_a = any(np.isclose(a, t, rtol=0, atol=1e-14) for t in targets)
            at_b = any(np.isclose(b, t, rtol=0, atol=1e-14) for t in targets)
            if (at_a or at_b) and graded_n is not None:
                end: GradingEnd = "both" if at_a and at_b else "left" if at_a else "right"
                values.extend(graded_values(a, b, graded_n, q, end))
            else:
                values.extend(graded_values(a, b, n, 1.0, None))
        self.insert_knots(direction, values)

    def add_refinement_point(self, point: RefinementPoint | Sequence[float], level: int = 1):
        if not isinstance(point, RefinementPoint):
            point = RefinementPoint(tuple(float(c) for c in point), level)
        if point.level < 1:
            raise RefinementError(f"Refinement levels start at 1, got {point.level}")
        if len(point.coords) != self.pdim:
            raise RefinementError(f"Refinement point {point.coords} needs {self.pdim} coordinate(s)")
        for k, (lo, hi) in enumerate(self.patch.domain):
            if not lo <= point.coords[k] <= hi:
                raise PlacementError(f"Refinement point {point.coords} outside the patch domain {self.patch.domain}")
        self.refinement_points.append(point)
        self._trees = None

    def _build(self) -> list[LocalElementTree]:
        spans1, spans2 = self.spans(0), self.spans(1)
        trees = []
        for j, (a2, b2) in enumerate(spans2):
            for i, (a1, b1) in enumerate(spans1):
                closed = (i == len(spans1) - 1, j == len(spans2) - 1)
                trees.append(LocalElementTree(node_matrix((a1, a2), (b1, b2)), self.pdim, closed))

        top = max((p.level for p in self.refinement_points), default=0)
        for level in range(1, top + 1):
            points = [p for p in self.refinement_points if p.level == level]
            for p in points:
                if not any(leaf.contains(p.padded()) for tree in trees for leaf in tree.leaves):
                    raise PlacementError(f"Refinement point {p.coords} of level {level} lies in no element")
            for tree in trees:
                tree.add_level(points, level)
        logger.debug("Partition of %r: %d global elements, %d leaves",
                     self.patch, len(trees), sum(len(t.leaves) for t in trees))
        return trees

    def trees(self) -> list[LocalElementTree]:
        if self._trees is None:
            self._trees = self._build()
        return self._trees

    def leaves(self) -> list[LocalElement]:
        return [leaf for tree in self.trees() for leaf in tree.leaves]

    def __len__(self) -> int:
        return len(self.leaves())


def init_partition(patch: NurbsPatch) -> ElementPartition:
    return ElementPartition(patch)


def insert_knots(partition: ElementPartition, direction: int, values: Iterable[float]) -> ElementPartition:
    partition.insert_knots(direction, values)
    return partition


def grade_towards(
    partition: ElementPartition, direction: int, span: int, n: int, q: float, end: GradingEnd,
) -> ElementPartition:
    partition.grade_towards(direction, span, n, q, end)
    return partition


def add_refinement_point(partition: ElementPartition, point: RefinementPoint) -> ElementPartition:
    partition.add_refinement_point(point)
    return partition
