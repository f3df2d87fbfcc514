"""Run configurations.

A run file is a YAML mapping whose root is implicitly a ``!run``::

    problem: laplace2d
    formulation: dlp
    order: 3
    geometry: !shape.flower {radius: 0.5}
    refinement: !refine {initial: 1}
    sweep: !sweep {mode: h, steps: 4}
"""
from __future__ import annotations

from pathlib import Path
from typing import IO, Any, Sequence

import numpy as np

from .assembly import Formulation
from .base import YamlObject, YamlScalar, load, load_geometry_data
from .errors import ConfigError, InvalidGeometryError, InvalidParameterError
from .geometry import BoundaryCondition, Geometry, NurbsPatch, PatchSource
from .kernels import Material, Problem
from .partition import ElementPartition, RefinementPoint
from .quadrature import MAX_POINTS
from .store import BaseStore

DATA_DIR = Path(__file__).parent / "data"


def load_geometry(file: str | Path | IO[str]) -> Geometry:
    "Read and validate a geometry file; relative names are also looked up in the packaged data"
    if isinstance(file, (str, Path)):
        path = Path(file)
        if not path.exists() and (DATA_DIR / path).exists():
            path = DATA_DIR / path
        try:
            with open(path) as f:
                data = load_geometry_data(f, base_dir=path.parent)
        except OSError as e:
            raise ConfigError(f"Cannot read geometry file {file}: {e}") from e
    else:
        data = load_geometry_data(file)
    if not isinstance(data, Geometry):
        raise ConfigError(f"Geometry file root must be a mapping with patches, got {type(data).__name__}")
    data.validate()
    return data


class GeometryFile(PatchSource, YamlScalar, yamltag="!file"):
    "Geometry file included by path, relative to the including file or the packaged data"

    path: Path

    def __init__(self, data: str):
        candidates = [Path(data)]
        base_dir = getattr(self, "_base_dir", None)
        if base_dir is not None and not Path(data).is_absolute():
            candidates.insert(0, Path(base_dir) / data)
        candidates.append(DATA_DIR / data)
        for path in candidates:
            if path.is_file():
                self.path = path
                break
        else:
            raise ConfigError(f"Geometry file {data} not found")
        self._geometry: Geometry | None = None

    def __repr__(self) -> str:
        return f"GeometryFile({str(self.path)!r})"

    def to_patches(self) -> list[NurbsPatch]:
        if self._geometry is None:
            self._geometry = load_geometry(self.path)
        return self._geometry.to_patches()


class Grading(YamlObject, yamltag="!grading", path_resolver=["refinement", "grading"]):
    """Graded subdivision of the elements next to corners and/or boundary
    condition interfaces.

    Each such element is split into ``elements`` pieces (times 2^step when
    ``scale_with_steps``) with exponent ``exponent``, or (order + 1)/``strength``
    when no exponent is given."""

    TARGETS = ("corners", "interfaces", "all")

    def __init__(
        self,
        elements: int = 6,
        exponent: float | None = None,
        strength: float = 1.0,
        targets: str = "corners",
        scale_with_steps: bool = True,
    ):
        if elements < 2:
            raise InvalidParameterError(f"Grading needs at least 2 elements, got {elements}")
        if exponent is not None and exponent < 1:
            raise InvalidParameterError(f"Grading exponent must be >= 1, got {exponent}")
        if not strength > 0:
            raise InvalidParameterError(f"Grading strength must be positive, got {strength}")
        if targets not in self.TARGETS:
            raise InvalidParameterError(f"Grading targets must be one of {', '.join(self.TARGETS)}, got {targets!r}")
        self.elements = int(elements)
        self.exponent = None if exponent is None else float(exponent)
        self.strength = float(strength)
        self.targets = targets
        self.scale_with_steps = bool(scale_with_steps)

    def exponent_for(self, order: int) -> float:
        if self.exponent is not None:
            return self.exponent
        return max(1.0, (order + 1) / self.strength)

    def locations(self, geometry: Geometry) -> list[list[tuple[int, float]]]:
        found = [set() for _ in geometry.patches]  # type: list[set[tuple[int, float]]]
        if self.targets in ("corners", "all"):
            for i, corners in enumerate(geometry.corners()):
                found[i].update(corners)
        if self.targets in ("interfaces", "all"):
            for i, ends in enumerate(geometry.bc_interfaces()):
                found[i].update(ends)
        return [sorted(s) for s in found]


class PointRefinement(YamlObject, yamltag="!point", path_resolver=["refinement", "points", None]):
    def __init__(self, coords: Sequence[float] | float, patch: int = 0, level: int = 1):
        coords = [coords] if np.isscalar(coords) else list(coords)  # type: ignore[list-item]
        self.point = RefinementPoint(tuple(float(c) for c in coords), int(level))
        self.patch = int(patch)


class Refinement(YamlObject, yamltag="!refine", path_resolver=["refinement"]):
    "How the partition of every patch is built for a sweep step"

    def __init__(
        self,
        initial: int = 0,
        grading: Grading | None = None,
        points: Sequence[PointRefinement | dict[str, Any]] = (),
    ):
        if initial < 0:
            raise InvalidParameterError(f"Initial refinement must be >= 0, got {initial}")
        if isinstance(grading, dict):
            grading = Grading(**grading)
        if grading is not None and not isinstance(grading, Grading):
            raise ConfigError(f"Not a grading directive: {grading!r}")
        self.initial = int(initial)
        self.grading = grading
        self.points = [p if isinstance(p, PointRefinement) else PointRefinement(**p) for p in points]

    def partitions(self, geometry: Geometry, step: int = 0, order: int = 3) -> list[ElementPartition]:
        """Partitions after ``initial`` uniform refinements and ``step``
        halvings, graded where requested, with the refinement points added"""
        partitions = [ElementPartition(p) for p in geometry.patches]
        for partition in partitions:
            partition.refine_uniform(self.initial)

        targets = self.grading.locations(geometry) if self.grading is not None else [[] for _ in partitions]
        for partition, located in zip(partitions, targets):
            for direction in range(partition.pdim):
                if self.grading is None:
                    partition.subdivide(direction, 2 ** step)
                    continue
                values = [v for d, v in located if d == direction]
                scale = 2 ** step if self.grading.scale_with_steps else 1
                partition.subdivide(
                    direction, 2 ** step, values,
                    graded_n=self.grading.elements * scale, q=self.grading.exponent_for(order))

        for p in self.points:
            if not 0 <= p.patch < len(partitions):
                raise ConfigError(f"Refinement point refers to patch {p.patch}, geometry has {len(partitions)}")
            partitions[p.patch].add_refinement_point(p.point)
        return partitions


class Ring(YamlObject, yamltag="!ring", path_resolvers=[["sources"], ["evaluation"]]):
    """Points evenly spaced on a circle (in the x-y plane in 3D).

    Rings default to the centre of the bounding box. Without an explicit
    radius the radius is ``scale`` times the largest (sources) or smallest
    (evaluation points) distance of the boundary from that centre."""

    def __init__(
        self,
        count: int = 8,
        radius: float | None = None,
        scale: float = 1.0,
        center: Sequence[float] | None = None,
        phase: float = 0.0,
    ):
        if count < 1:
            raise InvalidParameterError(f"A ring needs at least one point, got {count}")
        if radius is not None and not radius > 0:
            raise InvalidParameterError(f"Ring radius must be positive, got {radius}")
        self.count = int(count)
        self.radius = None if radius is None else float(radius)
        self.scale = float(scale)
        self.center = None if center is None else np.asarray(center, dtype=float)
        self.phase = float(phase)

    def points(self, reference_radius: float, default_center: np.ndarray) -> np.ndarray:
        center = self.center if self.center is not None else np.asarray(default_center, dtype=float)
        radius = self.radius if self.radius is not None else self.scale * reference_radius
        theta = self.phase + 2 * np.pi * np.arange(self.count) / self.count
        pts = np.zeros((self.count, len(center)))
        pts[:, 0] = radius * np.cos(theta)
        pts[:, 1] = radius * np.sin(theta)
        return pts + center


class Sweep(YamlObject, yamltag="!sweep", path_resolver=["sweep"]):
    "h-refinement steps or a list of quadrature orders on a fixed partition"

    def __init__(self, mode: str = "h", steps: int = 4, orders: Sequence[int] | None = None):
        if mode not in ("h", "p"):
            raise InvalidParameterError(f"Sweep mode must be h or p, got {mode!r}")
        if steps < 0:
            raise InvalidParameterError(f"Sweep steps must be >= 0, got {steps}")
        self.mode = mode
        self.steps = int(steps)
        self.orders = None if orders is None else [int(n) for n in orders]


def _as_geometry(value: Any) -> Geometry:
    if isinstance(value, Geometry):
        return value
    if isinstance(value, PatchSource):
        return Geometry(value.to_patches())
    if isinstance(value, dict):
        return Geometry(**value)
    if isinstance(value, (list, tuple)):
        return Geometry(value)
    if isinstance(value, str):
        return load_geometry(value)
    raise ConfigError(f"Cannot build a geometry from {type(value).__name__}")


class RunConfig(YamlObject, yamltag="!run", path_resolver=[]):
    geometry: Geometry
    problem: Problem
    formulation: Formulation

    def __init__(
        self,
        geometry: Any,
        problem: str = "laplace2d",
        formulation: str = "dlp",
        order: int = 3,
        refinement: Refinement | None = None,
        eta: float = 2.0,
        material: Material | None = None,
        conductivity: float | None = None,
        sources: Ring | Sequence[Sequence[float]] | None = None,
        evaluation: Ring | Sequence[Sequence[float]] | None = None,
        forces: Sequence[Sequence[float]] | None = None,
        sweep: Sweep | None = None,
        moment_tol: float = 1e-12,
        workers: int = 1,
        output: str | None = None,
        store: BaseStore | None = None,
        name: str | None = None,
    ):
        try:
            self.problem = Problem(problem)
        except ValueError:
            raise ConfigError(f"Unknown problem {problem!r}") from None
        try:
            self.formulation = Formulation(formulation)
        except ValueError:
            raise ConfigError(f"Unknown formulation {formulation!r}") from None
        try:
            self.geometry = _as_geometry(geometry)
        except TypeError as e:
            raise InvalidGeometryError(str(e)) from e
        if self.geometry.dim != self.problem.dim:
            raise ConfigError(f"{self.problem.value} needs a {self.problem.dim}D geometry, got {self.geometry.dim}D")
        if self.formulation is not Formulation.DIRECT:
            neumann = [i for i, p in enumerate(self.geometry) if p.bc is BoundaryCondition.NEUMANN]
            if neumann:
                raise ConfigError(
                    f"The {self.formulation.value} formulation takes Dirichlet data only; patches {neumann} are Neumann")

        if not 1 <= order <= MAX_POINTS:
            raise InvalidParameterError(f"Order must lie in 1..{MAX_POINTS}, got {order}")
        self.order = int(order)
        self.refinement = refinement if refinement is not None else Refinement()
        self.eta = float(eta)
        self.material = material if material is not None else Material()
        if conductivity is not None:
            self.material.conductivity = float(conductivity)
        self.sources = sources if sources is not None else Ring(3, scale=3.0)
        self.evaluation = evaluation if evaluation is not None else Ring(8, scale=0.5)
        if forces is None:
            forces = [[1.0, 0.5]]
        self.forces = np.atleast_2d(np.asarray(forces, dtype=float))
        if self.problem is Problem.LAME2D and self.forces.shape[1] != 2:
            raise ConfigError(f"Forces must have 2 components, got {self.forces.shape[1]}")
        self.sweep = sweep if sweep is not None else Sweep()
        self.moment_tol = float(moment_tol)
        self.workers = int(workers)
        self.output = output
        self.store = store
        self.name = name

    @classmethod
    def from_yaml(cls, stream: str | IO[str], base_dir: Path | None = None) -> RunConfig:
        config = load(stream, base_dir=base_dir)
        if not isinstance(config, RunConfig):
            raise ConfigError(f"Run file root must be a mapping, got {type(config).__name__}")
        return config

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        path = Path(path)
        try:
            with open(path) as f:
                return cls.from_yaml(f, base_dir=path.parent)
        except OSError as e:
            raise ConfigError(f"Cannot read run file {path}: {e}") from e

    def orders(self) -> list[int]:
        "Quadrature order of every sweep step"
        sweep = self.sweep
        if sweep.mode == "p":
            if sweep.orders is not None:
                return list(sweep.orders)
            return [self.order + k for k in range(sweep.steps + 1)]
        return [self.order] * (sweep.steps + 1)

    def partitions(self, step: int) -> list[ElementPartition]:
        order = self.orders()[step]
        h_step = step if self.sweep.mode == "h" else 0
        return self.refinement.partitions(self.geometry, h_step, order)

    def _point_list(self, given: Ring | Sequence[Sequence[float]], reference: float, center: np.ndarray) -> np.ndarray:
        if isinstance(given, Ring):
            pts = given.points(reference, center)
        else:
            pts = np.atleast_2d(np.asarray(given, dtype=float))
        if pts.shape[1] != self.geometry.dim:
            raise ConfigError(f"Points need {self.geometry.dim} coordinates, got {pts.shape[1]}")
        return pts

    def _center(self) -> np.ndarray:
        lo, hi = self.geometry.bounding_box()
        return (lo + hi) / 2

    def source_points(self) -> np.ndarray:
        samples = self.geometry.sample_points()
        center = self._center()
        reference = float(np.max(np.linalg.norm(samples - center, axis=1)))
        return self._point_list(self.sources, reference, center)

    def evaluation_points(self) -> np.ndarray:
        samples = self.geometry.sample_points()
        center = self._center()
        reference = float(np.min(np.linalg.norm(samples - center, axis=1)))
        return self._point_list(self.evaluation, reference, center)

    def fingerprint(self, step: int) -> tuple:
        "Plain values identifying the result of one sweep step"
        patches = tuple(
            (p.control_net.tobytes(), tuple(kv.knots.tobytes() for kv in p.knot_vectors),
             p.bc.value, p.orientation, tuple(p.flagged_corners))
            for p in self.geometry)
        grading = self.refinement.grading
        return (
            self.problem.value, self.formulation.value, self.orders()[step], step, self.sweep.mode,
            self.eta, self.moment_tol, patches, self.refinement.initial,
            None if grading is None else (grading.elements, grading.exponent, grading.strength,
                                          grading.targets, grading.scale_with_steps),
            tuple((p.patch, p.point) for p in self.refinement.points),
            self.source_points().tobytes(), self.evaluation_points().tobytes(), self.forces.tobytes(),
            (self.material.youngs_modulus, self.material.poisson_ratio,
             self.material.conductivity, self.material.plane_stress),
        )
