"""Generators for the shipped boundary shapes."""
from __future__ import annotations

from math import sqrt
from typing import Sequence

import numpy as np

from .base import YamlObject
from .errors import InvalidGeometryError, InvalidParameterError
from .geometry import NurbsPatch, PatchSource

W = 1 / sqrt(2)

# rational quadratic unit circle, counterclockwise from (1, 0)
CIRCLE_POINTS = np.array([
    (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0),
], dtype=float)
CIRCLE_WEIGHTS = np.array([1, W, 1, W, 1, W, 1, W, 1])
CIRCLE_KNOTS = [0, 0, 0, 0.25, 0.25, 0.5, 0.5, 0.75, 0.75, 1, 1, 1]


class Shape(PatchSource, YamlObject):
    pass


class Circle(Shape, yamltag="!shape.circle"):
    """Circle as one 9-point rational quadratic, or as four quarter arcs
    when boundary conditions are given per quarter"""

    def __init__(
        self,
        radius: float = 1.0,
        center: Sequence[float] = (0.0, 0.0),
        bc: str = "dirichlet",
        bcs: Sequence[str] | None = None,
    ):
        if not radius > 0:
            raise InvalidParameterError(f"Radius must be positive, got {radius}")
        if bcs is not None and len(bcs) != 4:
            raise InvalidGeometryError(f"A split circle takes 4 boundary conditions, got {len(bcs)}")
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float)
        self.bc = bc
        self.bcs = None if bcs is None else list(bcs)

    def to_patches(self) -> list[NurbsPatch]:
        pts = self.center + self.radius * CIRCLE_POINTS
        if self.bcs is None:
            return [NurbsPatch(pts, CIRCLE_KNOTS, 2, CIRCLE_WEIGHTS, bc=self.bc)]
        return [
            NurbsPatch(pts[2 * k:2 * k + 3], [0, 0, 0, 1, 1, 1], 2, CIRCLE_WEIGHTS[2 * k:2 * k + 3], bc=bc)
            for k, bc in enumerate(self.bcs)
        ]


class Flower(Shape, yamltag="!shape.flower"):
    """Smooth closed curve with radial control polygon R(1 + a cos(k theta)),
    as a uniform periodic B-spline"""

    def __init__(
        self,
        radius: float = 1.0,
        amplitude: float = 0.2,
        lobes: int = 5,
        control_points: int = 20,
        degree: int = 4,
        center: Sequence[float] = (0.0, 0.0),
        bc: str = "dirichlet",
    ):
        if not radius > 0:
            raise InvalidParameterError(f"Radius must be positive, got {radius}")
        if not 0 <= amplitude < 1:
            raise InvalidParameterError(f"Amplitude must lie in [0, 1), got {amplitude}")
        if control_points <= degree:
            raise InvalidParameterError("Need more control points than the degree")
        self.radius = float(radius)
        self.amplitude = float(amplitude)
        self.lobes = int(lobes)
        self.n = int(control_points)
        self.degree = int(degree)
        self.center = np.asarray(center, dtype=float)
        self.bc = bc

    def to_patches(self) -> list[NurbsPatch]:
        n, p = self.n, self.degree
        theta = 2 * np.pi * np.arange(n) / n
        r = self.radius * (1 + self.amplitude * np.cos(self.lobes * theta))
        pts = self.center + np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
        # wrap the first p points so the curve closes with full continuity
        pts = np.concatenate([pts, pts[:p]])
        knots = (np.arange(n + 2 * p + 1) - p) / n
        return [NurbsPatch(pts, knots, p, bc=self.bc)]


class Torus(Shape, yamltag="!shape.torus"):
    """Exact rational biquadratic torus around the z axis.

    The first parametric direction runs around the tube, the second around
    the axis."""

    def __init__(
        self,
        major_radius: float = 0.9,
        minor_radius: float = 0.2,
        center: Sequence[float] = (0.0, 0.0, 0.0),
        bc: str = "dirichlet",
    ):
        if not 0 < minor_radius < major_radius:
            raise InvalidParameterError(
                f"Need 0 < minor_radius < major_radius, got {minor_radius}, {major_radius}")
        self.major_radius = float(major_radius)
        self.minor_radius = float(minor_radius)
        self.center = np.asarray(center, dtype=float)
        self.bc = bc

    def to_patches(self) -> list[NurbsPatch]:
        rho = self.major_radius + self.minor_radius * CIRCLE_POINTS[:, 0]
        z = self.minor_radius * CIRCLE_POINTS[:, 1]
        net = np.empty((9, 9, 3))
        net[:, :, 0] = rho[:, None] * CIRCLE_POINTS[None, :, 0]
        net[:, :, 1] = rho[:, None] * CIRCLE_POINTS[None, :, 1]
        net[:, :, 2] = z[:, None]
        net += self.center
        weights = np.outer(CIRCLE_WEIGHTS, CIRCLE_WEIGHTS)
        # d/dtheta x d/dphi points into the tube
        return [NurbsPatch(net, [CIRCLE_KNOTS, CIRCLE_KNOTS], [2, 2], weights, bc=self.bc, orientation=-1)]

    def implicit(self, x: np.ndarray) -> np.ndarray:
        "Zero on the torus surface"
        x = np.asarray(x, dtype=float) - self.center
        rho = np.hypot(x[..., 0], x[..., 1])
        return (rho - self.major_radius) ** 2 + x[..., 2] ** 2 - self.minor_radius ** 2
