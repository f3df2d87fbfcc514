from __future__ import annotations

import numpy as np
import pytest

from isonystrom.geometry import Geometry, NurbsPatch
from isonystrom.partition import ElementPartition
from isonystrom.quadrature import QuadraturePointSet, distribute_points, gauss_legendre
from isonystrom.shapes import Circle, Torus


def segment(length: float = 2.0) -> NurbsPatch:
    "Straight segment from the origin along x, uniformly parametrised"
    return NurbsPatch([[0.0, 0.0], [length, 0.0]], [0, 0, 1, 1], 1)


def flat_square() -> NurbsPatch:
    "The unit square in the z = 0 plane, x = (u1, u2, 0)"
    return NurbsPatch(
        [[0, 0, 0], [0, 1, 0], [1, 0, 0], [1, 1, 0]],
        [[0, 0, 1, 1], [0, 0, 1, 1]], [1, 1])


def point_set(patches, order: int, refine: int = 0) -> QuadraturePointSet:
    partitions = [ElementPartition(p) for p in patches]
    for partition in partitions:
        partition.refine_uniform(refine)
    return distribute_points(partitions, gauss_legendre(order))


@pytest.fixture
def circle() -> Geometry:
    return Geometry(Circle(radius=0.5).to_patches())


@pytest.fixture
def unit_circle() -> Geometry:
    return Geometry(Circle().to_patches())


@pytest.fixture
def torus() -> Geometry:
    return Geometry(Torus().to_patches())


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
