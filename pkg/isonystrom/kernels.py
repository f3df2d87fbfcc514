"""Fundamental solutions and their conormal derivatives.

Every kernel is vectorised over source points ``y``: ``x`` is a single
point (or an array matching ``y``), ``y`` and ``n_y`` have shape (m, dim).
Scalar kernels return shape (m,), elastic kernels return (m, 2, 2) blocks
indexed as [point, component at x, component at y].

Double layer kernels are taken with the sign that makes the interior limit
of the double layer potential ``(1/2 I + K)``; with this convention the
kernel integrates to the identity over a closed boundary seen from inside.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
import logging
from typing import Literal, NamedTuple

import numpy as np

from .base import YamlObject
from .errors import IncompressibleMaterialError, InvalidParameterError, SingularEvaluationError

logger = logging.getLogger(__name__)

R_MIN = 1e-14

Singular = Literal["raise", "zero", "clamp"]


class Problem(str, Enum):
    LAPLACE2D = "laplace2d"
    LAME2D = "lame2d"
    LAPLACE3D = "laplace3d"

    @property
    def dim(self) -> int:
        return 3 if self is Problem.LAPLACE3D else 2

    @property
    def components(self) -> int:
        return 2 if self is Problem.LAME2D else 1


def material_constants(youngs_modulus: float, poisson_ratio: float) -> tuple[float, float]:
    "Lame constants (lambda, mu)"
    E, nu = youngs_modulus, poisson_ratio
    if nu == 0.5:
        raise IncompressibleMaterialError("Poisson ratio 0.5 describes an incompressible material")
    if not E > 0:
        raise InvalidParameterError(f"Young's modulus must be positive, got {E}")
    if not -1 < nu < 0.5:
        raise InvalidParameterError(f"Poisson ratio must lie in (-1, 0.5), got {nu}")
    return E * nu / ((1 - 2 * nu) * (1 + nu)), E / (2 * (1 + nu))


class Material(YamlObject, yamltag="!material", path_resolver=["material"]):
    """Isotropic material.

    The elastic kernels are written for plane strain; plane stress uses the
    same formulas with the effective Poisson ratio nu / (1 + nu)."""

    def __init__(
        self,
        youngs_modulus: float = 1.0,
        poisson_ratio: float = 0.3,
        conductivity: float = 1.0,
        plane_stress: bool = False,
    ):
        self.youngs_modulus = float(youngs_modulus)
        self.poisson_ratio = float(poisson_ratio)
        self.lame, self.shear_modulus = material_constants(self.youngs_modulus, self.poisson_ratio)
        if not conductivity > 0:
            raise InvalidParameterError(f"Conductivity must be positive, got {conductivity}")
        self.conductivity = float(conductivity)
        self.plane_stress = bool(plane_stress)

    def __repr__(self) -> str:
        kind = "plane stress" if self.plane_stress else "plane strain"
        return f"Material(E={self.youngs_modulus}, nu={self.poisson_ratio}, k={self.conductivity}, {kind})"

    @property
    def effective_poisson(self) -> float:
        nu = self.poisson_ratio
        return nu / (1 + nu) if self.plane_stress else nu


def _distance(x: np.ndarray, y: np.ndarray, singular: Singular) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Differences y - x, distances, and a mask of coincident points.

    ``zero`` masks coincident points out of the kernel; ``clamp`` keeps them
    and evaluates the kernel at distance R_MIN, so the result stays continuous
    inside singular integrands."""
    d = np.atleast_2d(np.asarray(y, dtype=float)) - np.asarray(x, dtype=float)
    r = np.linalg.norm(d, axis=-1)
    close = r < R_MIN
    if singular == "clamp":
        return d, np.maximum(r, R_MIN), np.zeros_like(close)
    if np.any(close):
        if singular == "raise":
            raise SingularEvaluationError(f"Kernel evaluated at coincident points (r = {r[close][0]:.3g})")
        r = np.where(close, 1.0, r)
    return d, r, close


def laplace_slp(x, y, dim: int = 2, k: float = 1.0, singular: Singular = "raise") -> np.ndarray:
    _, r, close = _distance(x, y, singular)
    if dim == 2:
        u = -np.log(r) / (2 * np.pi * k)
    elif dim == 3:
        u = 1 / (4 * np.pi * k * r)
    else:
        raise InvalidParameterError(f"No Laplace kernel for dimension {dim}")
    return np.where(close, 0.0, u)


def laplace_dlp(x, y, n_y, dim: int = 2, k: float = 1.0, singular: Singular = "raise") -> np.ndarray:
    """Conormal derivative k dU/dn_y, taken with a minus sign.

    The conductivity cancels: the conormal derivative multiplies by k what
    the fundamental solution divides by."""
    d, r, close = _distance(x, y, singular)
    dn = np.einsum("md,md->m", d, np.atleast_2d(n_y))
    if dim == 2:
        v = dn / (2 * np.pi * r ** 2)
    elif dim == 3:
        v = dn / (4 * np.pi * r ** 3)
    else:
        raise InvalidParameterError(f"No Laplace kernel for dimension {dim}")
    return np.where(close, 0.0, v)


def kelvin_slp_2d(x, y, material: Material, singular: Singular = "raise") -> np.ndarray:
    "Plane strain Kelvin displacement tensor"
    d, r, close = _distance(x, y, singular)
    nu = material.effective_poisson
    mu = material.shear_modulus
    dr = d / r[:, None]
    eye = np.eye(2)
    U = ((3 - 4 * nu) * np.log(1 / r)[:, None, None] * eye
         + dr[:, :, None] * dr[:, None, :]) / (8 * np.pi * mu * (1 - nu))
    U[close] = 0.0
    return U


def kelvin_dlp_2d(x, y, n_y, material: Material, singular: Singular = "raise") -> np.ndarray:
    "Plane strain traction kernel with the double layer sign, i.e. minus the usual T"
    d, r, close = _distance(x, y, singular)
    nu = material.effective_poisson
    n = np.atleast_2d(np.asarray(n_y, dtype=float))
    dr = d / r[:, None]
    drdn = np.einsum("md,md->m", dr, n)
    eye = np.eye(2)
    rn = dr[:, :, None] * n[:, None, :]
    T = (drdn[:, None, None] * ((1 - 2 * nu) * eye + 2 * dr[:, :, None] * dr[:, None, :])
         - (1 - 2 * nu) * (rn - rn.transpose(0, 2, 1)))
    K = T / (4 * np.pi * (1 - nu) * r[:, None, None])
    K[close] = 0.0
    return K


class Singularity(str, Enum):
    # log-like on a curve; integrated by splitting at the point and grading towards it
    LOG = "log"
    # bounded on smooth curves; integrated by splitting at the point only
    BOUNDED = "bounded"
    # 1/r on a surface; integrated by the Duffy fan
    WEAK = "weak"
    # Cauchy principal value; regularised through the rigid body identity
    STRONG = "strong"


class Kernel(ABC):
    dim: int
    components: int
    double_layer: bool
    singularity: Singularity

    @abstractmethod
    def __call__(self, x, y, n_y, singular: Singular = "raise") -> np.ndarray:
        ...

    @property
    def block(self) -> tuple[int, ...]:
        "Trailing shape of one kernel value"
        return () if self.components == 1 else (self.components, self.components)


@dataclass(frozen=True)
class LaplaceSLP(Kernel):
    dim: int = 2
    conductivity: float = 1.0
    components = 1
    double_layer = False

    @property
    def singularity(self) -> Singularity:  # type: ignore[override]
        return Singularity.LOG if self.dim == 2 else Singularity.WEAK

    def __call__(self, x, y, n_y, singular: Singular = "raise") -> np.ndarray:
        return laplace_slp(x, y, self.dim, self.conductivity, singular)


@dataclass(frozen=True)
class LaplaceDLP(Kernel):
    dim: int = 2
    components = 1
    double_layer = True

    @property
    def singularity(self) -> Singularity:  # type: ignore[override]
        return Singularity.BOUNDED if self.dim == 2 else Singularity.WEAK

    def __call__(self, x, y, n_y, singular: Singular = "raise") -> np.ndarray:
        return laplace_dlp(x, y, n_y, self.dim, singular=singular)


@dataclass(frozen=True)
class KelvinSLP(Kernel):
    material: Material
    dim = 2
    components = 2
    double_layer = False
    singularity = Singularity.LOG

    def __call__(self, x, y, n_y, singular: Singular = "raise") -> np.ndarray:
        return kelvin_slp_2d(x, y, self.material, singular)


@dataclass(frozen=True)
class KelvinDLP(Kernel):
    material: Material
    dim = 2
    components = 2
    double_layer = True
    singularity = Singularity.STRONG

    def __call__(self, x, y, n_y, singular: Singular = "raise") -> np.ndarray:
        return kelvin_dlp_2d(x, y, n_y, self.material, singular)


class KernelPair(NamedTuple):
    single: Kernel
    double: Kernel

    @property
    def dim(self) -> int:
        return self.single.dim

    @property
    def components(self) -> int:
        return self.single.components


def kernel_pair(problem: Problem | str, material: Material | None = None) -> KernelPair:
    "Single and double layer kernels of a problem"
    problem = Problem(problem)
    material = material if material is not None else Material()
    if problem is Problem.LAME2D:
        return KernelPair(KelvinSLP(material), KelvinDLP(material))
    return KernelPair(LaplaceSLP(problem.dim, material.conductivity), LaplaceDLP(problem.dim))
