"""Manufactured-solution convergence studies.

Boundary data comes from point sources outside the domain, so the exact
interior field is the same superposition of fundamental solutions. Every
sweep step builds a partition, distributes points, assembles, solves and
compares the representation formula with the exact field.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
import logging
from pathlib import Path
import time
from typing import IO, Sequence

import numpy as np

from .assembly import Assembler, AssemblyConfig
from .config import RunConfig, load_geometry  # noqa: F401
from .errors import ConfigError, IsoNystromError
from .geometry import BoundaryCondition
from .kernels import KernelPair, kernel_pair, laplace_dlp
from .partition import ElementPartition
from .quadrature import QuadraturePointSet, distribute_points, gauss_legendre
from .solver import Solution, interpolate_results, interior_eval, solve_system

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("step", "h", "dof", "max_rel_err", "fit_slope", "fit_C", "fit_s")
# grid for the exponent of C exp(-n^s)
FIT_EXPONENTS = np.linspace(0.05, 2.0, 391)


def _source_terms(kernels: KernelPair, sources: np.ndarray, forces: np.ndarray | None) -> list[tuple[np.ndarray, np.ndarray | None]]:
    if kernels.components == 1:
        return [(s, None) for s in sources]
    assert forces is not None
    return [(s, forces[k % len(forces)]) for k, s in enumerate(sources)]


def exact_field(kernels: KernelPair, sources: np.ndarray, targets: np.ndarray, forces: np.ndarray | None = None) -> np.ndarray:
    "Superposed fundamental solutions at targets, shape (m,) or (m, 2)"
    targets = np.atleast_2d(targets)
    c = kernels.components
    total = np.zeros((len(targets), c)) if c > 1 else np.zeros(len(targets))
    normals = np.zeros_like(targets)
    for source, force in _source_terms(kernels, np.atleast_2d(sources), forces):
        U = kernels.single(source, targets, normals)
        total += U if force is None else np.einsum("a,mab->mb", force, U)
    return total


def manufactured_bc(
    points: QuadraturePointSet,
    kernels: KernelPair,
    sources: np.ndarray,
    forces: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Dirichlet and Neumann data of the source field at every point, as dof vectors.

    Fluxes and tractions are minus the double layer kernels because those
    carry the opposite sign of the conormal derivative."""
    u = exact_field(kernels, sources, points.y, forces)
    t = np.zeros_like(u)
    for source, force in _source_terms(kernels, np.atleast_2d(sources), forces):
        K = kernels.double(source, points.y, points.normal)
        t -= K if force is None else np.einsum("a,mab->mb", force, K)
    return u.ravel(), t.ravel()


def winding_numbers(points: QuadraturePointSet, x: np.ndarray) -> np.ndarray:
    "Discrete Gauss integral: about 1 inside the boundary, 0 outside"
    x = np.atleast_2d(x)
    return np.array([laplace_dlp(p, points.y, points.normal, points.dim) @ points.omega for p in x])


def meshwidth(partitions: Sequence[ElementPartition], order: int = 8) -> float:
    "Largest element measure over the total, normalised to a length"
    points = distribute_points(partitions, gauss_legendre(order))
    measures = np.bincount(points.leaf, weights=points.omega, minlength=len(points.leaves))
    return float((measures.max() / measures.sum()) ** (1 / (points.dim - 1)))


def relative_error(values: np.ndarray, exact: np.ndarray) -> float:
    "Largest pointwise error relative to the exact value (vector norms for elasticity)"
    err = np.abs(values - exact) if values.ndim == 1 else np.linalg.norm(values - exact, axis=1)
    ref = np.abs(exact) if exact.ndim == 1 else np.linalg.norm(exact, axis=1)
    return float(np.max(err / ref))


def slope_fit(h: Sequence[float], errors: Sequence[float]) -> float:
    "Least squares slope of log(error) over log(h)"
    h, errors = np.asarray(h, dtype=float), np.asarray(errors, dtype=float)
    ok = np.isfinite(errors) & (errors > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(h[ok]), np.log(errors[ok]), 1)[0])


def exponential_fit(dofs: Sequence[float], errors: Sequence[float]) -> tuple[float, float, float]:
    """Fit error = C exp(-n^s) over a grid of s.

    Returns (C, s, largest residual in log space)."""
    n, errors = np.asarray(dofs, dtype=float), np.asarray(errors, dtype=float)
    ok = np.isfinite(errors) & (errors > 0)
    if ok.sum() < 2:
        return float("nan"), float("nan"), float("nan")
    n, log_err = n[ok], np.log(errors[ok])
    powers = n[None, :] ** FIT_EXPONENTS[:, None]
    log_c = np.mean(log_err[None, :] + powers, axis=1)
    residuals = log_err[None, :] - (log_c[:, None] - powers)
    best = int(np.argmin(np.sum(residuals ** 2, axis=1)))
    return float(np.exp(log_c[best])), float(FIT_EXPONENTS[best]), float(np.max(np.abs(residuals[best])))


@dataclass
class StepResult:
    step: int
    order: int
    h: float = float("nan")
    dof: int = 0
    max_rel_err: float = float("nan")
    leaves: int = 0
    near_pairs: int = 0
    seconds: float = 0.0
    #: message of the error that aborted the step
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ConvergenceRecord:
    mode: str
    rows: list[StepResult] = field(default_factory=list)
    fit_slope: float = float("nan")
    fit_C: float = float("nan")
    fit_s: float = float("nan")
    fit_residual: float = float("nan")

    def fit(self):
        good = [r for r in self.rows if r.ok]
        errors = [r.max_rel_err for r in good]
        if self.mode == "h":
            self.fit_slope = slope_fit([r.h for r in good], errors)
        else:
            self.fit_C, self.fit_s, self.fit_residual = exponential_fit([r.dof for r in good], errors)

    def write_csv(self, stream: IO[str]):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for k, row in enumerate(self.rows):
            last = k == len(self.rows) - 1
            fits = [self.fit_slope, self.fit_C, self.fit_s] if last else [None] * 3
            writer.writerow([row.step, _fmt(row.h), row.dof, _fmt(row.max_rel_err), *(_fmt(v) for v in fits)])


def _fmt(value: float | None) -> str:
    if value is None:
        return ""
    return repr(float(value))


@dataclass
class StepOutput:
    "Everything one solved step produced"

    result: StepResult
    points: QuadraturePointSet
    assembler: Assembler
    solution: Solution


def _dirichlet_mask(config: RunConfig, points: QuadraturePointSet) -> np.ndarray:
    flags = np.array([p.bc is BoundaryCondition.DIRICHLET for p in config.geometry])
    return np.repeat(flags[points.patch], config.problem.components)


def check_points(config: RunConfig, points: QuadraturePointSet, sources: np.ndarray, targets: np.ndarray):
    "Sources must lie outside the boundary and evaluation points inside"
    inside = winding_numbers(points, sources) > 0.5
    if np.any(inside):
        raise ConfigError(f"Source point {sources[inside][0].tolist()} lies inside the domain")
    outside = winding_numbers(points, targets) < 0.5
    if np.any(outside):
        raise ConfigError(f"Evaluation point {targets[outside][0].tolist()} lies outside the domain")


def solve_step(config: RunConfig, step: int) -> StepOutput:
    started = time.perf_counter()
    order = config.orders()[step]
    partitions = config.partitions(step)
    points = distribute_points(partitions, gauss_legendre(order))
    kernels = kernel_pair(config.problem, config.material)
    assembler = Assembler(points, kernels, AssemblyConfig(
        config.eta, config.moment_tol, config.formulation, config.workers))
    logger.info("Step %d: order %d, %d leaves, %d points", step, order, len(points.leaves), len(points))

    sources = config.source_points()
    targets = config.evaluation_points()
    if step == 0:
        check_points(config, points, sources, targets)

    matrices = assembler.assemble()
    u, t = manufactured_bc(points, kernels, sources, config.forces)
    solution = solve_system(matrices, config.formulation, u, t, _dirichlet_mask(config, points))
    values = interior_eval(solution, targets, assembler)
    error = relative_error(values, exact_field(kernels, sources, targets, config.forces))

    result = StepResult(
        step, order, meshwidth(partitions), matrices.size, error,
        len(points.leaves), matrices.near_pairs, time.perf_counter() - started)
    logger.info("Step %d: h=%.4g dof=%d max_rel_err=%.3e (%.1fs)", step, result.h, result.dof, error, result.seconds)
    return StepOutput(result, points, assembler, solution)


def run_step(config: RunConfig, step: int) -> StepResult:
    "One sweep step; errors are recorded in the result instead of raised"
    store = config.store
    key = config.fingerprint(step) if store is not None else None
    if store is not None:
        cached = store.load(key)
        if cached is not None:
            logger.info("Step %d: using cached result", step)
            return cached
    try:
        result = solve_step(config, step).result
    except ConfigError:
        raise
    except IsoNystromError as e:
        logger.error("Step %d failed: %s", step, e)
        return StepResult(step, config.orders()[step], error=f"{type(e).__name__}: {e}")
    if store is not None:
        store.save(key, result)
    return result


def run_convergence(config: RunConfig) -> ConvergenceRecord:
    record = ConvergenceRecord(config.sweep.mode)
    for step in range(len(config.orders())):
        record.rows.append(run_step(config, step))
    record.fit()
    if config.sweep.mode == "h":
        logger.info("Fitted slope %.3f", record.fit_slope)
    else:
        logger.info("Fitted C=%.3g s=%.3f (residual %.3g)", record.fit_C, record.fit_s, record.fit_residual)
    return record


def write_density(output: StepOutput, stream: IO[str], per_leaf: int = 5):
    """Bezier interpolants of the boundary data sampled uniformly on every leaf.

    Columns: patch, leaf, parameter(s), position, value(s)."""
    solution = output.solution
    points = output.points
    name = "density" if solution.density is not None else "t"
    pdim = points.dim - 1
    c = solution.components
    ref = np.linspace(-1, 1, per_leaf)
    xi = ref[:, None] if pdim == 1 else np.stack(np.meshgrid(ref, ref, indexing="xy"), axis=-1).reshape(-1, 2)

    writer = csv.writer(stream, lineterminator="\n")
    header = ["patch", "leaf", *(f"u{k + 1}" for k in range(pdim)), *"xyz"[:points.dim],
              *([name] if c == 1 else [f"{name}_{k + 1}" for k in range(c)])]
    writer.writerow(header)
    for leaf in points.leaves:
        interpolant = interpolate_results(solution, leaf, name)
        u, _ = leaf.element.map_ref_to_param(xi)
        x = points.patches[leaf.patch].points(u)
        values = np.asarray(interpolant(xi)).reshape(len(xi), -1)
        for k in range(len(xi)):
            writer.writerow([leaf.patch, leaf.index, *map(_fmt, u[k]), *map(_fmt, x[k]), *map(_fmt, values[k])])


def describe(config: RunConfig) -> list[str]:
    "Human-readable summary of a configuration"
    geometry = config.geometry
    lines = [
        f"problem: {config.problem.value}, formulation: {config.formulation.value}, orders: {config.orders()}",
        f"geometry: {geometry.name or '-'} ({len(geometry)} patch(es), {geometry.dim}D)",
    ]
    corners = geometry.corners()
    for i, patch in enumerate(geometry):
        lines.append(f"  patch {i}: degrees {patch.degrees}, domain {patch.domain}, bc {patch.bc.value}"
                     + (f", corners at {[v for _, v in corners[i]]}" if corners[i] else ""))
    partitions = config.partitions(0)
    leaves = sum(len(p) for p in partitions)
    dof = leaves * config.orders()[0] ** geometry.pdim * config.problem.components
    lines.append(f"step 0: {leaves} leaves, {dof} dofs, h = {meshwidth(partitions):.4g}")
    lines.append(f"sources: {np.round(config.source_points(), 6).tolist()}")
    lines.append(f"evaluation points: {len(config.evaluation_points())}")
    return lines


def write_record(record: ConvergenceRecord, path: str | Path | None, stream: IO[str]):
    if path is None:
        record.write_csv(stream)
        return
    with open(path, "w", newline="") as f:
        record.write_csv(f)

