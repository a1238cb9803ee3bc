"""Kernels for symmetric tridiagonal matrices with diagonal ``d`` and off-diagonal ``e``."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike

from .config import NumericsConfig

LOGGER = logging.getLogger(__name__)

_EPS = float(np.finfo(float).eps)
_TINY = float(np.finfo(float).tiny)
_MAX_BISECTIONS = 200
_COARSE_GRID = 2048


def _as_arrays(diagonal: ArrayLike, off_diagonal: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    d = np.asarray(diagonal, dtype=float)
    e = np.asarray(off_diagonal, dtype=float)
    if d.ndim != 1 or d.size == 0:
        raise ValueError("diagonal must be a nonempty vector")
    if e.shape != (d.size - 1,):
        raise ValueError("off_diagonal must have one entry fewer than diagonal")
    return d, e


def gershgorin_interval(diagonal: ArrayLike, off_diagonal: ArrayLike) -> tuple[float, float]:
    d, e = _as_arrays(diagonal, off_diagonal)
    radius = np.zeros(d.size)
    radius[:-1] += np.abs(e)
    radius[1:] += np.abs(e)
    return float(np.min(d - radius)), float(np.max(d + radius))


def matrix_norm_bound(diagonal: ArrayLike, off_diagonal: ArrayLike) -> float:
    lower, upper = gershgorin_interval(diagonal, off_diagonal)
    return max(abs(lower), abs(upper))


def sturm_count(diagonal: ArrayLike, off_diagonal: ArrayLike, shifts: ArrayLike) -> np.ndarray:
    """Number of eigenvalues strictly below each shift, from the signs of the LDL^T pivots."""

    d, e = _as_arrays(diagonal, off_diagonal)
    shifts = np.atleast_1d(np.asarray(shifts, dtype=float))
    e2 = e * e
    pivmin = _TINY * max(1.0, float(e2.max()) if e2.size else 1.0)
    count = np.zeros(shifts.shape, dtype=np.int64)
    pivot = d[0] - shifts
    for i in range(d.size):
        if i:
            pivot = (d[i] - shifts) - e2[i - 1] / pivot
        pivot[np.abs(pivot) < pivmin] = -pivmin
        count += pivot < 0
    return count


def _bisect_targets(
    d: np.ndarray, e: np.ndarray, targets: np.ndarray, lower: float, upper: float, tol: float
) -> np.ndarray:
    if targets.size == 0:
        return np.empty(0)
    grid = np.linspace(lower, upper, min(4 * targets.size, _COARSE_GRID) + 1)
    counts = sturm_count(d, e, grid)
    slot = np.clip(np.searchsorted(counts, targets, side="right") - 1, 0, grid.size - 2)
    lo, hi = grid[slot].copy(), grid[slot + 1].copy()

    for _ in range(_MAX_BISECTIONS):
        width = hi - lo
        active = width > tol + 4.0 * _EPS * np.maximum(np.abs(lo), np.abs(hi))
        if not np.any(active):
            break
        mid = 0.5 * (lo[active] + hi[active])
        below = sturm_count(d, e, mid) > targets[active]
        hi[active] = np.where(below, mid, hi[active])
        lo[active] = np.where(below, lo[active], mid)
    return 0.5 * (lo + hi)


def bisect_eigenvalues(
    diagonal: ArrayLike,
    off_diagonal: ArrayLike,
    *,
    index_range: tuple[int, int] | None = None,
    config: NumericsConfig | None = None,
) -> np.ndarray:
    """Eigenvalues with indices in ``index_range`` (half open, ascending order) by Sturm bisection."""

    cfg = config or NumericsConfig()
    d, e = _as_arrays(diagonal, off_diagonal)
    first, stop = index_range if index_range is not None else (0, d.size)
    if not 0 <= first <= stop <= d.size:
        raise ValueError(f"index range {index_range} outside [0, {d.size}]")
    lower, upper = gershgorin_interval(d, e)
    pad = 1e-8 * max(1.0, upper - lower)
    lower, upper = lower - pad, upper + pad

    targets = np.arange(first, stop)
    workers = max(1, min(cfg.workers, targets.size))
    if workers == 1:
        values = _bisect_targets(d, e, targets, lower, upper, cfg.bisection_tol)
    else:
        pieces = np.array_split(targets, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(lambda piece: _bisect_targets(d, e, piece, lower, upper, cfg.bisection_tol), pieces)
            values = np.concatenate(list(parts))
    LOGGER.debug("bisected %d eigenvalues of a size-%d matrix", targets.size, d.size)
    return np.sort(values)


def cluster_bounds(eigenvalues: np.ndarray, threshold: float) -> list[tuple[int, int]]:
    """Half-open index ranges of runs whose consecutive gaps are below ``threshold``."""

    if eigenvalues.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(eigenvalues) >= threshold) + 1
    starts = np.concatenate([[0], breaks])
    stops = np.concatenate([breaks, [eigenvalues.size]])
    return [(int(a), int(b)) for a, b in zip(starts, stops)]


class EigenChunk(NamedTuple):
    first: int
    vectors: np.ndarray
    residual: float
    orthonormality: float


def _separated_shifts(eigenvalues: np.ndarray, clusters: list[tuple[int, int]], delta: float) -> np.ndarray:
    shifts = eigenvalues.copy()
    for lo, hi in clusters:
        for i in range(lo + 1, hi):
            if shifts[i] <= shifts[i - 1]:
                shifts[i] = shifts[i - 1] + delta
    return shifts


def _factor(d: np.ndarray, e: np.ndarray, shifts: np.ndarray, guard: float) -> tuple[np.ndarray, np.ndarray]:
    n = d.size
    pivots = np.empty((n, shifts.size))
    multipliers = np.zeros((n, shifts.size))
    pivot = d[0] - shifts
    pivot = np.where(np.abs(pivot) < guard, np.copysign(guard, pivot), pivot)
    pivots[0] = pivot
    for i in range(1, n):
        multipliers[i] = e[i - 1] / pivots[i - 1]
        pivot = (d[i] - shifts) - multipliers[i] * e[i - 1]
        pivots[i] = np.where(np.abs(pivot) < guard, np.copysign(guard, pivot), pivot)
    return pivots, multipliers


def _solve(pivots: np.ndarray, multipliers: np.ndarray, e: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    n = rhs.shape[0]
    y = np.empty_like(rhs)
    y[0] = rhs[0]
    for i in range(1, n):
        y[i] = rhs[i] - multipliers[i] * y[i - 1]
    x = np.empty_like(rhs)
    x[-1] = y[-1] / pivots[-1]
    for i in range(n - 2, -1, -1):
        x[i] = (y[i] - e[i] * x[i + 1]) / pivots[i]
    return x


def _orthonormalize(vectors: np.ndarray, clusters: list[tuple[int, int]]) -> None:
    vectors /= np.linalg.norm(vectors, axis=0)
    for lo, hi in clusters:
        for j in range(lo + 1, hi):
            for i in range(lo, j):
                vectors[:, j] -= (vectors[:, i] @ vectors[:, j]) * vectors[:, i]
            vectors[:, j] /= np.linalg.norm(vectors[:, j])


def tridiagonal_matvec(d: np.ndarray, e: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    out = d[:, None] * vectors
    out[:-1] += e[:, None] * vectors[1:]
    out[1:] += e[:, None] * vectors[:-1]
    return out


def inverse_iteration_chunk(
    diagonal: ArrayLike,
    off_diagonal: ArrayLike,
    eigenvalues: np.ndarray,
    first: int,
    *,
    config: NumericsConfig | None = None,
) -> EigenChunk:
    """Eigenvectors for a run of ascending eigenvalues; the run must not split a cluster.

    Each column is normalised and its largest entry made positive.
    """

    cfg = config or NumericsConfig()
    d, e = _as_arrays(diagonal, off_diagonal)
    norm = max(matrix_norm_bound(d, e), _TINY)
    clusters = [c for c in cluster_bounds(eigenvalues, cfg.cluster_gap_rel * norm) if c[1] - c[0] > 1]
    shifts = _separated_shifts(eigenvalues, clusters, 10.0 * _EPS * norm)
    pivots, multipliers = _factor(d, e, shifts, _EPS * norm)

    rng = np.random.default_rng([0, first])
    vectors = rng.uniform(-1.0, 1.0, size=(d.size, eigenvalues.size))
    _orthonormalize(vectors, clusters)
    for _ in range(cfg.inverse_iterations):
        vectors = _solve(pivots, multipliers, e, vectors)
        _orthonormalize(vectors, clusters)

    peaks = np.argmax(np.abs(vectors), axis=0)
    vectors *= np.sign(vectors[peaks, np.arange(eigenvalues.size)])

    residual = tridiagonal_matvec(d, e, vectors) - vectors * eigenvalues[None, :]
    gram = vectors.T @ vectors
    return EigenChunk(
        first=first,
        vectors=vectors,
        residual=float(np.max(np.linalg.norm(residual, axis=0))),
        orthonormality=float(np.max(np.abs(gram - np.eye(eigenvalues.size)))),
    )


def chunk_ranges(eigenvalues: np.ndarray, chunk_size: int, threshold: float) -> list[tuple[int, int]]:
    """Split ``[0, n)`` into runs of about ``chunk_size`` indices without cutting a cluster."""

    clusters = cluster_bounds(eigenvalues, threshold)
    ranges: list[tuple[int, int]] = []
    start = 0
    for _, hi in clusters:
        if hi - start >= chunk_size:
            ranges.append((start, hi))
            start = hi
    if start < eigenvalues.size:
        ranges.append((start, eigenvalues.size))
    return ranges


class TwistedVector(NamedTuple):
    log_abs: np.ndarray
    sign: np.ndarray
    twist: int


def twisted_vector(diagonal: ArrayLike, off_diagonal: ArrayLike, eigenvalue: float) -> TwistedVector:
    """Eigenvector of a tridiagonal matrix from its twisted factorisation, held as ``sign * e^{log_abs}``.

    The twist index minimises ``|gamma_r|`` and carries the value 1; entries far below the
    floating point floor keep full relative accuracy.
    """

    d, e = _as_arrays(diagonal, off_diagonal)
    n = d.size
    guard = _EPS * max(matrix_norm_bound(d, e), _TINY)
    c = (d - eigenvalue).tolist()
    e2 = (e * e).tolist()

    plus = [0.0] * n
    value = c[0]
    for i in range(n):
        if i:
            value = c[i] - e2[i - 1] / value
        if abs(value) < guard:
            value = math.copysign(guard, value)
        plus[i] = value
    minus = [0.0] * n
    value = c[-1]
    for i in range(n - 1, -1, -1):
        if i < n - 1:
            value = c[i] - e2[i] / value
        if abs(value) < guard:
            value = math.copysign(guard, value)
        minus[i] = value

    d_plus, d_minus = np.array(plus), np.array(minus)
    gamma = d_plus + d_minus - np.array(c)
    twist = int(np.argmin(np.abs(gamma)))

    log_abs = np.zeros(n)
    sign = np.ones(n)
    with np.errstate(divide="ignore"):
        if twist > 0:
            ratios = e[:twist] / d_plus[:twist]
            log_abs[:twist] = np.cumsum(np.log(np.abs(ratios))[::-1])[::-1]
            sign[:twist] = np.cumprod(-np.sign(ratios)[::-1])[::-1]
        if twist < n - 1:
            ratios = e[twist:] / d_minus[twist + 1 :]
            log_abs[twist + 1 :] = np.cumsum(np.log(np.abs(ratios)))
            sign[twist + 1 :] = np.cumprod(-np.sign(ratios))
    return TwistedVector(log_abs=log_abs, sign=sign, twist=twist)
