"""Finite-volume spectral data, m-functions and subordinacy quantities."""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple
from functools import lru_cache

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .arrays import Complex, FloatArray
from .config import NumericsConfig
from .exceptions import EpsilonTooLargeError, TruncationError, WindowError
from .measure import DiscreteMeasure
from .operator import (
    AlmostMathieu,
    SolutionProfile,
    basis_solutions,
    log_norm_l1l2,
    norm_weights,
    solution_profile,
)
from .tridiagonal import (
    bisect_eigenvalues,
    chunk_ranges,
    cluster_bounds,
    inverse_iteration_chunk,
    matrix_norm_bound,
    tridiagonal_matvec,
    twisted_vector,
)

LOGGER = logging.getLogger(__name__)

_MAX_SIZE = 50_000
_MAX_KEPT_VECTORS = 5_000
_MAX_OMEGA_SITES = 1 << 15
_RESCALE = 2.0**200


class TruncatedOperator(BaseModel):
    """Dirichlet restriction of ``H`` to the sites ``n_min..n_max``."""

    model_config = ConfigDict(frozen=True)

    n_min: int
    n_max: int
    diagonal: FloatArray

    @model_validator(mode="after")
    def _check_window(self) -> TruncatedOperator:
        if self.n_max < self.n_min:
            raise ValueError("empty truncation window")
        if self.diagonal.shape != (self.n_max - self.n_min + 1,):
            raise ValueError("diagonal does not match the window")
        return self

    @classmethod
    def from_operator(cls, op: AlmostMathieu, n_min: int, n_max: int) -> TruncatedOperator:
        return cls(n_min=n_min, n_max=n_max, diagonal=op.potential(np.arange(n_min, n_max + 1)))

    @classmethod
    def centered(cls, op: AlmostMathieu, n: int) -> TruncatedOperator:
        """The window ``[-n, n]``."""

        return cls.from_operator(op, -n, n)

    @property
    def size(self) -> int:
        return self.n_max - self.n_min + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    @property
    def off_diagonal(self) -> np.ndarray:
        return np.ones(self.size - 1)

    def index(self, site: int) -> int:
        if not self.n_min <= site <= self.n_max:
            raise WindowError(f"site {site} outside [{self.n_min}, {self.n_max}]")
        return site - self.n_min

    def norm_bound(self) -> float:
        return matrix_norm_bound(self.diagonal, self.off_diagonal)

    def matvec(self, vectors: ArrayLike) -> np.ndarray:
        vectors = np.asarray(vectors, dtype=float)
        flat = vectors.ndim == 1
        out = tridiagonal_matvec(self.diagonal, self.off_diagonal, vectors[:, None] if flat else vectors)
        return out[:, 0] if flat else out


class SpectralData(BaseModel):
    """Eigenvalues of a truncation with the eigenvector entries at selected sites."""

    model_config = ConfigDict(frozen=True)

    n_min: int
    n_max: int
    eigenvalues: FloatArray
    sites: tuple[int, ...]
    site_amplitudes: FloatArray
    orthonormality_residual: float
    max_residual: float
    clustered: bool
    n_clusters: int = 0
    vectors: FloatArray | None = Field(default=None, exclude=True)

    def amplitudes(self, site: int) -> np.ndarray:
        try:
            column = self.sites.index(site)
        except ValueError:
            raise ValueError(f"no eigenvector amplitudes stored for site {site}") from None
        return self.site_amplitudes[:, column]

    def completeness(self, site: int) -> float:
        return float(np.sum(self.amplitudes(site) ** 2))


def eigenvalues(
    truncation: TruncatedOperator,
    *,
    index_range: tuple[int, int] | None = None,
    config: NumericsConfig | None = None,
) -> np.ndarray:
    return bisect_eigenvalues(truncation.diagonal, truncation.off_diagonal, index_range=index_range, config=config)


def eigensolve(
    truncation: TruncatedOperator,
    sites: Sequence[int],
    *,
    keep_vectors: bool = False,
    config: NumericsConfig | None = None,
) -> SpectralData:
    """All eigenvalues by Sturm bisection and the eigenvector entries at ``sites`` by inverse iteration.

    Clusters of eigenvalues closer than ``cluster_gap_rel * ||H||`` are re-orthogonalised
    together and flagged.
    """

    cfg = config or NumericsConfig()
    if truncation.size > _MAX_SIZE:
        raise ValueError(f"truncation of size {truncation.size} exceeds {_MAX_SIZE}")
    if keep_vectors and truncation.size > _MAX_KEPT_VECTORS:
        raise ValueError(f"full eigenvectors are kept only up to size {_MAX_KEPT_VECTORS}")
    rows = [truncation.index(site) for site in sites]

    d, e = truncation.diagonal, truncation.off_diagonal
    values = bisect_eigenvalues(d, e, config=cfg)
    threshold = cfg.cluster_gap_rel * max(truncation.norm_bound(), 1.0)
    ranges = chunk_ranges(values, cfg.chunk_size, threshold)

    def run(bounds: tuple[int, int]):
        lo, hi = bounds
        chunk = inverse_iteration_chunk(d, e, values[lo:hi], lo, config=cfg)
        LOGGER.debug("eigenvectors %d..%d of %d done", lo, hi, values.size)
        return chunk

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(run, ranges))
    else:
        chunks = [run(bounds) for bounds in ranges]

    amplitudes = np.concatenate([chunk.vectors[rows].T for chunk in chunks], axis=0)
    n_clusters = sum(1 for lo, hi in cluster_bounds(values, threshold) if hi - lo > 1)
    if n_clusters:
        LOGGER.warning("%d eigenvalue cluster(s) re-orthogonalised in a size-%d truncation", n_clusters, truncation.size)
    return SpectralData(
        n_min=truncation.n_min,
        n_max=truncation.n_max,
        eigenvalues=values,
        sites=tuple(sites),
        site_amplitudes=amplitudes.reshape(values.size, len(rows)),
        orthonormality_residual=max(chunk.orthonormality for chunk in chunks),
        max_residual=max(chunk.residual for chunk in chunks),
        clustered=n_clusters > 0,
        n_clusters=n_clusters,
        vectors=np.concatenate([chunk.vectors for chunk in chunks], axis=1) if keep_vectors else None,
    )


def spectral_measure(data: SpectralData, phi: int | Mapping[int, float]) -> DiscreteMeasure:
    """Spectral measure of ``delta_site`` or of a finitely supported vector ``{site: coefficient}``."""

    coefficients = {phi: 1.0} if isinstance(phi, int) else dict(phi)
    overlaps = np.zeros(data.eigenvalues.size)
    for site, coefficient in coefficients.items():
        overlaps += coefficient * data.amplitudes(site)
    return DiscreteMeasure.from_atoms(data.eigenvalues, overlaps**2)


def borel_transform(mu: DiscreteMeasure, z: complex) -> complex:
    """``int dmu(x) / (x - z)`` for ``Im z > 0``."""

    z = complex(z)
    if z.imag <= 0:
        raise ValueError("Im z must be positive")
    return complex(np.sum(mu.weights / (mu.positions - z)))


def free_m_function(z: complex) -> complex:
    """Dirichlet m-function ``(-z + sqrt(z^2 - 4))/2`` of the free half line, Herglotz branch."""

    z = complex(z)
    root = np.sqrt(complex(z * z - 4.0))
    value = (-z + root) / 2.0
    return complex(value if value.imag > 0 else (-z - root) / 2.0)


# ---------------------------------------------------------------------------
# m-functions
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _site_measures(
    op: AlmostMathieu, n_min: int, n_max: int, sites: tuple[int, ...], numerics: tuple
) -> tuple[DiscreteMeasure, ...]:
    truncation = TruncatedOperator.from_operator(op, n_min, n_max)
    data = eigensolve(truncation, sites, config=NumericsConfig(*numerics))
    return tuple(spectral_measure(data, site) for site in sites)


def site_measures(
    op: AlmostMathieu, n_min: int, n_max: int, sites: Sequence[int], *, config: NumericsConfig | None = None
) -> tuple[DiscreteMeasure, ...]:
    """Spectral measures of ``delta_s`` for the truncation ``[n_min, n_max]``, cached per window."""

    cfg = config or NumericsConfig()
    return _site_measures(op, n_min, n_max, tuple(sites), astuple(cfg))


class MFunctionPair(BaseModel):
    model_config = ConfigDict(frozen=True)

    z: Complex
    x0: float
    n_truncation: int
    m1: Complex
    m2: Complex
    m1_tilde: Complex
    m2_tilde: Complex
    M1: Complex
    M2: Complex
    M1_identity: Complex
    M2_identity: Complex
    residual_M1: float
    residual_M2: float
    truncation_change: float
    truncation_estimate: float


def _dirichlet_pair(op: AlmostMathieu, z: complex, n: int, config: NumericsConfig) -> tuple[complex, complex]:
    (right,) = site_measures(op, 1, n, (1,), config=config)
    (left,) = site_measures(op, -n, -1, (-1,), config=config)
    v0 = float(op.potential([0])[0])
    return borel_transform(right, z), z - v0 + borel_transform(left, z)


def phase_m_functions(m1: complex, m2: complex, x0: float) -> tuple[complex, complex]:
    """Boundary-phase m-functions obtained by inverting the Dirichlet Moebius relations."""

    c, s = math.cos(2 * math.pi * x0), math.sin(2 * math.pi * x0)
    return (m1 * c + s) / (c - m1 * s), (m2 * c - s) / (m2 * s + c)


def half_line_m(
    op: AlmostMathieu,
    energy: float,
    eps: float,
    x0: float,
    n: int,
    *,
    config: NumericsConfig | None = None,
) -> MFunctionPair:
    """Half-line m-functions and whole-line Borel transforms at ``z = E + i eps``.

    ``m1`` comes from the truncation ``[1, N]``; ``m2 = z - v(theta) + G_{[-N,-1]}(-1,-1)`` so that
    ``M1 = -1/(m1 + m2)`` and ``M2 = m1 m2/(m1 + m2)``.
    """

    if eps <= 0:
        raise ValueError("eps must be positive")
    if n < 4:
        raise ValueError("N must be at least 4")
    cfg = config or NumericsConfig()
    z = complex(energy, eps)

    m1, m2 = _dirichlet_pair(op, z, n, cfg)
    m1_half, m2_half = _dirichlet_pair(op, z, n // 2, cfg)
    change = max(abs(m1 - m1_half) / max(1.0, abs(m1)), abs(m2 - m2_half) / max(1.0, abs(m2)))
    if change > cfg.truncation_tol:
        suggested = max(2 * n, math.ceil(2.0 * math.log(1.0 / cfg.truncation_tol) / eps))
        raise TruncationError(
            f"eps={eps:g} too small for N={n}: halving N moves m by {change:.2e}", suggested_n=suggested
        )

    mu0, mu1 = site_measures(op, -n, n, (0, 1), config=cfg)
    big_m1, big_m2 = borel_transform(mu0, z), borel_transform(mu1, z)
    m1_identity = -1.0 / (m1 + m2)
    m2_identity = m1 * m2 / (m1 + m2)
    m1_tilde, m2_tilde = phase_m_functions(m1, m2, x0)
    return MFunctionPair(
        z=z,
        x0=x0,
        n_truncation=n,
        m1=m1,
        m2=m2,
        m1_tilde=m1_tilde,
        m2_tilde=m2_tilde,
        M1=big_m1,
        M2=big_m2,
        M1_identity=m1_identity,
        M2_identity=m2_identity,
        residual_M1=abs(big_m1 - m1_identity),
        residual_M2=abs(big_m2 - m2_identity),
        truncation_change=change,
        truncation_estimate=math.exp(-n * eps / 2.0),
    )


# ---------------------------------------------------------------------------
# Subordinacy
# ---------------------------------------------------------------------------


class OmegaTable(BaseModel):
    """``S(j) = sum_{i<j} P_{[i+1, j-1]}(E)^2`` and its running sum ``D`` in log form.

    By Cauchy-Binet the Gram determinant of the basis solutions under ``||.||_{L,0}`` is
    ``D([L]) + (L - [L]) S([L] + 1)``, a sum of positive terms.
    """

    model_config = ConfigDict(frozen=True)

    energy: float
    max_site: int
    log_s: FloatArray
    log_d: FloatArray

    @property
    def max_length(self) -> float:
        return float(self.max_site)

    def log_det_gram(self, length: float) -> float:
        if length < 0:
            raise ValueError("L must be nonnegative")
        whole = math.floor(length)
        if whole + 1 > self.max_site:
            raise ValueError(f"L={length} exceeds the table (max site {self.max_site})")
        value = float(self.log_d[whole])
        frac = length - whole
        if frac > 0:
            value = float(np.logaddexp(value, math.log(frac) + self.log_s[whole + 1]))
        return value

    def log_omega(self, length: float) -> float:
        return 0.5 * self.log_det_gram(length)


def _build_omega_table(op: AlmostMathieu, energy: float, max_site: int) -> OmegaTable:
    cs = energy - op.potential(np.arange(0, max_site + 1))
    log_s = np.full(max_site + 1, -np.inf)
    log_s[1:] = 0.0
    prev = np.zeros(max_site)
    cur = np.ones(max_site)
    scale = np.zeros(max_site)
    with np.errstate(divide="ignore"):
        for length in range(1, max_site):
            count = max_site - length
            new = cs[length : length + count] * cur[:count] - prev[:count]
            prev, cur, scale = cur[:count], new, scale[:count]
            size = np.maximum(np.abs(prev), np.abs(cur))
            rescale = (size > _RESCALE) | ((size > 0) & (size < 1.0 / _RESCALE))
            if np.any(rescale):
                prev = np.where(rescale, prev / np.where(rescale, size, 1.0), prev)
                cur = np.where(rescale, cur / np.where(rescale, size, 1.0), cur)
                scale = scale + np.where(rescale, np.log(np.where(rescale, size, 1.0)), 0.0)
            contribution = 2.0 * (np.log(np.abs(cur)) + scale)
            log_s[length + 1 :] = np.logaddexp(log_s[length + 1 :], contribution)
    log_d = np.logaddexp.accumulate(log_s)
    return OmegaTable(energy=energy, max_site=max_site, log_s=log_s, log_d=log_d)


@lru_cache(maxsize=64)
def omega_table(op: AlmostMathieu, energy: float, max_site: int) -> OmegaTable:
    """Cached ``OmegaTable`` for the sites ``0..max_site``."""

    if max_site < 3:
        raise ValueError("max_site must be at least 3")
    LOGGER.debug("building omega table E=%.6g up to site %d", energy, max_site)
    return _build_omega_table(op, energy, max_site)


def _table_covering(op: AlmostMathieu, energy: float, top: int) -> OmegaTable:
    sites = 256
    while sites < top:
        sites *= 2
    return omega_table(op, energy, sites)


class SubordinacyData(BaseModel):
    model_config = ConfigDict(frozen=True)

    energy: float
    x0: float
    L: float
    log_a: float
    log_b: float
    a_L: float
    b_L: float
    log_omega: float
    omega_L: float
    gram: tuple[tuple[float, float], tuple[float, float]]
    gram_log_scale: float


def _safe_exp(value: float) -> float:
    try:
        return math.exp(value)
    except OverflowError:
        return math.inf


def scaled_gram(
    f: SolutionProfile, g: SolutionProfile, l1: float, l2: float
) -> tuple[np.ndarray, float]:
    """Gram matrix of ``f, g`` under ``||.||_{L1,L2}`` as ``(matrix, log_scale)``, value ``matrix * e^{2 log_scale}``."""

    sites, weights = norm_weights(f, l1, l2)
    fi, gi = sites - f.n_min, sites - g.n_min
    shift = float(max(np.max(f.log_scale[fi]), np.max(g.log_scale[gi])))
    fa = f.mantissa[fi] * np.exp(f.log_scale[fi] - shift)
    ga = g.mantissa[gi] * np.exp(g.log_scale[gi] - shift)
    gram = np.array(
        [
            [np.sum(weights * fa * fa), np.sum(weights * fa * ga)],
            [np.sum(weights * fa * ga), np.sum(weights * ga * ga)],
        ]
    )
    return gram, shift


def subordinacy_quantities(op: AlmostMathieu, energy: float, x0: float, length: float) -> SubordinacyData:
    """``a(L) = ||u_{x0+1/4}||^2``, ``b(L) = ||u_{x0}||^2`` and ``omega(L)`` under ``||.||_{L,0}``."""

    if length < 2:
        raise ValueError("L must be at least 2")
    top = math.floor(length) + 1
    window = (-1, top)
    f, g = basis_solutions(op, energy, window)
    gram, shift = scaled_gram(f, g, length, 0.0)
    log_a = log_norm_l1l2(solution_profile(op, energy, x0 + 0.25, window), length, 0.0)
    log_b = log_norm_l1l2(solution_profile(op, energy, x0, window), length, 0.0)
    log_omega = _table_covering(op, energy, top).log_omega(length)
    return SubordinacyData(
        energy=energy,
        x0=x0,
        L=length,
        log_a=log_a,
        log_b=log_b,
        a_L=_safe_exp(log_a),
        b_L=_safe_exp(log_b),
        log_omega=log_omega,
        omega_L=_safe_exp(log_omega),
        gram=(tuple(gram[0].tolist()), tuple(gram[1].tolist())),
        gram_log_scale=shift,
    )


def find_L_of_eps(
    op: AlmostMathieu, energy: float, x0: float, eps: float, *, config: NumericsConfig | None = None
) -> float:
    """Solve ``omega(L) = 1/eps`` by bisection in ``ln L``; ``omega`` does not depend on ``x0``."""

    if eps <= 0:
        raise ValueError("eps must be positive")
    cfg = config or NumericsConfig()
    target = -math.log(eps)
    sites = 256
    while True:
        table = omega_table(op, energy, sites)
        if table.log_omega(2.0) > target:
            raise EpsilonTooLargeError(f"epsilon too large: 1/eps={1 / eps:.4g} is below omega(2)")
        if table.log_omega(sites - 1) >= target:
            break
        if sites >= _MAX_OMEGA_SITES:
            raise TruncationError(f"omega(L) stays below 1/eps up to L={sites - 1}", suggested_n=2 * sites)
        sites *= 2

    lo, hi = math.log(2.0), math.log(sites - 1)
    tolerance = math.log1p(cfg.omega_rtol)
    length = math.exp(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        length = math.exp(mid)
        gap = table.log_omega(length) - target
        if abs(gap) <= tolerance / 2:
            break
        if gap < 0:
            lo = mid
        else:
            hi = mid
    LOGGER.debug("L(eps=%.3g) = %.6g at E=%.6g", eps, length, energy)
    return length


class JLBoundCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    energy: float
    eps: float
    x0: float
    L_eps: float
    lhs: float
    rhs: float
    ratio: float
    c_cal: float
    passed: bool


def jl_lower_bound_check(
    op: AlmostMathieu,
    energy: float,
    x0: float,
    eps: float,
    *,
    n_truncation: int = 5000,
    c_cal: float = 100.0,
    config: NumericsConfig | None = None,
) -> JLBoundCheck:
    """Compare ``Im m~_1(E + i eps)`` with ``(1/eps)(1/b(L(eps)))``; passes when the ratio is at least ``1/c_cal``."""

    length = find_L_of_eps(op, energy, x0, eps, config=config)
    if op.coupling_lambda == 0:
        z = complex(energy, eps)
        m_free = free_m_function(z)
        m1_tilde, _ = phase_m_functions(m_free, z + m_free, x0)
    else:
        m1_tilde = half_line_m(op, energy, eps, x0, n_truncation, config=config).m1_tilde
    lhs = m1_tilde.imag
    top = math.floor(length) + 1
    log_b = log_norm_l1l2(solution_profile(op, energy, x0, (-1, top)), length, 0.0)
    rhs = _safe_exp(-math.log(eps) - log_b)
    ratio = lhs / rhs
    return JLBoundCheck(
        energy=energy,
        eps=eps,
        x0=x0,
        L_eps=length,
        lhs=lhs,
        rhs=rhs,
        ratio=ratio,
        c_cal=c_cal,
        passed=ratio >= 1.0 / c_cal,
    )


class BoundaryScalingReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    slack: float
    eps_values: tuple[float, ...]
    n_points: int
    n_passed: int
    pass_fraction: float
    min_scaled_value: float
    per_eps_pass_fraction: tuple[float, ...]


def boundary_scaling_check(
    mu: DiscreteMeasure,
    energies: ArrayLike,
    eps_values: Sequence[float],
    t: float,
    *,
    slack: float = 0.1,
) -> BoundaryScalingReport:
    """Check ``Im M(E + i eps) * eps^t >= 1 - slack`` over ``energies x eps_values``."""

    if t < 0:
        raise ValueError("t must be nonnegative")
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    eps = np.asarray(eps_values, dtype=float)
    if energies.size == 0 or eps.size == 0 or np.any(eps <= 0):
        raise ValueError("need energies and positive eps values")
    distances = mu.positions[None, None, :] - energies[:, None, None]
    imag = np.sum(mu.weights * eps[None, :, None] / (distances**2 + eps[None, :, None] ** 2), axis=2)
    scaled = imag * eps[None, :] ** t
    passed = scaled >= 1.0 - slack
    return BoundaryScalingReport(
        t=t,
        slack=slack,
        eps_values=tuple(eps.tolist()),
        n_points=int(passed.size),
        n_passed=int(passed.sum()),
        pass_fraction=float(passed.mean()),
        min_scaled_value=float(scaled.min()),
        per_eps_pass_fraction=tuple(passed.mean(axis=0).tolist()),
    )


def schnol_phase(op: AlmostMathieu, energy: float, length: float) -> float:
    """Boundary phase in ``[0, 1/2)`` minimising ``||u_x||_{L,L}``."""

    if length < 1:
        raise ValueError("L must be at least 1")
    top = math.floor(length) + 1
    f, g = basis_solutions(op, energy, (-top, top))
    gram, _ = scaled_gram(f, g, length, length)
    (a, b), (_, c) = gram
    # (cos psi, sin psi) spans the least eigenvector; u_x = sin(2 pi x) f - cos(2 pi x) g
    psi = 0.5 * math.atan2(2.0 * b, a - c) + math.pi / 2.0
    return ((psi + math.pi / 2.0) / (2.0 * math.pi)) % 0.5


class NormGrowthReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    exponent: float
    n_points: int
    n_passed: int
    pass_fraction: float
    worst_margin: float


def norm_growth_check(
    op: AlmostMathieu,
    energies: ArrayLike,
    lengths: Sequence[float],
    t1: float,
    beta: float,
    *,
    slack: float = 0.1,
) -> NormGrowthReport:
    """Check ``max_x ||u_x||_{L,0} * min_x ||u_x||_{L,0} >= L^{1 + ln(lambda)/(2 t1 beta) - slack}``."""

    if not 0 < t1 < 1 or beta <= 0:
        raise ValueError("need 0 < t1 < 1 and beta > 0")
    exponent = 1.0 + op.log_lambda / (2.0 * t1 * beta) - slack
    top = math.floor(max(lengths)) + 1
    margins = []
    for energy in np.atleast_1d(np.asarray(energies, dtype=float)).tolist():
        table = _table_covering(op, energy, top)
        margins.extend(table.log_omega(length) - exponent * math.log(length) for length in lengths)
    margins_array = np.asarray(margins)
    passed = int(np.count_nonzero(margins_array >= 0))
    return NormGrowthReport(
        exponent=exponent,
        n_points=margins_array.size,
        n_passed=passed,
        pass_fraction=passed / margins_array.size,
        worst_margin=float(margins_array.min()),
    )


def eigenfunction_profile(truncation: TruncatedOperator, energy: float) -> SolutionProfile:
    """Eigenvector of ``truncation`` at the eigenvalue ``energy`` normalised to ``phi(0)^2 + phi(1)^2 = 1``."""

    if not truncation.n_min <= 0 < truncation.n_max:
        raise WindowError("truncation window must contain the sites 0 and 1")
    vector = twisted_vector(truncation.diagonal, truncation.off_diagonal, energy)
    i0, i1 = truncation.index(0), truncation.index(1)
    log_norm = 0.5 * float(np.logaddexp(2 * vector.log_abs[i0], 2 * vector.log_abs[i1]))
    finite = np.isfinite(vector.log_abs)
    log_scale = np.where(finite, vector.log_abs - log_norm, 0.0)
    phi0 = vector.sign[i0] * math.exp(vector.log_abs[i0] - log_norm)
    phi1 = vector.sign[i1] * math.exp(vector.log_abs[i1] - log_norm)
    return SolutionProfile(
        n_min=truncation.n_min,
        n_max=truncation.n_max,
        mantissa=np.where(finite, vector.sign, 0.0),
        log_scale=log_scale,
        boundary_phase=(math.atan2(phi0, -phi1) / (2.0 * math.pi)) % 1.0,
        energy=energy,
    )
