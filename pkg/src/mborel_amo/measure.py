"""Discrete Borel measures, m-Borel transforms and multifractal exponent estimators."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from typing import Any

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from .arrays import FloatArray, IntArray
from .config import NumericsConfig
from .exceptions import EmptyMeasureError, HypothesisError

LOGGER = logging.getLogger(__name__)


class DiscreteMeasure(BaseModel):
    """Finite atomic measure with strictly increasing positions and positive weights."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    positions: FloatArray
    weights: FloatArray

    _total_mass: float = PrivateAttr(default=0.0)

    @model_validator(mode="after")
    def _check_atoms(self) -> DiscreteMeasure:
        if self.positions.ndim != 1 or self.positions.shape != self.weights.shape:
            raise ValueError("positions and weights must be one-dimensional and of equal length")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.weights))):
            raise ValueError("positions and weights must be finite")
        if np.any(np.diff(self.positions) <= 0):
            raise ValueError("positions must be strictly increasing")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        return self

    def model_post_init(self, __context: Any) -> None:
        self._total_mass = float(np.sum(self.weights))

    @classmethod
    def from_atoms(cls, positions: ArrayLike, weights: ArrayLike) -> DiscreteMeasure:
        """Sort atoms, merge repeated positions and drop zero weights."""

        positions = np.asarray(positions, dtype=float).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        if positions.shape != weights.shape:
            raise ValueError("positions and weights must have equal length")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        unique, inverse = np.unique(positions, return_inverse=True)
        merged = np.bincount(inverse, weights=weights, minlength=unique.size)
        keep = merged > 0
        return cls(positions=unique[keep], weights=merged[keep])

    @property
    def total_mass(self) -> float:
        return self._total_mass

    @property
    def n_atoms(self) -> int:
        return int(self.positions.size)

    def is_empty(self) -> bool:
        return self.positions.size == 0

    def __add__(self, other: DiscreteMeasure) -> DiscreteMeasure:
        return DiscreteMeasure.from_atoms(
            np.concatenate([self.positions, other.positions]),
            np.concatenate([self.weights, other.weights]),
        )

    def local_spacing(self, x: float) -> float:
        """Smallest gap between the atoms that bracket ``x`` (inf for fewer than two atoms)."""

        if self.positions.size < 2:
            return math.inf
        index = int(np.searchsorted(self.positions, x))
        lo, hi = max(index - 1, 0), min(index + 1, self.positions.size - 1)
        gaps = np.diff(self.positions[lo : hi + 1])
        return float(gaps.min()) if gaps.size else math.inf

    def sample_atoms(self, n_samples: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw atoms weight-proportionally; return unique atom indices and their counts."""

        if self.is_empty():
            raise EmptyMeasureError("cannot sample from an empty measure")
        draws = rng.choice(self.positions.size, size=n_samples, p=self.weights / self.total_mass)
        return np.unique(draws, return_counts=True)


class ScaleGrid(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    eps_values: FloatArray

    @model_validator(mode="after")
    def _check_scales(self) -> ScaleGrid:
        eps = self.eps_values
        if eps.ndim != 1 or eps.size < 4:
            raise ValueError("a scale grid needs at least 4 scales")
        if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
            raise ValueError("scales must be positive and strictly decreasing")
        return self

    @classmethod
    def geometric(cls, base: float, k_min: int, k_max: int) -> ScaleGrid:
        exponents = np.arange(k_min, k_max + 1, dtype=float)
        return cls(eps_values=float(base) ** -exponents)

    @classmethod
    def dyadic(cls, j_min: int = 2, j_max: int = 10) -> ScaleGrid:
        return cls.geometric(2.0, j_min, j_max)

    @classmethod
    def triadic(cls, k_min: int = 2, k_max: int = 10) -> ScaleGrid:
        return cls.geometric(3.0, k_min, k_max)

    @property
    def log_eps(self) -> np.ndarray:
        return np.log(self.eps_values)

    def tail_indices(self) -> np.ndarray:
        """Indices of the smallest-scale half of the grid."""

        n = self.eps_values.size
        return np.arange(n // 2, n)


class ScalingTrace(BaseModel):
    """Per-scale data behind an exponent estimate."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    log_eps: FloatArray
    log_values: FloatArray
    ratios: FloatArray
    pair_slopes: FloatArray
    excluded_scales: tuple[int, ...] = ()


class ScalingEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    gamma_minus_hat: float
    gamma_plus_hat: float
    regression_slope: float
    per_scale: ScalingTrace
    local_spacing: float
    below_spacing: bool = False


class JScalingEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    m: float
    sigma_liminf_hat: float
    sigma_limsup_hat: float
    regression_slope: float
    trace: ScalingTrace


class RenyiEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    q: float
    d_minus_hat: float
    d_plus_hat: float
    regression_slope: float
    trace: ScalingTrace


class SigmaSummary(BaseModel):
    """Weighted summaries of the per-point m-Borel scaling exponents."""

    model_config = ConfigDict(frozen=True)

    liminf_ess_inf: float
    liminf_median: float
    liminf_ess_sup: float
    limsup_ess_inf: float
    limsup_median: float
    limsup_ess_sup: float


class DimensionReport(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    m: float
    eps_values: FloatArray
    sample_points: FloatArray
    sample_counts: IntArray
    gamma_summary: tuple[ScalingEstimate, ...]
    sigma_summary: tuple[JScalingEstimate, ...]
    dimH_minus_hat: float
    dimH_plus_hat: float
    dimP_minus_hat: float
    dimP_plus_hat: float
    clamped: bool
    renyi: tuple[RenyiEstimate, ...]
    renyi_monotone: bool
    sigma_hat: SigmaSummary
    bound_values: dict[str, float | None] = Field(default_factory=dict)
    below_spacing_fraction: float = 0.0

    def renyi_for(self, q: float) -> RenyiEstimate:
        for estimate in self.renyi:
            if math.isclose(estimate.q, q):
                return estimate
        raise KeyError(q)


# ---------------------------------------------------------------------------
# Elementary quantities
# ---------------------------------------------------------------------------


def concentration(mu: DiscreteMeasure, x: float, eps: float) -> float:
    """Mass of the closed interval ``[x - eps, x + eps]``."""

    if eps <= 0:
        raise ValueError("eps must be positive")
    lo = int(np.searchsorted(mu.positions, x - eps, side="left"))
    hi = int(np.searchsorted(mu.positions, x + eps, side="right"))
    return float(np.sum(mu.weights[lo:hi]))


def _borel_kernel(distances: np.ndarray, m: float, eps: float, threshold: float) -> np.ndarray:
    ratio = distances / eps
    out = np.empty_like(ratio)
    far = ratio > threshold
    near = ~far
    out[near] = 1.0 / (1.0 + ratio[near] ** m)
    # 1 / (1 + r^m) evaluated as exp(-log(1 + exp(m log r)))
    out[far] = np.exp(-np.logaddexp(0.0, m * np.log(ratio[far])))
    return out


def m_borel(
    mu: DiscreteMeasure,
    m: float,
    x: float,
    eps: float,
    *,
    config: NumericsConfig | None = None,
) -> float:
    """m-Borel transform ``J_{mu,m}(x, eps)``."""

    if m <= 0:
        raise ValueError("m must be positive")
    if eps <= 0:
        raise ValueError("eps must be positive")
    cfg = config or NumericsConfig()
    kernel = _borel_kernel(np.abs(mu.positions - x), m, eps, cfg.borel_log_threshold)
    return float(np.dot(mu.weights, kernel))


def renyi_sum(
    mu: DiscreteMeasure,
    q: float,
    eps: float,
    *,
    config: NumericsConfig | None = None,
) -> float:
    """Moment sum ``S_mu(q, eps)`` over the half-open bins ``[j eps, (j+1) eps)``."""

    if q <= 0:
        raise ValueError("q must be positive")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if mu.is_empty():
        return 0.0
    masses = _bin_masses(mu, eps, (config or NumericsConfig()).spacing_tol)
    if q == 1.0:
        return float(masses.sum())
    return float(np.sum(masses**q))


def _bin_masses(mu: DiscreteMeasure, eps: float, tol: float) -> np.ndarray:
    scaled = mu.positions / eps
    bins = np.floor(scaled)
    # atoms sitting on a bin boundary up to rounding go to the right bin
    bins = np.where(bins + 1.0 - scaled <= tol, bins + 1.0, bins)
    starts = np.concatenate([[0], np.flatnonzero(np.diff(bins)) + 1])
    return np.add.reduceat(mu.weights, starts)


# ---------------------------------------------------------------------------
# Exponent estimators
# ---------------------------------------------------------------------------


def _tail_statistics(
    grid: ScaleGrid, log_values: np.ndarray, denominator_scale: float = 1.0
) -> tuple[np.ndarray, np.ndarray, float, tuple[int, ...]]:
    """Pair slopes over the tail, per-scale ratios and the tail regression slope.

    Slopes are taken between tail scales at least half the tail length apart, so a constant
    prefactor in the power law does not bias the exponent.
    """

    log_eps = grid.log_eps
    ratios = log_values / (denominator_scale * log_eps)
    tail = grid.tail_indices()
    excluded = tuple(int(i) for i in np.flatnonzero(~np.isfinite(log_values)))
    usable = tail[np.isfinite(log_values[tail])]
    if usable.size == 0:
        raise EmptyMeasureError("every tail scale carries zero mass")
    if usable.size == 1:
        only = float(ratios[usable[0]])
        return ratios, np.array([only]), only, excluded

    lag = max(1, math.ceil(usable.size / 2))
    slopes = []
    for a in range(usable.size):
        for b in range(a + lag, usable.size):
            i, j = usable[a], usable[b]
            slopes.append((log_values[j] - log_values[i]) / (denominator_scale * (log_eps[j] - log_eps[i])))
    regression = float(np.polyfit(log_eps[usable], log_values[usable], 1)[0]) / denominator_scale
    return ratios, np.asarray(slopes), regression, excluded


def _safe_log(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(values > 0, np.log(np.where(values > 0, values, 1.0)), -np.inf)


def _check_nonempty(mu: DiscreteMeasure) -> None:
    if mu.is_empty():
        raise EmptyMeasureError("measure has no atoms")


def gamma_exponents(mu: DiscreteMeasure, x: float, grid: ScaleGrid) -> ScalingEstimate:
    """Lower and upper local concentration exponents of ``mu`` at ``x`` along ``grid``."""

    _check_nonempty(mu)
    masses = np.array([concentration(mu, x, float(eps)) for eps in grid.eps_values])
    log_masses = _safe_log(masses)
    ratios, slopes, regression, excluded = _tail_statistics(grid, log_masses)
    if excluded:
        LOGGER.warning("x=%.6g: %d scale(s) carry zero mass and were excluded", x, len(excluded))
    spacing = mu.local_spacing(x)
    below = math.isfinite(spacing) and bool(grid.eps_values[-1] < spacing)
    return ScalingEstimate(
        x=x,
        gamma_minus_hat=float(slopes.min()),
        gamma_plus_hat=float(slopes.max()),
        regression_slope=regression,
        per_scale=ScalingTrace(
            log_eps=grid.log_eps,
            log_values=log_masses,
            ratios=ratios,
            pair_slopes=slopes,
            excluded_scales=excluded,
        ),
        local_spacing=spacing,
        below_spacing=below,
    )


def j_scaling_exponent(
    mu: DiscreteMeasure,
    m: float,
    x: float,
    grid: ScaleGrid,
    *,
    config: NumericsConfig | None = None,
) -> JScalingEstimate:
    """Scaling exponents of ``J_{mu,m}(x, eps)`` as ``eps`` runs down the grid.

    ``sigma_liminf_hat`` is the smallest exponent with ``J >= c eps^sigma`` on every tail scale,
    ``sigma_limsup_hat`` the smallest exponent attained along the tail.
    """

    _check_nonempty(mu)
    values = np.array([m_borel(mu, m, x, float(eps), config=config) for eps in grid.eps_values])
    log_values = _safe_log(values)
    ratios, slopes, regression, excluded = _tail_statistics(grid, log_values)
    return JScalingEstimate(
        x=x,
        m=m,
        sigma_liminf_hat=float(slopes.max()),
        sigma_limsup_hat=float(slopes.min()),
        regression_slope=regression,
        trace=ScalingTrace(
            log_eps=grid.log_eps,
            log_values=log_values,
            ratios=ratios,
            pair_slopes=slopes,
            excluded_scales=excluded,
        ),
    )


def multifractal_dims(
    mu: DiscreteMeasure,
    q: float,
    grid: ScaleGrid,
    *,
    config: NumericsConfig | None = None,
) -> RenyiEstimate:
    """Lower and upper Renyi dimensions ``D^-(q)``, ``D^+(q)`` along ``grid``."""

    if q <= 1:
        raise ValueError("multifractal dimensions are estimated for q > 1")
    _check_nonempty(mu)
    sums = np.array([renyi_sum(mu, q, float(eps), config=config) for eps in grid.eps_values])
    log_sums = _safe_log(sums)
    ratios, slopes, regression, excluded = _tail_statistics(grid, log_sums, denominator_scale=q - 1.0)
    return RenyiEstimate(
        q=q,
        d_minus_hat=float(slopes.min()),
        d_plus_hat=float(slopes.max()),
        regression_slope=regression,
        trace=ScalingTrace(
            log_eps=grid.log_eps,
            log_values=log_sums,
            ratios=ratios,
            pair_slopes=slopes,
            excluded_scales=excluded,
        ),
    )


# ---------------------------------------------------------------------------
# Bound formulas
# ---------------------------------------------------------------------------


def bound_thm_gamma_plus(m: float, sigma: float, gamma_minus: float) -> float:
    """Upper bound ``sigma (m - gamma^-) / (m - sigma)`` for the upper concentration exponent."""

    if m <= sigma:
        raise HypothesisError(f"hypothesis m>sigma violated (m={m}, sigma={sigma})")
    if sigma < 0:
        raise HypothesisError("sigma must be nonnegative")
    if not 0 <= gamma_minus <= m:
        raise HypothesisError(f"gamma_minus={gamma_minus} outside [0, m]")
    return sigma * (m - gamma_minus) / (m - sigma)


def bound_packing_corollary(m: float, sigma: float, delta: float = 0.0) -> float:
    """Packing-dimension bound ``sigma (m - delta)/(m - sigma)`` with ``delta`` the lower Hausdorff dimension."""

    return bound_thm_gamma_plus(m, sigma, delta)


def bound_thm12_multifractal(beta: float, log_lambda: float) -> float:
    """Upper Renyi dimension bound ``(2 beta - 2 ln lambda)/(2 beta - ln lambda)``."""

    if beta <= 0:
        raise HypothesisError("beta must be positive")
    if not 0 <= log_lambda <= beta:
        raise HypothesisError(f"ln lambda={log_lambda} outside the regime [0, beta={beta}]")
    return (2 * beta - 2 * log_lambda) / (2 * beta - log_lambda)


def bound_thm11_packing(beta: float, log_lambda: float) -> float:
    """Packing dimension bound for spectral measures: 0 once ``lambda >= e^beta``."""

    if log_lambda <= 0:
        raise HypothesisError("the packing bound needs lambda > 1")
    if beta <= log_lambda:
        return 0.0
    return 2.0 * (1.0 - log_lambda / beta)


# ---------------------------------------------------------------------------
# Reports and generators
# ---------------------------------------------------------------------------


def weighted_quantile(values: ArrayLike, weights: ArrayLike, quantile: float) -> float:
    """Inverted-CDF quantile of ``values`` under nonnegative ``weights``."""

    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values, kind="stable")
    cumulative = np.cumsum(weights[order])
    cumulative /= cumulative[-1]
    index = int(np.searchsorted(cumulative, quantile - 1e-12, side="left"))
    return float(values[order][min(index, values.size - 1)])


def _clamp_unit(value: float) -> tuple[float, bool]:
    clamped = min(max(value, 0.0), 1.0)
    return clamped, clamped != value


def dimension_report(
    mu: DiscreteMeasure,
    grid: ScaleGrid,
    q_list: Sequence[float],
    m: float,
    n_samples: int,
    seed: int,
    *,
    config: NumericsConfig | None = None,
) -> DimensionReport:
    """Estimate dimensions of ``mu`` from weight-proportionally sampled points."""

    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    _check_nonempty(mu)
    cfg = config or NumericsConfig()
    rng = np.random.default_rng(seed)
    indices, counts = mu.sample_atoms(n_samples, rng)
    points = mu.positions[indices]

    gammas = tuple(gamma_exponents(mu, float(x), grid) for x in points)
    sigmas = tuple(j_scaling_exponent(mu, m, float(x), grid, config=cfg) for x in points)

    upper_q, lower_q = cfg.ess_quantile, 1.0 - cfg.ess_quantile
    gamma_minus = np.array([g.gamma_minus_hat for g in gammas])
    gamma_plus = np.array([g.gamma_plus_hat for g in gammas])

    raw = {
        "dimH_minus_hat": weighted_quantile(gamma_minus, counts, lower_q),
        "dimH_plus_hat": weighted_quantile(gamma_minus, counts, upper_q),
        "dimP_minus_hat": weighted_quantile(gamma_plus, counts, lower_q),
        "dimP_plus_hat": weighted_quantile(gamma_plus, counts, upper_q),
    }
    dims: dict[str, float] = {}
    clamped = False
    for name, value in raw.items():
        dims[name], was_clamped = _clamp_unit(value)
        clamped = clamped or was_clamped
    if clamped:
        LOGGER.warning("dimension estimates clamped into [0, 1]: %s", raw)

    liminf = np.array([s.sigma_liminf_hat for s in sigmas])
    limsup = np.array([s.sigma_limsup_hat for s in sigmas])
    sigma_hat = SigmaSummary(
        liminf_ess_inf=weighted_quantile(liminf, counts, lower_q),
        liminf_median=weighted_quantile(liminf, counts, 0.5),
        liminf_ess_sup=weighted_quantile(liminf, counts, upper_q),
        limsup_ess_inf=weighted_quantile(limsup, counts, lower_q),
        limsup_median=weighted_quantile(limsup, counts, 0.5),
        limsup_ess_sup=weighted_quantile(limsup, counts, upper_q),
    )

    renyi = tuple(multifractal_dims(mu, float(q), grid, config=cfg) for q in sorted(q_list))
    d_plus = [r.d_plus_hat for r in renyi]
    monotone = all(b <= a + 1e-9 for a, b in zip(d_plus, d_plus[1:]))

    bounds: dict[str, float | None] = {
        "packing_corollary": None,
        "hausdorff_corollary": sigma_hat.limsup_ess_sup,
        "renyi_upper": sigma_hat.liminf_median,
    }
    if m > sigma_hat.liminf_ess_sup >= 0:
        delta = min(max(dims["dimH_minus_hat"], 0.0), m)
        bounds["packing_corollary"] = bound_packing_corollary(m, sigma_hat.liminf_ess_sup, delta)

    below_fraction = float(np.dot(counts, [g.below_spacing for g in gammas]) / counts.sum())
    if below_fraction > 0:
        LOGGER.warning("%.0f%% of sampled points see grid scales below the local atom spacing", 100 * below_fraction)

    return DimensionReport(
        m=m,
        eps_values=grid.eps_values,
        sample_points=points,
        sample_counts=counts,
        gamma_summary=gammas,
        sigma_summary=sigmas,
        clamped=clamped,
        renyi=renyi,
        renyi_monotone=monotone,
        sigma_hat=sigma_hat,
        bound_values=bounds,
        below_spacing_fraction=below_fraction,
        **dims,
    )


def cantor_measure(depth: int, left_weight: float = 0.5) -> DiscreteMeasure:
    """Self-similar measure on the middle-third Cantor set, truncated at ``depth`` levels."""

    if not 1 <= depth <= 20:
        raise ValueError("depth must lie in [1, 20]")
    if not 0 < left_weight < 1:
        raise ValueError("left_weight must lie in (0, 1)")
    numerators = np.zeros(1, dtype=np.int64)
    weights = np.ones(1)
    for _ in range(depth):
        numerators = np.column_stack([3 * numerators, 3 * numerators + 2]).ravel()
        weights = np.column_stack([weights * left_weight, weights * (1.0 - left_weight)]).ravel()
    return DiscreteMeasure(positions=numerators / 3.0**depth, weights=weights)


def lebesgue_measure(n_atoms: int, lower: float = 0.0, upper: float = 1.0) -> DiscreteMeasure:
    """Midpoint discretisation of normalised Lebesgue measure on ``[lower, upper]``."""

    if n_atoms < 1:
        raise ValueError("n_atoms must be positive")
    width = (upper - lower) / n_atoms
    positions = lower + (np.arange(n_atoms) + 0.5) * width
    return DiscreteMeasure(positions=positions, weights=np.full(n_atoms, 1.0 / n_atoms))


def point_mass(position: float = 0.0, weight: float = 1.0) -> DiscreteMeasure:
    return DiscreteMeasure(positions=[position], weights=[weight])
