"""The almost Mathieu operator and its finite-window machinery."""

from __future__ import annotations

import logging
import math
from typing import Annotated, Literal, NamedTuple

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .arith import Frequency
from .arrays import FloatArray
from .config import NumericsConfig
from .exceptions import DegenerateNodesError, RegimeError, SingularRestrictionError, WindowError

LOGGER = logging.getLogger(__name__)

_PHASE_BLOCK = 1 << 16
_PROFILE_RESCALE = 2.0**200


class AlmostMathieu(BaseModel):
    """``(Hu)(n) = u(n+1) + u(n-1) + 2 lambda cos 2 pi (theta + n alpha) u(n)``.

    ``coupling_lambda = 0`` is the free Laplacian, kept as a degenerate test path.
    """

    model_config = ConfigDict(frozen=True)

    coupling_lambda: float = Field(ge=0.0)
    freq: Frequency
    theta: float = 0.0

    @field_validator("theta")
    @classmethod
    def _reduce_theta(cls, value: float) -> float:
        return value % 1.0

    @property
    def log_lambda(self) -> float:
        return math.log(self.coupling_lambda) if self.coupling_lambda > 0 else -math.inf

    @property
    def spectrum_bound(self) -> float:
        return 2.0 + 2.0 * self.coupling_lambda

    def phases(self, ns: ArrayLike, *, theta: float | None = None) -> np.ndarray:
        return self.freq.rotation_phases(self.theta if theta is None else theta, ns)

    def potential(self, ns: ArrayLike, *, theta: float | None = None) -> np.ndarray:
        if self.coupling_lambda == 0:
            return np.zeros(np.shape(ns))
        return 2.0 * self.coupling_lambda * np.cos(2.0 * np.pi * self.phases(ns, theta=theta))

    def with_theta(self, theta: float) -> AlmostMathieu:
        return AlmostMathieu(coupling_lambda=self.coupling_lambda, freq=self.freq, theta=theta)


# ---------------------------------------------------------------------------
# Transfer matrices
# ---------------------------------------------------------------------------


class TransferProduct(BaseModel):
    """Transfer matrix ``e^{log_scale} * matrix`` with ``matrix`` of unit Frobenius norm.

    The determinant is carried separately as ``det_sign * e^{log_abs_det}`` because the
    mantissa of a long hyperbolic product is numerically rank one.
    """

    model_config = ConfigDict(frozen=True)

    matrix: tuple[tuple[float, float], tuple[float, float]]
    log_scale: float
    log_abs_det: float
    det_sign: int
    step_count: int

    @classmethod
    def from_entries(
        cls,
        m00: float,
        m01: float,
        m10: float,
        m11: float,
        *,
        log_scale: float,
        log_abs_det: float,
        det_sign: int,
        step_count: int,
    ) -> TransferProduct:
        norm = math.sqrt(m00 * m00 + m01 * m01 + m10 * m10 + m11 * m11)
        return cls(
            matrix=((m00 / norm, m01 / norm), (m10 / norm, m11 / norm)),
            log_scale=log_scale + math.log(norm),
            log_abs_det=log_abs_det,
            det_sign=det_sign,
            step_count=step_count,
        )

    @classmethod
    def identity(cls) -> TransferProduct:
        return cls.from_entries(1.0, 0.0, 0.0, 1.0, log_scale=0.0, log_abs_det=0.0, det_sign=1, step_count=0)

    def as_array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float)

    def log_norm(self) -> float:
        """Natural log of the operator 2-norm."""

        (a, b), (c, d) = self.matrix
        det = a * d - b * c
        largest = math.sqrt((1.0 + math.sqrt(max(0.0, 1.0 - 4.0 * det * det))) / 2.0)
        return self.log_scale + math.log(largest)

    def det(self) -> float:
        return self.det_sign * math.exp(self.log_abs_det)

    def __matmul__(self, other: TransferProduct) -> TransferProduct:
        product = self.as_array() @ other.as_array()
        return TransferProduct.from_entries(
            *product.ravel().tolist(),
            log_scale=self.log_scale + other.log_scale,
            log_abs_det=self.log_abs_det + other.log_abs_det,
            det_sign=self.det_sign * other.det_sign,
            step_count=self.step_count + other.step_count,
        )

    def inverse(self) -> TransferProduct:
        (a, b), (c, d) = self.matrix
        sign = self.det_sign
        return TransferProduct.from_entries(
            sign * d,
            -sign * b,
            -sign * c,
            sign * a,
            log_scale=self.log_scale - self.log_abs_det,
            log_abs_det=-self.log_abs_det,
            det_sign=sign,
            step_count=-self.step_count,
        )

    def apply(self, vector: ArrayLike) -> np.ndarray:
        return math.exp(self.log_scale) * (self.as_array() @ np.asarray(vector, dtype=float))


def _renorm_interval(energy: float, op: AlmostMathieu, config: NumericsConfig) -> int:
    growth = math.log(abs(energy) + op.spectrum_bound + 1.0)
    return max(1, min(config.renorm_interval, int(400.0 / growth)))


def _forward_product(
    op: AlmostMathieu, energy: float, theta: float, first: int, steps: int, interval: int
) -> TransferProduct:
    """Accumulate ``A_steps`` as ``e^{log_r11} Q [[1, rho], [0, tau]]`` with ``Q`` a rotation.

    One Gram-Schmidt step per site keeps ``det`` (``= r11 * r22``) accurate to ``O(eps ||A||^2)`` per step.
    """

    q00, q10 = 1.0, 0.0
    rho, tau = 0.0, 1.0
    log_r11 = log_r22 = 0.0
    acc11 = acc22 = 1.0
    sign = 1
    done = 0
    for block_start in range(0, steps, _PHASE_BLOCK):
        block = np.arange(first + block_start, first + min(steps, block_start + _PHASE_BLOCK))
        for c in (energy - op.potential(block, theta=theta)).tolist():
            x0, x1 = c * q00 - q10, q00
            y0, y1 = -c * q10 - q00, -q10
            a1 = math.hypot(x0, x1)
            q00, q10 = x0 / a1, x1 / a1
            b1 = q00 * y0 + q10 * y1
            d1 = q00 * y1 - q10 * y0
            rho += b1 / a1 * tau
            tau *= d1 / a1
            acc11 *= a1
            acc22 *= d1
            done += 1
            if done % interval == 0:
                log_r11 += math.log(acc11)
                log_r22 += math.log(abs(acc22))
                if acc22 < 0:
                    sign = -sign
                acc11 = acc22 = 1.0
    log_r11 += math.log(acc11)
    log_r22 += math.log(abs(acc22))
    if acc22 < 0:
        sign = -sign
    return TransferProduct.from_entries(
        q00,
        q00 * rho - q10 * tau,
        q10,
        q10 * rho + q00 * tau,
        log_scale=log_r11,
        log_abs_det=log_r11 + log_r22,
        det_sign=sign,
        step_count=steps,
    )


def transfer_product(
    op: AlmostMathieu,
    energy: float,
    theta_start: float,
    k: int,
    *,
    config: NumericsConfig | None = None,
) -> TransferProduct:
    """The ``k``-step transfer matrix ``A_k(theta_start)`` at ``energy``.

    Negative ``k`` gives ``A_{-|k|}(theta) = A_{|k|}(theta - |k| alpha)^{-1}``.
    """

    if abs(k) > 10**8:
        raise ValueError("|k| must not exceed 1e8")
    if k == 0:
        return TransferProduct.identity()
    cfg = config or NumericsConfig()
    steps = abs(k)
    first = 0 if k > 0 else -steps
    product = _forward_product(op, energy, theta_start, first, steps, _renorm_interval(energy, op, cfg))
    return product if k > 0 else product.inverse()


class LyapunovEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float
    error_proxy: float
    n_steps: int
    energy: float


def lyapunov(
    op: AlmostMathieu, energy: float, n_steps: int, *, config: NumericsConfig | None = None
) -> LyapunovEstimate:
    """Birkhoff-average estimate of the Lyapunov exponent along the orbit of ``op.theta``."""

    if n_steps < 1000:
        raise ValueError("n_steps must be at least 1000")
    half = n_steps // 2
    first = transfer_product(op, energy, op.theta, half, config=config)
    second = transfer_product(op, energy, float(op.phases(half)), n_steps - half, config=config)
    full = second @ first
    value = full.log_norm() / n_steps
    spread = abs(first.log_norm() / half - second.log_norm() / (n_steps - half)) / 2.0
    LOGGER.debug("lyapunov E=%.6g: %.6g +/- %.2g over %d steps", energy, value, spread, n_steps)
    return LyapunovEstimate(value=value, error_proxy=spread, n_steps=n_steps, energy=energy)


# ---------------------------------------------------------------------------
# Determinants and Green functions
# ---------------------------------------------------------------------------


class DeterminantValue(NamedTuple):
    log_abs: float
    sign: int
    is_zero: bool


def _det_recurrence(cs: ArrayLike, zero_tol: float) -> DeterminantValue:
    """``det`` of the tridiagonal matrix with diagonal ``cs`` and off-diagonals ``-1``."""

    prev, cur = 0.0, 1.0
    log_scale = 0.0
    magnitude = 1.0
    for c in np.asarray(cs, dtype=float).tolist():
        head = c * cur
        magnitude = abs(head) + abs(prev)
        prev, cur = cur, head - prev
        size = max(abs(cur), abs(prev))
        if size > _PROFILE_RESCALE or (0 < size < 1.0 / _PROFILE_RESCALE):
            prev, cur = prev / size, cur / size
            magnitude /= size
            log_scale += math.log(size)
    if abs(cur) <= zero_tol * magnitude:
        return DeterminantValue(-math.inf, 0, True)
    return DeterminantValue(log_scale + math.log(abs(cur)), 1 if cur > 0 else -1, False)


def _block_det(op: AlmostMathieu, energy: float, first: int, last: int, zero_tol: float) -> DeterminantValue:
    """``det(E - H)`` restricted to the sites ``first..last`` (1 when empty)."""

    if last < first:
        return DeterminantValue(0.0, 1, False)
    cs = energy - op.potential(np.arange(first, last + 1))
    return _det_recurrence(cs, zero_tol)


def pk_det(
    op: AlmostMathieu, energy: float, theta: float, k: int, *, config: NumericsConfig | None = None
) -> DeterminantValue:
    """``P_k(theta) = det(E - H)`` on ``k`` consecutive sites with phases ``theta + j alpha``.

    Satisfies ``P_k = (E - v(theta + (k-1) alpha)) P_{k-1} - P_{k-2}`` with ``P_1 = E - v(theta)``.
    """

    if k < 1:
        raise ValueError("k must be at least 1")
    cfg = config or NumericsConfig()
    cs = energy - op.potential(np.arange(k), theta=theta)
    return _det_recurrence(cs, cfg.zero_tol)


class GreenEntries(NamedTuple):
    log_abs_x1_y: float
    log_abs_y_x2: float
    sign_x1_y: int
    sign_y_x2: int

    def values(self) -> tuple[float, float]:
        return (
            self.sign_x1_y * math.exp(self.log_abs_x1_y),
            self.sign_y_x2 * math.exp(self.log_abs_y_x2),
        )


def green_entry(
    op: AlmostMathieu,
    energy: float,
    x1: int,
    x2: int,
    y: int,
    *,
    config: NumericsConfig | None = None,
) -> GreenEntries:
    """Entries ``G(x1, y)`` and ``G(y, x2)`` of ``(R (H - E) R)^{-1}`` on ``[x1, x2]`` by Cramer's rule."""

    if not x1 <= y <= x2:
        raise ValueError("need x1 <= y <= x2")
    cfg = config or NumericsConfig()
    denominator = _block_det(op, energy, x1, x2, cfg.zero_tol)
    if denominator.is_zero:
        raise SingularRestrictionError(f"E={energy} is an eigenvalue of the restriction to [{x1}, {x2}]")
    right = _block_det(op, energy, y + 1, x2, cfg.zero_tol)
    left = _block_det(op, energy, x1, y - 1, cfg.zero_tol)
    return GreenEntries(
        log_abs_x1_y=right.log_abs - denominator.log_abs,
        log_abs_y_x2=left.log_abs - denominator.log_abs,
        sign_x1_y=-right.sign * denominator.sign,
        sign_y_x2=-left.sign * denominator.sign,
    )


class RegularityVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    regular: bool
    witness: tuple[int, int] | None
    y: int
    t: float
    k: int


def regularity_check(
    op: AlmostMathieu,
    energy: float,
    y: int,
    t: float,
    k: int,
    *,
    config: NumericsConfig | None = None,
) -> RegularityVerdict:
    """Whether ``y`` is ``(t, k)``-regular; the witness is the window with the smallest ``x1``."""

    if k < 10:
        raise WindowError("window too small for k/5 margin (need k >= 10)")
    if t <= 0:
        raise ValueError("t must be positive")
    margin = k / 5.0
    for x1 in range(y - k + 1, y + 1):
        x2 = x1 + k - 1
        if y - x1 < margin or x2 - y < margin:
            continue
        try:
            entries = green_entry(op, energy, x1, x2, y, config=config)
        except SingularRestrictionError:
            continue
        if entries.log_abs_x1_y <= -t * (y - x1) and entries.log_abs_y_x2 <= -t * (x2 - y):
            return RegularityVerdict(regular=True, witness=(x1, x2), y=y, t=t, k=k)
    return RegularityVerdict(regular=False, witness=None, y=y, t=t, k=k)


class UniformityVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    uniform: bool
    max_product: float
    log_max_product: float


def uniformity_check(
    theta_set: ArrayLike, eps: float, k: int, *, config: NumericsConfig | None = None
) -> UniformityVerdict:
    """Compare the Lagrange-type products of the nodes ``cos 2 pi theta_j`` with ``e^{k eps}``."""

    cfg = config or NumericsConfig()
    nodes = np.cos(2.0 * np.pi * np.asarray(theta_set, dtype=float))
    if nodes.size != k + 1:
        raise ValueError(f"expected {k + 1} phases, got {nodes.size}")
    gaps = np.abs(nodes[:, None] - nodes[None, :])
    np.fill_diagonal(gaps, np.inf)
    if gaps.min() <= 1e-14:
        raise DegenerateNodesError("degenerate node set: coincident cos values")

    n_grid = cfg.uniformity_grid_factor * (k + 1)
    grid = np.concatenate([np.cos(np.pi * (np.arange(n_grid) + 0.5) / n_grid), [-1.0, 1.0]])
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(grid[:, None] - nodes[None, :]))
    zeros = np.zeros((grid.size, 1))
    prefix = np.concatenate([zeros, np.cumsum(logs, axis=1)], axis=1)
    suffix = np.concatenate([np.cumsum(logs[:, ::-1], axis=1)[:, ::-1], zeros], axis=1)
    numerators = prefix[:, :-1] + suffix[:, 1:]
    denominators = np.log(gaps).sum(axis=1, where=np.isfinite(gaps))
    log_max = float(np.max(numerators - denominators[None, :]))
    return UniformityVerdict(
        uniform=log_max < k * eps,
        max_product=math.exp(min(log_max, 700.0)),
        log_max_product=log_max,
    )


# ---------------------------------------------------------------------------
# Resonances
# ---------------------------------------------------------------------------


class Resonant(BaseModel):
    model_config = ConfigDict(frozen=True)

    tag: Literal["resonant"] = "resonant"
    ell: int
    r: int


class NonResonant(BaseModel):
    model_config = ConfigDict(frozen=True)

    tag: Literal["nonresonant"] = "nonresonant"
    dist: int
    n0: int | None
    s: int


class ResonanceVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Annotated[Resonant | NonResonant, Field(discriminator="tag")]
    n: int
    k: int
    b_n: float

    @property
    def is_resonant(self) -> bool:
        return isinstance(self.kind, Resonant)


def _power(q: int, exponent: float) -> float:
    try:
        return math.exp(exponent * math.log(q))
    except OverflowError:
        return math.inf


def classify_resonance(freq: Frequency, t2: float, n: int, k: int) -> ResonanceVerdict:
    """Classify ``k`` as n-resonant (``|k - l q_n| <= q_n^{t2}``) or n-nonresonant."""

    if not 0 < t2 < 1:
        raise ValueError("t2 must lie in (0, 1)")
    if k < 0:
        raise ValueError("k must be nonnegative")
    denominators = freq.denominators
    if not 0 <= n < len(denominators):
        raise ValueError(f"frequency has no convergent with index {n}")
    q = denominators[n]
    b_n = _power(q, t2)
    ell = (2 * k + q) // (2 * q)
    r = k - ell * q
    if abs(r) <= b_n:
        return ResonanceVerdict(kind=Resonant(ell=ell, r=r), n=n, k=k, b_n=b_n)

    dist = min(k % q, q - k % q)
    n0 = next((j for j in range(1, n + 1) if 4 * denominators[n - j] <= dist), None)
    s = dist // (4 * denominators[n - n0]) if n0 is not None else 0
    return ResonanceVerdict(kind=NonResonant(dist=dist, n0=n0, s=s), n=n, k=k, b_n=b_n)


# ---------------------------------------------------------------------------
# Solutions
# ---------------------------------------------------------------------------


class SolutionProfile(BaseModel):
    """Formal solution of ``Hu = Eu`` on ``[n_min, n_max]`` stored as ``mantissa * e^{log_scale}``."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n_min: int
    n_max: int
    mantissa: FloatArray
    log_scale: FloatArray
    boundary_phase: float
    energy: float

    @model_validator(mode="after")
    def _check_shape(self) -> SolutionProfile:
        size = self.n_max - self.n_min + 1
        if self.mantissa.shape != (size,) or self.log_scale.shape != (size,):
            raise ValueError("mantissa and log_scale must cover the window")
        return self

    @property
    def window(self) -> tuple[int, int]:
        return (self.n_min, self.n_max)

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def covers(self, lo: int, hi: int) -> bool:
        return self.n_min <= lo and hi <= self.n_max

    def _index(self, n: int) -> int:
        if not self.n_min <= n <= self.n_max:
            raise WindowError(f"site {n} outside the profile window [{self.n_min}, {self.n_max}]")
        return n - self.n_min

    def value(self, n: int) -> float:
        i = self._index(n)
        try:
            return float(self.mantissa[i]) * math.exp(float(self.log_scale[i]))
        except OverflowError:
            return math.copysign(math.inf, float(self.mantissa[i]))

    def values(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.mantissa * np.exp(self.log_scale)

    def log_abs(self, n: int) -> float:
        i = self._index(n)
        magnitude = abs(float(self.mantissa[i]))
        return math.log(magnitude) + float(self.log_scale[i]) if magnitude > 0 else -math.inf

    def log_abs_values(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.mantissa)) + self.log_scale


def _run_recurrence(cs: list[float], a: float, b: float) -> tuple[list[float], list[float]]:
    """Iterate ``u_next = c u - u_prev`` from ``(u_prev, u) = (a, b)``; returns mantissas and scales."""

    mantissas, scales = [], []
    log_scale = 0.0
    prev, cur = a, b
    for c in cs:
        prev, cur = cur, c * cur - prev
        size = max(abs(prev), abs(cur))
        if size > _PROFILE_RESCALE or size < 1.0 / _PROFILE_RESCALE:
            prev, cur = prev / size, cur / size
            log_scale += math.log(size)
        mantissas.append(cur)
        scales.append(log_scale)
    return mantissas, scales


def _profile_from_initial(
    op: AlmostMathieu, energy: float, u0: float, u1: float, window: tuple[int, int], phase: float
) -> SolutionProfile:
    n_min, n_max = window
    if n_min > 0 or n_max < 1:
        raise WindowError("window must contain the sites 0 and 1")

    cs_forward = (energy - op.potential(np.arange(1, n_max))).tolist()
    fwd_m, fwd_s = _run_recurrence(cs_forward, u0, u1)
    cs_backward = (energy - op.potential(np.arange(0, n_min, -1))).tolist()
    bwd_m, bwd_s = _run_recurrence(cs_backward, u1, u0)

    return SolutionProfile(
        n_min=n_min,
        n_max=n_max,
        mantissa=bwd_m[::-1] + [u0, u1] + fwd_m,
        log_scale=bwd_s[::-1] + [0.0, 0.0] + fwd_s,
        boundary_phase=phase % 1.0,
        energy=energy,
    )


def solution_profile(
    op: AlmostMathieu, energy: float, x: float, window: tuple[int, int]
) -> SolutionProfile:
    """Solve ``Hu = Eu`` with ``(u(0), u(1)) = (sin 2 pi x, -cos 2 pi x)`` across ``window``."""

    u0, u1 = math.sin(2 * math.pi * x), -math.cos(2 * math.pi * x)
    return _profile_from_initial(op, energy, u0, u1, window, x)


def basis_solutions(
    op: AlmostMathieu, energy: float, window: tuple[int, int]
) -> tuple[SolutionProfile, SolutionProfile]:
    """Solutions with initial data ``(1, 0)`` and ``(0, 1)``, i.e. ``u_{1/4}`` and ``u_{1/2}`` exactly."""

    return (
        _profile_from_initial(op, energy, 1.0, 0.0, window, 0.25),
        _profile_from_initial(op, energy, 0.0, 1.0, window, 0.5),
    )


def wronskian(u: SolutionProfile, v: SolutionProfile, n: int) -> tuple[float, float]:
    """``u(n) v(n+1) - u(n+1) v(n)`` as ``(scaled_value, log_scale)``.

    ``scaled_value * e^{log_scale}`` is the Wronskian; ``log_scale`` is the log of the larger
    of the two products so ``|scaled_value| <= 2``.
    """

    u_n, u_next = u._index(n), u._index(n + 1)
    v_n, v_next = v._index(n), v._index(n + 1)
    s1 = float(u.log_scale[u_n] + v.log_scale[v_next])
    s2 = float(u.log_scale[u_next] + v.log_scale[v_n])
    t1 = float(u.mantissa[u_n] * v.mantissa[v_next])
    t2 = float(u.mantissa[u_next] * v.mantissa[v_n])
    log_terms = [s + math.log(abs(t)) for s, t in ((s1, t1), (s2, t2)) if t != 0]
    shift = max(log_terms) if log_terms else 0.0
    return t1 * math.exp(s1 - shift) - t2 * math.exp(s2 - shift), shift


def norm_weights(profile: SolutionProfile, l1: float, l2: float) -> tuple[np.ndarray, np.ndarray]:
    """Sites ``-[L2]-1 .. [L1]+1`` and their weights in ``||u||^2_{L1,L2}``."""

    if l1 < 0 or l2 < 0:
        raise ValueError("L1 and L2 must be nonnegative")
    f1, f2 = math.floor(l1), math.floor(l2)
    if not profile.covers(-f2 - 1, f1 + 1):
        raise WindowError(f"profile window {profile.window} does not cover [{-f2 - 1}, {f1 + 1}]")
    sites = np.arange(-f2 - 1, f1 + 2)
    weights = np.ones(sites.size)
    weights[0] = l2 - f2
    weights[-1] = l1 - f1
    return sites, weights


def log_norm_l1l2(profile: SolutionProfile, l1: float, l2: float) -> float:
    """Natural log of ``||u||^2_{L1,L2}``."""

    sites, weights = norm_weights(profile, l1, l2)
    index = sites - profile.n_min
    keep = (weights > 0) & (profile.mantissa[index] != 0)
    if not np.any(keep):
        return -math.inf
    logs = 2.0 * (np.log(np.abs(profile.mantissa[index][keep])) + profile.log_scale[index][keep])
    return float(np.logaddexp.reduce(logs + np.log(weights[keep])))


def norm_l1l2(profile: SolutionProfile, l1: float, l2: float) -> float:
    """``||u||^2_{L1,L2}`` with the fractional end terms weighted by ``L - [L]``."""

    log_value = log_norm_l1l2(profile, l1, l2)
    try:
        return math.exp(log_value)
    except OverflowError:
        return math.inf


def block_identity_residual(
    op: AlmostMathieu, profile: SolutionProfile, x1: int, x2: int, y: int
) -> float:
    """Relative residual of ``phi(y) = -G(x1,y) phi(x1-1) - G(y,x2) phi(x2+1)``."""

    g_x1_y, g_y_x2 = green_entry(op, profile.energy, x1, x2, y).values()
    lhs = profile.value(y)
    rhs = -g_x1_y * profile.value(x1 - 1) - g_y_x2 * profile.value(x2 + 1)
    scale = max(abs(lhs), abs(g_x1_y * profile.value(x1 - 1)), abs(g_y_x2 * profile.value(x2 + 1)))
    return abs(lhs - rhs) / scale if scale > 0 else 0.0


# ---------------------------------------------------------------------------
# Resonant decay windows
# ---------------------------------------------------------------------------


class DecayWindowReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    status: Literal["checked", "empty_window", "no_resonant_sites"]
    n: int
    window_lo: float
    window_hi: float
    rate: float
    slack: float
    n_checked: int = 0
    n_passed: int = 0
    pass_fraction: float | None = None
    worst_k: int | None = None
    worst_excess: float | None = None
    checked_range: tuple[int, int] | None = None


def decay_window_check(
    op: AlmostMathieu,
    energy: float,
    profile: SolutionProfile,
    t1: float,
    t2: float,
    n: int,
    *,
    beta: float,
    slack: float = 0.1,
) -> DecayWindowReport:
    """Check ``ln|phi(k)| <= -(ln lambda - (1 - t1) beta - slack)|k|`` on n-resonant ``k``.

    Only ``2 q_n^2 q_{n+1}^{t1} < |k| < q_{n+1}^{t2}`` inside the profile window is examined.
    """

    rate = op.log_lambda - (1.0 - t1) * beta
    if not rate > 0:
        raise RegimeError(f"nonpositive decay rate ln(lambda) - (1 - t1) beta = {rate:.4g}")
    if not 0 < t1 < t2 < 1:
        raise ValueError("need 0 < t1 < t2 < 1")
    denominators = op.freq.denominators
    if n + 1 >= len(denominators):
        raise ValueError(f"frequency has no convergent with index {n + 1}")

    q_n, q_next = denominators[n], denominators[n + 1]
    lo = 2.0 * q_n * q_n * _power(q_next, t1)
    hi = _power(q_next, t2)
    k_lo = math.floor(lo) + 1
    k_hi = math.ceil(hi) - 1 if math.isfinite(hi) else max(profile.n_max, -profile.n_min)
    candidates = list(range(k_lo, min(k_hi, profile.n_max) + 1))
    candidates += [-k for k in range(k_lo, min(k_hi, -profile.n_min) + 1)]
    base = dict(n=n, window_lo=lo, window_hi=hi, rate=rate, slack=slack)
    if not candidates:
        return DecayWindowReport(status="empty_window", **base)

    resonant = [k for k in candidates if classify_resonance(op.freq, t2, n, abs(k)).is_resonant]
    if not resonant:
        return DecayWindowReport(status="no_resonant_sites", **base)

    target = rate - slack
    excess = np.array([profile.log_abs(k) + target * abs(k) for k in resonant])
    passed = int(np.count_nonzero(excess <= 0))
    worst = int(np.argmax(excess))
    return DecayWindowReport(
        status="checked",
        n_checked=len(resonant),
        n_passed=passed,
        pass_fraction=passed / len(resonant),
        worst_k=resonant[worst],
        worst_excess=float(excess[worst]),
        checked_range=(min(resonant), max(resonant)),
        **base,
    )
