"""Continued fraction arithmetic for the rotation frequency."""

from __future__ import annotations

import logging
import math
from fractions import Fraction
from typing import Annotated, Any

import mpmath
import numpy as np
from numpy.typing import ArrayLike
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    PrivateAttr,
    field_validator,
)

from .exceptions import InsufficientScalesError, RationalInputError

LOGGER = logging.getLogger(__name__)

_JSON_SAFE_INT = 2**53
# Largest denominator used for the vectorised int64 phase reduction.
_PHASE_Q_LIMIT = 2**31
_PHASE_K_LIMIT = 2**32


def _parse_big_int(value: Any) -> Any:
    if isinstance(value, str):
        return int(value)
    return value


def _dump_big_int(value: int) -> int | str:
    return str(value) if abs(value) > _JSON_SAFE_INT else value


BigInt = Annotated[int, BeforeValidator(_parse_big_int), PlainSerializer(_dump_big_int, when_used="json")]


class Frequency(BaseModel):
    """Irrational rotation number held as its partial quotients ``a_1..a_N``."""

    model_config = ConfigDict(frozen=True)

    partial_quotients: tuple[BigInt, ...]
    shadow: float | None = None
    truncated: bool = False

    @field_validator("partial_quotients")
    @classmethod
    def _positive_quotients(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value:
            raise ValueError("at least one partial quotient is required")
        if any(a < 1 for a in value):
            raise ValueError("partial quotients must be positive integers")
        return value

    @field_validator("shadow")
    @classmethod
    def _shadow_in_unit_interval(cls, value: float | None) -> float | None:
        if value is not None and not 0.0 < value < 1.0:
            raise ValueError("shadow value must lie in (0, 1)")
        return value

    _convergents: tuple[tuple[int, int], ...] = PrivateAttr(default=())
    _phase_reduction: tuple[int, int, float] = PrivateAttr(default=(0, 1, 0.0))

    def model_post_init(self, __context: Any) -> None:
        p_prev, q_prev, p, q = 1, 0, 0, 1
        pairs = [(p, q)]
        for a in self.partial_quotients:
            p_prev, q_prev, p, q = p, q, a * p + p_prev, a * q + q_prev
            pairs.append((p, q))
        self._convergents = tuple(pairs)

        index = max(n for n, (_, q_n) in enumerate(pairs) if q_n <= _PHASE_Q_LIMIT)
        p_n, q_n = pairs[index]
        delta = float(Fraction(p, q) - Fraction(p_n, q_n))
        self._phase_reduction = (p_n, q_n, delta)

    @property
    def convergents(self) -> tuple[tuple[int, int], ...]:
        """Pairs ``(p_n, q_n)`` for ``n = 0..N`` starting from ``(0, 1)``."""

        return self._convergents

    @property
    def denominators(self) -> tuple[int, ...]:
        return tuple(q for _, q in self.convergents)

    @property
    def depth(self) -> int:
        return len(self.partial_quotients)

    def alpha_fraction(self) -> Fraction:
        """Deepest available convergent, the exact rational proxy for alpha."""

        p, q = self.convergents[-1]
        return Fraction(p, q)

    def rotation_phases(self, theta: float, ks: ArrayLike) -> np.ndarray:
        """Return ``theta + k*alpha mod 1`` for every integer ``k`` in ``ks``.

        ``k*alpha`` is reduced as ``(k*p_n mod q_n)/q_n + k*(alpha - p_n/q_n)`` with the deepest
        convergent that keeps ``k*p_n`` inside int64, so no float error accumulates along orbits.
        """

        ks = np.asarray(ks, dtype=np.int64)
        p, q, delta = self._phase_reduction
        if ks.size and int(np.abs(ks).max()) >= _PHASE_K_LIMIT:
            return self._rotation_phases_exact(theta, ks)
        residues = np.mod(ks * p, q)
        return np.mod(theta + residues / q + ks * delta, 1.0)

    def _rotation_phases_exact(self, theta: float, ks: np.ndarray) -> np.ndarray:
        alpha = self.alpha_fraction()
        out = np.empty(ks.shape, dtype=float)
        for index, k in np.ndenumerate(ks):
            reduced = (int(k) * alpha) % 1
            out[index] = (theta + float(reduced)) % 1.0
        return out


class BetaEstimate(BaseModel):
    """Finite-scale proxy for the resonance strength ``beta(alpha)``."""

    model_config = ConfigDict(frozen=True)

    value: float = Field(ge=0.0)
    per_n: tuple[float, ...]
    n_range: tuple[int, int]
    infinite: bool = False


class DiophantineParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kappa: float = Field(default=0.1, gt=0.0)
    nu: float = Field(default=8.0, gt=0.0)
    k_max: int = Field(default=10_000, ge=0)


class DiophantineVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    holds: bool
    worst_k: int | None
    worst_margin: float


_NAMED_ALPHAS = {
    "golden": lambda: (mpmath.sqrt(5) - 1) / 2,
    "silver": lambda: mpmath.sqrt(2) - 1,
    "pi": lambda: mpmath.pi - 3,
    "e": lambda: mpmath.e - 2,
}


def named_alpha(name: str, *, dps: int = 200) -> mpmath.mpf:
    """Fractional part of a named constant at ``dps`` decimal digits."""

    try:
        factory = _NAMED_ALPHAS[name]
    except KeyError:
        raise ValueError(f"unknown named frequency {name!r}; choose from {sorted(_NAMED_ALPHAS)}") from None
    with mpmath.workdps(dps):
        return +factory()


def _to_mpf(alpha: Any) -> mpmath.mpf:
    if isinstance(alpha, Fraction):
        return mpmath.mpf(alpha.numerator) / alpha.denominator
    if isinstance(alpha, str):
        text = alpha.strip()
        if text in _NAMED_ALPHAS:
            return +_NAMED_ALPHAS[text]()
        if "/" in text:
            return _to_mpf(Fraction(text))
        return mpmath.mpf(text)
    return mpmath.mpf(alpha)


def cf_expand(alpha: Any, n_max: int, *, dps: int = 200) -> Frequency:
    """Expand ``alpha`` in (0, 1) into at most ``n_max`` partial quotients.

    The expansion stops early, with ``truncated=True``, once the next convergent can no longer be
    certified at the working precision. A terminating expansion raises ``RationalInputError``.
    """

    if n_max < 1:
        raise ValueError("n_max must be at least 1")

    with mpmath.workdps(dps):
        x = _to_mpf(alpha)
        if not 0 < x < 1:
            raise ValueError("alpha must lie in (0, 1)")
        eta = 10 * mpmath.eps
        quotients: list[int] = []
        p_prev, q_prev, p, q = 1, 0, 0, 1
        remainder = x
        truncated = False
        for n in range(n_max):
            if remainder == 0:
                raise RationalInputError(f"rational input: expansion terminated after {n} quotients")
            inverse = 1 / remainder
            a = int(mpmath.floor(inverse))
            q_next = a * q + q_prev
            if 4 * q_next**2 * eta >= 1:
                truncated = True
                LOGGER.warning("precision exhausted after %d partial quotients at dps=%d", n, dps)
                break
            quotients.append(a)
            p_prev, q_prev, p, q = p, q, a * p + p_prev, q_next
            remainder = inverse - a
            if n < n_max - 1 and abs(q * x - p) <= 10 * q * eta:
                raise RationalInputError(f"rational input: alpha equals {p}/{q} to working precision")
        if not quotients:
            raise RationalInputError("rational input: no partial quotient could be certified")
        shadow = float(x)

    return Frequency(partial_quotients=tuple(quotients), shadow=shadow, truncated=truncated)


def _ceil_tolerant(value: mpmath.mpf, digits: int) -> int:
    nearest = mpmath.nint(value)
    if abs(value - nearest) < mpmath.mpf(10) ** (-digits):
        return int(nearest)
    return int(mpmath.ceil(value))


def cf_synthesize(beta_target: float, q_cap: int, *, dps: int = 60) -> Frequency:
    """Build a frequency whose denominators satisfy ``ln q_{n+1} ~ beta_target * q_n``."""

    if beta_target < 0:
        raise ValueError("beta_target must be nonnegative")
    if q_cap < 2:
        raise ValueError("q_cap must be at least 2")

    quotients: list[int] = []
    q_prev, q = 0, 1
    with mpmath.workdps(dps):
        beta = mpmath.mpf(beta_target)
        while True:
            a = max(1, _ceil_tolerant(mpmath.exp(beta * q) / q, dps // 2))
            q_next = a * q + q_prev
            if q_next > q_cap:
                break
            quotients.append(a)
            q_prev, q = q, q_next

    if len(quotients) < 3:
        raise InsufficientScalesError(
            f"insufficient scales: beta_target={beta_target} fits {len(quotients)} quotients under q_cap={q_cap}"
        )

    p, q = Frequency(partial_quotients=tuple(quotients)).convergents[-1]
    LOGGER.debug("synthesized %d quotients, largest denominator %d", len(quotients), q)
    return Frequency(partial_quotients=tuple(quotients), shadow=p / q)


def beta_estimate(freq: Frequency, tail_start: int) -> BetaEstimate:
    """Max of ``ln(q_{n+1})/q_n`` over ``n >= tail_start`` with the full trace."""

    if tail_start < 0:
        raise ValueError("tail_start must be nonnegative")
    denominators = freq.denominators
    if len(denominators) < tail_start + 2:
        raise InsufficientScalesError(
            f"beta estimate needs {tail_start + 2} convergents, frequency has {len(denominators)}"
        )
    per_n = tuple(math.log(q_next) / q for q, q_next in zip(denominators, denominators[1:]))
    last = len(per_n) - 1
    value = max(per_n[tail_start:])
    return BetaEstimate(value=value, per_n=per_n, n_range=(tail_start, last), infinite=math.isinf(value))


def diophantine_check(theta: float, freq: Frequency, params: DiophantineParams) -> DiophantineVerdict:
    """Check ``||2 theta - k alpha|| >= kappa/|k|^nu`` for ``0 < |k| <= k_max``."""

    if params.k_max == 0:
        return DiophantineVerdict(holds=True, worst_k=None, worst_margin=math.inf)

    magnitudes = np.arange(1, params.k_max + 1, dtype=np.int64)
    ks = np.concatenate([-magnitudes[::-1], magnitudes])
    phases = freq.rotation_phases(2.0 * theta, -ks)
    distances = np.minimum(phases, 1.0 - phases)
    margins = distances * np.abs(ks).astype(float) ** params.nu / params.kappa
    worst = int(np.argmin(margins))
    worst_margin = float(margins[worst])
    return DiophantineVerdict(holds=worst_margin >= 1.0, worst_k=int(ks[worst]), worst_margin=worst_margin)
