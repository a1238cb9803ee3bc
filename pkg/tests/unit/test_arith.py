import math
from fractions import Fraction

import numpy as np
import pytest

from mborel_amo.arith import (
    DiophantineParams,
    Frequency,
    beta_estimate,
    cf_expand,
    cf_synthesize,
    diophantine_check,
    named_alpha,
)
from mborel_amo.exceptions import InsufficientScalesError, RationalInputError


def test_golden_mean_has_unit_quotients_and_fibonacci_denominators() -> None:
    freq = cf_expand("golden", 20)

    assert freq.partial_quotients == (1,) * 20
    assert freq.denominators[:8] == (1, 1, 2, 3, 5, 8, 13, 21)
    assert not freq.truncated


def test_pi_expansion() -> None:
    freq = cf_expand("pi", 4)

    assert freq.partial_quotients == (7, 15, 1, 292)
    assert freq.denominators[1] == 7
    assert freq.denominators[2] == 106
    assert freq.denominators[3] == 113


def test_rational_input_is_rejected() -> None:
    with pytest.raises(RationalInputError):
        cf_expand("1/3", 5)


def test_alpha_outside_unit_interval_is_rejected() -> None:
    with pytest.raises(ValueError):
        cf_expand(1.5, 5)


def test_convergent_invariants() -> None:
    freq = cf_expand("e", 15)
    alpha = freq.shadow
    pairs = freq.convergents

    for n in range(1, len(pairs) - 1):
        (p_prev, q_prev), (p, q), (p_next, q_next) = pairs[n - 1], pairs[n], pairs[n + 1]
        a_next = freq.partial_quotients[n]
        assert q_next == a_next * q + q_prev
        assert p_next == a_next * p + p_prev
        assert math.gcd(p, q) == 1
        assert abs(q * alpha - p) < 1.0 / q_next + 1e-12


def test_precision_exhaustion_truncates_with_flag() -> None:
    freq = cf_expand("golden", 500, dps=30)

    assert freq.truncated
    assert 0 < freq.depth < 500


def test_synthesized_frequency_hits_beta_target() -> None:
    freq = cf_synthesize(1.0, 10**10)

    assert freq.partial_quotients[:2] == (3, 7)
    assert freq.denominators[:3] == (1, 3, 22)
    estimate = beta_estimate(freq, 1)
    assert estimate.value == pytest.approx(1.0, abs=0.05)
    assert estimate.n_range == (1, len(estimate.per_n) - 1)


def test_synthesis_with_too_small_cap_fails() -> None:
    with pytest.raises(InsufficientScalesError):
        cf_synthesize(1.0, 20)


def test_beta_estimate_needs_enough_convergents() -> None:
    freq = Frequency(partial_quotients=(1, 2))

    with pytest.raises(InsufficientScalesError):
        beta_estimate(freq, 3)


def test_golden_mean_beta_is_small() -> None:
    estimate = beta_estimate(cf_expand("golden", 30), 10)

    assert estimate.value < 0.1
    assert not estimate.infinite


def test_rotation_phases_match_exact_arithmetic() -> None:
    freq = cf_expand("silver", 30)
    alpha = freq.alpha_fraction()
    ks = np.array([-1000, -7, 0, 1, 5, 12345])

    phases = freq.rotation_phases(0.1, ks)

    expected = [float((Fraction(1, 10) + k * alpha) % 1) for k in ks.tolist()]
    np.testing.assert_allclose(phases, expected, atol=1e-12)


def test_rotation_phases_for_huge_k_stay_in_unit_interval() -> None:
    freq = cf_expand("golden", 40)

    phases = freq.rotation_phases(0.3, [2**40, -(2**41)])

    assert np.all((phases >= 0) & (phases < 1))


def test_diophantine_check_accepts_zero_phase() -> None:
    freq = cf_expand("golden", 40)

    verdict = diophantine_check(0.0, freq, DiophantineParams(kappa=0.1, nu=2.0, k_max=1000))

    assert verdict.holds
    assert verdict.worst_margin >= 1.0


def test_diophantine_check_rejects_half_alpha() -> None:
    freq = cf_expand("golden", 40)

    verdict = diophantine_check(freq.shadow / 2, freq, DiophantineParams(kappa=0.1, nu=2.0, k_max=100))

    assert not verdict.holds
    assert verdict.worst_k == 1


def test_frequency_json_keeps_big_integers() -> None:
    freq = cf_synthesize(1.0, 10**10)

    restored = Frequency.model_validate_json(freq.model_dump_json())

    assert restored.partial_quotients == freq.partial_quotients
    assert restored.denominators == freq.denominators


def test_named_alpha_rejects_unknown_names() -> None:
    with pytest.raises(ValueError):
        named_alpha("tau")
