import math

import numpy as np
import pytest

from mborel_amo.arith import cf_expand, cf_synthesize
from mborel_amo.exceptions import DegenerateNodesError, RegimeError, WindowError
from mborel_amo.operator import (
    AlmostMathieu,
    TransferProduct,
    block_identity_residual,
    classify_resonance,
    decay_window_check,
    green_entry,
    log_norm_l1l2,
    lyapunov,
    norm_l1l2,
    pk_det,
    regularity_check,
    solution_profile,
    transfer_product,
    uniformity_check,
    wronskian,
)
from mborel_amo.spectral import TruncatedOperator, eigenvalues

GOLDEN = cf_expand("golden", 40)


def _amo(coupling: float, theta: float = 0.0) -> AlmostMathieu:
    return AlmostMathieu(coupling_lambda=coupling, freq=GOLDEN, theta=theta)


def _dense_product(op: AlmostMathieu, energy: float, k: int) -> np.ndarray:
    product = np.eye(2)
    for v in op.potential(np.arange(k)):
        product = np.array([[energy - v, -1.0], [1.0, 0.0]]) @ product
    return product


def test_potential_matches_closed_form() -> None:
    op = _amo(1.3, theta=0.2)
    ns = np.arange(-5, 6)

    expected = 2 * 1.3 * np.cos(2 * np.pi * (0.2 + ns * GOLDEN.shadow))

    np.testing.assert_allclose(op.potential(ns), expected, atol=1e-12)


def test_theta_is_reduced_mod_one() -> None:
    assert _amo(1.0, theta=1.25).theta == pytest.approx(0.25)


def test_transfer_product_matches_dense_product() -> None:
    op = _amo(0.8, theta=0.1)

    product = transfer_product(op, 0.7, op.theta, 40)

    expected = _dense_product(op, 0.7, 40)
    actual = math.exp(product.log_scale) * product.as_array()
    np.testing.assert_allclose(actual, expected, rtol=1e-10, atol=1e-10 * np.abs(expected).max())
    assert product.det() == pytest.approx(1.0, abs=1e-10)


def test_transfer_products_compose_along_the_orbit() -> None:
    op = _amo(0.8, theta=0.15)
    energy, j, k = 0.4, 30, 17
    shifted = float(op.phases(j))

    joined = transfer_product(op, energy, op.theta, j + k)
    split = transfer_product(op, energy, shifted, k) @ transfer_product(op, energy, op.theta, j)

    expected = math.exp(joined.log_scale) * joined.as_array()
    actual = math.exp(split.log_scale) * split.as_array()
    np.testing.assert_allclose(actual, expected, rtol=1e-9, atol=1e-9 * np.abs(expected).max())


@pytest.mark.parametrize(("energy", "n_steps", "tol"), [(10.0, 20_000, 5e-3), (0.0, 200_000, 0.03)])
def test_lyapunov_does_not_depend_on_theta(energy: float, n_steps: int, tol: float) -> None:
    values = [lyapunov(_amo(3.0, theta=theta), energy, n_steps).value for theta in (0.0, 0.21, 0.5, 0.77)]

    assert max(values) - min(values) <= tol
    assert min(values) >= math.log(3.0) - tol


def test_negative_steps_invert_the_shifted_product() -> None:
    op = _amo(2.0, theta=0.3)
    k = 25
    start = float(op.phases(-k))

    backward = transfer_product(op, -0.4, op.theta, -k)

    (a, b), (c, d) = _dense_product(op.with_theta(start), -0.4, k)
    expected = np.array([[d, -b], [-c, a]])
    actual = math.exp(backward.log_scale) * backward.as_array()
    np.testing.assert_allclose(actual, expected, rtol=1e-9, atol=1e-9 * np.abs(expected).max())


def test_inverse_composes_to_identity() -> None:
    product = transfer_product(_amo(1.5), 0.2, 0.0, 5)

    identity = product @ product.inverse()

    np.testing.assert_allclose(math.exp(identity.log_scale) * identity.as_array(), np.eye(2), atol=1e-10)


def test_identity_product() -> None:
    product = TransferProduct.identity()

    assert product.log_norm() == pytest.approx(0.0, abs=1e-15)
    assert product.det() == 1.0


@pytest.mark.parametrize("seed", range(5))
def test_long_products_keep_unit_determinant(seed: int) -> None:
    rng = np.random.default_rng(seed)
    coupling = float(rng.uniform(0.5, 3.0))
    op = _amo(coupling, theta=float(rng.uniform()))
    energy = float(rng.uniform(-op.spectrum_bound, op.spectrum_bound))
    k = 100_000

    product = transfer_product(op, energy, op.theta, k)

    assert abs(product.log_abs_det) <= 1e-9 * k
    assert product.det_sign == 1


@pytest.mark.slow
def test_long_products_keep_unit_determinant_for_many_draws() -> None:
    rng = np.random.default_rng(100)
    for _ in range(100):
        op = _amo(float(rng.uniform(0.5, 3.0)), theta=float(rng.uniform()))
        energy = float(rng.uniform(-op.spectrum_bound, op.spectrum_bound))
        k = int(rng.integers(10_000, 1_000_000))
        assert abs(transfer_product(op, energy, op.theta, k).log_abs_det) <= 1e-9 * k


def test_lyapunov_on_spectrum_is_log_lambda() -> None:
    op = _amo(3.0)
    truncation = TruncatedOperator.centered(op, 2000)
    energy = float(eigenvalues(truncation, index_range=(2000, 2001))[0])

    estimate = lyapunov(op, energy, 1_000_000)

    assert estimate.value == pytest.approx(math.log(3.0), abs=0.05)
    assert estimate.n_steps == 1_000_000


def test_lyapunov_needs_enough_steps() -> None:
    with pytest.raises(ValueError):
        lyapunov(_amo(2.0), 0.0, 10)


def test_pk_det_matches_dense_determinant() -> None:
    op = _amo(1.7)
    theta, k, energy = 0.37, 12, 0.9
    matrix = np.diag(energy - op.potential(np.arange(k), theta=theta)) - np.eye(k, k=1) - np.eye(k, k=-1)

    value = pk_det(op, energy, theta, k)

    expected = np.linalg.det(matrix)
    assert value.sign * math.exp(value.log_abs) == pytest.approx(expected, rel=1e-10)


def test_pk_det_flags_exact_zero() -> None:
    op = _amo(0.0)

    value = pk_det(op, 0.0, 0.0, 1)

    assert value.is_zero


def test_green_entries_match_dense_inverse() -> None:
    rng = np.random.default_rng(5)
    for _ in range(100):
        op = _amo(float(rng.uniform(0.2, 4.0)), theta=float(rng.uniform()))
        x1 = int(rng.integers(-50, 50))
        x2 = x1 + int(rng.integers(0, 30))
        y = int(rng.integers(x1, x2 + 1))
        energy = float(rng.uniform(-op.spectrum_bound, op.spectrum_bound))
        sites = np.arange(x1, x2 + 1)
        block = np.diag(op.potential(sites) - energy) + np.eye(sites.size, k=1) + np.eye(sites.size, k=-1)
        dense = np.linalg.inv(block)

        g_x1_y, g_y_x2 = green_entry(op, energy, x1, x2, y).values()

        scale = np.abs(dense).max()
        assert abs(g_x1_y - dense[0, y - x1]) <= 1e-8 * scale
        assert abs(g_y_x2 - dense[y - x1, -1]) <= 1e-8 * scale


def test_green_entry_requires_y_in_window() -> None:
    with pytest.raises(ValueError):
        green_entry(_amo(1.0), 0.1, 0, 5, 9)


def test_wronskian_of_phase_solutions_is_one() -> None:
    rng = np.random.default_rng(6)
    for _ in range(100):
        op = _amo(float(rng.uniform(0.5, 3.0)), theta=float(rng.uniform()))
        energy = float(rng.uniform(-op.spectrum_bound, op.spectrum_bound))
        x = float(rng.uniform())
        u = solution_profile(op, energy, x, (-500, 501))
        v = solution_profile(op, energy, x + 0.25, (-500, 501))

        for n in range(-500, 501, 50):
            scaled, shift = wronskian(u, v, n)
            assert abs(scaled - math.exp(-shift)) <= 1e-9


def test_solution_profile_initial_data_and_recurrence() -> None:
    op = _amo(1.1, theta=0.4)
    profile = solution_profile(op, 0.3, 0.1, (-20, 21))
    values = profile.values()

    assert profile.value(0) == pytest.approx(math.sin(0.2 * math.pi))
    assert profile.value(1) == pytest.approx(-math.cos(0.2 * math.pi))
    sites = np.arange(-19, 21)
    i = sites + 20
    lhs = values[i + 1] + values[i - 1] + op.potential(sites) * values[i]
    np.testing.assert_allclose(lhs, 0.3 * values[i], atol=1e-9 * np.abs(values).max())


def test_solution_profile_rejects_window_without_origin() -> None:
    with pytest.raises(WindowError):
        solution_profile(_amo(1.0), 0.0, 0.0, (2, 10))


def test_norm_with_fractional_lengths() -> None:
    profile = solution_profile(_amo(0.0), 0.0, 0.25, (-10, 10))
    # u(n) = 1, 0, -1, 0, ... from n = 0, so |u(n)| = 1 on even sites

    assert norm_l1l2(profile, 2.0, 0.0) == pytest.approx(2.0)
    assert norm_l1l2(profile, 2.5, 0.0) == pytest.approx(2.0)
    assert norm_l1l2(profile, 3.0, 1.5) == pytest.approx(2.5)
    assert log_norm_l1l2(profile, 4.0, 4.0) == pytest.approx(math.log(5.0))


def test_norm_needs_covering_window() -> None:
    profile = solution_profile(_amo(1.0), 0.0, 0.0, (-5, 5))

    with pytest.raises(WindowError):
        norm_l1l2(profile, 10.0, 1.0)


def test_block_identity_holds_for_any_solution() -> None:
    op = _amo(2.5, theta=0.15)
    profile = solution_profile(op, 0.8, 0.33, (-60, 61))

    for x1, x2, y in ((-20, 20, 0), (-40, -5, -30), (3, 50, 25)):
        assert block_identity_residual(op, profile, x1, x2, y) <= 1e-8


def test_far_from_spectrum_every_site_is_regular() -> None:
    verdict = regularity_check(_amo(math.exp(1.5)), 20.0, 0, 1.0, 20)

    assert verdict.regular
    assert verdict.witness is not None
    x1, x2 = verdict.witness
    assert x2 - x1 + 1 == 20
    assert x1 <= 0 <= x2


def test_regularity_needs_large_window() -> None:
    with pytest.raises(WindowError):
        regularity_check(_amo(2.0), 0.0, 0, 0.5, 9)


def test_chebyshev_extrema_are_uniform() -> None:
    k = 12
    thetas = np.arange(k + 1) / (2 * k)

    verdict = uniformity_check(thetas, 0.1, k)

    assert verdict.uniform
    assert verdict.log_max_product <= math.log(2.0)


def test_clustered_nodes_are_not_uniform() -> None:
    k = 8
    thetas = 0.1 + 1e-3 * np.arange(k + 1)

    verdict = uniformity_check(thetas, 0.01, k)

    assert not verdict.uniform


def test_uniformity_rejects_degenerate_nodes() -> None:
    # cos is even, so theta and -theta give the same node
    with pytest.raises(DegenerateNodesError):
        uniformity_check([0.1, -0.1, 0.3], 0.1, 2)
    with pytest.raises(ValueError):
        uniformity_check([0.1, 0.2], 0.1, 3)


def test_classify_resonance() -> None:
    # q_10 = 89 for the golden mean
    assert GOLDEN.denominators[10] == 89

    resonant = classify_resonance(GOLDEN, 0.5, 10, 178)
    assert resonant.is_resonant
    assert resonant.kind.ell == 2
    assert resonant.kind.r == 0

    nonresonant = classify_resonance(GOLDEN, 0.5, 10, 44)
    assert not nonresonant.is_resonant
    assert nonresonant.kind.dist == 44

    with pytest.raises(ValueError):
        classify_resonance(GOLDEN, 1.0, 10, 44)


def test_decay_window_refuses_nonpositive_rate() -> None:
    op = AlmostMathieu(coupling_lambda=math.exp(0.5), freq=cf_synthesize(1.0, 10**10))
    profile = solution_profile(op, 0.0, 0.0, (-10, 10))

    with pytest.raises(RegimeError):
        decay_window_check(op, 0.0, profile, 0.1, 0.9, 1, beta=1.03)


def test_decay_window_is_empty_for_small_convergents() -> None:
    op = AlmostMathieu(coupling_lambda=math.exp(1.5), freq=cf_synthesize(1.0, 10**10))
    profile = solution_profile(op, 0.0, 0.0, (-100, 100))

    report = decay_window_check(op, 0.0, profile, 0.01, 0.9, 0, beta=1.03)

    assert report.status == "empty_window"
    assert report.n_checked == 0


def test_decay_window_checks_resonant_sites() -> None:
    op = AlmostMathieu(coupling_lambda=math.exp(1.5), freq=cf_synthesize(1.0, 10**10))
    profile = solution_profile(op, 0.0, 0.0, (-1500, 1500))

    report = decay_window_check(op, 0.0, profile, 0.01, 0.9, 2, beta=1.03)

    assert report.status == "checked"
    assert report.n_checked > 0
    lo, hi = report.checked_range
    assert -1500 <= lo and hi <= 1500
    assert report.window_lo == pytest.approx(2 * 22**2 * 3584912851**0.01)
