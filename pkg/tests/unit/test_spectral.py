import math

import numpy as np
import pytest

from mborel_amo.arith import cf_expand
from mborel_amo.exceptions import EpsilonTooLargeError, TruncationError, WindowError
from mborel_amo.measure import DiscreteMeasure, m_borel, point_mass
from mborel_amo.operator import AlmostMathieu, basis_solutions, log_norm_l1l2, norm_weights, solution_profile
from mborel_amo.spectral import (
    TruncatedOperator,
    borel_transform,
    boundary_scaling_check,
    eigenfunction_profile,
    eigensolve,
    eigenvalues,
    find_L_of_eps,
    free_m_function,
    half_line_m,
    jl_lower_bound_check,
    norm_growth_check,
    omega_table,
    phase_m_functions,
    schnol_phase,
    spectral_measure,
    subordinacy_quantities,
)

GOLDEN = cf_expand("golden", 40)


def _amo(coupling: float, theta: float = 0.0) -> AlmostMathieu:
    return AlmostMathieu(coupling_lambda=coupling, freq=GOLDEN, theta=theta)


def _dense(truncation: TruncatedOperator) -> np.ndarray:
    off = truncation.off_diagonal
    return np.diag(truncation.diagonal) + np.diag(off, 1) + np.diag(off, -1)


def test_truncated_operator_matches_dense_matrix() -> None:
    op = _amo(1.4, theta=0.2)
    truncation = TruncatedOperator.centered(op, 30)
    rng = np.random.default_rng(0)
    vector = rng.normal(size=truncation.size)

    assert truncation.size == 61
    np.testing.assert_allclose(truncation.diagonal, op.potential(np.arange(-30, 31)))
    np.testing.assert_allclose(truncation.matvec(vector), _dense(truncation) @ vector, atol=1e-12)
    with pytest.raises(WindowError):
        truncation.index(31)


def test_free_truncation_spectrum() -> None:
    n = 1000
    truncation = TruncatedOperator.from_operator(_amo(0.0), 1, n)

    data = eigensolve(truncation, (1,))

    expected = np.sort(2 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1)))
    np.testing.assert_allclose(data.eigenvalues, expected, atol=1e-8)
    assert data.completeness(1) == pytest.approx(1.0, abs=1e-8)
    assert data.orthonormality_residual <= 1e-8
    assert not data.clustered


def test_spectral_measure_moments() -> None:
    op = _amo(3.0, theta=0.17)
    truncation = TruncatedOperator.centered(op, 100)
    dense = _dense(truncation)
    origin = truncation.index(0)

    data = eigensolve(truncation, (0, 1))
    mu = spectral_measure(data, 0)

    assert mu.total_mass == pytest.approx(1.0, abs=1e-8)
    assert np.all(np.abs(mu.positions) <= op.spectrum_bound + 1e-9)
    for p in (1, 2, 3):
        expected = np.linalg.matrix_power(dense, p)[origin, origin]
        assert float(np.dot(mu.weights, mu.positions**p)) == pytest.approx(expected, abs=1e-7)
    assert data.max_residual <= 1e-8 * truncation.norm_bound()


def test_spectral_measure_of_a_vector() -> None:
    data = eigensolve(TruncatedOperator.centered(_amo(1.2), 40), (0, 1))

    mu = spectral_measure(data, {0: 1.0, 1: 1.0})

    assert mu.total_mass == pytest.approx(2.0, abs=1e-8)
    with pytest.raises(ValueError):
        spectral_measure(data, 5)


def test_eigensolve_limits_kept_vectors() -> None:
    with pytest.raises(ValueError):
        eigensolve(TruncatedOperator.centered(_amo(1.0), 2600), (0,), keep_vectors=True)


def test_kept_vectors_are_eigenvectors() -> None:
    truncation = TruncatedOperator.centered(_amo(2.0, theta=0.4), 60)

    data = eigensolve(truncation, (0,), keep_vectors=True)

    residual = truncation.matvec(data.vectors) - data.vectors * data.eigenvalues[None, :]
    assert np.abs(residual).max() <= 1e-8
    np.testing.assert_allclose(data.vectors[truncation.index(0)], data.amplitudes(0))


def test_borel_transform_of_a_unit_atom() -> None:
    value = borel_transform(point_mass(0.0), 1j)

    assert value == pytest.approx(1j)
    with pytest.raises(ValueError):
        borel_transform(point_mass(0.0), 1.0)


def test_borel_transform_imaginary_part_is_j2() -> None:
    mu = DiscreteMeasure.from_atoms([-1.0, 0.2, 0.7], [0.3, 0.5, 0.2])

    for eps in (0.01, 0.1, 1.0):
        assert eps * borel_transform(mu, complex(0.4, eps)).imag == pytest.approx(m_borel(mu, 2.0, 0.4, eps))


def test_free_m_function_is_herglotz_root() -> None:
    for z in (0.3 + 0.01j, -1.9 + 0.5j, 3.0 + 1e-4j, 1j):
        m = free_m_function(z)
        assert m.imag > 0
        assert abs(m * m + z * m + 1) <= 1e-12


def test_half_line_m_identities() -> None:
    op = _amo(3.0, theta=0.3)
    rng = np.random.default_rng(1)
    for _ in range(20):
        energy = float(rng.uniform(-op.spectrum_bound, op.spectrum_bound))
        x0 = float(rng.uniform())

        pair = half_line_m(op, energy, 0.1, x0, 100)

        assert pair.residual_M1 <= 1e-6
        assert pair.residual_M2 <= 1e-6
        assert pair.m1.imag > 0 and pair.m2.imag > 0
        assert pair.m1_tilde.imag > 0 and pair.m2_tilde.imag > 0
        assert pair.truncation_change <= 1e-6


def test_half_line_m_recovers_free_m_function() -> None:
    z = complex(0.3, 0.5)

    pair = half_line_m(_amo(0.0), z.real, z.imag, 0.0, 400)

    free = free_m_function(z)
    assert abs(pair.m1 - free) <= 1e-7
    assert abs(pair.m2 - (z + free)) <= 1e-7
    assert pair.m1_tilde == pytest.approx(pair.m1)


def test_half_line_m_flags_short_truncation() -> None:
    with pytest.raises(TruncationError) as info:
        half_line_m(_amo(0.0), 0.0, 0.01, 0.0, 8)

    assert info.value.suggested_n == 2764


def test_half_line_m_rejects_bad_arguments() -> None:
    with pytest.raises(ValueError):
        half_line_m(_amo(1.0), 0.0, 0.0, 0.0, 100)
    with pytest.raises(ValueError):
        half_line_m(_amo(1.0), 0.0, 0.1, 0.0, 3)


def test_phase_m_functions_at_zero_phase() -> None:
    assert phase_m_functions(0.2 + 1j, -0.5 + 2j, 0.0) == (0.2 + 1j, -0.5 + 2j)


def test_omega_matches_phase_sampling_for_free_solutions() -> None:
    op = _amo(0.0)
    for length in (1e2, 1e3, 1e4):
        data = subordinacy_quantities(op, 0.0, 0.0, length)
        window = (-1, math.floor(length) + 1)
        f, g = basis_solutions(op, 0.0, window)
        sites, weights = norm_weights(f, length, 0.0)
        fv, gv = f.values()[sites + 1], g.values()[sites + 1]
        ff, fg, gg = np.sum(weights * fv * fv), np.sum(weights * fv * gv), np.sum(weights * gv * gv)
        s, c = np.sin(2 * np.pi * np.arange(10_000) / 20_000), np.cos(2 * np.pi * np.arange(10_000) / 20_000)
        norms = s * s * ff - 2 * s * c * fg + c * c * gg

        sampled = math.sqrt(norms.max() * norms.min())

        assert data.omega_L == pytest.approx(sampled, rel=1e-6)


def _energy_in_spectrum(op: AlmostMathieu) -> float:
    return float(eigenvalues(TruncatedOperator.centered(op, 500), index_range=(500, 501))[0])


def test_omega_matches_gram_determinant() -> None:
    op = _amo(0.5, theta=0.1)
    energy = _energy_in_spectrum(op)
    for length in (10.0, 37.5, 150.0):
        data = subordinacy_quantities(op, energy, 0.2, length)
        gram = np.array(data.gram)

        log_det = math.log(np.linalg.det(gram)) + 4 * data.gram_log_scale

        assert data.log_omega == pytest.approx(0.5 * log_det, abs=1e-6)


def test_omega_bounds_a_and_b() -> None:
    op = _amo(0.5, theta=0.3)
    for length in (5.0, 50.0, 500.0):
        data = subordinacy_quantities(op, 0.4, 0.15, length)
        gram = np.array(data.gram) * math.exp(2 * data.gram_log_scale)
        top = np.linalg.eigvalsh(gram)[-1]

        assert data.a_L <= top * (1 + 1e-9)
        assert data.b_L <= top * (1 + 1e-9)
        assert data.log_a + data.log_b >= 2 * data.log_omega - 1e-9


def test_omega_is_nondecreasing() -> None:
    table = omega_table(_amo(0.5, theta=0.3), 0.4, 1024)

    values = [table.log_omega(length) for length in np.arange(2.0, 1000.0, 7.5)]

    assert all(b >= a for a, b in zip(values, values[1:]))


def test_find_L_of_eps_inverts_omega() -> None:
    op = _amo(0.5, theta=0.3)
    lengths = []
    for eps in (1e-1, 1e-2, 1e-3):
        length = find_L_of_eps(op, 0.4, 0.0, eps)
        omega = subordinacy_quantities(op, 0.4, 0.0, length).omega_L
        assert omega == pytest.approx(1 / eps, rel=1e-3)
        lengths.append(length)

    assert lengths == sorted(lengths)


def test_find_L_of_eps_rejects_large_eps() -> None:
    with pytest.raises(EpsilonTooLargeError):
        find_L_of_eps(_amo(0.0), 0.0, 0.0, 1.0)


def test_jl_bound_for_free_laplacian() -> None:
    for eps in (1e-1, 1e-2, 1e-3):
        check = jl_lower_bound_check(_amo(0.0), 0.0, 0.0, eps)

        assert 1e-2 <= check.ratio <= 1e2
        assert check.passed


def test_boundary_scaling_at_and_away_from_an_atom() -> None:
    mu = point_mass(0.0)

    near = boundary_scaling_check(mu, [0.0], (0.1, 0.01), 1.0)
    far = boundary_scaling_check(mu, [5.0], (0.1, 0.01), 1.0)

    assert near.pass_fraction == 1.0
    assert near.min_scaled_value == pytest.approx(1.0)
    assert far.pass_fraction == 0.0
    assert far.per_eps_pass_fraction == (0.0, 0.0)


def test_schnol_phase_minimises_the_norm() -> None:
    op = _amo(1.5, theta=0.2)
    energy, length = 0.3, 30.0
    window = (-31, 31)

    x = schnol_phase(op, energy, length)

    assert 0.0 <= x < 0.5
    best = log_norm_l1l2(solution_profile(op, energy, x, window), length, length)
    sampled = min(
        log_norm_l1l2(solution_profile(op, energy, float(y), window), length, length)
        for y in np.linspace(0.0, 0.5, 500, endpoint=False)
    )
    assert best <= sampled + 1e-6


def test_norm_growth_report() -> None:
    op = _amo(math.exp(0.5), theta=0.1)

    report = norm_growth_check(op, [0.1, -0.4], (10.0, 100.0), 0.5, 1.0, slack=0.1)

    assert report.exponent == pytest.approx(1.0 + 0.5 / 1.0 - 0.1)
    assert report.n_points == 4
    assert report.n_passed == round(report.pass_fraction * 4)
    with pytest.raises(ValueError):
        norm_growth_check(op, [0.1], (10.0,), 1.5, 1.0)


def test_eigenfunction_profile_matches_dense_eigenvector() -> None:
    op = _amo(3.0, theta=0.25)
    truncation = TruncatedOperator.centered(op, 100)
    values, vectors = np.linalg.eigh(_dense(truncation))
    i0, i1 = truncation.index(0), truncation.index(1)
    index = int(np.argmax(vectors[i0] ** 2 + vectors[i1] ** 2))
    energy = float(eigenvalues(truncation, index_range=(index, index + 1))[0])

    profile = eigenfunction_profile(truncation, energy)

    assert profile.value(0) ** 2 + profile.value(1) ** 2 == pytest.approx(1.0)
    expected = vectors[:, index] / math.hypot(vectors[i0, index], vectors[i1, index])
    expected *= np.sign(expected[i0] * profile.value(0) + expected[i1] * profile.value(1))
    np.testing.assert_allclose(profile.values(), expected, atol=1e-8)
    assert 0.0 <= profile.boundary_phase < 1.0


def test_eigenfunction_profile_needs_origin() -> None:
    truncation = TruncatedOperator.from_operator(_amo(1.0), 2, 20)

    with pytest.raises(WindowError):
        eigenfunction_profile(truncation, 0.0)


@pytest.mark.slow
def test_half_line_m_identities_at_desk_scale() -> None:
    op = _amo(3.0, theta=0.3)
    rng = np.random.default_rng(2)
    for _ in range(10):
        energy = float(rng.uniform(-op.spectrum_bound, op.spectrum_bound))
        pair = half_line_m(op, energy, 0.1, float(rng.uniform()), 5000)
        assert pair.residual_M1 <= 1e-6
        assert pair.residual_M2 <= 1e-6
