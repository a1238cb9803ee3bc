import numpy as np
import pytest

from mborel_amo.config import NumericsConfig
from mborel_amo.tridiagonal import (
    bisect_eigenvalues,
    chunk_ranges,
    cluster_bounds,
    gershgorin_interval,
    inverse_iteration_chunk,
    sturm_count,
    twisted_vector,
)


def _dense(d: np.ndarray, e: np.ndarray) -> np.ndarray:
    return np.diag(d) + np.diag(e, 1) + np.diag(e, -1)


def test_sturm_count_matches_dense_spectrum() -> None:
    rng = np.random.default_rng(0)
    d, e = rng.normal(size=40), rng.normal(size=39)
    values = np.linalg.eigvalsh(_dense(d, e))
    shifts = np.linspace(values[0] - 1, values[-1] + 1, 57)

    counts = sturm_count(d, e, shifts)

    np.testing.assert_array_equal(counts, np.searchsorted(values, shifts))


def test_gershgorin_interval_contains_spectrum() -> None:
    rng = np.random.default_rng(1)
    d, e = rng.normal(size=20), rng.normal(size=19)

    lower, upper = gershgorin_interval(d, e)

    values = np.linalg.eigvalsh(_dense(d, e))
    assert lower <= values[0] and values[-1] <= upper


def test_free_laplacian_eigenvalues() -> None:
    n = 1000
    values = bisect_eigenvalues(np.zeros(n), np.ones(n - 1))

    expected = np.sort(2 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1)))
    np.testing.assert_allclose(values, expected, atol=1e-8)


def test_index_range_selects_a_slice() -> None:
    rng = np.random.default_rng(2)
    d, e = rng.normal(size=60), np.ones(59)
    values = np.linalg.eigvalsh(_dense(d, e))

    sliced = bisect_eigenvalues(d, e, index_range=(10, 15))

    np.testing.assert_allclose(sliced, values[10:15], atol=1e-10)
    with pytest.raises(ValueError):
        bisect_eigenvalues(d, e, index_range=(50, 70))


def test_threaded_bisection_agrees() -> None:
    rng = np.random.default_rng(3)
    d, e = rng.normal(size=200), np.ones(199)

    serial = bisect_eigenvalues(d, e)
    threaded = bisect_eigenvalues(d, e, config=NumericsConfig(workers=4))

    np.testing.assert_allclose(serial, threaded, atol=1e-10)


def test_cluster_bounds_and_chunks() -> None:
    values = np.array([0.0, 1e-12, 2e-12, 1.0, 2.0, 2.0 + 1e-13, 3.0])

    assert cluster_bounds(values, 1e-10) == [(0, 3), (3, 4), (4, 6), (6, 7)]
    assert chunk_ranges(values, 2, 1e-10) == [(0, 3), (3, 6), (6, 7)]


def test_inverse_iteration_vectors_are_orthonormal_eigenvectors() -> None:
    n = 1000
    d, e = np.zeros(n), np.ones(n - 1)
    values = bisect_eigenvalues(d, e)

    chunk = inverse_iteration_chunk(d, e, values[:256], 0)

    assert chunk.vectors.shape == (n, 256)
    assert chunk.orthonormality <= 1e-8
    assert chunk.residual <= 1e-8 * 2.0
    peaks = np.abs(chunk.vectors).argmax(axis=0)
    assert np.all(chunk.vectors[peaks, np.arange(256)] > 0)


def test_inverse_iteration_separates_degenerate_pair() -> None:
    # two decoupled copies of the same block have every eigenvalue doubled
    block_d = np.array([0.5, -0.3, 1.2])
    d = np.concatenate([block_d, block_d])
    e = np.array([1.0, 1.0, 0.0, 1.0, 1.0])
    values = bisect_eigenvalues(d, e)

    chunk = inverse_iteration_chunk(d, e, values, 0)

    assert chunk.orthonormality <= 1e-10
    assert chunk.residual <= 1e-8


def test_twisted_vector_matches_dense_eigenvector() -> None:
    rng = np.random.default_rng(4)
    d, e = 4 * np.cos(np.arange(80) * 2.1), np.ones(79)
    values, vectors = np.linalg.eigh(_dense(d, e))
    index = int(rng.integers(80))
    refined = bisect_eigenvalues(d, e, index_range=(index, index + 1))[0]

    twisted = twisted_vector(d, e, refined)

    vector = twisted.sign * np.exp(twisted.log_abs)
    vector /= np.linalg.norm(vector)
    expected = vectors[:, index] * np.sign(vectors[twisted.twist, index])
    np.testing.assert_allclose(vector, expected, atol=1e-8)
    assert twisted.log_abs[twisted.twist] == 0.0
