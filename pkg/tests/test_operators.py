import math

import numpy as np
import pytest
from scipy.linalg import eigh

from qremlib.disorder import DisorderVariant, sample
from qremlib.errors import DimensionError, DomainTooLargeError, InvalidParameterError
from qremlib.hypercube import SpinConfiguration, SubsetMask, ball, flip
from qremlib.operators import (
    HamiltonianSpec,
    apply,
    as_linear_operator,
    dense_matrix,
    operator_norm,
    restricted_adjacency,
    restricted_T_matrix_element,
    spectral_bounds,
    transverse_apply,
)

from .mocks import constant_realization


def test_apply_without_field_is_diagonal(strict_realization, rng):
    v = rng.standard_normal(256)
    np.testing.assert_array_equal(apply(HamiltonianSpec(strict_realization, 0.0), v), strict_realization.energies * v)


def test_apply_uniform_vector_is_top_eigenvector():
    n, gamma = 6, 0.7
    v = np.full(1 << n, 0.125)
    np.testing.assert_allclose(apply(HamiltonianSpec(constant_realization(n), gamma), v), -gamma * n * v)


def test_apply_two_spin_indicator():
    v = np.zeros(4)
    v[0b11] = 1.0
    out = apply(HamiltonianSpec(constant_realization(2), 1.0), v)
    assert list(out) == [0.0, -1.0, -1.0, 0.0]


def test_apply_dimension_mismatch(strict_realization):
    with pytest.raises(DimensionError):
        apply(HamiltonianSpec(strict_realization, 1.0), np.zeros(100))


def test_apply_is_symmetric(full_realization, rng):
    spec = HamiltonianSpec(full_realization, 0.9)
    for _ in range(10):
        u, v = rng.standard_normal((2, 256))
        assert u @ apply(spec, v) == pytest.approx(apply(spec, u) @ v, rel=1e-12)


def test_restricted_apply_is_symmetric(full_realization, rng):
    domain = SubsetMask(rng.random(256) < 0.4, 8)
    spec = HamiltonianSpec(full_realization, 1.3, domain)
    u, v = rng.standard_normal((2, 256))
    out = apply(spec, v)
    assert not out[~domain.members].any()
    assert u @ out == pytest.approx(apply(spec, u) @ v, rel=1e-12)


def test_restriction_must_match_n(full_realization):
    with pytest.raises(DimensionError):
        HamiltonianSpec(full_realization, 1.0, SubsetMask.full(4))
    with pytest.raises(InvalidParameterError):
        HamiltonianSpec(full_realization, -1.0)


def test_restricted_t_matrix_element():
    n = 5
    a = SpinConfiguration(0b00000, n)
    b = flip(a, 3)
    both = SubsetMask.from_configurations([a, b], n)
    assert restricted_T_matrix_element(both, a, a) == 0
    assert restricted_T_matrix_element(both, a, b) == 1
    assert restricted_T_matrix_element(SubsetMask.from_configurations([a], n), a, b) == 0


def test_dense_matrix_one_spin():
    gamma = 2.0
    matrix = dense_matrix(HamiltonianSpec(constant_realization(1), gamma))
    np.testing.assert_array_equal(matrix, [[0.0, -gamma], [-gamma, 0.0]])
    np.testing.assert_allclose(eigh(matrix, eigvals_only=True), [-gamma, gamma])


def test_dense_matrix_agrees_with_apply(rng):
    spec = HamiltonianSpec(sample(DisorderVariant.strict(2), 3, seed=4), 0.8)
    matrix = dense_matrix(spec)
    np.testing.assert_array_equal(matrix, matrix.T)
    for _ in range(20):
        v = rng.standard_normal(8)
        np.testing.assert_allclose(matrix @ v, apply(spec, v), rtol=1e-12, atol=1e-12)


def test_dense_matrix_singleton(strict_realization):
    domain = SubsetMask.from_indices([37], 8)
    matrix = dense_matrix(HamiltonianSpec(strict_realization, 1.0, domain))
    assert matrix.shape == (1, 1)
    assert matrix[0, 0] == strict_realization.energies[37]


def test_dense_matrix_compressed_restriction(full_realization, rng):
    domain = SubsetMask(rng.random(256) < 0.5, 8)
    spec = HamiltonianSpec(full_realization, 0.6, domain)
    members = domain.indices()
    v = rng.standard_normal(members.shape[0])
    embedded = np.zeros(256)
    embedded[members] = v
    np.testing.assert_allclose(dense_matrix(spec) @ v, apply(spec, embedded)[members], rtol=1e-12, atol=1e-12)


def test_dense_matrix_too_large():
    with pytest.raises(DomainTooLargeError):
        dense_matrix(HamiltonianSpec(constant_realization(15), 1.0))


def test_transverse_apply_spectrum():
    n = 4
    matrix = np.column_stack([transverse_apply(e, n) for e in np.eye(1 << n)])
    values = np.sort(eigh(matrix, eigvals_only=True))
    expected = sorted(n - 2 * k for k in range(n + 1) for _ in range(math.comb(n, k)))
    np.testing.assert_allclose(values, expected, atol=1e-12)


def test_restricted_adjacency_matches_dense():
    domain = ball(SpinConfiguration(0, 6), 2)
    adjacency = restricted_adjacency(domain).toarray()
    zero = HamiltonianSpec(constant_realization(6), 1.0, domain)
    np.testing.assert_array_equal(adjacency, -dense_matrix(zero))


@pytest.mark.parametrize("n", range(2, 13))
def test_operator_norm_full_cube(n):
    assert operator_norm(SubsetMask.full(n)) == pytest.approx(n, abs=1e-9)


def test_operator_norm_singleton_and_empty():
    assert operator_norm(SubsetMask.from_indices([5], 6)) == 0.0
    with pytest.raises(InvalidParameterError):
        operator_norm(SubsetMask.empty(6))


def test_operator_norm_star():
    # closed unit ball is a star graph with n leaves
    assert operator_norm(ball(SpinConfiguration(0, 9), 1)) == pytest.approx(3.0, abs=1e-9)


def test_operator_norm_matches_dense_above_cutoff(rng):
    domain = SubsetMask(rng.random(1024) < 0.3, 10)
    dense = eigh(restricted_adjacency(domain).toarray(), eigvals_only=True)[-1]
    assert operator_norm(domain) == pytest.approx(dense, abs=1e-9)


def test_operator_norm_monotone_in_domain(rng):
    n = 8
    for _ in range(30):
        larger = SubsetMask(rng.random(1 << n) < 0.6, n)
        smaller = SubsetMask(larger.members & (rng.random(1 << n) < 0.7), n)
        if smaller.is_empty():
            continue
        assert operator_norm(smaller) <= operator_norm(larger) + 1e-9


@pytest.mark.parametrize("n", [*range(2, 11), *(pytest.param(n, marks=pytest.mark.slow) for n in range(11, 15))])
def test_operator_norm_ball_bound(n):
    center = SpinConfiguration(0, n)
    for k in range(n // 2 + 1):
        rho = k / n
        bound = 2 * n * math.sqrt(rho * (1 - rho + 1 / n))
        assert operator_norm(ball(center, k)) <= bound + 1e-9


def test_operator_norm_ball_n16():
    norm = operator_norm(ball(SpinConfiguration(0, 16), 4))
    assert norm <= 16.0
    assert norm <= 2 * 16 * math.sqrt(0.25 * (1 - 0.25 + 1 / 16))


def test_spectral_bounds_match_dense(strict_realization):
    spec = HamiltonianSpec(strict_realization, 0.5)
    values = eigh(dense_matrix(spec), eigvals_only=True)
    low, high = spectral_bounds(spec)
    assert low == pytest.approx(values[0], abs=1e-8)
    assert high == pytest.approx(values[-1], abs=1e-8)


def test_linear_operator_restricted(full_realization, rng):
    domain = SubsetMask(rng.random(256) < 0.5, 8)
    spec = HamiltonianSpec(full_realization, 1.1, domain)
    v = rng.standard_normal(domain.cardinality)
    np.testing.assert_allclose(as_linear_operator(spec) @ v, dense_matrix(spec) @ v, rtol=1e-12, atol=1e-12)
