import logging
import math

import numpy as np
import pytest

from qremlib.errors import AllProbesFailedError, InvalidParameterError, LanczosBreakdownError
from qremlib.lanczos import estimate_log_trace, lanczos_tridiagonal, log_quadrature, rademacher_probe


def test_quadrature_exact_when_krylov_space_is_full(rng):
    diagonal = rng.uniform(-3, 3, size=20)
    start = rng.standard_normal(20)
    recurrence = lanczos_tridiagonal(lambda v: diagonal * v, start, krylov_dim=30)
    expected = math.log(float(np.sum(start**2 * np.exp(-diagonal))))
    assert log_quadrature(recurrence, lambda nodes: -nodes) == pytest.approx(expected, rel=1e-10)


def test_invariant_subspace_stops_early():
    recurrence = lanczos_tridiagonal(lambda v: 3.0 * v, np.ones(50), krylov_dim=40)
    assert recurrence.steps == 1
    assert log_quadrature(recurrence, lambda nodes: -nodes) == pytest.approx(math.log(50.0) - 3.0)


def test_reorthogonalization_switch_gives_same_quadrature(rng):
    diagonal = np.linspace(-2, 2, 300)
    start = rademacher_probe(rng, 300)
    with_basis = lanczos_tridiagonal(lambda v: diagonal * v, start, 40, reorthogonalize=True)
    without = lanczos_tridiagonal(lambda v: diagonal * v, start, 40, reorthogonalize=False)
    log_f = lambda nodes: -0.5 * nodes  # noqa: E731
    assert log_quadrature(with_basis, log_f) == pytest.approx(log_quadrature(without, log_f), rel=1e-6)


def test_non_finite_matvec_breaks_down():
    with pytest.raises(LanczosBreakdownError):
        lanczos_tridiagonal(lambda v: np.full_like(v, np.nan), np.ones(10), krylov_dim=5)


def test_all_probes_failing(caplog):
    with caplog.at_level(logging.WARNING, logger="qremlab"):
        with pytest.raises(AllProbesFailedError):
            estimate_log_trace(lambda v: np.full_like(v, np.inf), 16, lambda x: -x, probes=8, krylov_dim=30, seed=1)
    assert "Discarding probe" in caplog.text


def test_parameter_ranges():
    with pytest.raises(InvalidParameterError):
        estimate_log_trace(lambda v: v, 16, lambda x: -x, probes=4, krylov_dim=30, seed=1)
    with pytest.raises(InvalidParameterError):
        estimate_log_trace(lambda v: v, 16, lambda x: -x, probes=8, krylov_dim=10, seed=1)


def test_rademacher_probe_entries(rng):
    probe = rademacher_probe(rng, 1000)
    assert set(np.unique(probe)) == {-1.0, 1.0}


def test_trace_estimate_of_diagonal_is_exact():
    # Rademacher probes are exact for diagonal matrices: v^T f(D) v = Tr f(D)
    diagonal = np.linspace(0.0, 4.0, 64)
    estimate = estimate_log_trace(lambda v: diagonal * v, 64, lambda x: -x, probes=8, krylov_dim=60, seed=3)
    expected = math.log(float(np.mean(np.exp(-diagonal))))
    assert estimate.log_mean == pytest.approx(expected, rel=1e-9)
    assert estimate.relative_stderr == pytest.approx(0.0, abs=1e-9)
    assert estimate.probes_used == 8
    assert estimate.probes_discarded == 0


def test_trace_estimate_is_seeded(rng):
    matrix = rng.standard_normal((128, 128))
    matrix = (matrix + matrix.T) / 8
    first = estimate_log_trace(lambda v: matrix @ v, 128, lambda x: -x, probes=10, krylov_dim=30, seed=77)
    second = estimate_log_trace(lambda v: matrix @ v, 128, lambda x: -x, probes=10, krylov_dim=30, seed=77)
    assert first.log_samples == second.log_samples
    exact = math.log(float(np.mean(np.exp(-np.linalg.eigvalsh(matrix)))))
    assert abs(first.log_mean - exact) <= 5 * first.relative_stderr + 1e-6
