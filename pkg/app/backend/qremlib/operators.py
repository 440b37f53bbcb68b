"""Matrix-free action of H = U - Gamma T on l^2 of the Hamming cube, its restrictions and extremal eigenvalues."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse
from scipy.linalg import eigh
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from .disorder import DisorderRealization
from .errors import ConvergenceError, DimensionError, DomainTooLargeError, InvalidParameterError
from .hypercube import SpinConfiguration, SubsetMask, flip_view, hamming_distance

logger = logging.getLogger("qremlab")

DENSE_MAX_DOMAIN = 2**14
NORM_TOLERANCE = 1e-9
NORM_DENSE_CUTOFF = 64
NORM_MAX_ATTEMPTS = 3
_ARPACK_TOLERANCE = 1e-12


@dataclass(frozen=True)
class HamiltonianSpec:
    """
    The operator U - Gamma T for one disorder realization, optionally restricted to a domain A.

    Attributes:
        disorder (DisorderRealization): Diagonal energies U(sigma)
        gamma (float): Transverse field strength, >= 0
        restriction (Optional[SubsetMask]): Domain A; None means the whole cube
    """

    disorder: DisorderRealization
    gamma: float
    restriction: Optional[SubsetMask] = None

    def __post_init__(self):
        if self.gamma < 0:
            raise InvalidParameterError(f"transverse field must be non-negative, got {self.gamma}")
        if self.restriction is not None and self.restriction.n != self.disorder.n:
            raise DimensionError(
                f"restriction over n={self.restriction.n} does not match disorder over n={self.disorder.n}"
            )

    @property
    def n(self) -> int:
        return self.disorder.n

    def domain(self) -> np.ndarray:
        if self.restriction is None:
            return np.arange(1 << self.n)
        return self.restriction.indices()

    def restricted_to(self, domain: SubsetMask) -> "HamiltonianSpec":
        return HamiltonianSpec(self.disorder, self.gamma, domain)


def _check_vector(v: np.ndarray, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (1 << n,):
        raise DimensionError(f"state vector must have length 2^{n}, got {v.shape}")
    return v


def transverse_apply(v: np.ndarray, n: int) -> np.ndarray:
    """(T v)(sigma) = sum_j v(F_j sigma)."""
    v = _check_vector(v, n)
    out = np.zeros_like(v)
    for j in range(n):
        out += flip_view(v, j)
    return out


def apply(spec: HamiltonianSpec, v: np.ndarray) -> np.ndarray:
    """(H v)(sigma) = U(sigma) v(sigma) - Gamma sum_j v(F_j sigma), masked to the domain when restricted."""
    v = _check_vector(v, spec.n)
    mask = None if spec.restriction is None else spec.restriction.members
    if mask is not None:
        v = np.where(mask, v, 0.0)
    out = spec.disorder.energies * v
    if spec.gamma:
        out -= spec.gamma * transverse_apply(v, spec.n)
    if mask is not None:
        out[~mask] = 0.0
    return out


def restricted_T_matrix_element(domain: SubsetMask, a: SpinConfiguration, b: SpinConfiguration) -> int:
    if a.n != domain.n or b.n != domain.n:
        raise DimensionError("configurations and domain must share the same n")
    return int(a in domain and b in domain and hamming_distance(a, b) == 1)


def _positions(domain: np.ndarray, n: int) -> np.ndarray:
    position = np.full(1 << n, -1, dtype=np.int64)
    position[domain] = np.arange(domain.shape[0])
    return position


def dense_matrix(spec: HamiltonianSpec) -> np.ndarray:
    """Dense real symmetric matrix of H on its domain, in compressed (ascending bit word) indexing."""
    domain = spec.domain()
    size = domain.shape[0]
    if size > DENSE_MAX_DOMAIN:
        raise DomainTooLargeError(f"dense matrix needs |domain| <= {DENSE_MAX_DOMAIN}, got {size}")
    position = _positions(domain, spec.n)
    matrix = np.diag(spec.disorder.energies[domain])
    rows = np.arange(size)
    for j in range(spec.n):
        cols = position[domain ^ (1 << j)]
        inside = cols >= 0
        matrix[rows[inside], cols[inside]] -= spec.gamma
    return matrix


def restricted_adjacency(domain: SubsetMask) -> scipy.sparse.csr_matrix:
    """T_A as a sparse matrix in compressed indexing."""
    members = domain.indices()
    size = members.shape[0]
    position = _positions(members, domain.n)
    rows, cols = [], []
    for j in range(domain.n):
        neighbours = position[members ^ (1 << j)]
        inside = neighbours >= 0
        rows.append(np.flatnonzero(inside))
        cols.append(neighbours[inside])
    row_idx = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    col_idx = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
    data = np.ones(row_idx.shape[0])
    return scipy.sparse.csr_matrix((data, (row_idx, col_idx)), shape=(size, size))


def _log_retry(retry_state):
    logger.warning(
        "Extremal eigenvalue iteration did not converge (attempt %d), retrying with a larger Krylov basis",
        retry_state.attempt_number,
    )


def _extremal_eigenvalue(operator, size: int, which: str) -> float:
    """Largest ('LA') or smallest ('SA') eigenvalue by implicitly restarted Lanczos."""
    # positive start overlaps the Perron vector; the ripple keeps it off any eigenvector
    v0 = 1.0 + 1e-3 * np.cos(np.arange(size))
    try:
        for attempt in Retrying(
            retry=retry_if_exception_type(ArpackNoConvergence),
            stop=stop_after_attempt(NORM_MAX_ATTEMPTS),
            before_sleep=_log_retry,
            reraise=True,
        ):
            with attempt:
                ncv = min(size - 1, 20 * attempt.retry_state.attempt_number + 1)
                values = eigsh(
                    operator,
                    k=1,
                    which=which,
                    v0=v0,
                    ncv=ncv,
                    tol=_ARPACK_TOLERANCE,
                    maxiter=10 * size,
                    return_eigenvectors=False,
                )
    except ArpackNoConvergence as exc:
        raise ConvergenceError(
            f"extremal eigenvalue ({which}) did not converge after {NORM_MAX_ATTEMPTS} attempts on a domain of size {size}"
        ) from exc
    return float(values[0])


def operator_norm(domain: SubsetMask) -> float:
    """||T_A||, the largest eigenvalue of the restricted adjacency (non-negative, so Perron-Frobenius applies)."""
    size = domain.cardinality
    if size == 0:
        raise InvalidParameterError("operator norm of T restricted to an empty set is undefined")
    adjacency = restricted_adjacency(domain)
    if adjacency.nnz == 0:
        return 0.0
    if size <= NORM_DENSE_CUTOFF:
        return float(eigh(adjacency.toarray(), eigvals_only=True)[-1])
    return _extremal_eigenvalue(adjacency, size, "LA")


def as_linear_operator(spec: HamiltonianSpec) -> LinearOperator:
    """H on its domain as a scipy LinearOperator in compressed indexing."""
    domain = spec.domain()
    size = domain.shape[0]
    full_size = 1 << spec.n

    def matvec(x):
        embedded = np.zeros(full_size)
        embedded[domain] = np.ravel(x)
        return apply(spec, embedded)[domain]

    return LinearOperator((size, size), matvec=matvec, rmatvec=matvec, dtype=np.float64)


def spectral_bounds(spec: HamiltonianSpec) -> tuple[float, float]:
    """Smallest and largest eigenvalue of H on its domain."""
    size = spec.domain().shape[0]
    if size <= NORM_DENSE_CUTOFF:
        values = eigh(dense_matrix(spec), eigvals_only=True)
        return float(values[0]), float(values[-1])
    operator = as_linear_operator(spec)
    return _extremal_eigenvalue(operator, size, "SA"), _extremal_eigenvalue(operator, size, "LA")
