"""Stochastic Lanczos quadrature for log Tr f(H) with Rademacher probes."""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import logsumexp

from .errors import AllProbesFailedError, InvalidParameterError, LanczosBreakdownError

logger = logging.getLogger("qremlab")

MIN_PROBES = 8
MIN_KRYLOV_DIM = 30
MAX_KRYLOV_DIM = 200
# Relative size of beta_k below which the Krylov space is invariant and quadrature is exact
INVARIANT_SUBSPACE_TOL = 1e-10
# Full reorthogonalization keeps the whole Krylov basis (steps x 2^N floats)
REORTHOGONALIZATION_MAX_ENTRIES = 2**27


@dataclass
class TridiagonalRecurrence:
    alphas: np.ndarray
    betas: np.ndarray
    start_norm_sq: float

    @property
    def steps(self) -> int:
        return self.alphas.shape[0]


def lanczos_tridiagonal(
    matvec: Callable[[np.ndarray], np.ndarray],
    start: np.ndarray,
    krylov_dim: int,
    reorthogonalize: Optional[bool] = None,
) -> TridiagonalRecurrence:
    """Lanczos started from `start`, with full reorthogonalization unless the basis would not fit in memory.

    Stops early, without error, when the Krylov space becomes invariant. Non-finite
    recurrence coefficients raise LanczosBreakdownError.
    """
    size = start.shape[0]
    steps = min(krylov_dim, size)
    if reorthogonalize is None:
        reorthogonalize = steps * size <= REORTHOGONALIZATION_MAX_ENTRIES
    start_norm_sq = float(start @ start)
    current = start / math.sqrt(start_norm_sq)
    previous = np.zeros(size)
    basis = np.zeros((steps, size)) if reorthogonalize else None
    alphas: list[float] = []
    betas: list[float] = []
    beta = 0.0
    scale = 0.0
    for k in range(steps):
        if basis is not None:
            basis[k] = current
        w = matvec(current)
        alpha = float(current @ w)
        alphas.append(alpha)
        if not math.isfinite(alpha):
            raise LanczosBreakdownError(f"non-finite alpha at Lanczos step {k}")
        if k == steps - 1:
            break
        w -= alpha * current + beta * previous
        if basis is not None:
            for _ in range(2):
                w -= basis[: k + 1].T @ (basis[: k + 1] @ w)
        beta = float(np.linalg.norm(w))
        if not math.isfinite(beta):
            raise LanczosBreakdownError(f"non-finite beta at Lanczos step {k}")
        scale = max(scale, abs(alpha), beta)
        if beta <= INVARIANT_SUBSPACE_TOL * max(scale, 1.0):
            break
        betas.append(beta)
        previous, current = current, w / beta
    return TridiagonalRecurrence(np.array(alphas), np.array(betas), start_norm_sq)


def log_quadrature(recurrence: TridiagonalRecurrence, log_f: Callable[[np.ndarray], np.ndarray]) -> float:
    """log(v^T f(A) v) from the Gauss quadrature rule of the tridiagonal matrix, for f given in log form."""
    if recurrence.steps == 1:
        nodes = recurrence.alphas
        weights_sq = np.ones(1)
    else:
        nodes, vectors = eigh_tridiagonal(recurrence.alphas, recurrence.betas)
        weights_sq = vectors[0] ** 2
    with np.errstate(divide="ignore"):
        log_weights = np.log(weights_sq)
    return float(logsumexp(log_weights + log_f(nodes))) + math.log(recurrence.start_norm_sq)


@dataclass
class TraceEstimate:
    """Hutchinson estimate of log(Tr f(A) / dim) from Lanczos quadrature.

    log_mean: log of the probe mean of v^T f(A) v / dim
    relative_stderr: standard error of that mean divided by the mean (delta method for the log)
    """

    log_mean: float
    relative_stderr: float
    probes_used: int
    probes_discarded: int
    log_samples: list[float] = field(default_factory=list)


def rademacher_probe(generator: np.random.Generator, size: int) -> np.ndarray:
    return 2.0 * generator.integers(0, 2, size=size).astype(np.float64) - 1.0


def estimate_log_trace(
    matvec: Callable[[np.ndarray], np.ndarray],
    size: int,
    log_f: Callable[[np.ndarray], np.ndarray],
    probes: int,
    krylov_dim: int,
    seed: int,
) -> TraceEstimate:
    if probes < MIN_PROBES:
        raise InvalidParameterError(f"need at least {MIN_PROBES} probes, got {probes}")
    if not MIN_KRYLOV_DIM <= krylov_dim <= MAX_KRYLOV_DIM:
        raise InvalidParameterError(f"krylov_dim must lie in [{MIN_KRYLOV_DIM}, {MAX_KRYLOV_DIM}], got {krylov_dim}")
    generator = np.random.Generator(np.random.Philox(seed))
    log_samples: list[float] = []
    discarded = 0
    for i in range(probes):
        probe = rademacher_probe(generator, size)
        try:
            recurrence = lanczos_tridiagonal(matvec, probe, krylov_dim)
        except LanczosBreakdownError as exc:
            discarded += 1
            logger.warning("Discarding probe %d: %s", i, exc)
            continue
        # Rademacher probes have |v|^2 = size, so this is v^T f(A) v / size
        log_samples.append(log_quadrature(recurrence, log_f) - math.log(size))
    if not log_samples:
        raise AllProbesFailedError(f"all {probes} Lanczos probes broke down")
    samples = np.array(log_samples)
    used = samples.shape[0]
    log_mean = float(logsumexp(samples)) - math.log(used)
    if used > 1:
        ratios = np.exp(samples - log_mean)
        relative_stderr = float(ratios.std(ddof=1) / math.sqrt(used))
    else:
        relative_stderr = math.inf
    return TraceEstimate(log_mean, relative_stderr, used, discarded, log_samples)
