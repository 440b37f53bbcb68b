"""Classical and quantum pressures per realization, quenched averages and the two variational bound checks."""

import logging
import math
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field
from scipy.linalg import eigh, expm
from scipy.special import logsumexp

from .closedform import log_cosh
from .disorder import DisorderRealization, DisorderVariant, sample
from .errors import DomainTooLargeError, InvalidParameterError
from .geometry import augment, deep_holes
from .lanczos import estimate_log_trace
from .operators import HamiltonianSpec, apply, dense_matrix, operator_norm, spectral_bounds

logger = logging.getLogger("qremlab")

DENSE_MAX_SPINS = 14
STOCHASTIC_MAX_SPINS = 26
BOUND_TOLERANCE = 1e-9
LN2 = math.log(2.0)


class PressureMethod(str, Enum):
    CLASSICAL_EXACT = "classical_exact"
    DENSE_EIG = "dense_eig"
    STOCHASTIC_LANCZOS = "stochastic_lanczos"
    CLOSED_FORM = "closed_form"


class PressureEstimate(BaseModel):
    """A (quenched) per-spin log-partition value with its noise budget.

    disorder_stderr and trace_stderr are the two noise sources; stderr combines them in quadrature.
    """

    value: float
    stderr: float = Field(ge=0.0)
    disorder_stderr: float = Field(default=0.0, ge=0.0)
    trace_stderr: float = Field(default=0.0, ge=0.0)
    num_samples: int = Field(ge=1)
    method: PressureMethod
    beta: float = Field(gt=0.0)
    gamma: float = Field(ge=0.0)
    samples: list[float] = Field(default_factory=list, exclude=True)


@dataclass
class StochasticPressure:
    value: float
    stderr: float
    probes_used: int
    probes_discarded: int


@dataclass
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool


@dataclass
class DecompositionCheck:
    """Both stages of the direct-sum upper bound, all in log space (ln of traces).

    Stage 1: ln Tr e^{-beta H} <= beta Gamma ||T_{L+}|| + ln(Tr_L e^{-beta U} + Tr_{L^c} e^{-beta H_{L^c}})
    Stage 2: the complement trace replaced by e^{beta eps N} (2 cosh beta Gamma)^N
    """

    lhs: float
    rhs: float
    holds: bool
    relaxed_rhs: float
    relaxed_holds: bool
    t_norm: float
    deep_hole_count: int
    complement_log_trace: float
    complement_paramagnet_log_trace: float
    degenerate: bool


def _check_beta(beta: float):
    if beta <= 0:
        raise InvalidParameterError(f"beta must be positive, got {beta}")


def classical_pressure(realization: DisorderRealization, beta: float) -> float:
    """(1/N)[logsumexp(-beta U) - N ln 2]."""
    _check_beta(beta)
    if not np.all(np.isfinite(realization.energies)):
        raise InvalidParameterError("energy table contains non-finite values")
    n = realization.n
    return (float(logsumexp(-beta * realization.energies)) - n * LN2) / n


def pressure_from_spectrum(eigenvalues: np.ndarray, beta: float, n: int) -> float:
    return (float(logsumexp(-beta * eigenvalues)) - n * LN2) / n


def _log_trace_exp(eigenvalues: np.ndarray, beta: float) -> float:
    if eigenvalues.shape[0] == 0:
        return -math.inf
    return float(logsumexp(-beta * eigenvalues))


def dense_spectrum(spec: HamiltonianSpec) -> np.ndarray:
    if spec.n > DENSE_MAX_SPINS:
        raise DomainTooLargeError(f"dense eigendecomposition needs N <= {DENSE_MAX_SPINS}, got {spec.n}")
    if spec.domain().shape[0] == 0:
        return np.empty(0)
    return eigh(dense_matrix(spec), eigvals_only=True)


def quantum_pressure_dense(spec: HamiltonianSpec, beta: float) -> float:
    _check_beta(beta)
    if spec.restriction is not None:
        raise InvalidParameterError("the quantum pressure is defined on the full cube; drop the restriction")
    return pressure_from_spectrum(dense_spectrum(spec), beta, spec.n)


def matrix_exponential_pressure(spec: HamiltonianSpec, beta: float) -> float:
    """Pressure from a scaling-and-squaring matrix exponential (independent of the eigendecomposition)."""
    _check_beta(beta)
    matrix = dense_matrix(spec)
    # shift by the smallest diagonal entry to keep the exponential in range
    shift = float(np.min(np.diag(matrix))) - spec.gamma * spec.n
    trace = float(np.trace(expm(-beta * (matrix - shift * np.eye(matrix.shape[0])))))
    return (math.log(trace) - beta * shift - spec.n * LN2) / spec.n


def quantum_pressure_stochastic(
    spec: HamiltonianSpec, beta: float, probes: int, krylov_dim: int, seed: int
) -> StochasticPressure:
    """Hutchinson trace estimate of Tr e^{-beta H} / 2^N with Lanczos quadrature, turned into a pressure.

    The standard error follows from the probe variance by the delta method on the logarithm.
    """
    _check_beta(beta)
    if spec.n > STOCHASTIC_MAX_SPINS:
        raise DomainTooLargeError(f"stochastic engine needs N <= {STOCHASTIC_MAX_SPINS}, got {spec.n}")
    if spec.restriction is not None:
        raise InvalidParameterError("the quantum pressure is defined on the full cube; drop the restriction")
    estimate = estimate_log_trace(
        matvec=lambda v: apply(spec, v),
        size=1 << spec.n,
        log_f=lambda nodes: -beta * nodes,
        probes=probes,
        krylov_dim=krylov_dim,
        seed=seed,
    )
    n = spec.n
    return StochasticPressure(
        value=estimate.log_mean / n,
        stderr=estimate.relative_stderr / n,
        probes_used=estimate.probes_used,
        probes_discarded=estimate.probes_discarded,
    )


def resolve_method(method: Optional[PressureMethod | str], n: int, gamma: float) -> PressureMethod:
    if method is None or method == "auto":
        if gamma == 0:
            return PressureMethod.CLASSICAL_EXACT
        return PressureMethod.DENSE_EIG if n <= 10 else PressureMethod.STOCHASTIC_LANCZOS
    method = PressureMethod(method)
    if method == PressureMethod.CLASSICAL_EXACT and gamma != 0:
        raise InvalidParameterError("the classical engine only evaluates gamma = 0")
    if method == PressureMethod.CLOSED_FORM:
        raise InvalidParameterError("closed forms are evaluated by the closedform module, not per realization")
    return method


def realization_pressure(
    realization: DisorderRealization,
    beta: float,
    gamma: float,
    method: PressureMethod,
    probes: int = 32,
    krylov_dim: int = 60,
) -> tuple[float, float]:
    """(value, trace stderr) for one realization with the chosen engine."""
    if method == PressureMethod.CLASSICAL_EXACT:
        return classical_pressure(realization, beta), 0.0
    spec = HamiltonianSpec(realization, gamma)
    if method == PressureMethod.DENSE_EIG:
        return quantum_pressure_dense(spec, beta), 0.0
    # probe stream tied to the disorder seed, offset so it never coincides with the coupling stream
    result = quantum_pressure_stochastic(spec, beta, probes, krylov_dim, seed=(realization.seed + 2**63) % 2**64)
    return result.value, result.stderr


def quenched_pressure(
    variant: DisorderVariant,
    n: int,
    beta: float,
    gamma: float,
    num_disorder: int,
    base_seed: int,
    method: Optional[PressureMethod | str] = None,
    probes: int = 32,
    krylov_dim: int = 60,
    workers: int = 1,
) -> PressureEstimate:
    """Mean pressure over realizations with seeds base_seed .. base_seed + num_disorder - 1.

    Realizations are evaluated concurrently and collected in seed order; the mean uses an exactly
    rounded sum, so the value does not depend on the number of workers.
    """
    if num_disorder < 2:
        raise InvalidParameterError(f"quenched average needs at least 2 realizations, got {num_disorder}")
    _check_beta(beta)
    chosen = resolve_method(method, n, gamma)
    started = time.perf_counter()

    def evaluate(seed: int) -> tuple[float, float]:
        return realization_pressure(sample(variant, n, seed), beta, gamma, chosen, probes, krylov_dim)

    seeds = range(base_seed, base_seed + num_disorder)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(evaluate, seeds))
    else:
        results = [evaluate(seed) for seed in seeds]

    values = [value for value, _ in results]
    mean = math.fsum(values) / num_disorder
    deviations = [(value - mean) ** 2 for value in values]
    disorder_stderr = math.sqrt(math.fsum(deviations) / (num_disorder - 1) / num_disorder)
    trace_stderr = math.sqrt(math.fsum(s * s for _, s in results)) / num_disorder
    logger.info(
        "Quenched pressure %s n=%d beta=%g gamma=%g: %.6f (%d realizations, %.2fs)",
        variant.label,
        n,
        beta,
        gamma,
        mean,
        num_disorder,
        time.perf_counter() - started,
    )
    return PressureEstimate(
        value=mean,
        stderr=math.hypot(disorder_stderr, trace_stderr),
        disorder_stderr=disorder_stderr,
        trace_stderr=trace_stderr,
        num_samples=num_disorder,
        method=chosen,
        beta=beta,
        gamma=gamma,
        samples=values,
    )


def gibbs_bound_check(realization: DisorderRealization, beta: float, gamma: float) -> BoundCheck:
    """Phi(beta, Gamma) >= max{Phi(beta, 0), ln cosh(beta Gamma) - beta mean(U)/N} per realization.

    The two terms are the Gibbs variational functional at the classical Gibbs state and at the
    paramagnet Gibbs state e^{beta Gamma T}, whose diagonal is uniform.
    """
    _check_beta(beta)
    lhs = quantum_pressure_dense(HamiltonianSpec(realization, gamma), beta)
    classical = classical_pressure(realization, beta)
    paramagnet = log_cosh(beta * gamma) - beta * float(np.mean(realization.energies)) / realization.n
    rhs = max(classical, paramagnet)
    return BoundCheck(lhs=lhs, rhs=rhs, holds=lhs >= rhs - BOUND_TOLERANCE)


def decomposition_bound_check(
    realization: DisorderRealization, beta: float, gamma: float, epsilon: float
) -> DecompositionCheck:
    """Check the direct-sum trace bound exactly with dense restricted blocks."""
    _check_beta(beta)
    if epsilon <= 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
    n = realization.n
    holes = deep_holes(realization, epsilon)
    augmented = augment(holes)
    complement = holes.mask.complement()
    degenerate = complement.is_empty()
    if degenerate:
        logger.warning("Deep-hole set covers the whole cube at epsilon=%g; complement block is empty", epsilon)

    full = HamiltonianSpec(realization, gamma)
    lhs = _log_trace_exp(dense_spectrum(full), beta)

    t_norm = 0.0 if augmented.is_empty() else operator_norm(augmented)
    deep_log_trace = _log_trace_exp(realization.energies[holes.mask.members], beta)
    complement_log_trace = _log_trace_exp(dense_spectrum(full.restricted_to(complement)), beta)
    rhs = beta * gamma * t_norm + float(np.logaddexp(deep_log_trace, complement_log_trace))

    # Tr_{L^c} e^{beta Gamma T_{L^c}} <= (2 cosh beta Gamma)^N by monotonicity in the domain
    paramagnet_block = HamiltonianSpec(_zero_landscape(realization), gamma, complement)
    complement_paramagnet_log_trace = _log_trace_exp(dense_spectrum(paramagnet_block), beta)
    full_paramagnet_log_trace = n * (LN2 + log_cosh(beta * gamma))
    classical_log_trace = _log_trace_exp(realization.energies, beta)
    relaxed_rhs = beta * gamma * t_norm + float(
        np.logaddexp(classical_log_trace, beta * epsilon * n + full_paramagnet_log_trace)
    )
    slack = math.log1p(BOUND_TOLERANCE)
    chain_holds = (
        complement_log_trace <= beta * epsilon * n + complement_paramagnet_log_trace + slack
        and complement_paramagnet_log_trace <= full_paramagnet_log_trace + slack
    )
    return DecompositionCheck(
        lhs=lhs,
        rhs=rhs,
        holds=lhs <= rhs + slack,
        relaxed_rhs=relaxed_rhs,
        relaxed_holds=rhs <= relaxed_rhs + slack and chain_holds,
        t_norm=t_norm,
        deep_hole_count=holes.mask.cardinality,
        complement_log_trace=complement_log_trace,
        complement_paramagnet_log_trace=complement_paramagnet_log_trace,
        degenerate=degenerate,
    )


def _zero_landscape(realization: DisorderRealization) -> DisorderRealization:
    return DisorderRealization(np.zeros_like(realization.energies), realization.variant, realization.n, realization.seed)


def beta_lipschitz_constant(spec: HamiltonianSpec) -> float:
    """max |eigenvalue| / N, bounding |d Phi / d beta|."""

    low, high = spectral_bounds(spec)
    return max(abs(low), abs(high)) / spec.n


def exceedance_fractions(values: Sequence[float], beta: float, n: int, ts: Sequence[float]) -> list[tuple[float, float, float, float]]:
    """For each t: (t, empirical fraction of |Phi - mean| > t beta / sqrt(N), bound 2e^{-t^2/4}, binomial stderr of the bound)."""
    samples = np.asarray(values, dtype=np.float64)
    mean = math.fsum(samples.tolist()) / samples.shape[0]
    deviations = np.abs(samples - mean)
    rows = []
    for t in ts:
        fraction = float(np.count_nonzero(deviations > t * beta / math.sqrt(n))) / samples.shape[0]
        bound = 2.0 * math.exp(-t * t / 4.0)
        reference = min(bound, 1.0)
        stderr = math.sqrt(reference * (1.0 - reference) / samples.shape[0])
        rows.append((t, fraction, bound, stderr))
    return rows
