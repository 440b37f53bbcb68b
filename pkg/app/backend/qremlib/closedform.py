"""Closed-form pressures of the REM and the quantum REM, the critical field and the 1/p corrections."""

import math
from enum import Enum

from .disorder import DisorderVariant, covariance_exact
from .errors import CriticalLineError, InvalidParameterError

BETA_C = math.sqrt(2.0 * math.log(2.0))
CRITICAL_LINE_BAND = 1e-12


class QremBranch(str, Enum):
    CLASSICAL = "classical"
    PARAMAGNETIC = "paramagnetic"


def log_cosh(x: float) -> float:
    """ln cosh x without overflow."""
    x = abs(x)
    return x + math.log1p(math.exp(-2.0 * x)) - math.log(2.0)


def rem_pressure(beta: float) -> float:
    """Limiting REM pressure: beta^2/2 below beta_c, beta beta_c - beta_c^2/2 above."""
    if beta < 0:
        raise InvalidParameterError(f"beta must be non-negative, got {beta}")
    if beta <= BETA_C:
        return 0.5 * beta * beta
    return beta * BETA_C - 0.5 * BETA_C * BETA_C


def paramagnet_pressure(beta: float, gamma: float) -> float:
    return log_cosh(beta * gamma)


def qrem_pressure(beta: float, gamma: float) -> float:
    if beta <= 0 or gamma < 0:
        raise InvalidParameterError(f"need beta > 0 and gamma >= 0, got beta={beta}, gamma={gamma}")
    return max(rem_pressure(beta), paramagnet_pressure(beta, gamma))


def qrem_branch(beta: float, gamma: float) -> QremBranch:
    """Which argument of the max wins; ties go to the classical branch."""
    if paramagnet_pressure(beta, gamma) > rem_pressure(beta):
        return QremBranch.PARAMAGNETIC
    return QremBranch.CLASSICAL


def _arcosh_exp(x: float) -> float:
    # arcosh(e^x) = x + ln(1 + sqrt(1 - e^{-2x})) for x >= 0
    return x + math.log1p(math.sqrt(-math.expm1(-2.0 * x)))


def critical_field(beta: float) -> float:
    """Gamma_c(beta) = arcosh(exp(Phi_REM(beta))) / beta."""
    if beta <= 0:
        raise InvalidParameterError(f"beta must be positive, got {beta}")
    return _arcosh_exp(rem_pressure(beta)) / beta


def one_over_p_term(beta: float, gamma: float) -> float:
    """Coefficient of 1/p in the second-order perturbative correction to the QREM pressure."""
    if beta <= 0 or gamma < 0:
        raise InvalidParameterError(f"need beta > 0 and gamma >= 0, got beta={beta}, gamma={gamma}")
    gamma_c = critical_field(beta)
    if abs(gamma - gamma_c) < CRITICAL_LINE_BAND:
        raise CriticalLineError(beta, gamma)
    if gamma > gamma_c:
        return beta / (2.0 * gamma * math.tanh(beta * gamma))
    if abs(beta - BETA_C) < CRITICAL_LINE_BAND:
        raise CriticalLineError(beta, gamma)
    if beta < BETA_C:
        return 0.5 * gamma * gamma
    return gamma * gamma * beta / (2.0 * BETA_C)


def one_over_p_correction(beta: float, gamma: float, p: float) -> float:
    """Phi_inf(beta, Gamma) + (1/p) times the regime coefficient; p may be math.inf."""
    if p <= 0:
        raise InvalidParameterError(f"p must be positive, got {p}")
    return qrem_pressure(beta, gamma) + one_over_p_term(beta, gamma) / p


def annealed_pressure(variant: DisorderVariant, n: int, beta: float) -> float:
    """(1/N) ln E[2^-N Z] = beta^2 c_{p,N}(1) / 2, exact for a centered Gaussian landscape."""
    return 0.5 * beta * beta * covariance_exact(variant, n, 0) / n


def upper_bound_pressure(beta: float, gamma: float, classical: float, epsilon: float, r: float, L: int) -> float:
    """2 beta Gamma sqrt(rL) + max{classical pressure, beta epsilon + ln cosh(beta Gamma)}.

    The bound on the pressure that holds on the event that every cluster has diameter at most NrL.
    """
    return 2.0 * beta * gamma * math.sqrt(r * L) + max(classical, beta * epsilon + log_cosh(beta * gamma))
