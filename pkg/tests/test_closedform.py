import math

import pytest

from qremlib.closedform import (
    BETA_C,
    QremBranch,
    annealed_pressure,
    critical_field,
    log_cosh,
    one_over_p_correction,
    one_over_p_term,
    paramagnet_pressure,
    qrem_branch,
    qrem_pressure,
    rem_pressure,
    upper_bound_pressure,
)
from qremlib.disorder import DisorderVariant
from qremlib.errors import CriticalLineError, InvalidParameterError


def test_beta_c():
    assert BETA_C == pytest.approx(1.1774100225154747)


def test_rem_pressure_branches():
    assert rem_pressure(1.0) == pytest.approx(0.5)
    assert rem_pressure(2.0) == pytest.approx(2 * BETA_C - math.log(2))
    # continuous with matching slope at beta_c
    assert rem_pressure(BETA_C) == pytest.approx(math.log(2))
    with pytest.raises(InvalidParameterError):
        rem_pressure(-0.1)


def test_log_cosh_large_argument():
    assert log_cosh(1000.0) == pytest.approx(1000.0 - math.log(2))
    assert log_cosh(-3.0) == pytest.approx(math.log(math.cosh(3.0)))
    assert log_cosh(0.0) == 0.0


def test_critical_field_at_one():
    assert critical_field(1.0) == pytest.approx(math.acosh(math.exp(0.5)), rel=1e-12)
    assert critical_field(1.0) == pytest.approx(1.085038, abs=1e-6)


@pytest.mark.parametrize("beta", [0.3, 1.0, BETA_C, 2.0, 5.0])
def test_pressures_cross_at_critical_field(beta):
    gamma_c = critical_field(beta)
    assert paramagnet_pressure(beta, gamma_c) == pytest.approx(rem_pressure(beta), rel=1e-10)
    assert qrem_branch(beta, 0.9 * gamma_c) == QremBranch.CLASSICAL
    assert qrem_branch(beta, 1.1 * gamma_c) == QremBranch.PARAMAGNETIC


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_field_derivative_jumps_at_critical_field(beta):
    gamma_c = critical_field(beta)
    step = 1e-7
    left = (qrem_pressure(beta, gamma_c) - qrem_pressure(beta, gamma_c - step)) / step
    right = (qrem_pressure(beta, gamma_c + step) - qrem_pressure(beta, gamma_c)) / step
    assert left == pytest.approx(0.0, abs=1e-6)
    assert right == pytest.approx(beta * math.tanh(beta * gamma_c), rel=1e-4)
    assert right - left > 0.1


def test_qrem_pressure_is_max():
    assert qrem_pressure(1.0, 0.0) == pytest.approx(0.5)
    assert qrem_pressure(1.0, 3.0) == pytest.approx(log_cosh(3.0))
    with pytest.raises(InvalidParameterError):
        qrem_pressure(0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        qrem_pressure(1.0, -1.0)


def test_one_over_p_paramagnetic_example():
    assert one_over_p_term(1.0, 2.0) == pytest.approx(1.0 / (4.0 * math.tanh(2.0)))
    correction = one_over_p_correction(1.0, 2.0, 10) - qrem_pressure(1.0, 2.0)
    assert correction == pytest.approx(0.025933, abs=1e-6)


def test_one_over_p_classical_regimes():
    assert one_over_p_term(1.0, 0.5) == pytest.approx(0.125)
    assert one_over_p_term(2.0, 0.5) == pytest.approx(0.25 * 2.0 / (2 * BETA_C))


def test_one_over_p_infinite_order():
    assert one_over_p_correction(1.0, 2.0, math.inf) == qrem_pressure(1.0, 2.0)
    with pytest.raises(InvalidParameterError):
        one_over_p_correction(1.0, 2.0, 0)


def test_one_over_p_on_critical_line():
    with pytest.raises(CriticalLineError):
        one_over_p_term(1.0, critical_field(1.0))
    with pytest.raises(CriticalLineError):
        one_over_p_term(BETA_C, 0.1)


def test_annealed_pressure_full_variant():
    for p in (2, 3, 4):
        assert annealed_pressure(DisorderVariant.full(p), 10, 1.5) == pytest.approx(0.5 * 1.5**2)
    assert annealed_pressure(DisorderVariant.rem(), 10, 1.0) == pytest.approx(0.5)


def test_upper_bound_pressure_dominates_classical():
    value = upper_bound_pressure(1.0, 0.5, 0.5, 0.2, 0.01, 4)
    assert value == pytest.approx(2 * 0.5 * math.sqrt(0.04) + max(0.5, 0.2 + log_cosh(0.5)))
    assert value >= qrem_pressure(1.0, 0.5)
