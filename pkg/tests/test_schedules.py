import math

import numpy as np
import pytest
from scipy.integrate import quad

from sgm_schedules.errors import DomainError
from sgm_schedules.models import Schedule
from sgm_schedules.process.schedules import (
    backward_beta,
    backward_decay,
    beta,
    beta_integral,
    check_monotone,
    m_sigma,
    total_integral,
)

ALL_KINDS = [
    Schedule.linear(),
    Schedule.cosine(),
    Schedule.parametric(-10.0),
    Schedule.parametric(-1.0),
    Schedule.parametric(1.0),
    Schedule.parametric(10.0),
    Schedule.parametric(50.0),
]


def test_linear_values():
    s = Schedule.linear()
    assert beta(s, 0.0) == pytest.approx(0.1, rel=1e-14)
    assert beta(s, 1.0) == pytest.approx(20.0, rel=1e-14)
    assert beta(s, 0.5) == pytest.approx(10.05, rel=1e-14)


def test_cosine_starts_near_point_one():
    assert beta(Schedule.cosine(), 0.0) == pytest.approx(0.1, abs=1e-3)


def test_cosine_clip():
    s = Schedule.cosine()
    assert beta(s, 0.999, clip=False) > 200.0
    assert beta(s, 0.999) == 200.0
    assert np.max(beta(s, np.linspace(0, 1, 1001))) <= 200.0


def test_linear_integral():
    assert beta_integral(Schedule.linear(), 0.0, 1.0) == pytest.approx(10.05, rel=1e-14)


@pytest.mark.parametrize("sched", ALL_KINDS, ids=lambda s: s.label)
def test_empty_interval(sched):
    assert beta_integral(sched, 0.3, 0.3) == 0.0


def test_parametric_integral_matches_quadrature():
    s = Schedule.parametric(1.0)
    oracle, _ = quad(lambda t: beta(s, t), 0.0, 1.0, epsabs=0.0, epsrel=1e-13)
    assert beta_integral(s, 0.0, 1.0) == pytest.approx(oracle, rel=1e-10)


@pytest.mark.parametrize("sched", ALL_KINDS, ids=lambda s: s.label)
@pytest.mark.parametrize("t", [0.1, 0.5, 0.9995])
def test_integral_derivative_is_beta(sched, t):
    step = 1e-7
    deriv = (beta_integral(sched, 0.0, t + step) - beta_integral(sched, 0.0, t - step)) / (2 * step)
    assert deriv == pytest.approx(beta(sched, t), rel=1e-5)


def test_m_sigma_at_zero():
    for sched in ALL_KINDS:
        m, sig2 = m_sigma(sched, 0.0)
        assert m == 1.0
        assert sig2 == 0.0


def test_m_sigma_linear_at_one():
    m, sig2 = m_sigma(Schedule.linear(), 1.0)
    assert m == pytest.approx(math.exp(-5.025), rel=1e-12)
    assert sig2 == pytest.approx(1.0 - math.exp(-10.05), rel=1e-12)


def test_m_sigma_constant_beta():
    s = Schedule.linear(beta0=2.0, beta1=2.0)
    m, sig2 = m_sigma(s, 1.0)
    assert m == pytest.approx(math.exp(-1.0), rel=1e-14)
    assert sig2 == pytest.approx(1.0 - math.exp(-2.0), rel=1e-14)


@pytest.mark.parametrize("sched", ALL_KINDS + [Schedule.linear(sigma2=2.0)], ids=lambda s: f"{s.label}-{s.sigma2}")
def test_marginal_identity_and_monotonicity(sched):
    t = np.linspace(0.0, 1.0, 1001)
    m, sig2 = m_sigma(sched, t)
    np.testing.assert_allclose(m ** 2 + sig2 / sched.sigma2, 1.0, rtol=0, atol=1e-14)
    assert np.all(np.diff(m) < 0)
    assert np.all(np.diff(sig2) > 0)


@pytest.mark.parametrize("sched", ALL_KINDS, ids=lambda s: s.label)
def test_schedules_nondecreasing(sched):
    assert check_monotone(sched, n=1000)


def test_parametric_small_a_converges_to_linear():
    t = np.linspace(0.0, 1.0, 1001)
    lin = beta(Schedule.linear(), t)
    for a in (1e-9, -1e-9):
        assert np.max(np.abs(beta(Schedule.parametric(a), t) - lin)) <= 1e-6


def test_parametric_pins_endpoints():
    for a in (-10.0, 3.0, 50.0):
        s = Schedule.parametric(a)
        assert beta(s, 0.0) == pytest.approx(0.1, rel=1e-12)
        assert beta(s, 1.0) == pytest.approx(20.0, rel=1e-12)
        assert np.isfinite(total_integral(s)) and total_integral(s) > 0


def test_total_integral_decreases_with_a():
    totals = [total_integral(Schedule.parametric(a)) for a in (-10.0, -1.0, 1.0, 10.0)]
    assert totals == sorted(totals, reverse=True)


def test_backward_helpers():
    s = Schedule.linear()
    assert backward_beta(s, 0.0) == pytest.approx(20.0)
    assert backward_beta(s, 1.0) == pytest.approx(0.1)
    assert backward_decay(s, 1.0) == pytest.approx(m_sigma(s, 1.0)[0], rel=1e-14)


def test_vectorized_shapes():
    s = Schedule.parametric(2.0)
    t = np.linspace(0.0, 1.0, 7)
    assert np.shape(beta(s, t)) == (7,)
    assert np.shape(beta_integral(s, np.zeros(7), t)) == (7,)
    assert isinstance(beta(s, 0.5), float)


def test_domain_errors():
    s = Schedule.linear()
    with pytest.raises(DomainError):
        beta(s, 1.5)
    with pytest.raises(DomainError):
        beta(s, -0.1)
    with pytest.raises(DomainError):
        beta_integral(s, 0.5, 0.2)


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule.linear(beta0=1.0, beta1=0.5)
    with pytest.raises(ValueError):
        Schedule(kind="quadratic")
    with pytest.raises(ValueError):
        Schedule.cosine(s=0.0)


def test_schedule_dict_round_trip():
    s = Schedule.parametric(1.75, beta1=15.0)
    assert Schedule.from_dict(s.to_dict()) == s
