"""
Closed-form noise schedules.

Every function accepts a float or a numpy array of times and returns the
same shape. Times are forward times in [0, T] unless stated otherwise.
"""

from typing import Tuple, Union

import numpy as np

from .. import config
from ..errors import DomainError
from ..models import Schedule

ArrayLike = Union[float, np.ndarray]

# relative slack on the [0, T] check, absorbs k*h round-off
_TIME_SLACK = 1e-12
# |x| below which expm1(x) - x switches to its Taylor series
_SERIES_CUTOFF = 1e-3
# a*T above which the parametric forms are rewritten around t = T
_LARGE_AT = 30.0


def _times(sched: Schedule, t: ArrayLike) -> np.ndarray:
    arr = np.asarray(t, dtype=np.float64)
    slack = _TIME_SLACK * sched.T
    if np.any(~np.isfinite(arr)) or np.any(arr < -slack) or np.any(arr > sched.T + slack):
        raise DomainError(f"time outside [0, {sched.T}]: {t}")
    return np.clip(arr, 0.0, sched.T)


def _out(value: np.ndarray, like: ArrayLike) -> ArrayLike:
    if np.ndim(like) == 0:
        return float(value)
    return value


def _expm1_minus_x(x: np.ndarray) -> np.ndarray:
    small = np.abs(x) < _SERIES_CUTOFF
    xs = np.where(small, x, 0.0)
    series = xs ** 2 / 2 + xs ** 3 / 6 + xs ** 4 / 24 + xs ** 5 / 120
    with np.errstate(over="ignore"):
        direct = np.expm1(np.where(small, 0.0, x)) - np.where(small, 0.0, x)
    return np.where(small, series, direct)


def _parametric_shape(sched: Schedule, t: np.ndarray) -> np.ndarray:
    """(e^{a t} - 1) / (e^{a T} - 1), in [0, 1]."""
    a, T = sched.a, sched.T
    if a * T > _LARGE_AT:
        return np.exp(a * (t - T)) * (-np.expm1(-a * t)) / (-np.expm1(-a * T))
    return np.expm1(a * t) / np.expm1(a * T)


def _parametric_shape_integral(sched: Schedule, t0: np.ndarray, t1: np.ndarray) -> np.ndarray:
    a, T = sched.a, sched.T
    if a * T > _LARGE_AT:
        denom = -np.expm1(-a * T)
        exp_part = (np.exp(a * (t1 - T)) - np.exp(a * (t0 - T))) / a
        return (exp_part - (t1 - t0) * np.exp(-a * T)) / denom
    return (_expm1_minus_x(a * t1) - _expm1_minus_x(a * t0)) / (a * np.expm1(a * T))


def _cosine_theta(sched: Schedule, t: np.ndarray) -> np.ndarray:
    return np.pi * (sched.s + t / sched.T) / (2.0 * (sched.s + 1.0))


def _cosine_rate(sched: Schedule) -> float:
    """d theta / dt."""
    return np.pi / (2.0 * sched.T * (sched.s + 1.0))


def _cosine_clip_time(sched: Schedule) -> float:
    """Time at which beta_cos reaches the clip level (clamped to [0, T])."""
    rate = _cosine_rate(sched)
    theta_c = np.arctan(sched.clip / (2.0 * sched.sigma2 * rate))
    t_c = sched.T * (theta_c * 2.0 * (sched.s + 1.0) / np.pi - sched.s)
    return float(np.clip(t_c, 0.0, sched.T))


def _cosine_log_cos_integral(sched: Schedule, t0: np.ndarray, t1: np.ndarray) -> np.ndarray:
    # beta_cos = 2 sigma2 theta' tan(theta)  =>  int beta_cos = -2 sigma2 log cos(theta)
    c0 = np.cos(_cosine_theta(sched, t0))
    c1 = np.cos(_cosine_theta(sched, t1))
    return 2.0 * sched.sigma2 * (np.log(c0) - np.log(c1))


def beta(sched: Schedule, t: ArrayLike, clip: bool = True) -> ArrayLike:
    """
    Schedule value beta(t).

    clip only affects the cosine kind (ceiling sched.clip).
    """
    tt = _times(sched, t)
    if sched.kind == "cosine":
        value = (
            sched.sigma2 * np.pi / (sched.T * (sched.s + 1.0))
            * np.tan(_cosine_theta(sched, tt))
        )
        if clip:
            value = np.minimum(value, sched.clip)
    elif sched.is_linear:
        value = sched.beta0 + (sched.beta1 - sched.beta0) * tt / sched.T
    else:
        value = sched.beta0 + (sched.beta1 - sched.beta0) * _parametric_shape(sched, tt)
    return _out(np.asarray(value, dtype=np.float64), t)


def beta_integral(sched: Schedule, t0: ArrayLike, t1: ArrayLike, clip: bool = True) -> ArrayLike:
    """
    Closed-form integral of beta over [t0, t1]; requires t0 <= t1.
    """
    a0 = _times(sched, t0)
    a1 = _times(sched, t1)
    if np.any(a1 < a0):
        raise DomainError(f"integral bounds reversed: [{t0}, {t1}]")

    if sched.kind == "cosine":
        if clip:
            t_c = _cosine_clip_time(sched)
            lo0, lo1 = np.minimum(a0, t_c), np.minimum(a1, t_c)
            value = _cosine_log_cos_integral(sched, lo0, lo1)
            value = value + sched.clip * (np.maximum(a1, t_c) - np.maximum(a0, t_c))
        else:
            value = _cosine_log_cos_integral(sched, a0, a1)
    elif sched.is_linear:
        value = sched.beta0 * (a1 - a0) + (sched.beta1 - sched.beta0) * (a1 ** 2 - a0 ** 2) / (2.0 * sched.T)
    else:
        value = sched.beta0 * (a1 - a0) + (sched.beta1 - sched.beta0) * _parametric_shape_integral(sched, a0, a1)

    like = t1 if np.ndim(t1) else t0
    return _out(np.asarray(value, dtype=np.float64), like)


def m_sigma(sched: Schedule, t: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """
    (m_t, sigma_t^2) with m_t = exp(-int_0^t beta / (2 sigma2)) and
    sigma_t^2 = sigma2 (1 - m_t^2), computed from the same integral.
    """
    tt = _times(sched, t)
    integral = np.asarray(beta_integral(sched, np.zeros_like(tt), tt), dtype=np.float64)
    m = np.exp(-integral / (2.0 * sched.sigma2))
    sig2 = -sched.sigma2 * np.expm1(-integral / sched.sigma2)
    return _out(m, t), _out(sig2, t)


def backward_beta(sched: Schedule, t: ArrayLike) -> ArrayLike:
    """beta_bar(t) = beta(T - t) for backward time t."""
    tt = _times(sched, t)
    return _out(np.asarray(beta(sched, sched.T - tt)), t)


def backward_decay(sched: Schedule, t: ArrayLike) -> ArrayLike:
    """m_tilde_t = exp(-int_0^t beta_bar / (2 sigma2)) in backward time."""
    tt = _times(sched, t)
    integral = np.asarray(beta_integral(sched, sched.T - tt, np.full_like(tt, sched.T)))
    return _out(np.exp(-integral / (2.0 * sched.sigma2)), t)


def total_integral(sched: Schedule) -> float:
    """int_0^T beta."""
    return float(beta_integral(sched, 0.0, sched.T))


def beta_max(sched: Schedule) -> float:
    """beta(T): the largest value of a nondecreasing schedule."""
    return float(beta(sched, sched.T))


def check_monotone(sched: Schedule, n: int = 1001) -> bool:
    """Numerical nondecreasing check on a dense grid."""
    values = np.asarray(beta(sched, np.linspace(0.0, sched.T, n)))
    return bool(np.all(np.diff(values) >= -1e-12 * np.abs(values[1:])) and np.all(values > 0))


def schedule_from_dict(d: dict) -> Schedule:
    """Build a Schedule from config-style keys (missing keys use defaults)."""
    return Schedule.from_dict(d)


def standard_schedules(a_star: float, **kw) -> dict:
    """The three schedules compared head to head: linear, cosine, parametric(a_star)."""
    base = {k: v for k, v in kw.items() if k in ("beta0", "beta1", "T", "sigma2")}
    cos_kw = {k: v for k, v in base.items() if k in ("T", "sigma2")}
    return {
        "linear": Schedule.linear(**base),
        "cosine": Schedule.cosine(s=config.COSINE_S, **cos_kw),
        f"parametric(a={a_star:g})": Schedule.parametric(a_star, **base),
    }
