import math

import numpy as np
import pytest

from sgm_schedules.analysis.bounds import (
    check_step_size,
    estimate_eps,
    kl_bound,
    max_step_from_c0,
    w2_bound,
    w2_rate_constants,
)
from sgm_schedules.errors import LogConcavityError, PreconditionError, UnsupportedOperationError
from sgm_schedules.analysis.metrics import gauss_kl, gauss_w2
from sgm_schedules.models import Schedule, TimeGrid
from sgm_schedules.process.diffusion import AnalyticGaussianScore, OffsetScore, backward_sample
from sgm_schedules.process.targets import (
    FunnelTarget,
    GaussianTarget,
    bound_constants,
    benchmark_gaussian,
    stationary_target,
)

KL_ISO50 = 0.5 * (50 * math.log(2.0) + 25.0)


# ---------- KL ----------

def test_kl_terms_iso50_exact_score(iso50, linear, grid500):
    report = kl_bound(iso50, linear, grid500, AnalyticGaussianScore(iso50, linear))
    assert report.e1 == pytest.approx(KL_ISO50 * math.exp(-10.05), rel=1e-9)
    assert report.e2 == 0.0
    assert report.e3 == pytest.approx(6.0, rel=1e-12)
    assert report.total == pytest.approx(report.e1 + 6.0, rel=1e-12)
    assert report.h_condition_ok
    assert report.e1_refined == pytest.approx(KL_ISO50 * math.exp(-20.1), rel=1e-9)
    assert report.log_e1 == pytest.approx(math.log(KL_ISO50) - 10.05, rel=1e-12)


def test_refined_kl_total(iso50, linear, grid500):
    report = kl_bound(iso50, linear, grid500, AnalyticGaussianScore(iso50, linear), refined=True)
    assert report.refined_used
    assert report.total == pytest.approx(KL_ISO50 * math.exp(-20.1) + 6.0, rel=1e-12)


def test_refined_kl_needs_small_lam_max(linear, grid500):
    target = benchmark_gaussian("corr", 5)
    with pytest.raises(PreconditionError):
        kl_bound(target, linear, grid500, AnalyticGaussianScore(target, linear), refined=True)
    report = kl_bound(target, linear, grid500, AnalyticGaussianScore(target, linear))
    assert report.e1_refined is None


def test_stationary_target_has_zero_bound(linear, grid500):
    target = stationary_target(4)
    report = kl_bound(target, linear, grid500, AnalyticGaussianScore(target, linear))
    assert report.total == pytest.approx(0.0, abs=1e-12)
    assert report.to_dict()["log_e1"] is None


def test_constant_score_error_integrates_beta(linear, grid500):
    target = benchmark_gaussian("iso", 3)
    offset = np.array([0.1, 0.2, -0.2])
    score = OffsetScore(AnalyticGaussianScore(target, linear), offset)
    report = kl_bound(target, linear, grid500, score, n_mc=10, seed=1)
    assert report.e2 == pytest.approx(0.09 * 10.05, rel=1e-9)
    assert report.e2_mc_std == pytest.approx(0.0, abs=1e-12)


def test_coarse_grid_switches_discretization_term(iso50, linear):
    report = kl_bound(iso50, linear, TimeGrid(1, 1.0), AnalyticGaussianScore(iso50, linear))
    assert not report.h_condition_ok
    assert report.e3 == pytest.approx(2.0 * 20.0 * 5.0 * 75.0, rel=1e-12)


def test_kl_bound_needs_gaussian(linear, grid500):
    target = FunnelTarget(d=2)
    with pytest.raises(UnsupportedOperationError):
        kl_bound(target, linear, grid500, OffsetScore(AnalyticGaussianScore(stationary_target(2), linear), np.zeros(2)))


# ---------- W2 ----------

def test_w2_stationary_has_no_mixing_term(linear, grid500):
    report = w2_bound(stationary_target(3), linear, grid500)
    assert report.e1 == pytest.approx(0.0, abs=1e-6)
    assert report.M == 0.0


def test_w2_terms_shrink_with_step(rescaled_iso50, linear, grid500):
    constants = bound_constants(rescaled_iso50, linear, grid500)
    coarse = w2_bound(None, linear, grid500, constants)
    fine = w2_bound(None, linear, TimeGrid(1000, 1.0), constants)
    assert fine.e2_time == pytest.approx(coarse.e2_time / 2.0, rel=1e-12)
    assert fine.e2_disc < coarse.e2_disc
    assert fine.e1 == pytest.approx(coarse.e1, rel=1e-6)
    assert coarse.total == pytest.approx(coarse.e1 + coarse.e2, rel=1e-12)


def test_w2_eps_term(rescaled_iso50, linear, grid500):
    report = w2_bound(rescaled_iso50, linear, grid500, eps=0.5)
    assert report.e2_eps == pytest.approx(0.5 * 1.0 * 20.0, rel=1e-12)


def test_w2_needs_log_concavity(linear, grid500):
    with pytest.raises(LogConcavityError):
        w2_bound(GaussianTarget(np.zeros(3), 2.0 * np.eye(3)), linear, grid500)


def test_step_size_check(rescaled_iso50, linear, grid500):
    check = check_step_size(linear, grid500, bound_constants(rescaled_iso50, linear, grid500))
    assert check.ok
    assert 0.0 < check.margin < 1.0

    one = TimeGrid(1, 1.0)
    check = check_step_size(linear, one, bound_constants(rescaled_iso50, linear, one))
    assert not check.ok
    assert check.worst_cell == 0


def test_step_size_check_with_time_lipschitz_term(rescaled_iso50, linear, grid500):
    constants = bound_constants(rescaled_iso50, linear, grid500)
    assert constants.M > 0
    plain = check_step_size(linear, grid500, constants)
    with_m = check_step_size(linear, grid500, constants, with_M=True)
    assert with_m.margin < plain.margin


def test_rate_constants(rescaled_iso50, linear, grid500):
    constants = bound_constants(rescaled_iso50, linear, grid500)
    rates = w2_rate_constants(constants, linear, grid500)
    assert rates["c1"] == pytest.approx(20.0 * math.sqrt(40.0), rel=1e-12)
    assert rates["rate_terms"] == pytest.approx(rates["c1"] * math.sqrt(0.002) + rates["c2"] * 0.002, rel=1e-12)


def test_max_step_from_c0(linear):
    assert max_step_from_c0(2.0, 2.0, linear) == pytest.approx(1.0 / 240.0, rel=1e-12)
    assert 0 < max_step_from_c0(2.0, 2.0, linear, M=1.0) <= math.log(2.0) / 10.0
    with pytest.raises(PreconditionError):
        max_step_from_c0(1.0, 2.0, linear)


# ---------- eps ----------

def test_exact_score_has_zero_eps(iso50, linear):
    eps, _ = estimate_eps(iso50, linear, TimeGrid(20, 1.0), AnalyticGaussianScore(iso50, linear), n_mc=50)
    assert eps == 0.0


def test_offset_score_eps_is_offset_norm(linear):
    target = benchmark_gaussian("iso", 3)
    score = OffsetScore(AnalyticGaussianScore(target, linear), np.array([0.3, 0.0, 0.4]))
    eps, _ = estimate_eps(target, linear, TimeGrid(20, 1.0), score, n_mc=50)
    assert eps == pytest.approx(0.5, rel=1e-9)


# ---------- bounds vs samplers ----------

@pytest.mark.slow
@pytest.mark.parametrize("a", [-10.0, -8.0, -6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0])
def test_bound_dominates_exact_score_sampler(a, grid500):
    sched = Schedule.parametric(a)

    iso = benchmark_gaussian("iso", 10)
    score = AnalyticGaussianScore(iso, sched)
    samples = backward_sample(score, sched, grid500, 10_000, seed=21, scheme="ei")
    assert kl_bound(iso, sched, grid500, score).total >= gauss_kl(iso, samples)

    scaled = GaussianTarget(np.zeros(10), 0.5 * np.eye(10))
    score = AnalyticGaussianScore(scaled, sched)
    samples = backward_sample(score, sched, grid500, 10_000, seed=22, scheme="ei")
    assert w2_bound(scaled, sched, grid500, eps=0.0).total >= gauss_w2(scaled, samples)
