import numpy as np
import pytest

from sgm_schedules.analysis.metrics import gauss_w2
from sgm_schedules.errors import DivergenceError, DomainError
from sgm_schedules.models import Schedule, TimeGrid
from sgm_schedules.process.diffusion import (
    AnalyticGaussianScore,
    OffsetScore,
    ZeroModifiedScore,
    backward_ei,
    backward_em,
    backward_sample,
    forward_em,
    forward_exact,
)
from sgm_schedules.process.targets import marginal, benchmark_gaussian


# ---------- Forward ----------

def test_forward_at_time_zero_is_the_data():
    target = benchmark_gaussian("iso", 3)
    batch = forward_exact(target, Schedule.linear(), 0.0, 500, seed=4)
    np.testing.assert_array_equal(batch.data, target.sample(500, 4).data)
    assert batch.stage == "forward"


def test_forward_reaches_stationary_covariance(linear):
    target = benchmark_gaussian("iso", 5)
    batch = forward_exact(target, linear, 1.0, 100_000, seed=1)
    cov = np.cov(batch.data, rowvar=False)
    assert np.max(np.abs(cov - marginal(target, linear, 1.0).Sigma)) <= 0.05
    assert np.max(np.abs(cov - np.eye(5))) <= 0.05


def test_forward_mean_contracts(linear):
    target = benchmark_gaussian("iso", 4)
    law = marginal(target, linear, 0.3)
    n = 50_000
    batch = forward_exact(target, linear, 0.3, n, seed=2)
    se = np.sqrt(np.diag(law.Sigma) / n)
    assert np.all(np.abs(batch.data.mean(axis=0) - law.mu) <= 4 * se)


def test_forward_em_agrees_with_exact_draws(linear):
    target = benchmark_gaussian("iso", 2)
    n = 20_000
    x0 = target.sample(n, 3).data
    em = forward_em(x0, linear, 0.5, 1000, seed=3)
    law = marginal(target, linear, 0.5)
    se = np.sqrt(np.diag(law.Sigma) / n)
    assert np.all(np.abs(em.mean(axis=0) - law.mu) <= 4 * se + 0.01)
    np.testing.assert_allclose(em.var(axis=0), np.diag(law.Sigma), atol=0.05)


# ---------- Backward ----------

@pytest.mark.parametrize("sigma2", [1.0, 2.0])
@pytest.mark.parametrize("steps", [1, 500])
def test_ei_zero_score_keeps_stationary_law(sigma2, steps):
    sched = Schedule.linear(sigma2=sigma2)
    batch = backward_ei(ZeroModifiedScore(3, sigma2), sched, TimeGrid(steps, 1.0), 20_000, seed=5)
    np.testing.assert_allclose(batch.data.var(axis=0), sigma2, rtol=0.05)
    assert np.max(np.abs(batch.data.mean(axis=0))) <= 4 * np.sqrt(sigma2 / 20_000)


def test_em_zero_score_stays_centred(linear):
    n = 20_000
    batch = backward_em(ZeroModifiedScore(3), linear, TimeGrid(200, 1.0), n, seed=6)
    assert np.max(np.abs(batch.data.mean(axis=0))) <= 4 * np.sqrt(1.0 / n)


def test_exact_score_em_recovers_target(linear):
    target = benchmark_gaussian("iso", 10)
    batch = backward_em(AnalyticGaussianScore(target, linear), linear, TimeGrid(500, 1.0), 10_000, seed=7)
    assert batch.stage == "generated"
    assert gauss_w2(target, batch) <= 0.15


def test_single_step_is_finite(linear):
    target = benchmark_gaussian("iso", 4)
    batch = backward_em(AnalyticGaussianScore(target, linear), linear, TimeGrid(1, 1.0), 100, seed=0)
    assert np.all(np.isfinite(batch.data))


def test_worker_count_does_not_change_samples(linear):
    target = benchmark_gaussian("corr", 3)
    score = AnalyticGaussianScore(target, linear)
    grid = TimeGrid(20, 1.0)
    one = backward_ei(score, linear, grid, 3000, seed=8, workers=1)
    four = backward_ei(score, linear, grid, 3000, seed=8, workers=4)
    np.testing.assert_array_equal(one.data, four.data)


def test_em_and_ei_agree_on_fine_grids(linear):
    target = benchmark_gaussian("iso", 5)
    score = AnalyticGaussianScore(target, linear)
    grid = TimeGrid(2000, 1.0)
    em = backward_em(score, linear, grid, 5000, seed=9).data
    ei = backward_ei(score, linear, grid, 5000, seed=9).data
    # same prior and noise draws: the pathwise RMS gap dominates the W2 gap
    assert np.sqrt(np.mean(np.sum((em - ei) ** 2, axis=1))) <= 0.05


def test_named_samplers_match_dispatch(linear):
    score = ZeroModifiedScore(2)
    grid = TimeGrid(10, 1.0)
    np.testing.assert_array_equal(
        backward_em(score, linear, grid, 50, seed=1).data,
        backward_sample(score, linear, grid, 50, seed=1, scheme="em").data,
    )


def test_bad_arguments(linear):
    score = ZeroModifiedScore(2)
    with pytest.raises(DomainError):
        backward_sample(score, linear, TimeGrid(10, 1.0), 10, seed=0, scheme="heun")
    with pytest.raises(DomainError):
        backward_sample(score, linear, TimeGrid(10, 1.0), 0, seed=0)
    with pytest.raises(DomainError):
        backward_sample(score, linear, TimeGrid(10, 2.0), 10, seed=0)


def test_exploding_score_raises(linear):
    score = OffsetScore(ZeroModifiedScore(2), np.full(2, 1e12))
    with pytest.raises(DivergenceError) as exc:
        backward_em(score, linear, TimeGrid(500, 1.0), 10, seed=0)
    assert exc.value.step == 0
