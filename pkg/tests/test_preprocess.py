import numpy as np
import pytest

from sgm_schedules.analysis.preprocess import (
    PreprocessTransform,
    apply,
    fit_transform,
    inverse,
    transfer_bound,
    transform_gaussian,
)
from sgm_schedules.errors import DegenerateCoordinateError, DomainError, RankError
from sgm_schedules.models import SampleBatch
from sgm_schedules.process.targets import (
    GaussianTarget,
    closed_form_divergences,
    contraction_constants,
    benchmark_gaussian,
    stationary_target,
)


def test_standard_normal_kappa():
    transform, scaled = fit_transform(stationary_target(5).sample(100_000, 1))
    assert transform.kappa == pytest.approx(1.0 / np.sqrt(2.0), rel=0.02)
    np.testing.assert_allclose(np.cov(scaled.data, rowvar=False), 0.5 * np.eye(5), atol=0.02)


def test_heteroscedastic_becomes_well_conditioned():
    target = benchmark_gaussian("heterosc", 10)
    assert target.lam_min / target.lam_max == pytest.approx(0.01)
    transform, _ = fit_transform(target.sample(200_000, 2))
    scaled = transform_gaussian(transform, target)
    assert scaled.lam_min / scaled.lam_max >= 0.95


def test_rescaled_target_is_contractive(linear):
    target = benchmark_gaussian("corr", 5)
    transform, _ = fit_transform(target.sample(50_000, 3))
    scaled = transform_gaussian(transform, target)
    assert scaled.lam_max < linear.sigma2
    C, _ = contraction_constants(scaled, linear, np.linspace(0.0, 1.0, 101))
    assert np.all(C >= 0)


def test_round_trip():
    data = benchmark_gaussian("corr", 4).sample(1000, 4)
    transform, scaled = fit_transform(data)
    np.testing.assert_allclose(inverse(transform, scaled).data, data.data, atol=1e-10)
    np.testing.assert_array_equal(apply(transform, data).data, scaled.data)
    np.testing.assert_array_equal(transform.invert(np.zeros(4)), transform.mu)


def test_transfer_bound():
    transform = PreprocessTransform(mu=np.zeros(2), d_scale=np.array([1.0, 2.0]), kappa=0.5)
    assert transfer_bound(transform, 0.1) == pytest.approx(0.4)
    assert transfer_bound(transform, 0.0) == 0.0
    with pytest.raises(DomainError):
        transfer_bound(transform, -1.0)


def _pull_back(transform, law):
    scale = transform.kappa / transform.d_scale
    return GaussianTarget(law.mu / scale + transform.mu, law.Sigma / np.outer(scale, scale))


def test_transfer_bound_dominates_original_scale_w2():
    target = benchmark_gaussian("heterosc", 8)
    transform, _ = fit_transform(target.sample(20_000, 5))
    p_scaled = transform_gaussian(transform, target)
    q_scaled = GaussianTarget(p_scaled.mu + 0.1, 1.2 * p_scaled.Sigma)
    _, w2_scaled = closed_form_divergences(p_scaled, q_scaled)
    _, w2_orig = closed_form_divergences(_pull_back(transform, p_scaled), _pull_back(transform, q_scaled))
    assert w2_orig <= transfer_bound(transform, w2_scaled) * (1.0 + 1e-9)


def test_json_round_trip(tmp_path):
    transform, _ = fit_transform(benchmark_gaussian("iso", 3).sample(100, 6))
    path = tmp_path / "transform.json"
    transform.save(path)
    loaded = PreprocessTransform.load(path)
    np.testing.assert_array_equal(loaded.mu, transform.mu)
    np.testing.assert_array_equal(loaded.d_scale, transform.d_scale)
    assert loaded.kappa == transform.kappa


def test_degenerate_inputs():
    x = np.random.default_rng(0).standard_normal((50, 3))
    x[:, 1] = 4.0
    with pytest.raises(DegenerateCoordinateError):
        fit_transform(SampleBatch(x, seed=0))
    with pytest.raises(RankError):
        fit_transform(SampleBatch(np.eye(3), seed=0))
    with pytest.raises(DegenerateCoordinateError):
        PreprocessTransform(mu=np.zeros(2), d_scale=np.array([1.0, 0.0]), kappa=1.0)
