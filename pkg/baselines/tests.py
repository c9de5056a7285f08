import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from engine.chains import Method, RunConfig, run_chain
from estimators.ols import make_ols, ols_solution
from estimators.saddle import make_quadratic
from inference.diagnostics import monte_carlo_se
from inference.sandwich import sandwich
from inference.summaries import autocorrelation
from objective.datasets import Dataset
from objective.exceptions import ConfigurationError
from resampling.plans import Scheme, SchemeConfig, draw_plan
from resampling.streams import Purpose, RngStream
from .bootstrap import dmk_kstep, fit_full_sample, ks_score, standard_bootstrap
from .mala import FlatPrior, GaussianPrior, MalaConfig, default_prior, heuristic_step, mala_sample


@pytest.fixture
def regression_data():
    rng = np.random.default_rng(21)
    x = np.column_stack([np.ones(80), rng.standard_normal((80, 2))])
    y = x @ np.array([1.0, 0.5, -0.5]) + rng.standard_normal(80)
    return Dataset(rows=np.column_stack([y, x]))


@pytest.fixture
def location_data():
    rng = np.random.default_rng(5)
    return Dataset(rows=np.column_stack([np.zeros(50), rng.standard_normal((50, 2))]))


def _plan(scheme, data, seed, b):
    return draw_plan(scheme, data, RngStream(seed).generator(b, Purpose.PLAN))


def test_bootstrap_draws_solve_resampled_normal_equations(regression_data):
    """OLS bootstrap draw 와 재표본 정규방정식 해 일치 테스트"""
    scheme = SchemeConfig(Scheme.M_OUT_OF_N)
    theta_hat = ols_solution(regression_data)

    result = standard_bootstrap(make_ols(), regression_data, scheme, B=20, theta_hat=theta_hat, seed=3)

    assert result.failures == 0
    assert result.status == "ok"
    for b in range(20):
        expected = ols_solution(regression_data, _plan(scheme, regression_data, 3, b))
        assert_allclose(result.draws[b], expected, atol=1e-10)


def test_bootstrap_fits_full_sample_when_needed(regression_data):
    """θ̂ 없이 시작값으로 bootstrap 실행 테스트"""
    result = standard_bootstrap(
        make_ols(), regression_data, SchemeConfig(Scheme.GAUSSIAN), B=5, theta0=np.zeros(3), seed=1
    )

    assert_allclose(result.center, ols_solution(regression_data), atol=1e-10)
    with pytest.raises(ConfigurationError):
        standard_bootstrap(make_ols(), regression_data, SchemeConfig(Scheme.GAUSSIAN), B=5)


def test_subsample_bootstrap_scale(regression_data):
    """m-out-of-n bootstrap 의 √(m/n) 척도 테스트"""
    result = standard_bootstrap(
        make_ols(), regression_data, SchemeConfig(Scheme.M_OUT_OF_N, m=20), B=4,
        theta_hat=ols_solution(regression_data),
    )

    assert result.effective_m == 20
    assert result.scale == pytest.approx(0.5)


def test_dmk_one_step_equals_bootstrap_for_ols(regression_data):
    """OLS 에서 1-step bootstrap 과 표준 bootstrap 일치 테스트"""
    scheme = SchemeConfig(Scheme.EXPONENTIAL)
    theta_hat = ols_solution(regression_data)

    boot = standard_bootstrap(make_ols(), regression_data, scheme, B=30, theta_hat=theta_hat, seed=8)
    dmk = dmk_kstep(make_ols(), regression_data, theta_hat, k=1, scheme=scheme, B=30, seed=8)

    assert dmk.method == "dmk1"
    assert_allclose(dmk.draws, boot.draws, atol=1e-10)


def test_dmk_on_quadratic_location_model(location_data):
    """이차 위치 모형의 k-step draw 테스트"""
    quadratic = make_quadratic(np.array([[2.0, 0.5], [0.5, 1.0]]), center=[1.0, -1.0])
    theta_hat = quadratic.center + location_data.rows[:, 1:].mean(axis=0)
    scheme = SchemeConfig(Scheme.M_OUT_OF_N)

    one = dmk_kstep(quadratic.spec, location_data, theta_hat, k=1, scheme=scheme, B=10, seed=2)
    three = dmk_kstep(quadratic.spec, location_data, theta_hat, k=3, scheme=scheme, B=10, seed=2)

    for b in range(10):
        plan = _plan(scheme, location_data, 2, b)
        expected = quadratic.center + location_data.rows[plan.indices, 1:].mean(axis=0)
        assert_allclose(one.draws[b], expected, atol=1e-10)
    assert_allclose(three.draws, one.draws, atol=1e-10)


def test_dmk_needs_positive_k(regression_data):
    """k = 0 거부 테스트"""
    with pytest.raises(ConfigurationError):
        dmk_kstep(make_ols(), regression_data, np.zeros(3), k=0, scheme=SchemeConfig(), B=5)


def test_ks_rejects_index_scheme(regression_data):
    """인덱스 방식 KS 거부 테스트"""
    with pytest.raises(ConfigurationError):
        ks_score(make_ols(), regression_data, np.zeros(3), SchemeConfig(Scheme.M_OUT_OF_N), B=5)


def test_ks_score_one_step_formula(regression_data):
    """KS draw 의 one-step 점수 공식 테스트"""
    model = make_ols()
    theta_hat = ols_solution(regression_data)
    x, y = regression_data.x, regression_data.y
    hessian = x.T @ x / 80
    scores = -(y - x @ theta_hat)[:, None] * x

    result = ks_score(model, regression_data, theta_hat, SchemeConfig(Scheme.GAUSSIAN), B=10, seed=4)

    demeaned = SchemeConfig(Scheme.GAUSSIAN, demean=True)
    for b in range(10):
        weights = _plan(demeaned, regression_data, 4, b).weights
        expected = theta_hat - np.linalg.solve(hessian, weights @ scores / 80)
        assert_allclose(result.draws[b], expected, atol=1e-10)
    assert result.method == "ks"
    assert result.scale == 1.0


def test_ks_score_variance_matches_sandwich(regression_data):
    """KS draw 분산과 샌드위치 분산 일치 테스트"""
    model = make_ols()
    theta_hat = ols_solution(regression_data)

    result = ks_score(model, regression_data, theta_hat, SchemeConfig(Scheme.GAUSSIAN), B=4000, seed=9)
    reference = sandwich(model, regression_data, theta_hat)

    assert_allclose(result.usable.var(axis=0), np.diag(reference.V) / 80, rtol=0.15)


def test_fit_full_sample_for_ols(regression_data):
    """전체 표본 NR 추정 테스트"""
    theta = fit_full_sample(make_ols(), regression_data, np.zeros(3))

    assert_allclose(theta, ols_solution(regression_data), atol=1e-10)


def test_mala_config_validation():
    """MALA 설정 검증 테스트"""
    with pytest.raises(ConfigurationError):
        MalaConfig(gamma=0.0)
    with pytest.raises(ConfigurationError):
        MalaConfig(gamma=0.1, target_accept=1.0)
    with pytest.raises(ConfigurationError):
        MalaConfig(gamma=0.1, burn=-1)


def test_heuristic_step_and_default_prior():
    """기본 단계 크기와 사전분포 테스트"""
    assert heuristic_step(2) == pytest.approx(-math.log(0.57))
    assert isinstance(default_prior(make_ols()), FlatPrior)

    prior = GaussianPrior(indices=(1,), variance=10.0)
    theta = np.array([5.0, 2.0])
    assert prior.log_density(theta) == pytest.approx(-0.2)
    assert_allclose(prior.gradient(theta), [0.0, -0.2])


def test_tuned_mala_on_gaussian_posterior(location_data):
    """휴리스틱 γ 에서 시작한 MALA 의 채택률, 평균, 공분산 테스트"""
    H = np.array([[2.0, 0.3], [0.3, 1.0]])
    quadratic = make_quadratic(H, center=[1.0, -1.0])
    mean = quadratic.center + location_data.rows[:, 1:].mean(axis=0)
    covariance = np.linalg.inv(50 * H)
    config = MalaConfig(
        gamma=heuristic_step(2), preconditioner=np.linalg.inv(H), tune=True, burn=4000, seed=6
    )

    result = mala_sample(quadratic.spec, location_data, mean, config, B=20000)

    assert result.draws.shape == (20000, 2)
    assert result.acceptance_rate == pytest.approx(0.57, abs=0.05)
    mcse = monte_carlo_se(result.draws)
    assert np.all(np.abs(result.draws.mean(axis=0) - mean) < 3.0 * mcse)
    error = np.linalg.norm(np.cov(result.draws.T) - covariance) / np.linalg.norm(covariance)
    assert error < 0.1


def test_untuned_heuristic_step_accepts_more_than_target(location_data):
    """정확한 전처리에서 휴리스틱 γ 의 채택률이 목표보다 높은지 테스트"""
    quadratic = make_quadratic(np.diag([2.0, 1.0]))
    start = location_data.rows[:, 1:].mean(axis=0)
    config = MalaConfig(gamma=heuristic_step(2), preconditioner=np.diag([0.5, 1.0]), seed=2)

    result = mala_sample(quadratic.spec, location_data, start, config, B=4000)

    assert result.gamma == pytest.approx(heuristic_step(2))
    assert result.acceptance_rate > 0.7


def test_mala_mixes_slower_than_rnr_in_high_dimension():
    """고차원 목표에서 MALA 의 1차 자기상관이 rNR 보다 큰지 테스트"""
    dim = 40
    rng = np.random.default_rng(17)
    data = Dataset(rows=np.column_stack([np.zeros(50), rng.standard_normal((50, dim))]))
    H = np.diag(np.linspace(0.5, 2.0, dim))
    quadratic = make_quadratic(H)
    start = data.rows[:, 1:].mean(axis=0)

    mala = mala_sample(
        quadratic.spec, data, start,
        MalaConfig(gamma=heuristic_step(dim), preconditioner=np.linalg.inv(H), burn=500, seed=5),
        B=4000,
    )
    rnr = run_chain(
        quadratic.spec, data,
        RunConfig(gamma=0.1, B=4000, theta0=tuple(start), scheme=SchemeConfig(Scheme.GAUSSIAN),
                  method=Method.RNR, seed=5),
    )

    assert mala.acceptance_rate > 0.9
    assert autocorrelation(mala.draws).min() > autocorrelation(rnr.draws).max()


def test_mala_is_reproducible(location_data):
    """같은 시드의 MALA 재현 테스트"""
    quadratic = make_quadratic(np.eye(2))
    config = MalaConfig(gamma=0.5, seed=11)

    first = mala_sample(quadratic.spec, location_data, np.zeros(2), config, B=50)
    second = mala_sample(quadratic.spec, location_data, np.zeros(2), config, B=50)

    assert np.array_equal(first.draws, second.draws)


def test_preconditioning_improves_mixing(location_data):
    """불량조건 목표에서 전처리 MALA 의 혼합 개선 테스트"""
    H = np.diag([100.0, 1.0])
    quadratic = make_quadratic(H)
    start = location_data.rows[:, 1:].mean(axis=0)

    plain = mala_sample(
        quadratic.spec, location_data, start,
        MalaConfig(gamma=1e-3, tune=True, burn=500, seed=3), B=3000,
    )
    preconditioned = mala_sample(
        quadratic.spec, location_data, start,
        MalaConfig(gamma=heuristic_step(2), preconditioner=np.linalg.inv(H), tune=True, burn=500, seed=3),
        B=3000,
    )

    slow = 1
    assert autocorrelation(preconditioned.draws)[slow] < autocorrelation(plain.draws)[slow]
    assert autocorrelation(plain.draws)[slow] > 0.9
