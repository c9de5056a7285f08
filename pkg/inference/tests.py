from types import SimpleNamespace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from engine.chains import Method, RunConfig, run_chain
from estimators.ols import make_ols, ols_solution
from objective.datasets import Dataset
from objective.exceptions import ConfigurationError, InsufficientDrawsError
from resampling.plans import Scheme, SchemeConfig
from .diagnostics import effective_sample_size, gelman_rubin, monte_carlo_se
from .sandwich import delta_method_se, sandwich
from .serializers import InferenceReportSerializer
from .summaries import autocorrelation, phi, summarize, summarize_draws


def _chain(draws, gamma=1.0, n=100, effective_m=100):
    return SimpleNamespace(
        draws=np.asarray(draws, dtype=float), gamma=gamma, n=n, effective_m=effective_m, method="rnr"
    )


@pytest.fixture
def regression_data():
    rng = np.random.default_rng(31)
    x = np.column_stack([np.ones(200), rng.standard_normal((200, 2))])
    y = x @ np.array([0.5, 1.0, -1.0]) + rng.standard_normal(200)
    return Dataset(rows=np.column_stack([y, x]), cluster_ids=np.arange(200))


@pytest.fixture
def normal_draws():
    return np.random.default_rng(2).standard_normal((400, 2))


def test_phi_table():
    """φ(γ) 값 테스트"""
    for gamma, inverse in ((1.0, 1.0), (0.4, 4.0), (0.2, 9.0), (0.1, 19.0), (0.01, 199.0)):
        assert 1.0 / phi(gamma) == pytest.approx(inverse, abs=1e-12)
    assert phi(0.5) == pytest.approx(1.0 / 3.0)


def test_phi_rejects_invalid_gamma():
    """γ 범위 밖 거부 테스트"""
    with pytest.raises(ConfigurationError):
        phi(0.0)
    with pytest.raises(ConfigurationError):
        phi(1.2)


def test_summarize_constant_chain():
    """상수 체인 요약 테스트"""
    report = summarize(_chain(np.tile([1.0, 2.0], (20, 1))))

    assert_allclose(report.estimate, [1.0, 2.0])
    assert_allclose(report.se, [0.0, 0.0])
    assert_allclose(report.ci, [[1.0, 1.0], [2.0, 2.0]])
    assert all(row["autocorr1"] is None for row in report.rows())


def test_summarize_gamma_one_is_plain_draw_distribution(normal_draws):
    """γ = 1, m = n 에서 보정 없는 요약 테스트"""
    report = summarize(_chain(normal_draws), alpha=0.1)
    centered = normal_draws - normal_draws.mean(axis=0)

    assert report.adjustment == pytest.approx(1.0)
    assert_allclose(report.se, normal_draws.std(axis=0))
    assert_allclose(report.ci[:, 0], normal_draws.mean(axis=0) + np.quantile(centered, 0.05, axis=0))
    assert_allclose(report.ci[:, 1], normal_draws.mean(axis=0) + np.quantile(centered, 0.95, axis=0))


def test_summarize_applies_learning_rate_and_subsample_scaling(normal_draws):
    """φ(γ) 와 m/n 보정 테스트"""
    plain = summarize(_chain(normal_draws))
    scaled = summarize(_chain(normal_draws, gamma=0.1, n=100, effective_m=25))
    factor = np.sqrt(0.25 * 19.0)

    assert scaled.adjustment == pytest.approx(factor)
    assert_allclose(scaled.se, factor * plain.se)
    assert np.all(scaled.ci[:, 0] <= scaled.ci[:, 1])


def test_summarize_is_scale_equivariant(normal_draws):
    """draw 척도 변환에 대한 등변성 테스트"""
    base = summarize(_chain(normal_draws))
    scaled = summarize(_chain(3.0 * normal_draws))

    assert_allclose(scaled.estimate, 3.0 * base.estimate)
    assert_allclose(scaled.se, 3.0 * base.se)
    assert_allclose(scaled.ci, 3.0 * base.ci)


def test_summarize_with_function_of_parameters(normal_draws):
    """h(θ) 목표 요약 테스트"""
    draws = normal_draws + np.array([2.0, 3.0])
    report = summarize(_chain(draws), h=lambda theta: theta[0] * theta[1], names=["product"])
    theta_bar = draws.mean(axis=0)

    assert report.names == ("product",)
    assert report.estimate[0] == pytest.approx(theta_bar[0] * theta_bar[1])
    assert report.se[0] > 0


def test_summarize_needs_ten_draws():
    """draw 10개 미만 거부 테스트"""
    with pytest.raises(InsufficientDrawsError):
        summarize(_chain(np.zeros((9, 2))))
    with pytest.raises(InsufficientDrawsError):
        summarize_draws(np.zeros((5, 2)))


def test_summarize_draws_scale(normal_draws):
    """bootstrap 요약의 √(m/n) 척도 테스트"""
    report = summarize_draws(normal_draws, estimate=[0.0, 0.0], scale=0.5, method="boot")

    assert_allclose(report.se, 0.5 * normal_draws.std(axis=0))
    assert report.method == "boot"
    assert report.phi_gamma == 1.0


def test_autocorrelation_of_ar1():
    """AR(1) 자기상관 테스트"""
    rng = np.random.default_rng(8)
    values = np.empty(20000)
    values[0] = 0.0
    for t in range(1, values.size):
        values[t] = 0.8 * values[t - 1] + rng.standard_normal()

    assert autocorrelation(values)[0] == pytest.approx(0.8, abs=0.03)
    assert np.isnan(autocorrelation(np.ones(10))[0])


def test_sandwich_matches_ols_formula(regression_data):
    """OLS 샌드위치 분산 공식 테스트"""
    theta_hat = ols_solution(regression_data)
    estimate = sandwich(make_ols(), regression_data, theta_hat)
    x, y = regression_data.x, regression_data.y
    resid = y - x @ theta_hat
    bread = np.linalg.inv(x.T @ x / 200)
    meat = (x * resid[:, None] ** 2).T @ x / 200

    assert_allclose(estimate.V, bread @ meat @ bread, rtol=1e-10)
    assert_allclose(estimate.standard_errors(), np.sqrt(np.diag(bread @ meat @ bread) / 200))


def test_clustered_sandwich_with_singletons_equals_iid(regression_data):
    """단일 관측 클러스터의 샌드위치 일치 테스트"""
    theta_hat = ols_solution(regression_data)

    iid = sandwich(make_ols(), regression_data, theta_hat)
    clustered = sandwich(make_ols(), regression_data, theta_hat, cluster=True)

    assert clustered.cluster_mode
    assert_allclose(clustered.V, iid.V, rtol=1e-12)


def test_delta_method_hand_example():
    """델타 방법 손계산 테스트"""
    se = delta_method_se([2.0, 3.0], np.eye(2), lambda theta: [theta[1], theta[0]], 100)

    assert se == pytest.approx(np.sqrt(13.0 / 100.0))
    assert se == pytest.approx(0.3606, abs=1e-4)


def test_gelman_rubin():
    """R̂ 진단 테스트"""
    rng = np.random.default_rng(4)
    mixed = [rng.standard_normal((2000, 2)) for _ in range(4)]
    stuck = [rng.standard_normal((2000, 2)) + shift for shift in (0.0, 3.0)]

    assert_allclose(gelman_rubin(mixed), 1.0, atol=0.02)
    assert np.all(gelman_rubin(stuck) > 1.2)
    with pytest.raises(ConfigurationError):
        gelman_rubin(mixed[:1])


def test_monte_carlo_se_for_iid_draws():
    """독립 draw 의 몬테카를로 표준오차 테스트"""
    draws = np.random.default_rng(6).standard_normal((10000, 1))

    assert monte_carlo_se(draws)[0] == pytest.approx(0.01, rel=0.3)
    assert effective_sample_size(draws)[0] == pytest.approx(10000, rel=0.4)


def test_report_serializer_replaces_nonfinite_values():
    """리포트 직렬화의 비유한 값 처리 테스트"""
    report = summarize(_chain(np.tile([1.0], (12, 1))), names=["beta"])

    payload = InferenceReportSerializer(report).data

    assert payload["B"] == 12
    assert payload["coefficients"][0]["coefficient"] == "beta"
    assert payload["coefficients"][0]["autocorr1"] is None
    assert payload["coefficients"][0]["se"] == 0.0


@pytest.mark.slow
def test_chain_variance_matches_sandwich(regression_data):
    """체인 분산과 샌드위치 분산의 일치 테스트"""
    config = RunConfig(
        gamma=0.1,
        B=20000,
        theta0=tuple(ols_solution(regression_data)),
        scheme=SchemeConfig(Scheme.GAUSSIAN),
        method=Method.RNR,
        seed=12,
    )
    chain = run_chain(make_ols(), regression_data, config)
    reference = sandwich(make_ols(), regression_data, ols_solution(regression_data))

    chain_variance = chain.draws.var(axis=0) / phi(0.1)
    assert_allclose(chain_variance, np.diag(reference.V) / 200, rtol=0.15)

    report = summarize(chain)
    assert_allclose(report.se, reference.standard_errors(), rtol=0.1)
