import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from baselines.bootstrap import fit_full_sample
from engine.chains import Method, RunConfig, run_chain
from engine.classical import classical_optimize
from inference.summaries import summarize
from objective.datasets import Dataset
from objective.evaluation import Want, check_gradient, evaluate
from objective.exceptions import ConfigurationError
from resampling.plans import Scheme, SchemeConfig, unit_plan
from resampling.streams import RngStream
from .dgp import DgpKind, fixed_effect_columns, make_panel_variance_model, simulate_dgp, within_transform
from .mroz import REFERENCE_ASE, REFERENCE_MLE, load_mroz, mroz_available, reference_vector
from .nls import make_exponential_nls, make_nls
from .ols import make_ols, ols_solution
from .penalty import Penalty, PenaltySchedule, wrap_penalty
from .probit import PHI_ZERO, make_probit, probit_start_values
from .saddle import make_saddle, saddle_demo, saddle_start, stylised_rnr

ALL = Want.VALUE | Want.GRADIENT | Want.HESSIAN


@pytest.fixture
def probit_data():
    return simulate_dgp(DgpKind.PROBIT, 300, [0.3, 0.8, -0.5], seed=4)


@pytest.fixture
def nls_data():
    rng = np.random.default_rng(12)
    x = np.column_stack([np.ones(60), rng.uniform(-1.0, 1.0, 60)])
    y = np.exp(x @ np.array([0.2, 0.5])) + 0.1 * rng.standard_normal(60)
    return Dataset(rows=np.column_stack([y, x]))


def test_probit_loss_at_zero(probit_data):
    """θ = 0 에서 프로빗 손실 log 2 테스트"""
    result = evaluate(make_probit(), probit_data, np.zeros(3), unit_plan(probit_data.n), Want.VALUE)

    assert result.value == pytest.approx(np.log(2.0))


def test_probit_is_finite_in_the_tails():
    """|xᵀθ| = 30 에서 프로빗 손실/기울기/헤시안 유한성 테스트"""
    data = Dataset(rows=np.array([[1.0, 1.0], [0.0, 1.0]]))
    model = make_probit()
    for theta in ([-30.0], [30.0]):
        result = evaluate(model, data, theta, unit_plan(2), ALL)
        assert np.isfinite(result.value)
        assert np.all(np.isfinite(result.gradient))
        assert np.all(np.isfinite(result.hessian))
        assert result.hessian[0, 0] > 0


def test_probit_gradient_check(probit_data):
    """프로빗 해석적 기울기 검사 테스트"""
    rng = np.random.default_rng(0)
    for _ in range(20):
        report = check_gradient(make_probit(), probit_data, rng.uniform(-2.0, 2.0, 3))
        assert report.max_discrepancy < 1e-5


def test_probit_start_values(probit_data):
    """선형확률모형 기반 프로빗 시작값 테스트"""
    start = probit_start_values(probit_data)
    coef = np.linalg.lstsq(probit_data.x, probit_data.y, rcond=None)[0]

    assert start[0] == pytest.approx((coef[0] - 0.5) / PHI_ZERO)
    assert_allclose(start[1:], coef[1:] / PHI_ZERO)


def test_probit_fit_recovers_truth():
    """프로빗 최대우도 추정 테스트"""
    data = simulate_dgp(DgpKind.PROBIT, 4000, [0.3, 0.8, -0.5], seed=9)

    theta = fit_full_sample(make_probit(), data, probit_start_values(data))

    assert_allclose(theta, [0.3, 0.8, -0.5], atol=0.1)


def test_exponential_nls_uses_gauss_newton_hessian(nls_data):
    """NLS 가우스-뉴턴 헤시안 테스트"""
    theta = np.array([0.1, 0.4])
    x = nls_data.x
    mean = np.exp(x @ theta)
    grad_f = mean[:, None] * x
    expected = 2.0 * grad_f.T @ grad_f / nls_data.n

    result = evaluate(make_exponential_nls(2), nls_data, theta, unit_plan(nls_data.n), ALL)

    assert_allclose(result.hessian, expected)
    assert check_gradient(make_exponential_nls(2), nls_data, theta).max_discrepancy < 1e-5


def test_exponential_nls_without_gauss_newton(nls_data):
    """가우스-뉴턴 없이 차분 헤시안 사용 테스트"""
    model = make_exponential_nls(2, gauss_newton=False)
    theta = fit_full_sample(model, nls_data, np.array([0.15, 0.45]))

    assert model.analytic_flags["hessian"] is False
    assert_allclose(theta, [0.2, 0.5], atol=0.1)


def test_nls_needs_mean_function():
    """평균 함수 없는 NLS 거부 테스트"""
    with pytest.raises(ConfigurationError):
        make_nls(None, None, dim=2)


def test_linear_gaussian_dgp():
    """선형 가우스 모의 데이터 테스트"""
    data = simulate_dgp("LinearGaussian", 100, [1.0, 2.0, 3.0], seed=1)
    again = simulate_dgp("LinearGaussian", 100, [1.0, 2.0, 3.0], seed=1)

    assert data.rows.shape == (100, 4)
    assert data.regressor_names == ("const", "x1", "x2")
    assert_allclose(data.truth, [1.0, 2.0, 3.0])
    assert np.array_equal(data.rows, again.rows)
    assert not np.array_equal(data.rows, simulate_dgp("LinearGaussian", 100, [1.0, 2.0, 3.0], seed=2).rows)


def test_probit_dgp_with_fixed_effects():
    """고정효과 프로빗 모의 데이터 테스트"""
    data = simulate_dgp(DgpKind.PROBIT, 40, [0.5, 0.1, -0.1, 0.2, 0.0], seed=3, n_groups=4)

    assert data.rows.shape == (40, 6)
    assert fixed_effect_columns(data) == (1, 2, 3, 4)
    assert_allclose(data.x[:, 1:].sum(axis=1), 1.0)
    assert set(np.unique(data.y)) <= {0.0, 1.0}
    with pytest.raises(ConfigurationError):
        simulate_dgp(DgpKind.PROBIT, 40, [0.1, 0.2], seed=3, n_groups=2)


def test_nonlinear_panel_dgp_and_within_transform():
    """패널 모의 데이터와 within 변환 테스트"""
    data = simulate_dgp(DgpKind.NONLINEAR_PANEL, (20, 5), [1.0, 0.0], seed=2)
    within = within_transform(data)

    assert data.panel_shape == (20, 5)
    assert data.rows.shape == (100, 2)
    assert_allclose(within.rows.reshape(20, 5, 2).mean(axis=1), 0.0, atol=1e-12)
    with pytest.raises(ConfigurationError):
        simulate_dgp(DgpKind.NONLINEAR_PANEL, (20, 5), [1.0], seed=2)
    with pytest.raises(ConfigurationError):
        within_transform(Dataset(rows=np.zeros((4, 2))))


def test_panel_variance_model_has_incidental_parameter_bias():
    """고정 T 패널 분산 추정의 (T−1)/T 편향 테스트"""
    data = simulate_dgp(DgpKind.NONLINEAR_PANEL, (2000, 5), [1.0, 0.0], seed=7)
    model = make_panel_variance_model()

    theta = fit_full_sample(model, model.prepare(data), np.array([0.5, 0.5]))

    assert theta[0] == pytest.approx(1.0, abs=0.05)
    assert theta[1] == pytest.approx(np.log(0.8), abs=0.05)
    assert check_gradient(model, model.prepare(data), theta + 0.1).max_discrepancy < 1e-5


def test_penalty_schedule():
    """벌점 스케줄 값 테스트"""
    schedule = PenaltySchedule(lambda0=10.0, decay=0.5, duration=2, stop=4)

    assert [schedule.at(b) for b in range(5)] == [10.0, 10.0, 5.0, 2.5, 0.0]
    assert schedule.at(None) == 10.0
    with pytest.raises(ConfigurationError):
        PenaltySchedule(lambda0=-1.0)
    with pytest.raises(ConfigurationError):
        PenaltySchedule(lambda0=1.0, decay=0.0)


def test_zero_penalty_is_identity(probit_data):
    """λ = 0 벌점의 항등성 테스트"""
    theta = np.array([0.2, 0.1, -0.3])
    plan = unit_plan(probit_data.n)

    plain = evaluate(make_probit(), probit_data, theta, plan, ALL)
    wrapped = evaluate(wrap_penalty(make_probit(), 0.0, np.ones(3)), probit_data, theta, plan, ALL)

    assert wrapped.value == pytest.approx(plain.value)
    assert_allclose(wrapped.gradient, plain.gradient)
    assert_allclose(wrapped.hessian, plain.hessian)


def test_penalty_terms():
    """벌점 값/기울기/헤시안 테스트"""
    penalty = Penalty(lam=4.0, anchor=[1.0, 1.0])

    value, gradient, hessian = penalty.terms(np.array([1.0, 3.0]), n=2)
    assert value == pytest.approx(4.0)
    assert_allclose(gradient, [0.0, 4.0])
    assert_allclose(hessian, 2.0 * np.eye(2))

    value, gradient, _ = penalty.terms(np.array([1.0, 1.0]), n=2)
    assert value == 0.0
    assert_allclose(gradient, 0.0)


def test_penalty_picks_minimum_norm_solution_on_flat_direction():
    """평탄한 방향에서 벌점이 해를 고정하는지 테스트"""
    rng = np.random.default_rng(2)
    x = rng.standard_normal(100)
    y = 2.0 * x + 0.1 * rng.standard_normal(100)
    data = Dataset(rows=np.column_stack([y, x, x]))
    model = wrap_penalty(make_ols(), 0.01, np.zeros(2))

    path = classical_optimize(model, data, np.array([3.0, -1.0]), method="nr", iters=10, tol=1e-10)

    assert path.converged
    assert path.theta[0] == pytest.approx(path.theta[1], abs=1e-8)
    slope = ols_solution(Dataset(rows=np.column_stack([y, x])))[0]
    assert path.theta.sum() == pytest.approx(slope, abs=1e-3)


def test_saddle_demo_rows():
    """안장점 데모 결과 테스트"""
    rows = saddle_demo(c_grid=(0.0, 5.0), gamma=0.1, iters=50, noise=10.0, seed=1)

    assert len(rows) == 4
    by_key = {(row["c"], row["method"]): row for row in rows}
    assert not by_key[(0.0, "nr")]["diverged"]
    assert by_key[(5.0, "nr")]["diverged"]
    assert by_key[(0.0, "nr")]["q"] == pytest.approx(0.5 * 0.9**100)
    assert np.linalg.norm(by_key[(0.0, "nr")]["theta"]) < 0.1


def test_noisy_rnr_escapes_saddle():
    """잡음 rNR 의 안장점 탈출 테스트"""
    _, quadratic = make_saddle()
    theta0 = saddle_start(quadratic, 0.0)

    escaped = sum(
        abs(stylised_rnr(quadratic, theta0, 0.1, 50, 10.0, RngStream(seed))[-1][1]) > 10.0
        for seed in range(100)
    )

    assert escaped >= 90


def test_make_saddle_defaults():
    """기본 안장점 모형 테스트"""
    spec, quadratic = make_saddle()

    assert quadratic.n_positive == 1
    assert_allclose(quadratic.eigenvalues, [1.0, -1.0])
    result = evaluate(spec, quadratic.zero_data(), [1.0, 2.0], unit_plan(1), ALL)
    assert result.value == pytest.approx(-1.5)
    assert_allclose(result.hessian, np.diag([1.0, -1.0]))


@pytest.mark.mroz
@pytest.mark.skipif(not mroz_available(), reason="Mroz CSV가 없습니다")
def test_mroz_probit_matches_published_estimates():
    """Mroz 노동참여 프로빗 추정치 테스트"""
    data = load_mroz()
    model = make_probit()

    theta = fit_full_sample(model, data, probit_start_values(data))

    assert data.n == 753
    assert_allclose(theta, reference_vector(REFERENCE_MLE), atol=6e-4)


@pytest.mark.mroz
@pytest.mark.skipif(not mroz_available(), reason="Mroz CSV가 없습니다")
def test_mroz_rnr_standard_errors_match_published():
    """Mroz 프로빗 rNR 표준오차 테스트"""
    data = load_mroz()
    model = make_probit(param_names=data.regressor_names)
    theta_hat = fit_full_sample(model, data, probit_start_values(data))
    config = RunConfig(
        gamma=0.3,
        B=2000,
        theta0=tuple(theta_hat),
        scheme=SchemeConfig(Scheme.M_OUT_OF_N),
        method=Method.RNR,
        seed=2024,
    )

    report = summarize(run_chain(model, data, config), names=data.regressor_names)

    estimate = dict(zip(report.names, report.estimate))
    assert estimate["educ"] == pytest.approx(REFERENCE_MLE["educ"], abs=0.01)
    assert estimate["kidslt6"] == pytest.approx(REFERENCE_MLE["kidslt6"], abs=0.01)
    ase = reference_vector(REFERENCE_ASE)
    # 표의 값은 소수 셋째 자리까지만 있으므로 반올림 폭을 더함
    assert np.all(np.abs(report.se - ase) <= 0.2 * ase + 5e-4)


def test_mroz_rejects_missing_values(tmp_path):
    """결측값이 있는 Mroz CSV 거부 테스트"""
    frame = pd.DataFrame(
        {
            "inlf": [1, 0, 1],
            "nwifeinc": [10.9, 19.5, np.nan],
            "educ": [12, 12, 16],
            "exper": [14, 5, 15],
            "age": [32, 30, 35],
            "kidslt6": [1, 0, 1],
            "kidsge6": [0, 2, 3],
        }
    )
    frame.to_csv(tmp_path / "mroz.csv", index=False)

    with pytest.raises(ConfigurationError):
        load_mroz(tmp_path / "mroz.csv")

    frame.loc[2, "nwifeinc"] = 15.0
    frame.to_csv(tmp_path / "mroz.csv", index=False)
    data = load_mroz(tmp_path / "mroz.csv")
    assert data.n == 3
    assert_allclose(data.x[:, 3], [196.0, 25.0, 225.0])
