import numpy as np
import pytest
from numpy.testing import assert_allclose

from estimators.ols import make_ols
from estimators.probit import make_probit
from resampling.plans import index_plan, unit_plan, weight_plan
from .datasets import Dataset, read_csv
from .evaluation import Want, check_gradient, evaluate, hessian_vector_product, row_gradients
from .exceptions import (
    ConfigurationError,
    InvalidDirectionError,
    NumericalEvaluationError,
    PlanMismatchError,
)
from .specs import ModelSpec, as_parameter

ALL = Want.VALUE | Want.GRADIENT | Want.HESSIAN


@pytest.fixture
def hand_data():
    return Dataset(rows=np.array([[1.0, 1.0], [2.0, 1.0]]))


@pytest.fixture
def ols():
    return make_ols()


@pytest.fixture
def regression_data():
    rng = np.random.default_rng(7)
    x = np.column_stack([np.ones(40), rng.standard_normal((40, 2))])
    y = x @ np.array([1.0, -0.5, 0.25]) + rng.standard_normal(40)
    return Dataset(rows=np.column_stack([y, x]))


@pytest.fixture
def probit_data():
    rng = np.random.default_rng(11)
    x = np.column_stack([np.ones(60), rng.standard_normal((60, 2))])
    y = (x @ np.array([0.2, 0.7, -0.4]) + rng.standard_normal(60) > 0).astype(float)
    return Dataset(rows=np.column_stack([y, x]))


def test_ols_hand_example(ols, hand_data):
    """OLS 손계산 예제 테스트"""
    result = evaluate(ols, hand_data, [0.0], unit_plan(2), ALL)

    assert result.value == pytest.approx(1.25)
    assert_allclose(result.gradient, [-1.5])
    assert_allclose(result.hessian, [[1.0]])


def test_unit_plan_equals_identity_index_plan(ols, regression_data):
    """단위 가중치와 0..n-1 인덱스 계획 일치 테스트"""
    theta = np.array([0.3, -0.1, 0.2])
    by_weights = evaluate(ols, regression_data, theta, unit_plan(40), ALL)
    by_indices = evaluate(ols, regression_data, theta, index_plan(np.arange(40)), ALL)

    assert by_weights.value == by_indices.value
    assert np.array_equal(by_weights.gradient, by_indices.gradient)
    assert np.array_equal(by_weights.hessian, by_indices.hessian)


def test_weight_plan_linearity(ols, regression_data):
    """가중치에 대한 선형성 테스트"""
    rng = np.random.default_rng(3)
    w1, w2 = rng.normal(1.0, 1.0, 40), rng.exponential(1.0, 40)
    theta = np.array([0.5, 0.5, -0.5])

    total = evaluate(ols, regression_data, theta, weight_plan(w1 + w2))
    first = evaluate(ols, regression_data, theta, weight_plan(w1))
    second = evaluate(ols, regression_data, theta, weight_plan(w2))

    assert total.value == pytest.approx(first.value + second.value, rel=1e-12)
    assert_allclose(total.gradient, first.gradient + second.gradient, rtol=1e-12, atol=1e-12)


def test_duplicate_indices_match_weights(ols, hand_data):
    """중복 인덱스와 동등한 가중치 계획 테스트"""
    by_indices = evaluate(ols, hand_data, [0.2], index_plan([0, 0, 1]), ALL)
    by_weights = evaluate(ols, hand_data, [0.2], weight_plan([4.0 / 3.0, 2.0 / 3.0]), ALL)

    assert by_indices.value == pytest.approx(by_weights.value)
    assert_allclose(by_indices.gradient, by_weights.gradient)
    assert_allclose(by_indices.hessian, by_weights.hessian)


def test_only_requested_parts_are_computed(ols, hand_data):
    """요청 항목만 계산 테스트"""
    result = evaluate(ols, hand_data, [0.0], unit_plan(2), Want.GRADIENT)

    assert result.value is None
    assert result.hessian is None
    assert result.gradient is not None


def test_finite_difference_hessian_matches_analytic(probit_data):
    """해석적 헤시안이 없을 때 중앙차분 헤시안 테스트"""
    analytic = make_probit()
    numeric = ModelSpec(name="probit-fd", loss=analytic.loss, gradient=analytic.gradient)
    theta = np.array([0.1, 0.4, -0.2])
    plan = unit_plan(probit_data.n)

    expected = evaluate(analytic, probit_data, theta, plan, Want.HESSIAN).hessian
    result = evaluate(numeric, probit_data, theta, plan, Want.HESSIAN).hessian

    assert_allclose(result, expected, atol=1e-6)
    assert_allclose(result, result.T)


def test_finite_difference_gradient_without_analytic(probit_data):
    """손실만 있는 모델의 중앙차분 기울기 테스트"""
    analytic = make_probit()
    loss_only = ModelSpec(name="probit-loss", loss=analytic.loss)
    theta = np.array([0.1, 0.4, -0.2])
    plan = unit_plan(probit_data.n)

    expected = evaluate(analytic, probit_data, theta, plan, Want.GRADIENT).gradient
    result = evaluate(loss_only, probit_data, theta, plan, Want.GRADIENT).gradient

    assert_allclose(result, expected, atol=1e-7)


def test_hessian_vector_product_exact_for_analytic_hessian(ols, regression_data):
    """해석적 헤시안의 헤시안-벡터 곱 테스트"""
    theta = np.zeros(3)
    s = np.array([1.0, -2.0, 0.5])
    plan = unit_plan(regression_data.n)
    hessian = evaluate(ols, regression_data, theta, plan, Want.HESSIAN).hessian

    assert_allclose(hessian_vector_product(ols, regression_data, theta, plan, s), hessian @ s)


def test_hessian_vector_product_finite_difference(ols, regression_data):
    """기울기 차분 헤시안-벡터 곱 테스트"""
    gradient_only = ModelSpec(name="ols-grad", loss=ols.loss, batch_gradient=ols.batch_gradient)
    theta = np.array([0.2, 0.1, -0.3])
    s = np.array([0.3, 1.0, -1.0])
    plan = unit_plan(regression_data.n)
    hessian = evaluate(ols, regression_data, theta, plan, Want.HESSIAN).hessian

    once = hessian_vector_product(gradient_only, regression_data, theta, plan, s)
    twice = hessian_vector_product(gradient_only, regression_data, theta, plan, 2.0 * s)

    assert_allclose(once, hessian @ s, rtol=1e-6, atol=1e-8)
    assert_allclose(twice, 2.0 * once, rtol=1e-8, atol=1e-8)


def test_probit_hessian_vector_product_matches_full_hessian(probit_data):
    """프로빗 헤시안-벡터 곱과 전체 헤시안 비교 테스트"""
    probit = make_probit()
    gradient_only = ModelSpec(
        name="probit-grad",
        loss=probit.loss,
        gradient=probit.gradient,
        batch_loss=probit.batch_loss,
        batch_gradient=probit.batch_gradient,
    )
    theta = np.array([0.1, 0.5, -0.3])
    plan = weight_plan(np.random.default_rng(3).exponential(size=probit_data.n))
    hessian = evaluate(probit, probit_data, theta, plan, Want.HESSIAN).hessian

    for s in (np.array([1.0, 0.0, 0.0]), np.array([0.3, -1.0, 2.0])):
        exact = hessian_vector_product(probit, probit_data, theta, plan, s)
        differenced = hessian_vector_product(gradient_only, probit_data, theta, plan, s)
        assert_allclose(exact, hessian @ s, rtol=1e-12, atol=1e-12)
        assert_allclose(differenced, hessian @ s, rtol=1e-5, atol=1e-7)


def test_hessian_vector_product_rejects_zero_direction(ols, hand_data):
    """0 방향 헤시안-벡터 곱 거부 테스트"""
    with pytest.raises(InvalidDirectionError):
        hessian_vector_product(ols, hand_data, [0.0], unit_plan(2), [0.0])


def test_check_gradient_accepts_correct_model(ols, regression_data):
    """올바른 기울기 검사 테스트"""
    report = check_gradient(ols, regression_data, np.array([0.5, -1.0, 2.0]))

    assert report.max_discrepancy < 1e-6


def test_check_gradient_detects_wrong_gradient(ols, hand_data):
    """잘못된 기울기 (절반) 검출 테스트"""
    wrong = ModelSpec(
        name="ols-wrong",
        loss=ols.loss,
        gradient=lambda row, theta: 0.5 * ols.gradient(row, theta),
    )
    report = check_gradient(wrong, hand_data, [0.0])

    assert report.max_discrepancy == pytest.approx(0.5, abs=1e-6)


def test_check_gradient_needs_analytic_gradient(ols, hand_data):
    """해석적 기울기 없는 모델 검사 거부 테스트"""
    with pytest.raises(ConfigurationError):
        check_gradient(ModelSpec(name="loss-only", loss=ols.loss), hand_data, [0.0])


def test_nonfinite_loss_reports_row():
    """비유한 손실의 행 번호 보고 테스트"""
    data = Dataset(rows=np.array([[1.0, 1.0], [2.0, 1.0], [0.0, 1.0]]))
    model = ModelSpec(name="log", loss=lambda row, theta: -np.log(row[0]) + theta[0] ** 2)

    with pytest.raises(NumericalEvaluationError) as excinfo:
        evaluate(model, data, [0.0], unit_plan(3), Want.VALUE)

    assert excinfo.value.row == 2
    # 계획에 없는 행은 평가하지 않음
    result = evaluate(model, data, [0.0], index_plan([0, 1]), Want.VALUE)
    assert np.isfinite(result.value)


def test_plan_mismatch(ols, hand_data):
    """데이터와 맞지 않는 계획 거부 테스트"""
    with pytest.raises(PlanMismatchError):
        evaluate(ols, hand_data, [0.0], index_plan([0, 5]))
    with pytest.raises(PlanMismatchError):
        evaluate(ols, hand_data, [0.0], weight_plan(np.ones(3)))


def test_parameter_validation():
    """모수 벡터 검증 테스트"""
    with pytest.raises(ConfigurationError):
        as_parameter([])
    with pytest.raises(ConfigurationError):
        as_parameter([1.0, np.nan])
    with pytest.raises(ConfigurationError):
        as_parameter([1.0, 2.0], dim=3)


def test_row_gradients_sum_to_full_sample_gradient(ols, regression_data):
    """행별 점수 평균과 전체 기울기 일치 테스트"""
    theta = np.array([0.1, 0.2, 0.3])
    scores = row_gradients(ols, regression_data, theta)
    gradient = evaluate(ols, regression_data, theta, unit_plan(40), Want.GRADIENT).gradient

    assert scores.shape == (40, 3)
    assert_allclose(scores.mean(axis=0), gradient)


def test_dataset_rejects_missing_values():
    """결측치가 있는 데이터셋 거부 테스트"""
    with pytest.raises(ConfigurationError):
        Dataset(rows=np.array([[1.0, np.nan]]))


def test_read_csv_builds_sorted_panel(tmp_path):
    """CSV 패널 읽기 테스트"""
    path = tmp_path / "panel.csv"
    path.write_text("id,t,y,x\n2,1,5,1\n1,2,2,1\n2,2,6,1\n1,1,1,1\n", encoding="utf-8")

    data = read_csv(path, "y", ["x"], unit="id", time="t", add_constant=True)

    assert data.panel_shape == (2, 2)
    assert_allclose(data.y, [1.0, 2.0, 5.0, 6.0])
    assert data.columns == ("y", "x", "const")
    assert list(data.cluster_ids) == [0, 0, 1, 1]


def test_read_csv_rejects_unbalanced_panel(tmp_path):
    """불균형 패널 거부 테스트"""
    path = tmp_path / "panel.csv"
    path.write_text("id,t,y\n1,1,1\n1,2,2\n2,1,3\n", encoding="utf-8")

    with pytest.raises(ConfigurationError):
        read_csv(path, "y", [], unit="id", time="t")


def test_read_csv_rejects_missing_column(tmp_path):
    """없는 열 거부 테스트"""
    path = tmp_path / "data.csv"
    path.write_text("y,x\n1,2\n", encoding="utf-8")

    with pytest.raises(ConfigurationError):
        read_csv(path, "y", ["z"])


def test_time_split_halves():
    """패널 시간 분할 테스트"""
    rows = np.column_stack([np.arange(15.0), np.ones(15)])
    data = Dataset(rows=rows, panel_shape=(3, 5))

    first, second = data.time_split()

    assert first.panel_shape == (3, 2)
    assert second.panel_shape == (3, 3)
    assert_allclose(first.y, [0, 1, 5, 6, 10, 11])
    assert list(second.cluster_ids) == [0, 0, 0, 1, 1, 1, 2, 2, 2]
