import json

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from baselines.bootstrap import fit_full_sample
from estimators.dgp import DgpKind, make_panel_variance_model, simulate_dgp
from estimators.nls import make_exponential_nls
from estimators.ols import make_ols, ols_solution
from estimators.probit import make_probit, probit_start_values
from estimators.saddle import make_quadratic, make_saddle
from objective.datasets import Dataset
from objective.evaluation import Want, evaluate
from objective.exceptions import ConfigurationError, DivergenceError, PlanMismatchError
from resampling.plans import Scheme, SchemeConfig, index_plan, unit_plan, weight_plan
from resampling.streams import Purpose, RngStream
from .chains import Method, PenaltyConfig, RunConfig, default_burn, run_chain
from .classical import classical_optimize, learning_rates, run_sgd
from .coupling import build_oracle, coupling_oracle_simulate, replay_chain
from .exports import chain_frame, write_draws_csv, write_failure_log
from .split_panel import half_plan, run_split_panel


@pytest.fixture
def regression_data():
    rng = np.random.default_rng(21)
    x = np.column_stack([np.ones(100), rng.standard_normal((100, 2))])
    y = x @ np.array([1.0, 2.0, -1.0]) + rng.standard_normal(100)
    return Dataset(rows=np.column_stack([y, x]))


@pytest.fixture
def ols():
    return make_ols()


@pytest.fixture
def location():
    """헤시안이 모든 재표본에서 같은 이차 위치 모형."""
    rng = np.random.default_rng(5)
    quadratic = make_quadratic(np.array([[2.0, 0.5], [0.5, 1.0]]), center=np.array([1.0, -1.0]))
    data = Dataset(rows=np.column_stack([np.zeros(80), rng.standard_normal((80, 2))]))
    return quadratic, data


def test_default_burn():
    """기본 번인 길이 테스트"""
    assert default_burn(0.1) == 50
    assert default_burn(0.01) == 459
    assert default_burn(1.0) == 50


def test_run_config_validation():
    """실행 설정 검증 테스트"""
    with pytest.raises(ConfigurationError):
        RunConfig(gamma=0.0, B=10, theta0=(0.0,))
    with pytest.raises(ConfigurationError):
        RunConfig(gamma=1.5, B=10, theta0=(0.0,))
    with pytest.raises(ConfigurationError):
        RunConfig(gamma=0.5, B=10, theta0=(0.0,), method="bfgs")


def test_ols_rnr_chain_is_exact_ar1(ols, regression_data):
    """OLS rNR 체인의 AR(1) 정확성 테스트"""
    config = RunConfig(
        gamma=0.3,
        B=500,
        theta0=(0.0, 0.0, 0.0),
        burn=0,
        scheme=SchemeConfig(Scheme.M_OUT_OF_N, m=50),
        method=Method.RNR,
        seed=17,
    )
    chain = run_chain(ols, regression_data, config, record_plans=True)
    theta_hat = ols_solution(regression_data)
    path = chain.path

    worst = 0.0
    for b, plan in enumerate(chain.plans):
        theta_m = ols_solution(regression_data, plan)
        expected = theta_hat + 0.7 * (path[b] - theta_hat) + 0.3 * (theta_m - theta_hat)
        worst = max(worst, np.abs(path[b + 1] - expected).max())
    assert worst <= 1e-9


def test_coupling_oracle_is_exact_for_quadratic_rnr(location):
    """이차 위치 모형에서 결합 과정 정확성 테스트"""
    quadratic, data = location
    config = RunConfig(
        gamma=0.2,
        B=200,
        theta0=(3.0, 3.0),
        burn=20,
        scheme=SchemeConfig(Scheme.M_OUT_OF_N),
        method=Method.RNR,
        seed=3,
    )
    chain = run_chain(quadratic.spec, data, config, record_plans=True)
    theta_hat = quadratic.center + data.x.mean(axis=0)
    oracle = build_oracle(quadratic.spec, data, theta_hat, "rnr", 0.2)

    replayed = replay_chain(oracle, chain, quadratic.spec, data)

    assert_allclose(replayed, chain.path[1:], atol=1e-9)


def test_coupling_oracle_gamma_one_has_no_memory(location):
    """γ = 1 에서 Ψ = 0 테스트"""
    quadratic, data = location
    theta_hat = quadratic.center + data.x.mean(axis=0)

    oracle = build_oracle(quadratic.spec, data, theta_hat, "rnr", 1.0)

    assert_allclose(oracle.psi, np.zeros((2, 2)))
    assert_allclose(oracle.p_bar @ quadratic.H, np.eye(2), atol=1e-12)


def test_coupling_oracle_rejects_wrong_plan_count(location):
    """계획 수와 체인 길이 불일치 오류 테스트"""
    quadratic, data = location
    oracle = build_oracle(quadratic.spec, data, quadratic.center, "rgd", 0.1)
    plans = [index_plan(np.arange(80))] * 3

    with pytest.raises(PlanMismatchError):
        coupling_oracle_simulate(oracle, plans, quadratic.spec, data, [0.0, 0.0], expected=4)


def test_chain_is_deterministic(ols, regression_data):
    """같은 시드의 체인 재현 테스트"""
    config = RunConfig(gamma=0.2, B=30, theta0=(0.0, 0.0, 0.0), method=Method.RQN, seed=99)

    first = run_chain(ols, regression_data, config)
    second = run_chain(ols, regression_data, config)
    other = run_chain(ols, regression_data, RunConfig(gamma=0.2, B=30, theta0=(0.0, 0.0, 0.0), seed=98))

    assert np.array_equal(first.draws, second.draws)
    assert not np.allclose(first.draws, other.draws)
    assert first.B == 30
    assert first.burned.shape == (50, 3)


def _nls_data():
    rng = np.random.default_rng(12)
    x = np.column_stack([np.ones(80), rng.uniform(-1.0, 1.0, 80)])
    y = np.exp(x @ np.array([0.2, 0.5])) + 0.1 * rng.standard_normal(80)
    return Dataset(rows=np.column_stack([y, x]))


@pytest.mark.parametrize(
    "model, data, start",
    [
        (make_ols(), None, None),
        (
            make_probit(),
            simulate_dgp(DgpKind.PROBIT, 200, [0.3, 0.8, -0.5], seed=3),
            "probit",
        ),
        (make_exponential_nls(2), _nls_data(), np.array([0.15, 0.45])),
    ],
    ids=["ols", "probit", "nls-exp"],
)
def test_degenerate_plan_fixed_point(model, data, start, regression_data):
    """단위 계획에서 내장 모델별 θ̂ 고정점 테스트"""
    if data is None:
        data, theta_hat = regression_data, ols_solution(regression_data)
    else:
        theta0 = probit_start_values(data) if isinstance(start, str) and start == "probit" else start
        theta_hat = fit_full_sample(model, data, theta0, tol=1e-11)
    for method in Method:
        config = RunConfig(gamma=0.5, B=20, theta0=tuple(theta_hat), burn=0, method=method)
        chain = run_chain(model, data, config, plan_source=lambda b: unit_plan(data.n))
        assert_allclose(chain.draws, np.tile(theta_hat, (20, 1)), atol=1e-9)


@pytest.mark.parametrize("method", list(Method))
def test_chain_moves_toward_estimate_early_in_burn_in(method, ols, regression_data):
    """번인 초반 θ̂ 방향 수축 테스트"""
    theta_hat = ols_solution(regression_data)
    theta0 = np.zeros(3)
    distances = []
    for seed in range(50):
        config = RunConfig(gamma=0.1, B=1, theta0=tuple(theta0), burn=10, method=method, seed=seed)
        chain = run_chain(ols, regression_data, config)
        distances.append(np.linalg.norm(chain.path[10] - theta_hat))

    assert np.median(distances) < np.linalg.norm(theta0 - theta_hat)


def test_penalised_start_decreases_objective_through_burn_in():
    """감소하는 벌점 아래 번인 동안 목적함수 단조 감소 테스트"""
    quadratic = make_quadratic(2.0 * np.eye(2), center=np.array([0.0, 0.0]))
    config = RunConfig(
        gamma=0.3,
        B=20,
        theta0=(3.0, -2.0),
        burn=20,
        method=Method.RNR,
        penalty=PenaltyConfig(lambda0=20.0, decay=0.9),
    )

    chain = run_chain(quadratic.spec, quadratic.zero_data(), config, plan_source=lambda b: unit_plan(1))
    values = np.array([quadratic.value(theta) for theta in chain.path])
    unpenalised = run_chain(
        quadratic.spec,
        quadratic.zero_data(),
        RunConfig(gamma=0.3, B=20, theta0=(3.0, -2.0), burn=20, method=Method.RNR),
        plan_source=lambda b: unit_plan(1),
    )

    assert np.all(np.diff(values) <= 1e-12)
    assert values[-1] < 1e-3 * values[0]
    assert np.linalg.norm(chain.path[1] - chain.path[0]) < np.linalg.norm(
        unpenalised.path[1] - unpenalised.path[0]
    )


def test_rgd_diverges_with_large_step():
    """큰 학습률 rGD 의 발산 오류 테스트"""
    quadratic = make_quadratic(np.diag([5.0, 1.0]))
    config = RunConfig(gamma=1.0, B=100, theta0=(1.0, 1.0), burn=0, method=Method.RGD)

    with pytest.raises(DivergenceError) as excinfo:
        run_chain(quadratic.spec, quadratic.zero_data(), config, plan_source=lambda b: unit_plan(1))

    assert excinfo.value.iteration is not None
    assert np.all(np.isfinite(excinfo.value.last_finite))


def test_rqn_chain_logs_refreshes_when_stuck(ols, regression_data):
    """rQN 체인 진단 로그 형식 테스트"""
    theta_hat = ols_solution(regression_data)
    config = RunConfig(gamma=0.5, B=10, theta0=tuple(theta_hat), burn=0, method=Method.RQN)

    chain = run_chain(ols, regression_data, config, plan_source=lambda b: unit_plan(100))

    for entry in chain.failure_log:
        assert set(entry) == {"b", "event", "detail"}


def test_newton_one_step_solves_quadratic(ols, regression_data):
    """이차 목적함수의 NR 한 단계 수렴 테스트"""
    path = classical_optimize(ols, regression_data, np.zeros(3), method="nr", gamma=1.0, iters=1)

    assert_allclose(path.theta, ols_solution(regression_data), atol=1e-10)
    assert path.iterations == 1


def test_gradient_descent_diverges_outside_stable_region():
    """λ_max·γ > 2 인 GD 발산 테스트"""
    quadratic = make_quadratic(np.diag([3.0, 1.0]))

    with pytest.raises(DivergenceError) as excinfo:
        classical_optimize(
            quadratic.spec, quadratic.zero_data(), [1.0, 1.0], method="gd", gamma=1.0, iters=200
        )

    assert excinfo.value.history.shape[1] == 2


def test_modified_newton_escapes_saddle_geometrically():
    """안장점에서 수정 NR 의 (1+γ) 배 이탈 테스트"""
    spec, quadratic = make_saddle()
    q1, q2 = quadratic.eigenvectors[:, 0], quadratic.eigenvectors[:, 1]
    theta0 = q1 + 0.1 * q2

    path = classical_optimize(
        spec, quadratic.zero_data(), theta0, method="nr", gamma=0.1, iters=50, modify=True,
        divergence_bound=np.inf,
    ).path

    along = path @ q2
    assert_allclose(along[1:] / along[:-1], 1.1, rtol=1e-10)
    assert_allclose(path[-1] @ q1, 0.9**50, rtol=1e-8)


def test_classical_optimize_line_search_converges(regression_data, ols):
    """line search 와 수렴 판정 테스트"""
    path = classical_optimize(
        ols, regression_data, np.zeros(3), method="gd", gamma=1.0, iters=500, tol=1e-8, line_search=True
    )

    assert path.converged
    assert_allclose(path.theta, ols_solution(regression_data), atol=1e-6)


def test_learning_rates():
    """학습률 수열 테스트"""
    assert_allclose(learning_rates(1.0, 0.75, 3), [1.0, 2**-0.75, 3**-0.75])
    with pytest.raises(ConfigurationError):
        learning_rates(1.0, 0.5, 3)
    with pytest.raises(ConfigurationError):
        learning_rates(0.0, 0.75, 3)


def test_sgd_average_approaches_estimate(ols, regression_data):
    """SGD Polyak-Ruppert 평균 테스트"""
    result = run_sgd(ols, regression_data, np.zeros(3), gamma0=0.5, delta=0.6, m=10, iters=3000, seed=1)

    assert result.path.shape == (3001, 3)
    assert_allclose(result.average, ols_solution(regression_data), atol=0.15)


def test_conditioned_sgd_step(ols, regression_data):
    """고정 조건화 행렬 SGD 갱신 테스트"""
    theta0 = np.zeros(3)
    conditioner = evaluate(ols, regression_data, theta0, unit_plan(100), Want.HESSIAN).hessian

    result = run_sgd(
        ols, regression_data, theta0, gamma0=0.5, delta=0.6, m=10, iters=3000, seed=1, conditioner=conditioner
    )

    rows = RngStream(1).generator(0, Purpose.PLAN).integers(0, 100, size=10)
    gradient = evaluate(ols, regression_data, theta0, index_plan(rows), Want.GRADIENT).gradient
    rate = result.learning_rates[0]
    expected = theta0 - rate * np.linalg.solve(conditioner + rate * np.eye(3), gradient)
    assert_allclose(result.path[1], expected, atol=1e-12)
    assert_allclose(result.average, ols_solution(regression_data), atol=0.15)


def test_half_plan_maps_panel_rows():
    """분할 패널 계획 변환 테스트"""
    plan = index_plan([1, 2, 5], effective_m=3)

    first = half_plan(plan, (2, 4), 0, 2)
    second = half_plan(plan, (2, 4), 2, 4)
    weights = half_plan(weight_plan(np.arange(8.0)), (2, 4), 2, 4)

    assert list(first.indices) == [1, 3]
    assert list(second.indices) == [0]
    assert_allclose(weights.weights, [2.0, 3.0, 6.0, 7.0])


def test_split_panel_shares_unit_draws():
    """세 체인의 unit 재표본 공유 테스트"""
    data = simulate_dgp(DgpKind.NONLINEAR_PANEL, (30, 4), (1.0, 0.0), seed=2)
    config = RunConfig(
        gamma=0.3,
        B=20,
        theta0=(1.0, 0.0),
        burn=5,
        scheme=SchemeConfig(Scheme.M_OUT_OF_N),
        method=Method.RNR,
        seed=8,
    )

    result = run_split_panel(make_panel_variance_model(), data, config)

    assert len(result.unit_log) == 25
    assert all(units is not None and units.size == 30 for units in result.unit_log)
    assert_allclose(
        result.corrected.draws,
        2.0 * result.full.draws - 0.5 * (result.first.draws + result.second.draws),
    )
    assert result.first.n == 60
    assert result.corrected.method == "split-corrected"


def test_split_panel_half_delay_starts_halves_from_full_chain():
    """지연 시작한 절반 체인 테스트"""
    data = simulate_dgp(DgpKind.NONLINEAR_PANEL, (30, 4), (1.0, 0.0), seed=2)
    config = RunConfig(
        gamma=0.3,
        B=20,
        theta0=(1.0, 0.0),
        burn=8,
        scheme=SchemeConfig(Scheme.M_OUT_OF_N),
        method=Method.RNR,
        seed=8,
    )

    delayed = run_split_panel(make_panel_variance_model(), data, config, half_delay=4)
    synchronized = run_split_panel(make_panel_variance_model(), data, config)

    for half in (delayed.first, delayed.second):
        assert_allclose(half.burned[:4], delayed.full.burned[:4])
        assert not np.allclose(half.burned[4], delayed.full.burned[4])
    assert_allclose(delayed.corrected.burned[:4], delayed.full.burned[:4])
    assert_allclose(delayed.full.draws, synchronized.full.draws)
    assert not np.allclose(delayed.first.burned[4], synchronized.first.burned[4])
    with pytest.raises(ConfigurationError):
        run_split_panel(make_panel_variance_model(), data, config, half_delay=-1)


def test_split_panel_needs_panel():
    """패널이 아닌 데이터 거부 테스트"""
    data = Dataset(rows=np.zeros((10, 2)))
    config = RunConfig(gamma=0.3, B=10, theta0=(0.0, 0.0))

    with pytest.raises(ConfigurationError):
        run_split_panel(make_panel_variance_model(), data, config)


@pytest.mark.slow
def test_split_panel_reduces_variance_bias():
    """분할 패널 보정의 log σ² 편향 감소 테스트"""
    data = simulate_dgp(DgpKind.NONLINEAR_PANEL, (2000, 10), (1.0, 0.0), seed=4)
    config = RunConfig(
        gamma=0.3,
        B=200,
        theta0=(1.0, 0.0),
        burn=50,
        scheme=SchemeConfig(Scheme.GAUSSIAN),
        method=Method.RNR,
        seed=6,
    )

    result = run_split_panel(make_panel_variance_model(), data, config)
    full_bias = result.full.draws[:, 1].mean()
    corrected_bias = result.corrected.draws[:, 1].mean()

    assert full_bias == pytest.approx(np.log(0.9), abs=0.03)
    assert abs(corrected_bias) < abs(full_bias) / 2


def test_chain_frame_schema(ols, regression_data, tmp_path):
    """draws.csv 스키마 테스트"""
    config = RunConfig(gamma=0.5, B=12, theta0=(0.0, 0.0, 0.0), burn=3, seed=1)
    chain = run_chain(ols, regression_data, config)

    frame = chain_frame(chain)
    path = write_draws_csv(chain, tmp_path / "draws.csv")
    loaded = pd.read_csv(path)

    assert list(frame.columns) == ["b", "phase", "theta_1", "theta_2", "theta_3"]
    assert (frame["phase"] == "burn").sum() == 3
    assert list(loaded.loc[loaded["phase"] == "keep", "b"]) == list(range(1, 13))
    assert_allclose(loaded[["theta_1", "theta_2", "theta_3"]].to_numpy()[3:], chain.draws, rtol=1e-15)


def test_failure_log_is_json_lines(tmp_path):
    """failures.jsonl 형식 테스트"""
    entries = [{"b": 3, "event": "nr-fallback", "detail": {"reason": "x"}}]
    path = write_failure_log(entries, tmp_path / "failures.jsonl")

    lines = path.read_text(encoding="utf-8").splitlines()
    assert json.loads(lines[0]) == entries[0]
