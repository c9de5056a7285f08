import logging
from dataclasses import dataclass

import numpy as np

from conditioning.matrices import nr_conditioner
from objective.evaluation import Want, evaluate
from objective.exceptions import ConfigurationError, DivergenceError
from objective.specs import as_parameter
from resampling.plans import index_plan, unit_plan
from resampling.streams import Purpose, RngStream

logger = logging.getLogger(__name__)

MAX_HALVINGS = 30


@dataclass(frozen=True, eq=False)
class OptimizationPath:
    """결정적 최적화 경로.

    Attributes:
        path (np.ndarray): θ0 를 포함한 반복값 (k+1)×d.
        converged (bool): tol 이 주어졌을 때 ‖G‖ <= tol 도달 여부.
        gradient_norm (float): 마지막 반복의 ‖G‖₂.
    """

    path: np.ndarray
    converged: bool
    gradient_norm: float

    @property
    def theta(self):
        return self.path[-1]

    @property
    def iterations(self):
        return self.path.shape[0] - 1


def _check_finite(theta, history, bound):
    if not np.all(np.isfinite(theta)) or np.max(np.abs(theta)) > bound:
        raise DivergenceError(
            "Deterministic iterations diverged.",
            iteration=len(history),
            last_finite=history[-1],
            history=np.array(history),
        )


def newton_step(model, data, theta, plan, modify=False, ridge=0.0):
    evaluation = evaluate(model, data, theta, plan, Want.VALUE | Want.GRADIENT | Want.HESSIAN)
    conditioner = nr_conditioner(evaluation.hessian, modify=modify, ridge=ridge, n=data.n)
    return evaluation, conditioner.apply(evaluation.gradient)


def classical_optimize(
    model,
    data,
    theta0,
    method="nr",
    gamma=1.0,
    iters=100,
    modify=False,
    ridge=0.0,
    tol=None,
    line_search=False,
    plan=None,
    divergence_bound=1e8,
):
    """전체 표본(또는 주어진 plan)에 대한 결정적 GD/NR 반복.

    Args:
        model (ModelSpec): 모델.
        data (Dataset): 데이터셋.
        theta0: 시작값.
        method (str): "gd" 또는 "nr".
        gamma (float): 학습률.
        iters (int): 최대 반복 수 (>= 1).
        modify (bool): NR 의 |고윳값| 수정.
        ridge (float): NR 의 ridge λ (λ/n 이 더해짐).
        tol (float | None): ‖G‖₂ <= tol 이면 멈춤.
        line_search (bool): 목적함수가 증가하면 보폭을 반으로 줄이는 backtracking.
        plan (ResamplePlan | None): None 이면 unit_plan.

    Returns:
        OptimizationPath: 반복 경로.

    Raises:
        DivergenceError: 비유한 반복값 (history 포함).
    """
    if iters < 1:
        raise ConfigurationError("iters must be at least 1.")
    if method not in ("gd", "nr"):
        raise ConfigurationError(f"Unknown classical method: {method}")
    plan = plan or unit_plan(data.n)
    theta = as_parameter(theta0, model.resolve_dim(data))
    history = [theta]
    gradient_norm = np.inf
    converged = False

    for _ in range(iters):
        if method == "nr":
            evaluation, direction = newton_step(model, data, theta, plan, modify, ridge)
        else:
            evaluation = evaluate(model, data, theta, plan, Want.VALUE | Want.GRADIENT)
            direction = evaluation.gradient
        gradient_norm = float(np.linalg.norm(evaluation.gradient))
        if tol is not None and gradient_norm <= tol:
            converged = True
            break

        step = gamma
        candidate = theta - step * direction
        if line_search:
            for _ in range(MAX_HALVINGS):
                if np.all(np.isfinite(candidate)):
                    trial = evaluate(model, data, candidate, plan, Want.VALUE).value
                    if trial <= evaluation.value:
                        break
                step *= 0.5
                candidate = theta - step * direction
        _check_finite(candidate, history, divergence_bound)
        theta = candidate
        history.append(theta)

    if tol is not None and not converged:
        final = evaluate(model, data, theta, plan, Want.GRADIENT).gradient
        gradient_norm = float(np.linalg.norm(final))
        converged = gradient_norm <= tol
    return OptimizationPath(path=np.array(history), converged=converged, gradient_norm=gradient_norm)


@dataclass(frozen=True, eq=False)
class SgdPath:
    path: np.ndarray
    average: np.ndarray
    learning_rates: np.ndarray

    @property
    def final(self):
        return self.path[-1]


def learning_rates(gamma0, delta, iters):
    """γ_k = γ0·k^{−δ}, k = 1..iters."""
    if not 0.5 < delta <= 1:
        raise ConfigurationError("delta must lie in (1/2, 1].")
    if gamma0 <= 0:
        raise ConfigurationError("gamma0 must be positive.")
    return gamma0 * np.arange(1, iters + 1, dtype=float) ** (-delta)


def run_sgd(model, data, theta0, gamma0, delta, m, iters, seed, conditioner=None, divergence_bound=1e8):
    """m-부분표본 확률적 경사하강과 Polyak-Ruppert 평균.

    conditioner 로 고정 행렬 H 를 주면 P_k = (H + γ_k I)^{-1} 로 조건화합니다.

    Returns:
        SgdPath: 경로, θ_1..θ_iters 의 평균, 학습률 수열.
    """
    if not 1 <= m <= data.n:
        raise ConfigurationError(f"m must lie in [1, n], got {m}.")
    rates = learning_rates(gamma0, delta, iters)
    stream = RngStream(seed)
    theta = as_parameter(theta0, model.resolve_dim(data))
    eye = np.eye(theta.size)
    path = np.empty((iters + 1, theta.size))
    path[0] = theta
    for k, rate in enumerate(rates):
        rng = stream.generator(k, Purpose.PLAN)
        plan = index_plan(rng.integers(0, data.n, size=m))
        gradient = evaluate(model, data, theta, plan, Want.GRADIENT).gradient
        if conditioner is not None:
            gradient = np.linalg.solve(conditioner + rate * eye, gradient)
        theta = theta - rate * gradient
        _check_finite(theta, list(path[: k + 1]), divergence_bound)
        path[k + 1] = theta
    return SgdPath(path=path, average=path[1:].mean(axis=0), learning_rates=rates)
