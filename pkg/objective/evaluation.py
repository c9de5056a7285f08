import enum
import logging
from dataclasses import dataclass

import numpy as np

from resampling.plans import unit_plan
from .exceptions import ConfigurationError, InvalidDirectionError, NumericalEvaluationError
from .specs import as_parameter

logger = logging.getLogger(__name__)

FD_RELATIVE_STEP = 1e-6


class Want(enum.Flag):
    VALUE = enum.auto()
    GRADIENT = enum.auto()
    HESSIAN = enum.auto()


@dataclass(frozen=True)
class ObjectiveEvaluation:
    value: float | None = None
    gradient: np.ndarray | None = None
    hessian: np.ndarray | None = None


def _fd_steps(theta):
    return FD_RELATIVE_STEP * np.maximum(1.0, np.abs(theta))


def _raise_on_nonfinite(terms, active, what):
    flat = np.asarray(terms).reshape(len(active), -1)
    bad = np.flatnonzero(~np.all(np.isfinite(flat), axis=1))
    if bad.size:
        row = int(active[bad[0]])
        raise NumericalEvaluationError(f"Non-finite {what} at row {row}.", row=row)


def _row_losses(model, rows, theta):
    if model.batch_loss is not None:
        return np.asarray(model.batch_loss(rows, theta), dtype=float).reshape(len(rows))
    return np.array([model.loss(row, theta) for row in rows], dtype=float)


def _row_gradients(model, rows, theta):
    dim = theta.size
    if model.batch_gradient is not None:
        return np.asarray(model.batch_gradient(rows, theta), dtype=float).reshape(len(rows), dim)
    if model.gradient is not None:
        out = np.empty((len(rows), dim))
        for i, row in enumerate(rows):
            out[i] = model.gradient(row, theta)
        return out
    # 해석적 기울기가 없으면 행별 손실의 중앙차분
    steps = _fd_steps(theta)
    out = np.empty((len(rows), dim))
    for j in range(dim):
        up, down = theta.copy(), theta.copy()
        up[j] += steps[j]
        down[j] -= steps[j]
        out[:, j] = (_row_losses(model, rows, up) - _row_losses(model, rows, down)) / (
            2.0 * steps[j]
        )
    return out


def _row_hessians(model, rows, theta):
    dim = theta.size
    if model.batch_hessian is not None:
        return np.asarray(model.batch_hessian(rows, theta), dtype=float).reshape(
            len(rows), dim, dim
        )
    out = np.empty((len(rows), dim, dim))
    for i, row in enumerate(rows):
        out[i] = model.hessian(row, theta)
    return out


def _weighted_gradient(model, rows, weights, divisor, theta, active):
    grads = _row_gradients(model, rows, theta)
    _raise_on_nonfinite(grads, active, "gradient")
    return weights @ grads / divisor


def evaluate(model, data, theta, plan, want=Want.VALUE | Want.GRADIENT, iteration=None):
    """재표본 계획(plan)으로 가중한 목적함수 Q, 기울기 G, 헤시안 H 를 계산합니다.

    인덱스 계획은 (1/m)Σ, 가중치 계획은 (1/n)Σ w_i 로 합산합니다. 해석적 헤시안이
    없으면 기울기의 중앙차분으로 계산하며, 헤시안은 항상 (H + Hᵀ)/2 로 대칭화합니다.

    Args:
        model (ModelSpec): 모델 정의.
        data (Dataset): 데이터셋.
        theta: 모수 벡터.
        plan (ResamplePlan): 재표본 계획.
        want (Want): 계산할 항목 조합.
        iteration (int | None): 벌점 스케줄에 넘길 반복 번호.

    Returns:
        ObjectiveEvaluation: 요청한 항목만 채워진 결과.

    Raises:
        PlanMismatchError: 계획이 데이터와 호환되지 않는 경우.
        NumericalEvaluationError: 손실/도함수가 비유한 값인 경우 (행 번호 포함).
    """
    theta = as_parameter(theta, model.resolve_dim(data))
    coef, divisor = plan.coefficients(data.n)
    active = np.flatnonzero(coef)
    rows = data.rows[active]
    weights = coef[active]

    value = gradient = hessian = None
    if Want.VALUE in want:
        losses = _row_losses(model, rows, theta)
        _raise_on_nonfinite(losses, active, "loss")
        value = float(weights @ losses / divisor)

    if Want.GRADIENT in want:
        gradient = _weighted_gradient(model, rows, weights, divisor, theta, active)

    if Want.HESSIAN in want:
        if model.analytic_flags["hessian"]:
            hessians = _row_hessians(model, rows, theta)
            _raise_on_nonfinite(hessians, active, "hessian")
            hessian = np.tensordot(weights, hessians, axes=1) / divisor
        else:
            steps = _fd_steps(theta)
            hessian = np.empty((theta.size, theta.size))
            for j in range(theta.size):
                up, down = theta.copy(), theta.copy()
                up[j] += steps[j]
                down[j] -= steps[j]
                hessian[:, j] = (
                    _weighted_gradient(model, rows, weights, divisor, up, active)
                    - _weighted_gradient(model, rows, weights, divisor, down, active)
                ) / (2.0 * steps[j])
        hessian = 0.5 * (hessian + hessian.T)

    if model.penalty is not None:
        p_value, p_gradient, p_hessian = model.penalty.terms(theta, data.n, iteration)
        if value is not None:
            value += p_value
        if gradient is not None:
            gradient = gradient + p_gradient
        if hessian is not None:
            hessian = hessian + p_hessian

    return ObjectiveEvaluation(value=value, gradient=gradient, hessian=hessian)


def hessian_vector_product(model, data, theta, plan, s, iteration=None):
    """헤시안-벡터 곱 H_plan(θ)·s 를 계산합니다.

    해석적 헤시안이 있으면 정확히 H·s 를, 없으면
    [G(θ+εs) − G(θ−εs)]/(2ε), ε = 1e-6·max(1, ‖θ‖∞) 를 반환합니다.

    Raises:
        InvalidDirectionError: ‖s‖ = 0 또는 비유한 방향.
    """
    theta = as_parameter(theta, model.resolve_dim(data))
    direction = np.asarray(s, dtype=float).reshape(-1)
    norm = np.linalg.norm(direction)
    if not np.isfinite(norm) or norm == 0.0:
        raise InvalidDirectionError("Hessian-vector product needs a non-zero direction.")

    if model.analytic_flags["hessian"]:
        hessian = evaluate(model, data, theta, plan, Want.HESSIAN, iteration).hessian
        return hessian @ direction

    eps = FD_RELATIVE_STEP * max(1.0, float(np.max(np.abs(theta))))
    upper = evaluate(model, data, theta + eps * direction, plan, Want.GRADIENT, iteration)
    lower = evaluate(model, data, theta - eps * direction, plan, Want.GRADIENT, iteration)
    return (upper.gradient - lower.gradient) / (2.0 * eps)


def row_gradients(model, data, theta):
    """전체 표본의 행별 점수 ∇q(z_i; θ) 를 (n, d) 행렬로 반환합니다."""
    theta = as_parameter(theta, model.resolve_dim(data))
    grads = _row_gradients(model, data.rows, theta)
    _raise_on_nonfinite(grads, np.arange(data.n), "gradient")
    return grads


@dataclass(frozen=True)
class GradientCheck:
    max_discrepancy: float
    analytic: np.ndarray
    numeric: np.ndarray


def check_gradient(model, data, theta):
    """해석적 기울기와 중앙차분 기울기의 최대 상대 오차를 보고합니다.

    오차는 좌표별 |analytic − FD| / max(1, |FD|) 의 최댓값입니다.
    """
    if not model.analytic_flags["gradient"]:
        raise ConfigurationError(f"Model {model.name} has no analytic gradient to check.")
    theta = as_parameter(theta, model.resolve_dim(data))
    plan = unit_plan(data.n)
    analytic = evaluate(model, data, theta, plan, Want.GRADIENT).gradient

    steps = _fd_steps(theta)
    numeric = np.empty_like(theta)
    for j in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[j] += steps[j]
        down[j] -= steps[j]
        numeric[j] = (
            evaluate(model, data, up, plan, Want.VALUE).value
            - evaluate(model, data, down, plan, Want.VALUE).value
        ) / (2.0 * steps[j])

    discrepancy = float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))))
    logger.debug(f"Gradient check for {model.name}: {discrepancy:.3e}")
    return GradientCheck(max_discrepancy=discrepancy, analytic=analytic, numeric=numeric)
