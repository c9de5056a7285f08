import numpy as np

from objective.specs import ModelSpec


def _loss(row, theta):
    resid = row[0] - row[1:] @ theta
    return 0.5 * resid * resid


def _gradient(row, theta):
    return -(row[0] - row[1:] @ theta) * row[1:]


def _hessian(row, theta):
    return np.outer(row[1:], row[1:])


def _batch_loss(rows, theta):
    resid = rows[:, 0] - rows[:, 1:] @ theta
    return 0.5 * resid**2


def _batch_gradient(rows, theta):
    resid = rows[:, 0] - rows[:, 1:] @ theta
    return -resid[:, None] * rows[:, 1:]


def _batch_hessian(rows, theta):
    x = rows[:, 1:]
    return x[:, :, None] * x[:, None, :]


def make_ols(dim=None, param_names=()):
    """최소제곱 모델 q = ½(y − xᵀθ)²."""
    return ModelSpec(
        name="ols",
        loss=_loss,
        gradient=_gradient,
        hessian=_hessian,
        batch_loss=_batch_loss,
        batch_gradient=_batch_gradient,
        batch_hessian=_batch_hessian,
        dim=dim,
        param_names=tuple(param_names),
    )


def ols_solution(data, plan=None):
    """(가중) 정규방정식 해. plan 이 주어지면 그 재표본의 해를 구합니다."""
    x, y = data.x, data.y
    if plan is None:
        coef = np.ones(data.n)
    else:
        coef, _ = plan.coefficients(data.n)
    xtx = x.T @ (coef[:, None] * x)
    xty = x.T @ (coef * y)
    return np.linalg.solve(xtx, xty)
