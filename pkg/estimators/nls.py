import numpy as np

from objective.exceptions import ConfigurationError
from objective.specs import ModelSpec


def make_nls(f, grad_f, dim, gauss_newton=True, param_names=(), name="nls"):
    """비선형 최소제곱 q = (y − f(x; θ))².

    Args:
        f: (x, θ) -> float 평균 함수.
        grad_f: (x, θ) -> (d,) θ 에 대한 f 의 기울기.
        dim (int): 모수 차원.
        gauss_newton (bool): True 이면 헤시안으로 2∇f∇fᵀ 를 사용하고,
            False 이면 기울기의 중앙차분 헤시안을 사용합니다.

    Raises:
        ConfigurationError: f 또는 grad_f 가 없는 경우.
    """
    if f is None or grad_f is None:
        raise ConfigurationError("NLS needs both f and its parameter gradient.")

    def loss(row, theta):
        resid = row[0] - f(row[1:], theta)
        return resid * resid

    def gradient(row, theta):
        resid = row[0] - f(row[1:], theta)
        return -2.0 * resid * np.asarray(grad_f(row[1:], theta), dtype=float)

    def hessian(row, theta):
        g = np.asarray(grad_f(row[1:], theta), dtype=float)
        return 2.0 * np.outer(g, g)

    return ModelSpec(
        name=name,
        loss=loss,
        gradient=gradient,
        hessian=hessian if gauss_newton else None,
        dim=dim,
        param_names=tuple(param_names),
    )


def exponential_mean(x, theta):
    return float(np.exp(x @ theta))


def exponential_mean_gradient(x, theta):
    return np.exp(x @ theta) * x


def make_exponential_nls(dim, gauss_newton=True, param_names=()):
    """f(x; θ) = exp(xᵀθ) 평균 함수를 쓰는 NLS 내장 모델."""
    return make_nls(
        exponential_mean,
        exponential_mean_gradient,
        dim=dim,
        gauss_newton=gauss_newton,
        param_names=param_names,
        name="nls-exp",
    )
