import enum
import logging

import numpy as np

from objective.datasets import Dataset
from objective.exceptions import ConfigurationError
from objective.specs import ModelSpec
from resampling.streams import Purpose, RngStream

logger = logging.getLogger(__name__)

FIXED_EFFECT_PREFIX = "fe_"


class DgpKind(str, enum.Enum):
    LINEAR_GAUSSIAN = "LinearGaussian"
    PROBIT = "ProbitDGP"
    NONLINEAR_PANEL = "NonlinearPanel"


def _linear_gaussian(rng, n, theta):
    d = theta.size
    x = np.column_stack([np.ones(n), rng.standard_normal((n, d - 1))])
    y = x @ theta + rng.standard_normal(n)
    columns = ("y", "const", *(f"x{j}" for j in range(1, d)))
    return Dataset(rows=np.column_stack([y, x]), columns=columns, truth=theta)


def _probit(rng, n, theta, n_groups):
    d = theta.size
    if n_groups:
        n_covariates = d - n_groups
        if n_covariates < 1:
            raise ConfigurationError("ProbitDGP needs at least one covariate besides fixed effects.")
        groups = np.arange(n) % n_groups
        dummies = np.eye(n_groups)[groups]
        x = np.column_stack([rng.standard_normal((n, n_covariates)), dummies])
        columns = (
            "y",
            *(f"x{j}" for j in range(1, n_covariates + 1)),
            *(f"{FIXED_EFFECT_PREFIX}{g}" for g in range(n_groups)),
        )
        cluster_ids = groups
    else:
        x = np.column_stack([np.ones(n), rng.standard_normal((n, d - 1))])
        columns = ("y", "const", *(f"x{j}" for j in range(1, d)))
        cluster_ids = None
    y = (x @ theta + rng.standard_normal(n) > 0).astype(float)
    return Dataset(rows=np.column_stack([y, x]), cluster_ids=cluster_ids, columns=columns, truth=theta)


def _nonlinear_panel(rng, n_units, periods, theta):
    beta, log_variance = theta
    alpha = rng.standard_normal(n_units)
    x = 0.5 * alpha[:, None] + rng.standard_normal((n_units, periods))
    noise = np.exp(0.5 * log_variance) * rng.standard_normal((n_units, periods))
    y = alpha[:, None] + beta * x + noise
    rows = np.column_stack([y.ravel(), x.ravel()])
    return Dataset(
        rows=rows,
        cluster_ids=np.repeat(np.arange(n_units), periods),
        panel_shape=(n_units, periods),
        columns=("y", "x"),
        truth=np.asarray(theta, dtype=float),
    )


def simulate_dgp(kind, size, theta, seed, n_groups=0):
    """재현 가능한 모의 데이터셋을 생성합니다 (참 모수는 Dataset.truth 에 기록).

    Args:
        kind (DgpKind | str): LinearGaussian, ProbitDGP, NonlinearPanel.
        size (int | tuple): n 또는 패널의 (n_units, T).
        theta: 참 모수. NonlinearPanel 은 (β, log σ²).
        seed (int): 시드.
        n_groups (int): ProbitDGP 의 고정효과 그룹 수.

    Returns:
        Dataset: 생성된 데이터셋.
    """
    kind = DgpKind(kind)
    theta = np.asarray(theta, dtype=float).reshape(-1)
    rng = RngStream(seed).generator(0, Purpose.DATA)
    if kind is DgpKind.NONLINEAR_PANEL:
        n_units, periods = size
        if n_units < 1 or periods < 2:
            raise ConfigurationError("NonlinearPanel needs n_units >= 1 and T >= 2.")
        if theta.size != 2:
            raise ConfigurationError("NonlinearPanel truth is (beta, log_variance).")
        return _nonlinear_panel(rng, int(n_units), int(periods), theta)
    n = int(size)
    if n < 1 or theta.size < 1:
        raise ConfigurationError("Dataset size and dimension must be positive.")
    if kind is DgpKind.LINEAR_GAUSSIAN:
        return _linear_gaussian(rng, n, theta)
    return _probit(rng, n, theta, int(n_groups))


def fixed_effect_columns(data):
    """고정효과 더미 열의 계수 인덱스."""
    return tuple(
        j for j, name in enumerate(data.regressor_names) if name.startswith(FIXED_EFFECT_PREFIX)
    )


def within_transform(data):
    """unit 별 평균을 뺀 (within) 패널 데이터셋."""
    if data.panel_shape is None:
        raise ConfigurationError("The within transform needs panel_shape.")
    n_units, periods = data.panel_shape
    cube = data.rows.reshape(n_units, periods, data.width)
    demeaned = cube - cube.mean(axis=1, keepdims=True)
    return data.with_rows(demeaned.reshape(-1, data.width))


def _panel_batch_loss(rows, theta):
    beta, log_variance = theta
    resid = rows[:, 0] - beta * rows[:, 1]
    return 0.5 * (log_variance + resid**2 * np.exp(-log_variance))


def _panel_batch_gradient(rows, theta):
    beta, log_variance = theta
    x = rows[:, 1]
    resid = rows[:, 0] - beta * x
    scale = np.exp(-log_variance)
    return np.column_stack([-resid * x * scale, 0.5 * (1.0 - resid**2 * scale)])


def _panel_batch_hessian(rows, theta):
    beta, log_variance = theta
    x = rows[:, 1]
    resid = rows[:, 0] - beta * x
    scale = np.exp(-log_variance)
    out = np.empty((rows.shape[0], 2, 2))
    out[:, 0, 0] = x**2 * scale
    out[:, 0, 1] = out[:, 1, 0] = resid * x * scale
    out[:, 1, 1] = 0.5 * resid**2 * scale
    return out


def make_panel_variance_model():
    """within 변환 후 가우스 우도로 (β, log σ²) 를 추정하는 패널 모형.

    고정 T 에서 log σ² 추정량은 약 −1/T 의 편향을 갖습니다.
    """
    return ModelSpec(
        name="panel-variance",
        loss=lambda row, theta: float(_panel_batch_loss(row[None, :], theta)[0]),
        gradient=lambda row, theta: _panel_batch_gradient(row[None, :], theta)[0],
        hessian=lambda row, theta: _panel_batch_hessian(row[None, :], theta)[0],
        batch_loss=_panel_batch_loss,
        batch_gradient=_panel_batch_gradient,
        batch_hessian=_panel_batch_hessian,
        dim=2,
        param_names=("beta", "log_variance"),
        data_transform=within_transform,
    )
