import numpy as np
from scipy import special, stats

from objective.specs import ModelSpec

PHI_ZERO = stats.norm.pdf(0.0)


def _mills(s):
    # φ(s)/Φ(s). log_ndtr 가 꼬리에서 점근 전개를 쓰므로 |s| 가 커도 유한
    return np.exp(stats.norm.logpdf(s) - special.log_ndtr(s))


def _batch_loss(rows, theta):
    y, s = rows[:, 0], rows[:, 1:] @ theta
    return -(y * special.log_ndtr(s) + (1.0 - y) * special.log_ndtr(-s))


def _score_weight(y, s):
    return y * _mills(s) - (1.0 - y) * _mills(-s)


def _curvature_weight(y, s):
    lam_pos, lam_neg = _mills(s), _mills(-s)
    return y * lam_pos * (s + lam_pos) + (1.0 - y) * lam_neg * (-s + lam_neg)


def _batch_gradient(rows, theta):
    y, x = rows[:, 0], rows[:, 1:]
    return -_score_weight(y, x @ theta)[:, None] * x


def _batch_hessian(rows, theta):
    y, x = rows[:, 0], rows[:, 1:]
    weight = _curvature_weight(y, x @ theta)
    return weight[:, None, None] * x[:, :, None] * x[:, None, :]


def _loss(row, theta):
    return float(_batch_loss(row[None, :], theta)[0])


def _gradient(row, theta):
    return _batch_gradient(row[None, :], theta)[0]


def _hessian(row, theta):
    return _batch_hessian(row[None, :], theta)[0]


def make_probit(dim=None, param_names=(), fixed_effects=()):
    """프로빗 음의 로그우도 q = −[y logΦ(xᵀθ) + (1−y) logΦ(−xᵀθ)]."""
    return ModelSpec(
        name="probit",
        loss=_loss,
        gradient=_gradient,
        hessian=_hessian,
        batch_loss=_batch_loss,
        batch_gradient=_batch_gradient,
        batch_hessian=_batch_hessian,
        dim=dim,
        param_names=tuple(param_names),
        fixed_effects=tuple(fixed_effects),
    )


def _constant_column(data):
    if "const" in data.regressor_names:
        return data.regressor_names.index("const")
    for j in range(data.x.shape[1]):
        if np.all(data.x[:, j] == 1.0):
            return j
    return None


def probit_start_values(data):
    """선형확률모형 OLS 계수를 Φ(s) ≈ ½ + φ(0)s 로 변환한 시작값.

    상수항은 (θ̃_const − ½)/φ(0), 나머지는 θ̃_j/φ(0) 입니다.
    """
    coef, *_ = np.linalg.lstsq(data.x, data.y, rcond=None)
    start = coef / PHI_ZERO
    const = _constant_column(data)
    if const is not None:
        start[const] = (coef[const] - 0.5) / PHI_ZERO
    return start
