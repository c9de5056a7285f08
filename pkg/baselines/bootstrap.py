import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg

from engine.classical import newton_step, classical_optimize
from objective.evaluation import Want, evaluate, row_gradients
from objective.exceptions import ConfigurationError, EstimationError, SingularMatrixError
from objective.specs import as_parameter
from resampling.plans import draw_plan, unit_plan
from resampling.streams import Purpose, RngStream

logger = logging.getLogger(__name__)

CONVERGENCE_TOL = 1e-8
NONCONVERGED_WARNING_SHARE = 0.10


@dataclass(frozen=True, eq=False)
class BootstrapDraws:
    """기준 방법의 draw.

    Attributes:
        draws (np.ndarray): B×d draw (실패한 draw 는 nan).
        method (str): 방법 태그 (boot, dmk, ks).
        converged (np.ndarray): draw 별 수렴/성공 여부.
        center (np.ndarray): 전체 표본 추정치 θ̂_n.
        effective_m (int): 재표본 크기 m.
        n (int): 표본 크기.
        status (str): "ok" 또는 실패 비율이 10% 를 넘으면 "warning".
    """

    draws: np.ndarray
    method: str
    converged: np.ndarray
    center: np.ndarray
    effective_m: int
    n: int
    status: str = "ok"

    @property
    def usable(self):
        return self.draws[self.converged]

    @property
    def failures(self):
        return int(np.sum(~self.converged))

    @property
    def scale(self):
        """m-out-of-n draw 를 n 기준 분산으로 되돌리는 √(m/n)."""
        return float(np.sqrt(self.effective_m / self.n))


def _finish(draws, converged, method, center, effective_m, n):
    share = 1.0 - converged.mean()
    status = "ok"
    if share > NONCONVERGED_WARNING_SHARE:
        status = "warning"
        logger.warning(f"{method}: {share:.1%} of replications did not converge")
    return BootstrapDraws(
        draws=draws,
        method=method,
        converged=converged,
        center=center,
        effective_m=effective_m,
        n=n,
        status=status,
    )


def _plans(scheme, data, B, seed, stream):
    stream = stream or RngStream(seed)
    for b in range(B):
        yield b, draw_plan(scheme, data, stream.generator(b, Purpose.PLAN))


def fit_full_sample(model, data, theta0, iters=100, tol=CONVERGENCE_TOL):
    """line search 가 있는 NR 로 전체 표본 추정치를 구합니다.

    Raises:
        ConfigurationError: 수렴하지 못한 경우.
    """
    path = classical_optimize(
        model, data, theta0, method="nr", gamma=1.0, iters=iters, tol=tol, line_search=True
    )
    if not path.converged:
        raise ConfigurationError(
            f"Full-sample optimizer did not converge (|G| = {path.gradient_norm:.3e})."
        )
    return path.theta


def standard_bootstrap(
    model, data, scheme, B, theta_hat=None, theta0=None, seed=0, stream=None, iters=100, tol=CONVERGENCE_TOL
):
    """매 재표본마다 θ̂_n 에서 출발해 재최적화하는 표준 bootstrap.

    수렴은 재표본 기울기 노름 <= tol 입니다. 수렴하지 못한 draw 는 요약에서
    제외되고 개수가 기록됩니다.
    """
    prepared = model.prepare(data)
    if theta_hat is None:
        if theta0 is None:
            raise ConfigurationError("standard_bootstrap needs theta_hat or theta0.")
        theta_hat = fit_full_sample(model, prepared, theta0, iters, tol)
    theta_hat = as_parameter(theta_hat, model.resolve_dim(prepared))
    draws = np.full((B, theta_hat.size), np.nan)
    converged = np.zeros(B, dtype=bool)
    for b, plan in _plans(scheme, data, B, seed, stream):
        try:
            path = classical_optimize(
                model, prepared, theta_hat, method="nr", gamma=1.0, iters=iters,
                tol=tol, line_search=True, plan=plan,
            )
        except EstimationError as exc:
            logger.debug(f"boot replication {b} failed: {exc.message}")
            continue
        draws[b] = path.theta
        converged[b] = path.converged
    return _finish(draws, converged, "boot", theta_hat, scheme.effective_m(data), data.n)


def dmk_kstep(model, data, theta_hat, k, scheme, B, seed=0, stream=None):
    """θ̂_n 에서 출발한 k 번의 감쇠 없는 NR 단계 (k-step bootstrap).

    Raises:
        ConfigurationError: k < 1.
    """
    if k < 1:
        raise ConfigurationError("dmk_kstep needs k >= 1.")
    prepared = model.prepare(data)
    theta_hat = as_parameter(theta_hat, model.resolve_dim(prepared))
    draws = np.full((B, theta_hat.size), np.nan)
    converged = np.zeros(B, dtype=bool)
    for b, plan in _plans(scheme, data, B, seed, stream):
        theta = theta_hat
        try:
            for _ in range(k):
                _, direction = newton_step(model, prepared, theta, plan)
                theta = theta - direction
        except EstimationError as exc:
            logger.debug(f"dmk replication {b} failed: {exc.message}")
            continue
        if np.all(np.isfinite(theta)):
            draws[b] = theta
            converged[b] = True
    return _finish(draws, converged, f"dmk{k}", theta_hat, scheme.effective_m(data), data.n)


def ks_score(model, data, theta_hat, scheme, B, seed=0, stream=None):
    """평균을 뺀 승수로 점수를 가중한 one-step wild score bootstrap.

    θ̂^{(b)} = θ̂ − H_n(θ̂)⁻¹ (1/n)Σ(w_i − w̄)∇q(z_i; θ̂). 헤시안과 행별 점수는 한 번만 계산합니다.

    Raises:
        ConfigurationError: 가중치 방식이 아닌 경우.
        SingularMatrixError: 전체 표본 헤시안이 특이한 경우.
    """
    if not scheme.scheme.is_weighted:
        raise ConfigurationError("ks_score needs a multiplier-weight scheme.")
    scheme = replace(scheme, demean=True)
    prepared = model.prepare(data)
    theta_hat = as_parameter(theta_hat, model.resolve_dim(prepared))
    hessian = evaluate(model, prepared, theta_hat, unit_plan(prepared.n), Want.HESSIAN).hessian
    try:
        factor = linalg.cho_factor(hessian)
    except linalg.LinAlgError as exc:
        raise SingularMatrixError("Full-sample Hessian is not positive definite.") from exc
    scores = row_gradients(model, prepared, theta_hat)

    draws = np.empty((B, theta_hat.size))
    for b, plan in _plans(scheme, data, B, seed, stream):
        draws[b] = theta_hat - linalg.cho_solve(factor, plan.weights @ scores / prepared.n)
    return _finish(draws, np.ones(B, dtype=bool), "ks", theta_hat, data.n, data.n)
