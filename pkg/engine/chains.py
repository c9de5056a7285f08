import enum
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from conditioning.matrices import identity_conditioner, nr_conditioner
from conditioning.secant import QnParams, init_secant_buffer, rqn_step, secant_conditioner
from estimators.penalty import Penalty, PenaltySchedule
from objective.evaluation import Want, evaluate, hessian_vector_product
from objective.exceptions import ConfigurationError, DivergenceError
from objective.specs import as_parameter
from resampling.plans import SchemeConfig, draw_plan
from resampling.streams import Purpose, RngStream

logger = logging.getLogger(__name__)

DIVERGENCE_BOUND = 1e8


class Method(str, enum.Enum):
    RGD = "rgd"
    RNR = "rnr"
    RQN = "rqn"


def default_burn(gamma):
    """max(50, ⌈log(0.01)/log(1−γ)⌉). γ = 1 이면 50."""
    if gamma >= 1.0:
        return 50
    return max(50, math.ceil(math.log(0.01) / math.log(1.0 - gamma)))


@dataclass(frozen=True)
class PenaltyConfig:
    """번인 초반에만 작동하는 이차 벌점 설정.

    duration 이 None 이면 burn/2 반복 동안 λ0 를 유지한 뒤 decay 배씩 줄이고,
    번인이 끝나면 0 이 됩니다.
    """

    lambda0: float = 20.0
    decay: float = 0.9
    duration: int | None = None
    anchor: tuple | None = None

    def __post_init__(self):
        if self.lambda0 < 0:
            raise ConfigurationError("penalty.lambda0 must be non-negative.")
        if not 0 < self.decay <= 1:
            raise ConfigurationError("penalty.decay must lie in (0, 1].")

    def build(self, theta0, burn):
        duration = burn // 2 if self.duration is None else self.duration
        anchor = theta0 if self.anchor is None else np.asarray(self.anchor, dtype=float)
        schedule = PenaltySchedule(
            lambda0=self.lambda0, decay=self.decay, duration=duration, stop=burn
        )
        return Penalty(lam=schedule, anchor=anchor)


@dataclass(frozen=True)
class RunConfig:
    """한 체인의 실행 설정.

    Attributes:
        gamma (float): 학습률 γ ∈ (0, 1].
        B (int): 남길 draw 수.
        theta0: 시작값 θ0.
        burn (int | None): 번인 반복 수. None 이면 default_burn(γ).
        scheme (SchemeConfig): 재표본 방식.
        method (Method): rGD / rNR / rQN.
        penalty (PenaltyConfig | None): 번인 초반 벌점.
        seed (int): 난수 시드.
        qn (QnParams | None): rQN 설정. None 이면 QnParams.default_for(d).
        qn_init (str): "hessian" 이면 첫 계획의 헤시안, "identity" 이면 단위행렬로 버퍼 초기화.
        modify (bool): rNR 에서 |고윳값| 수정 사용 여부.
        divergence_bound (float): ‖θ‖∞ 가 이 값을 넘으면 발산으로 중단.
    """

    gamma: float
    B: int
    theta0: tuple
    burn: int | None = None
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    method: Method = Method.RQN
    penalty: PenaltyConfig | None = None
    seed: int = 0
    qn: QnParams | None = None
    qn_init: str = "hessian"
    modify: bool = False
    divergence_bound: float = DIVERGENCE_BOUND

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ConfigurationError(f"gamma must lie in (0, 1], got {self.gamma}.")
        if self.B < 1:
            raise ConfigurationError("B must be at least 1.")
        if self.burn is not None and self.burn < 0:
            raise ConfigurationError("burn must be non-negative.")
        if self.qn_init not in ("hessian", "identity"):
            raise ConfigurationError("qn.init must be 'hessian' or 'identity'.")
        try:
            object.__setattr__(self, "method", Method(self.method))
        except ValueError as exc:
            raise ConfigurationError(f"Unknown method: {self.method}") from exc
        object.__setattr__(self, "theta0", tuple(as_parameter(self.theta0).tolist()))

    @property
    def resolved_burn(self):
        return default_burn(self.gamma) if self.burn is None else self.burn


@dataclass(frozen=True, eq=False)
class DrawChain:
    """번인을 제외하고 1부터 다시 번호 붙인 draw 들과 진단 정보.

    Attributes:
        draws (np.ndarray): B×d 유지 draw.
        burned (np.ndarray): burn×d 번인 draw.
        config (RunConfig): 실행 설정.
        n (int): 표본 크기.
        effective_m (int): 분산 조정용 m.
        failure_log (tuple[dict]): 반복별 안전장치 이벤트 (b, event, detail).
        plans (tuple | None): record_plans=True 일 때 반복별 재표본 계획.
        wall_time_ms (float): 실행 시간.
    """

    draws: np.ndarray
    burned: np.ndarray
    config: RunConfig
    n: int
    effective_m: int
    failure_log: tuple = ()
    plans: tuple | None = None
    wall_time_ms: float = 0.0
    method: str = ""

    @property
    def B(self):
        return self.draws.shape[0]

    @property
    def dim(self):
        return self.draws.shape[1]

    @property
    def gamma(self):
        return self.config.gamma

    @property
    def path(self):
        """θ0 부터 마지막 draw 까지의 전체 경로."""
        theta0 = np.asarray(self.config.theta0)[None, :]
        return np.vstack([theta0, self.burned, self.draws])


class ChainStepper:
    """θ_{b+1} = θ_b − γ P_b G^{(b)}(θ_b) 한 단계를 계산하는 상태 객체.

    run_chain 과 분할 패널 실행기가 같은 갱신 규칙을 공유합니다.
    """

    def __init__(self, model, data, config, stream, theta0=None):
        self.model = model
        self.data = data
        self.config = config
        self.stream = stream
        self.theta = as_parameter(config.theta0 if theta0 is None else theta0)
        self.theta_prev = None
        self.buffer = None
        self.failure_log = []
        self.qn = None
        if config.method is Method.RQN:
            self.qn = config.qn or QnParams.default_for(self.theta.size)
            self.qn.validate_for(self.theta.size)

    def _log(self, b, event, **detail):
        self.failure_log.append({"b": b, "event": event, "detail": detail})

    def conditioner(self, b, plan, evaluation):
        method = self.config.method
        if method is Method.RGD:
            return identity_conditioner(self.theta.size)

        if method is Method.RNR:
            conditioner = nr_conditioner(
                evaluation.hessian, modify=self.config.modify, n=self.data.n
            )
            if conditioner.fallback:
                self._log(b, "nr-fallback", reason="hessian not positive definite")
            return conditioner

        if self.buffer is None:
            H0 = None
            if self.config.qn_init == "hessian":
                H0 = evaluate(self.model, self.data, self.theta, plan, Want.HESSIAN, b).hessian
            self.buffer = init_secant_buffer(
                H0, self.qn, self.stream.child(Purpose.SECANT_INIT), dim=self.theta.size
            )
            return secant_conditioner(self.buffer, self.qn)

        def hvp(direction):
            return hessian_vector_product(self.model, self.data, self.theta, plan, direction, b)

        conditioner, self.buffer = rqn_step(
            self.buffer, self.theta, self.theta_prev, hvp, self.qn, iteration=b
        )
        if conditioner.refreshes:
            self._log(b, "secant-refresh", count=conditioner.refreshes)
        return conditioner

    def step(self, b, plan):
        want = Want.GRADIENT
        if self.config.method is Method.RNR:
            want |= Want.HESSIAN
        evaluation = evaluate(self.model, self.data, self.theta, plan, want, iteration=b)
        conditioner = self.conditioner(b, plan, evaluation)
        proposal = self.theta - self.config.gamma * conditioner.apply(evaluation.gradient)

        if not np.all(np.isfinite(proposal)) or np.max(np.abs(proposal)) > self.config.divergence_bound:
            logger.error(f"Chain diverged at b={b + 1}")
            raise DivergenceError(
                f"Draw {b + 1} left the divergence bound.",
                iteration=b + 1,
                last_finite=self.theta,
            )
        self.theta_prev, self.theta = self.theta, proposal
        return proposal


def run_chain(model, data, config, stream=None, record_plans=False, plan_source=None):
    """번인 + B 반복의 draw 체인을 생성합니다.

    Args:
        model (ModelSpec): 모델.
        data (Dataset): 데이터셋.
        config (RunConfig): 실행 설정.
        stream (RngStream | None): 난수 스트림. None 이면 RngStream(config.seed).
        record_plans (bool): 반복별 재표본 계획을 DrawChain.plans 에 보관.
        plan_source: b -> ResamplePlan. 주어지면 재표본 대신 사용 (퇴화 계획, 재생 등).

    Returns:
        DrawChain: 번인/유지 draw 와 진단 정보.

    Raises:
        DivergenceError: draw 가 비유한 값이거나 발산 한계를 넘은 경우.
        ConditioningFailureError: rQN secant 교체 한도 초과.
    """
    stream = stream or RngStream(config.seed)
    burn = config.resolved_burn
    total = burn + config.B
    prepared = model.prepare(data)
    theta0 = as_parameter(config.theta0, model.resolve_dim(prepared))
    if config.penalty is not None:
        model = model.with_penalty(config.penalty.build(theta0, burn))

    logger.info(
        f"Chain start: method={config.method.value} gamma={config.gamma} "
        f"scheme={config.scheme.scheme.value} B={config.B} burn={burn}"
    )
    started = time.perf_counter()
    stepper = ChainStepper(model, prepared, config, stream)
    history = np.empty((total, theta0.size))
    plans = []
    for b in range(total):
        if plan_source is not None:
            plan = plan_source(b)
        else:
            plan = draw_plan(config.scheme, data, stream.generator(b, Purpose.PLAN))
        if record_plans:
            plans.append(plan)
        history[b] = stepper.step(b, plan)
    elapsed = (time.perf_counter() - started) * 1000.0
    logger.info(f"Chain finished in {elapsed:.1f} ms")

    return DrawChain(
        draws=history[burn:],
        burned=history[:burn],
        config=config,
        n=data.n,
        effective_m=config.scheme.effective_m(data),
        failure_log=tuple(stepper.failure_log),
        plans=tuple(plans) if record_plans else None,
        wall_time_ms=elapsed,
        method=config.method.value,
    )
