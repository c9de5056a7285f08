import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from objective.exceptions import ConfigurationError
from objective.specs import as_parameter
from resampling.plans import PlanKind, draw_plan, index_plan, weight_plan
from resampling.streams import Purpose, RngStream
from .chains import ChainStepper, DrawChain

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SplitPanelResult:
    """전체 패널, 두 절반 패널, 편향 보정 체인.

    Attributes:
        full, first, second (DrawChain): 같은 unit 재표본을 공유한 세 체인.
        corrected (DrawChain): 2θ − (θ¹ + θ²)/2.
        unit_log (tuple): 반복별로 뽑힌 unit 코드 (가중치 계획이면 None).
    """

    full: DrawChain
    first: DrawChain
    second: DrawChain
    corrected: DrawChain
    unit_log: tuple


def half_plan(plan, panel_shape, lo, hi):
    """전체 패널 계획을 기간 [lo, hi) 절반 패널의 계획으로 옮깁니다.

    인덱스 계획은 (unit, t) 로 풀어 해당 기간의 행만 남기고, 가중치 계획은
    (n_units, T) 로 접어 잘라냅니다.
    """
    n_units, periods = panel_shape
    width = hi - lo
    if plan.kind is PlanKind.WEIGHTS:
        weights = plan.weights.reshape(n_units, periods)[:, lo:hi].ravel()
        return weight_plan(weights, effective_m=n_units * width)
    units, times = np.divmod(plan.indices, periods)
    keep = (times >= lo) & (times < hi)
    indices = units[keep] * width + (times[keep] - lo)
    effective_m = max(1, int(round(plan.effective_m * width / periods)))
    return index_plan(indices, effective_m=effective_m, units=plan.units)


def _as_chain(history, burn, config, n, effective_m, method, log=(), wall_time_ms=0.0):
    return DrawChain(
        draws=history[burn:],
        burned=history[:burn],
        config=config,
        n=n,
        effective_m=effective_m,
        failure_log=tuple(log),
        wall_time_ms=wall_time_ms,
        method=method,
    )


def run_split_panel(model, data, config, stream=None, half_delay=0):
    """분할 패널 잭나이프: 세 체인을 같은 unit 재표본으로 함께 진행시킵니다.

    재표본은 항상 unit(클러스터) 단위이며, 절반 패널은 앞쪽 ⌊T/2⌋ 기간과
    나머지 기간을 사용합니다. half_delay > 0 이면 절반 체인은 그 반복까지
    전체 체인 값을 따르다가 그 시점의 전체 체인 draw 에서 출발합니다.

    Raises:
        ConfigurationError: panel_shape 가 없는 경우.
    """
    if data.panel_shape is None:
        raise ConfigurationError("Split-panel estimation needs panel_shape.")
    if half_delay < 0:
        raise ConfigurationError("half_delay must be non-negative.")
    n_units, periods = data.panel_shape
    if data.cluster_ids is None:
        data = replace(data, cluster_ids=np.repeat(np.arange(n_units), periods))
    stream = stream or RngStream(config.seed)
    scheme = replace(config.scheme, cluster_aware=True)
    burn = config.resolved_burn
    total = burn + config.B

    halves = data.time_split()
    bounds = ((0, periods // 2), (periods // 2, periods))
    penalty = None
    theta0 = as_parameter(config.theta0, model.resolve_dim(data))
    if config.penalty is not None:
        penalty = config.penalty.build(theta0, burn)
    chain_model = model if penalty is None else model.with_penalty(penalty)

    full = ChainStepper(chain_model, model.prepare(data), config, stream.child(0))
    parts = [
        ChainStepper(chain_model, model.prepare(half), config, stream.child(k + 1))
        for k, half in enumerate(halves)
    ]

    histories = np.empty((3, total, theta0.size))
    unit_log = []
    logger.info(f"Split-panel start: n_units={n_units} T={periods} B={config.B} burn={burn}")
    started = time.perf_counter()
    for b in range(total):
        plan = draw_plan(scheme, data, stream.generator(b, Purpose.PLAN))
        unit_log.append(None if plan.units is None else plan.units.copy())
        histories[0, b] = full.step(b, plan)
        if b < half_delay:
            histories[1, b] = histories[2, b] = histories[0, b]
            continue
        if b == half_delay and half_delay > 0:
            for part in parts:
                part.theta = histories[0, b - 1].copy()
        for k, (part, (lo, hi)) in enumerate(zip(parts, bounds)):
            histories[k + 1, b] = part.step(b, half_plan(plan, data.panel_shape, lo, hi))
    elapsed = (time.perf_counter() - started) * 1000.0

    corrected = 2.0 * histories[0] - 0.5 * (histories[1] + histories[2])
    effective_m = scheme.effective_m(data)
    chains = [
        _as_chain(
            histories[0], burn, config, data.n, effective_m, "split-full", full.failure_log, elapsed
        ),
        *(
            _as_chain(
                histories[k + 1],
                burn,
                config,
                halves[k].n,
                scheme.effective_m(halves[k]),
                f"split-half{k + 1}",
                parts[k].failure_log,
            )
            for k in range(2)
        ),
        _as_chain(corrected, burn, config, data.n, effective_m, "split-corrected"),
    ]
    logger.info(f"Split-panel finished in {elapsed:.1f} ms")
    return SplitPanelResult(*chains, unit_log=tuple(unit_log))
