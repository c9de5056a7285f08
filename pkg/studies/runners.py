import json
import logging
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from django.conf import settings
from joblib import Parallel, delayed
from rest_framework.renderers import JSONRenderer
from scipy import stats

from baselines.bootstrap import dmk_kstep, fit_full_sample, ks_score, standard_bootstrap
from baselines.mala import GaussianPrior, MalaConfig, heuristic_step, mala_sample
from conditioning.matrices import nr_conditioner
from conditioning.secant import QnParams
from engine.chains import PenaltyConfig, RunConfig, run_chain
from engine.classical import run_sgd
from engine.exports import chain_frame, draws_frame, write_failure_log
from engine.split_panel import run_split_panel
from estimators.dgp import (
    DgpKind,
    fixed_effect_columns,
    make_panel_variance_model,
    simulate_dgp,
)
from estimators.mroz import load_mroz
from estimators.nls import make_exponential_nls
from estimators.ols import make_ols
from estimators.probit import make_probit, probit_start_values
from estimators.saddle import make_quadratic, saddle_demo
from inference.diagnostics import effective_sample_size, monte_carlo_se
from inference.sandwich import sandwich
from inference.serializers import InferenceReportSerializer
from inference.summaries import InferenceReport, autocorrelation, summarize, summarize_draws
from objective.datasets import read_csv
from objective.evaluation import Want, check_gradient, evaluate
from objective.exceptions import ConfigurationError, EstimationError
from objective.specs import as_parameter
from resampling.plans import Scheme, SchemeConfig, unit_plan
from resampling.streams import Purpose, RngStream
from .serializers import CliConfigSerializer, flatten, unflatten

logger = logging.getLogger(__name__)

MC_FAILURE_FLAG_SHARE = 0.05
DEFAULT_COMPARE_METHODS = ("rnr", "rqn", "boot", "dmk", "ks", "mala")
CHECK_POINTS = 20


# ---------------------------------------------------------------------------
# 설정
# ---------------------------------------------------------------------------


def _read_config_file(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Config file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"Config file is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigurationError("Config file must hold a JSON object.")
    return flatten(payload)


def load_config(path=None, overrides=None, command="fit"):
    """기본값, 설정 파일, 명령행 플래그를 차례로 합쳐 검증한 설정을 반환합니다.

    Args:
        path: JSON 설정 파일 경로 (중첩 또는 점 표기 키).
        overrides (dict): 점 표기 키 -> 값. None 값은 무시합니다.
        command (str): 실행할 명령 이름.

    Returns:
        dict: 검증된 중첩 설정.

    Raises:
        ConfigurationError: 검증에 실패한 경우.
    """
    flat = dict(settings.ESTIMATION_DEFAULTS)
    if path:
        flat.update(_read_config_file(path))
    flat.update({key: value for key, value in (overrides or {}).items() if value is not None})
    flat["command"] = command
    serializer = CliConfigSerializer(data=unflatten(flat))
    if not serializer.is_valid():
        errors = json.loads(json.dumps(serializer.errors))
        raise ConfigurationError(f"Invalid configuration: {errors}", errors=errors)
    return dict(serializer.validated_data)


def config_echo(cfg):
    return {key: value for key, value in sorted(flatten(cfg).items())}


def build_dataset(cfg, seed=None):
    """설정의 data (CSV 경로 또는 "mroz") 나 dgp 로 데이터셋을 만듭니다."""
    if cfg["data"] == "mroz":
        return load_mroz()
    if cfg["data"]:
        return read_csv(
            cfg["data"],
            cfg["outcome"],
            cfg["regressors"],
            cluster=cfg["cluster"],
            unit=cfg["unit"],
            time=cfg["time"],
            add_constant=cfg["add_constant"],
        )
    dgp = cfg["dgp"]
    if dgp is None:
        raise ConfigurationError("Either data or dgp must be configured.")
    size = (dgp["n"], dgp["T"]) if dgp["kind"] == DgpKind.NONLINEAR_PANEL.value else dgp["n"]
    return simulate_dgp(
        dgp["kind"], size, dgp["theta"], cfg["seed"] if seed is None else seed, n_groups=dgp["n_groups"]
    )


def build_model(cfg, data):
    name = cfg["model"]
    if name == "ols":
        return make_ols(param_names=data.regressor_names)
    if name == "probit":
        return make_probit(param_names=data.regressor_names, fixed_effects=fixed_effect_columns(data))
    if name == "nls-exp":
        return make_exponential_nls(dim=data.width - 1, param_names=data.regressor_names)
    if data.panel_shape is None:
        raise ConfigurationError("The panel-variance model needs panel data (unit and time).")
    return make_panel_variance_model()


def start_values(cfg, model, data):
    """θ0: 설정값, 없으면 모델별 기본 시작값."""
    prepared = model.prepare(data)
    dim = model.resolve_dim(prepared)
    if cfg["theta0"] is not None:
        return as_parameter(cfg["theta0"], dim)
    if cfg["model"] == "probit":
        return probit_start_values(data)
    if cfg["model"] == "panel-variance":
        y, x = prepared.rows[:, 0], prepared.rows[:, 1]
        beta = float(x @ y / (x @ x))
        return np.array([beta, math.log(np.mean((y - beta * x) ** 2))])
    return np.zeros(dim)


def scheme_config(cfg):
    return SchemeConfig(scheme=Scheme(cfg["scheme"]), m=cfg["m"], cluster_aware=cfg["cluster_aware"])


def run_config(cfg, theta0, method=None, seed=None):
    qn = cfg["qn"]
    penalty = None
    if cfg["penalty"]["enabled"]:
        penalty = PenaltyConfig(
            lambda0=cfg["penalty"]["lambda0"],
            decay=cfg["penalty"]["decay"],
            duration=cfg["penalty"]["duration"],
        )
    return RunConfig(
        gamma=cfg["gamma"],
        B=cfg["B"],
        theta0=tuple(theta0),
        burn=cfg["burn"],
        scheme=scheme_config(cfg),
        method=method or cfg["method"],
        penalty=penalty,
        seed=cfg["seed"] if seed is None else seed,
        qn=QnParams.default_for(
            len(theta0),
            L=qn["L"],
            lambda_S=qn["lambda_S"],
            lambda_min=qn["lambda_min"],
            max_refresh=qn["max_refresh"],
        ),
        qn_init=qn["init"],
        modify=cfg["modify"],
        divergence_bound=cfg["divergence_bound"],
    )


# ---------------------------------------------------------------------------
# 방법별 실행
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class StudyContext:
    """한 데이터셋에 대해 여러 방법을 실행할 때 공유하는 상태 (θ̂_n 캐시 포함)."""

    cfg: dict
    model: object
    data: object
    theta0: np.ndarray
    seed: int
    _theta_hat: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_config(cls, cfg, data=None, seed=None):
        data = build_dataset(cfg) if data is None else data
        model = build_model(cfg, data)
        return cls(
            cfg=cfg,
            model=model,
            data=data,
            theta0=start_values(cfg, model, data),
            seed=cfg["seed"] if seed is None else seed,
        )

    @property
    def prepared(self):
        return self.model.prepare(self.data)

    @property
    def names(self):
        return self.model.names(self.prepared)

    @property
    def theta_hat(self):
        if self._theta_hat is None:
            self._theta_hat = fit_full_sample(self.model, self.prepared, self.theta0)
        return self._theta_hat

    def run_config(self, method=None):
        return run_config(self.cfg, self.theta0, method=method, seed=self.seed)


@dataclass(frozen=True, eq=False)
class MethodResult:
    method: str
    report: InferenceReport
    draws: pd.DataFrame
    diagnostics: dict = field(default_factory=dict)


def _resampled(ctx, method):
    chain = run_chain(ctx.model, ctx.data, ctx.run_config(method))
    report = summarize(chain, alpha=ctx.cfg["alpha"], names=ctx.names)
    diagnostics = {
        "burn": chain.burned.shape[0],
        "effective_m": chain.effective_m,
        "wall_time_ms": chain.wall_time_ms,
        "effective_sample_size": effective_sample_size(chain.draws),
        "monte_carlo_se": monte_carlo_se(chain.draws),
        "failure_log": list(chain.failure_log),
    }
    return MethodResult(method, report, chain_frame(chain, method), diagnostics)


def _split_panel(ctx):
    result = run_split_panel(
        ctx.model, ctx.data, ctx.run_config(), half_delay=ctx.cfg["half_delay"]
    )
    outputs = []
    for chain in (result.full, result.corrected):
        report = summarize(chain, alpha=ctx.cfg["alpha"], names=ctx.names)
        diagnostics = {
            "burn": chain.burned.shape[0],
            "effective_m": chain.effective_m,
            "wall_time_ms": result.full.wall_time_ms,
            "failure_log": list(result.full.failure_log) + list(result.first.failure_log)
            + list(result.second.failure_log),
        }
        outputs.append(MethodResult(chain.method, report, chain_frame(chain, chain.method), diagnostics))
    return outputs


def _bootstrap_result(ctx, result):
    report = summarize_draws(
        result.usable,
        alpha=ctx.cfg["alpha"],
        estimate=result.center,
        scale=result.scale,
        names=ctx.names,
        method=result.method,
    )
    diagnostics = {"failures": result.failures, "status": result.status, "effective_m": result.effective_m}
    return MethodResult(result.method, report, draws_frame(result.draws, result.method), diagnostics)


def _boot(ctx):
    result = standard_bootstrap(
        ctx.model, ctx.data, scheme_config(ctx.cfg), ctx.cfg["B"], theta_hat=ctx.theta_hat, seed=ctx.seed
    )
    return _bootstrap_result(ctx, result)


def _dmk(ctx):
    result = dmk_kstep(
        ctx.model, ctx.data, ctx.theta_hat, ctx.cfg["dmk_k"], scheme_config(ctx.cfg), ctx.cfg["B"], seed=ctx.seed
    )
    return _bootstrap_result(ctx, result)


def _ks(ctx):
    scheme = scheme_config(ctx.cfg)
    if not scheme.scheme.is_weighted:
        scheme = replace(scheme, scheme=Scheme.GAUSSIAN, m=None)
    result = ks_score(ctx.model, ctx.data, ctx.theta_hat, scheme, ctx.cfg["B"], seed=ctx.seed)
    return _bootstrap_result(ctx, result)


def _mala(ctx):
    prepared = ctx.prepared
    theta_hat = ctx.theta_hat
    hessian = evaluate(ctx.model, prepared, theta_hat, unit_plan(prepared.n), Want.HESSIAN).hessian
    options = ctx.cfg["mala"]
    prior = None
    if ctx.model.fixed_effects:
        prior = GaussianPrior(indices=tuple(ctx.model.fixed_effects), variance=options["prior_variance"])
    config = MalaConfig(
        gamma=heuristic_step(theta_hat.size, options["target_accept"]),
        target_accept=options["target_accept"],
        preconditioner=nr_conditioner(hessian, modify=True).matrix,
        prior=prior,
        tune=options["tune"],
        burn=ctx.run_config().resolved_burn,
        seed=ctx.seed,
    )
    result = mala_sample(ctx.model, ctx.data, theta_hat, config, ctx.cfg["B"])
    report = summarize_draws(result.draws, alpha=ctx.cfg["alpha"], names=ctx.names, method="mala")
    diagnostics = {"acceptance_rate": result.acceptance_rate, "gamma": result.gamma}
    return MethodResult("mala", report, draws_frame(result.draws, "mala"), diagnostics)


def _sgd(ctx):
    options = ctx.cfg["sgd"]
    prepared = ctx.prepared
    iters = ctx.run_config().resolved_burn + ctx.cfg["B"]
    path = run_sgd(
        ctx.model,
        prepared,
        ctx.theta0,
        gamma0=options["gamma0"] or ctx.cfg["gamma"],
        delta=options["delta"],
        m=min(options["m"], prepared.n),
        iters=iters,
        seed=ctx.seed,
        divergence_bound=ctx.cfg["divergence_bound"],
    )
    dim = path.average.size
    # 점 추정만 제공 (추론 없음)
    report = InferenceReport(
        estimate=path.average,
        se=np.full(dim, np.nan),
        ci=np.full((dim, 2), np.nan),
        phi_gamma=float("nan"),
        adjustment=float("nan"),
        autocorr_lag1=autocorrelation(path.path[1:], 1),
        names=ctx.names,
        alpha=ctx.cfg["alpha"],
        B=iters,
        method="sgd",
    )
    return MethodResult("sgd", report, draws_frame(path.path[1:], "sgd"), {"iterations": iters})


def _sandwich(ctx):
    estimate = sandwich(ctx.model, ctx.data, ctx.theta_hat, cluster=ctx.cfg["cluster_aware"])
    se = estimate.standard_errors()
    z = stats.norm.ppf(1.0 - ctx.cfg["alpha"] / 2.0)
    theta_hat = ctx.theta_hat
    report = InferenceReport(
        estimate=theta_hat,
        se=se,
        ci=np.column_stack([theta_hat - z * se, theta_hat + z * se]),
        phi_gamma=float("nan"),
        adjustment=float("nan"),
        autocorr_lag1=np.full(theta_hat.size, np.nan),
        names=ctx.names,
        alpha=ctx.cfg["alpha"],
        B=0,
        method="sandwich",
    )
    return MethodResult("sandwich", report, draws_frame(np.empty((0, theta_hat.size)), "sandwich"))


METHOD_RUNNERS = {
    "rnr": lambda ctx: _resampled(ctx, "rnr"),
    "rqn": lambda ctx: _resampled(ctx, "rqn"),
    "rgd": lambda ctx: _resampled(ctx, "rgd"),
    "boot": _boot,
    "dmk": _dmk,
    "ks": _ks,
    "mala": _mala,
    "sgd": _sgd,
    "sandwich": _sandwich,
}


def run_method(ctx, method):
    """방법 이름 하나를 실행해 MethodResult 목록을 반환합니다 (분할 패널은 두 개)."""
    if method == "split":
        return _split_panel(ctx)
    try:
        runner = METHOD_RUNNERS[method]
    except KeyError as exc:
        raise ConfigurationError(f"Unknown method: {method}") from exc
    logger.info(f"Running {method}")
    return [runner(ctx)]


# ---------------------------------------------------------------------------
# 출력
# ---------------------------------------------------------------------------


def _clean(value):
    """JSON 으로 쓸 수 있도록 numpy 값과 비유한 실수를 정리합니다."""
    if isinstance(value, dict):
        return {str(key): _clean(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(item) for item in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(payload, path):
    path = Path(path)
    path.write_bytes(JSONRenderer().render(_clean(payload), renderer_context={"indent": 2}))
    return path


def report_payload(report, cfg):
    return dict(InferenceReportSerializer(replace(report, config=config_echo(cfg))).data)


def _output_dir(cfg):
    path = Path(cfg["output_dir"])
    path.mkdir(parents=True, exist_ok=True)
    return path


@contextmanager
def diagnosed(output_dir, cfg):
    """EstimationError 가 나면 diagnostics.json 에 오류를 남기고 다시 발생시킵니다."""
    try:
        yield
    except EstimationError as exc:
        logger.error(f"{cfg['command']} failed [{exc.category}]: {exc.message}")
        write_json(
            {"status": "error", "command": cfg["command"], "error": exc.as_dict(), "config": config_echo(cfg)},
            Path(output_dir) / "diagnostics.json",
        )
        raise


# ---------------------------------------------------------------------------
# 명령
# ---------------------------------------------------------------------------


def run_fit(cfg):
    """한 데이터셋에 재표본 최적화 체인을 돌리고 draws/report/diagnostics 를 씁니다.

    split_panel=True 이면 분할 패널 보정 체인이 주 리포트가 됩니다.

    Returns:
        dict: 주 InferenceReport 와 생성한 파일 경로.
    """
    output_dir = _output_dir(cfg)
    started = time.perf_counter()
    with diagnosed(output_dir, cfg):
        ctx = StudyContext.from_config(cfg)
        if cfg["split_panel"]:
            results = _split_panel(ctx)
        else:
            results = _resampled(ctx, cfg["method"])
            results = [results]
        main = results[-1]

        draws = pd.concat([result.draws for result in results], ignore_index=True)
        if len(results) == 1:
            draws = draws.drop(columns="method")
        draws.to_csv(output_dir / "draws.csv", index=False, float_format="%.17g")
        rows = [row for result in results for row in result.report.rows()]
        pd.DataFrame(rows).to_csv(output_dir / "report.csv", index=False, float_format="%.17g")
        write_json(report_payload(main.report, cfg), output_dir / "report.json")
        failures = [entry for result in results[:1] for entry in result.diagnostics["failure_log"]]
        write_failure_log(_clean(failures), output_dir / "failures.jsonl")
        write_json(
            {
                "status": "ok",
                "command": cfg["command"],
                "methods": {
                    result.method: {
                        key: value for key, value in result.diagnostics.items() if key != "failure_log"
                    }
                    | {"autocorr_lag1": result.report.autocorr_lag1}
                    for result in results
                },
                "failure_count": len(failures),
                "failure_log": failures,
                "wall_time_ms": 1000.0 * (time.perf_counter() - started),
                "config": config_echo(cfg),
            },
            output_dir / "diagnostics.json",
        )
    logger.info(f"fit finished: outputs in {output_dir}")
    return {"report": main.report, "reports": [result.report for result in results], "output_dir": output_dir}


def _replication_seeds(seed, replication):
    stream = RngStream(seed).child(Purpose.REPLICATION, replication)
    data_seed = int(stream.seed_sequence(0, Purpose.DATA).generate_state(1, np.uint64)[0])
    chain_seed = int(stream.seed_sequence(0, Purpose.PLAN).generate_state(1, np.uint64)[0])
    return data_seed, chain_seed


def _coefficient_names(cfg):
    """반복 준비가 실패했을 때 결과 행에 쓸 계수 이름 (작은 모의 데이터로 결정)."""
    dgp = cfg["dgp"]
    try:
        if dgp["kind"] == DgpKind.NONLINEAR_PANEL.value:
            data = simulate_dgp(dgp["kind"], (2, dgp["T"]), dgp["theta"], 0)
        else:
            data = simulate_dgp(dgp["kind"], max(4, dgp["n_groups"]), dgp["theta"], 0, n_groups=dgp["n_groups"])
        model = build_model(cfg, data)
        return tuple(model.names(model.prepare(data)))
    except EstimationError:
        return tuple(f"theta_{j + 1}" for j in range(len(dgp["theta"])))


def _failed_rows(replication, method, names, truth, exc):
    return [
        {
            "replication": replication,
            "method": method,
            "coefficient": name,
            "truth": float(truth[j]),
            "status": "failed",
            "error": exc.category,
        }
        for j, name in enumerate(names)
    ]


def replicate(cfg, replication, methods):
    """MC 반복 하나: 데이터를 새로 만들고 각 방법의 계수별 결과 행을 반환합니다.

    데이터 생성이나 시작값 계산이 실패해도 그 반복의 모든 방법을 실패 행으로 남깁니다.
    """
    data_seed, chain_seed = _replication_seeds(cfg["seed"], replication)
    try:
        data = build_dataset(cfg, seed=data_seed)
        ctx = StudyContext.from_config(cfg, data=data, seed=chain_seed)
    except EstimationError as exc:
        logger.warning(f"replication {replication} setup failed [{exc.category}] {exc.message}")
        truth = np.asarray(cfg["dgp"]["theta"], dtype=float)
        names = _coefficient_names(cfg)
        return [row for method in methods for row in _failed_rows(replication, method, names, truth, exc)]
    truth = np.asarray(data.truth, dtype=float)
    rows = []
    for method in methods:
        try:
            results = run_method(ctx, method)
        except EstimationError as exc:
            rows.extend(_failed_rows(replication, method, ctx.names, truth, exc))
            continue
        for result in results:
            for j, row in enumerate(result.report.rows()):
                rows.append(
                    {
                        "replication": replication,
                        **row,
                        "truth": float(truth[j]),
                        "status": "ok",
                        "error": None,
                    }
                )
    return rows


def summarize_replications(frame, alpha):
    """반복 결과를 (방법, 계수) 별 편향, 분산, 기각률로 모읍니다.

    분위수 구간 기각은 참값이 구간 밖인 비율, SE 기각은 |추정치 − 참값|/SE 가
    z_{1−α/2} 를 넘는 비율입니다.
    """
    z = stats.norm.ppf(1.0 - alpha / 2.0)
    summary = []
    for (method, coefficient), group in frame.groupby(["method", "coefficient"], sort=True):
        ok = group[group["status"] == "ok"]
        failures = int(len(group) - len(ok))
        share = failures / len(group)
        error = ok["estimate"] - ok["truth"]
        reject_quantile = ((ok["truth"] < ok["ci_lo"]) | (ok["truth"] > ok["ci_hi"])).astype(float)
        reject_se = (error.abs() / ok["se"] > z).astype(float)
        summary.append(
            {
                "method": method,
                "coefficient": coefficient,
                "truth": float(group["truth"].iloc[0]),
                "replications": len(ok),
                "mean_estimate": float(ok["estimate"].mean()),
                "bias": float(error.mean()),
                "sd_estimate": float(ok["estimate"].std(ddof=1)) if len(ok) > 1 else float("nan"),
                "mean_se": float(ok["se"].mean()),
                "reject_quantile": float(reject_quantile[ok["ci_lo"].notna()].mean()),
                "reject_se": float(reject_se[ok["se"].notna()].mean()),
                "failures": failures,
                "failure_share": share,
                "flagged": share > MC_FAILURE_FLAG_SHARE,
            }
        )
    return pd.DataFrame(summary)


def run_mc(cfg):
    """dgp 로부터 반복 실험을 돌려 방법별 편향과 기각률을 집계합니다.

    반복 r 의 데이터와 체인 시드는 (seed, r) 로만 정해지므로 worker 수와
    무관하게 결과가 같습니다.
    """
    if cfg["dgp"] is None:
        raise ConfigurationError("mc needs a dgp configuration.")
    output_dir = _output_dir(cfg)
    methods = list(cfg["methods"]) or (["split"] if cfg["split_panel"] else [cfg["method"]])
    replications = cfg["mc"]["replications"]
    with diagnosed(output_dir, cfg):
        logger.info(f"MC start: replications={replications} methods={methods} workers={cfg['mc']['workers']}")
        batches = Parallel(n_jobs=cfg["mc"]["workers"])(
            delayed(replicate)(cfg, r, methods) for r in range(replications)
        )
        frame = pd.DataFrame([row for batch in batches for row in batch])
        frame = frame.sort_values(["replication", "method", "coefficient"], kind="mergesort")
        frame = frame.reset_index(drop=True)
        for column in ("estimate", "se", "ci_lo", "ci_hi"):
            if column not in frame.columns:
                frame[column] = np.nan
        frame[["estimate", "se", "ci_lo", "ci_hi"]] = frame[["estimate", "se", "ci_lo", "ci_hi"]].astype(float)
        summary = summarize_replications(frame, cfg["alpha"])
        frame.to_csv(output_dir / "mc_replications.csv", index=False, float_format="%.17g")
        summary.to_csv(output_dir / "mc_summary.csv", index=False, float_format="%.17g")
        flagged = summary.loc[summary["flagged"], "method"].unique().tolist()
        for method in flagged:
            logger.warning(f"MC method {method} failed in more than 5% of replications")
        write_json(
            {
                "status": "ok",
                "command": cfg["command"],
                "replications": replications,
                "methods": methods,
                "flagged": flagged,
                "config": config_echo(cfg),
            },
            output_dir / "diagnostics.json",
        )
    return {"summary": summary, "replications": frame, "output_dir": output_dir}


def run_compare(cfg):
    """같은 데이터와 시드로 여러 방법을 실행해 나란히 비교합니다.

    방법 하나가 실패해도 나머지는 계속 실행하며, 실패는 diagnostics.json 에 남깁니다.
    """
    output_dir = _output_dir(cfg)
    methods = list(cfg["methods"]) or list(DEFAULT_COMPARE_METHODS)
    with diagnosed(output_dir, cfg):
        ctx = StudyContext.from_config(cfg)
    results = []
    outcome = {}
    for method in methods:
        try:
            produced = run_method(ctx, method)
        except EstimationError as exc:
            logger.warning(f"compare: {method} failed [{exc.category}] {exc.message}")
            outcome[method] = {"status": "error", "error": exc.as_dict()}
            continue
        results.extend(produced)
        for result in produced:
            diagnostics = {key: value for key, value in result.diagnostics.items() if key != "failure_log"}
            outcome[result.method] = {"status": "ok", **diagnostics}

    rows = [row for result in results for row in result.report.rows()]
    columns = ["method", "coefficient", "estimate", "se", "ci_lo", "ci_hi", "autocorr1"]
    pd.DataFrame(rows, columns=columns).to_csv(
        output_dir / "compare_summary.csv", index=False, float_format="%.17g"
    )
    if results:
        draws = pd.concat([result.draws for result in results], ignore_index=True)
        draws.to_csv(output_dir / "compare_draws.csv", index=False, float_format="%.17g")
    write_json(
        {"status": "ok", "command": cfg["command"], "methods": outcome, "config": config_echo(cfg)},
        output_dir / "diagnostics.json",
    )
    return {"results": results, "outcome": outcome, "output_dir": output_dir}


def _check_cases(seed):
    linear = simulate_dgp(DgpKind.LINEAR_GAUSSIAN, 200, (1.0, 0.5, -0.5), seed)
    probit = simulate_dgp(DgpKind.PROBIT, 300, (0.2, 0.5, -0.5), seed)
    panel = simulate_dgp(DgpKind.NONLINEAR_PANEL, (40, 4), (1.0, 0.0), seed)
    rng = RngStream(seed).generator(0, Purpose.NOISE)
    A = rng.standard_normal((3, 3))
    quadratic = make_quadratic(0.5 * (A + A.T))
    location = quadratic.zero_data().with_rows(
        np.column_stack([np.zeros(50), rng.standard_normal((50, 3))])
    )
    nls_rows = linear.rows.copy()
    nls_rows[:, 0] = np.exp(0.3 * linear.rows[:, 2]) + 0.1 * rng.standard_normal(linear.n)
    return (
        (make_ols(param_names=linear.regressor_names), linear, np.array([1.0, 0.5, -0.5])),
        (make_probit(param_names=probit.regressor_names), probit, np.array([0.2, 0.5, -0.5])),
        (make_exponential_nls(dim=3), linear.with_rows(nls_rows), np.array([0.0, 0.3, 0.0])),
        (make_panel_variance_model(), panel, np.array([1.0, 0.0])),
        (quadratic.spec, location, np.zeros(3)),
    )


def run_check(cfg, tolerance=1e-5):
    """내장 모델마다 무작위 점 20곳에서 해석적 기울기와 중앙차분을 비교합니다.

    Returns:
        list[dict]: (model, points, max_discrepancy, ok) 행.
    """
    seed = cfg["seed"]
    rows = []
    for index, (model, data, center) in enumerate(_check_cases(seed)):
        prepared = model.prepare(data)
        rng = RngStream(seed).generator(index + 1, Purpose.NOISE)
        worst = 0.0
        for _ in range(CHECK_POINTS):
            theta = center + 0.3 * rng.standard_normal(center.size)
            worst = max(worst, check_gradient(model, prepared, theta).max_discrepancy)
        rows.append(
            {"model": model.name, "points": CHECK_POINTS, "max_discrepancy": worst, "ok": worst <= tolerance}
        )
        logger.info(f"check {model.name}: max discrepancy {worst:.2e}")
    return rows


def run_saddle_demo(cfg):
    """안장점 데모 표를 saddle_demo.csv 로 씁니다."""
    output_dir = _output_dir(cfg)
    options = cfg["saddle"]
    with diagnosed(output_dir, cfg):
        rows = saddle_demo(
            c_grid=options["c_grid"],
            H=options["H"],
            gamma=cfg["gamma"],
            iters=options["iters"],
            noise=options["noise"],
            seed=cfg["seed"],
        )
    frame = pd.DataFrame(rows)
    frame["theta"] = frame["theta"].map(lambda theta: " ".join(f"{v:.6g}" for v in theta))
    frame.to_csv(output_dir / "saddle_demo.csv", index=False)
    return rows
