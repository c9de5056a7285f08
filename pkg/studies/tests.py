import json

import numpy as np
import pandas as pd
import pytest
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError

from objective.exceptions import ConfigurationError, NumericalEvaluationError
from . import runners
from .runners import load_config, run_check, run_compare, run_mc, summarize_replications
from .serializers import flatten, unflatten

LINEAR_DGP = {"kind": "LinearGaussian", "n": 120, "theta": [1.0, 0.5]}


@pytest.fixture
def linear_cfg(tmp_path):
    def build(command="fit", **overrides):
        values = {"dgp": LINEAR_DGP, "output_dir": str(tmp_path), "B": 40, **overrides}
        return load_config(overrides=values, command=command)

    return build


def test_unflatten_and_flatten():
    """점 표기 설정 키 변환 테스트"""
    flat = {"qn.L": 30, "qn.init": "identity", "gamma": 0.2}

    nested = unflatten(flat)

    assert nested == {"qn": {"L": 30, "init": "identity"}, "gamma": 0.2}
    assert flatten(nested) == flat


def test_load_config_fills_defaults(linear_cfg):
    """설정 기본값 채우기 테스트"""
    cfg = linear_cfg()

    assert cfg["method"] == "rqn"
    assert cfg["scheme"] == "gaussian"
    assert cfg["seed"] == settings.RESAMPLING_SEED
    assert cfg["qn"]["init"] == "hessian"
    assert cfg["penalty"]["enabled"] is False
    assert cfg["sgd"]["delta"] == 0.625
    assert cfg["dgp"]["n"] == 120


def test_config_file_and_overrides(tmp_path):
    """설정 파일과 명령행 덮어쓰기 순서 테스트"""
    path = tmp_path / "config.json"
    path.write_text(
        json.dumps({"gamma": 0.3, "qn": {"L": 40}, "dgp": LINEAR_DGP, "B": 100}), encoding="utf-8"
    )

    cfg = load_config(path, {"B": 60, "qn.lambda_min": 1e-3})

    assert cfg["gamma"] == 0.3
    assert cfg["B"] == 60
    assert cfg["qn"]["L"] == 40
    assert cfg["qn"]["lambda_min"] == 1e-3


@pytest.mark.parametrize(
    "overrides, field",
    [
        ({"gamma": 1.5}, "gamma"),
        ({"gamma": 0.0}, "gamma"),
        ({"alpha": 0.0}, "alpha"),
        ({"m": 10}, "m"),
        ({"sgd.delta": 0.5}, "sgd"),
        ({"data": "input.csv"}, "outcome"),
        ({"dgp": {"kind": "NonlinearPanel", "theta": [1.0, 0.0]}}, "dgp"),
    ],
)
def test_invalid_config_is_rejected(overrides, field):
    """잘못된 설정 거부 테스트"""
    with pytest.raises(ConfigurationError) as excinfo:
        load_config(overrides=overrides)

    assert field in excinfo.value.detail["errors"]


def test_missing_config_file(tmp_path):
    """없는 설정 파일 거부 테스트"""
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.json")


def test_fit_command_writes_outputs(tmp_path):
    """fit 명령 결과 파일 테스트"""
    call_command(
        "fit",
        "--set", f"dgp={json.dumps(LINEAR_DGP)}",
        "--method", "rnr",
        "--B", "50",
        "--seed", "7",
        "--output-dir", str(tmp_path),
    )

    for name in ("draws.csv", "report.csv", "report.json", "failures.jsonl", "diagnostics.json"):
        assert (tmp_path / name).is_file()
    report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert report["method"] == "rnr"
    assert report["B"] == 50
    assert [row["coefficient"] for row in report["coefficients"]] == ["const", "x1"]
    assert report["config"]["seed"] == 7
    draws = pd.read_csv(tmp_path / "draws.csv")
    assert list(draws.columns) == ["b", "phase", "theta_1", "theta_2"]
    assert (draws["phase"] == "keep").sum() == 50
    assert (draws["phase"] == "burn").sum() == 50
    diagnostics = json.loads((tmp_path / "diagnostics.json").read_text(encoding="utf-8"))
    assert diagnostics["status"] == "ok"
    assert diagnostics["config"]["method"] == "rnr"
    assert diagnostics["config"]["B"] == 50
    assert diagnostics["config"]["dgp.kind"] == "LinearGaussian"
    assert isinstance(diagnostics["failure_log"], list)
    assert len(diagnostics["failure_log"]) == diagnostics["failure_count"]
    assert diagnostics["wall_time_ms"] > 0


def test_fit_command_is_reproducible(tmp_path):
    """같은 시드의 fit 결과 재현 테스트"""
    for name in ("first", "second"):
        call_command(
            "fit",
            "--set", f"dgp={json.dumps(LINEAR_DGP)}",
            "--B", "30",
            "--output-dir", str(tmp_path / name),
        )

    first = (tmp_path / "first" / "draws.csv").read_text(encoding="utf-8")
    assert first == (tmp_path / "second" / "draws.csv").read_text(encoding="utf-8")


def test_fit_rerun_from_config_echo(tmp_path):
    """설정 echo 로 다시 실행한 fit 의 draw 재현 테스트"""
    call_command(
        "fit",
        "--set", f"dgp={json.dumps(LINEAR_DGP)}",
        "--method", "rqn",
        "--B", "30",
        "--seed", "11",
        "--set", "penalty.enabled=true",
        "--output-dir", str(tmp_path / "first"),
    )
    echo = json.loads((tmp_path / "first" / "report.json").read_text(encoding="utf-8"))["config"]
    (tmp_path / "echo.json").write_text(json.dumps(echo), encoding="utf-8")

    call_command("fit", "--config", str(tmp_path / "echo.json"), "--output-dir", str(tmp_path / "second"))

    first = (tmp_path / "first" / "draws.csv").read_text(encoding="utf-8")
    assert first == (tmp_path / "second" / "draws.csv").read_text(encoding="utf-8")
    second = json.loads((tmp_path / "second" / "report.json").read_text(encoding="utf-8"))["config"]
    assert {key: value for key, value in second.items() if key != "output_dir"} == {
        key: value for key, value in echo.items() if key != "output_dir"
    }


def test_fit_command_split_panel(tmp_path):
    """분할 패널 fit 명령 테스트"""
    dgp = {"kind": "NonlinearPanel", "n": 30, "T": 4, "theta": [1.0, 0.0]}
    call_command(
        "fit",
        "--set", f"dgp={json.dumps(dgp)}",
        "--model", "panel-variance",
        "--method", "rnr",
        "--B", "30",
        "--split-panel",
        "--output-dir", str(tmp_path),
    )

    report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert report["method"] == "split-corrected"
    assert set(pd.read_csv(tmp_path / "draws.csv")["method"]) == {"split-full", "split-corrected"}


def test_fit_command_configuration_error(tmp_path):
    """설정 오류의 종료 코드 테스트"""
    with pytest.raises(CommandError) as excinfo:
        call_command("fit", "--gamma", "2", "--output-dir", str(tmp_path))

    assert excinfo.value.returncode == 2


def test_fit_command_with_too_few_draws(tmp_path):
    """draw 부족 시 수치 오류 종료 코드 테스트"""
    with pytest.raises(CommandError) as excinfo:
        call_command(
            "fit",
            "--set", f"dgp={json.dumps(LINEAR_DGP)}",
            "--method", "rnr",
            "--B", "5",
            "--output-dir", str(tmp_path),
        )

    assert excinfo.value.returncode == 3
    diagnostics = json.loads((tmp_path / "diagnostics.json").read_text(encoding="utf-8"))
    assert diagnostics["error"]["category"] == "insufficient-draws"


def test_fit_command_records_failure_diagnostics(tmp_path):
    """실행 중 오류의 diagnostics.json 기록 테스트"""
    with pytest.raises(CommandError) as excinfo:
        call_command(
            "fit",
            "--data", str(tmp_path / "missing.csv"),
            "--outcome", "y",
            "--output-dir", str(tmp_path),
        )

    assert excinfo.value.returncode == 2
    diagnostics = json.loads((tmp_path / "diagnostics.json").read_text(encoding="utf-8"))
    assert diagnostics["status"] == "error"
    assert diagnostics["error"]["category"] == "config"


def test_fit_command_reads_csv(tmp_path):
    """CSV 입력 fit 명령 테스트"""
    rng = np.random.default_rng(0)
    x = rng.standard_normal(80)
    frame = pd.DataFrame({"y": 1.0 + 2.0 * x + rng.standard_normal(80), "x": x})
    frame.to_csv(tmp_path / "input.csv", index=False)

    call_command(
        "fit",
        "--data", str(tmp_path / "input.csv"),
        "--outcome", "y",
        "--regressors", "x",
        "--set", "add_constant=true",
        "--method", "rnr",
        "--B", "40",
        "--output-dir", str(tmp_path / "out"),
    )

    report = pd.read_csv(tmp_path / "out" / "report.csv")
    assert list(report["coefficient"]) == ["x", "const"]
    assert report["estimate"].iloc[0] == pytest.approx(2.0, abs=0.5)


def test_compare_isolates_failing_method(linear_cfg):
    """compare 에서 실패한 방법의 격리 테스트"""
    cfg = linear_cfg("compare", methods=["rnr", "boot", "ks", "sandwich", "split"])

    result = run_compare(cfg)

    assert result["outcome"]["split"]["status"] == "error"
    assert result["outcome"]["split"]["error"]["category"] == "config"
    for method in ("rnr", "boot", "ks", "sandwich"):
        assert result["outcome"][method]["status"] == "ok"
    summary = pd.read_csv(result["output_dir"] / "compare_summary.csv")
    assert set(summary["method"]) == {"rnr", "boot", "ks", "sandwich"}
    diagnostics = json.loads((result["output_dir"] / "diagnostics.json").read_text(encoding="utf-8"))
    assert diagnostics["methods"]["split"]["status"] == "error"


def test_compare_methods_agree_on_ols(linear_cfg):
    """OLS 에서 방법 간 표준오차 유사성 테스트"""
    cfg = linear_cfg("compare", methods=["rnr", "ks", "sandwich"], B=800, method="rnr")

    result = run_compare(cfg)

    se = {item.method: item.report.se for item in result["results"]}
    np.testing.assert_allclose(se["ks"], se["sandwich"], rtol=0.2)
    np.testing.assert_allclose(se["rnr"], se["sandwich"], rtol=0.35)


def test_mc_is_reproducible(linear_cfg, tmp_path):
    """MC 결과 재현 및 요약 테스트"""
    cfg = linear_cfg("mc", methods=["rnr", "sandwich"], B=30, **{"mc.replications": 3, "mc.workers": 1})

    first = run_mc(cfg)
    second = run_mc(cfg)

    pd.testing.assert_frame_equal(first["replications"], second["replications"])
    summary = first["summary"]
    assert len(summary) == 4
    assert set(summary["replications"]) == {3}
    assert not summary["flagged"].any()
    assert (tmp_path / "mc_summary.csv").is_file()
    assert (tmp_path / "mc_replications.csv").is_file()


def test_mc_needs_dgp(tmp_path):
    """dgp 없는 MC 거부 테스트"""
    cfg = load_config(overrides={"output_dir": str(tmp_path)}, command="mc")

    with pytest.raises(ConfigurationError):
        run_mc(cfg)


def test_mc_isolates_failed_replication_setup(linear_cfg, monkeypatch):
    """데이터 생성에 실패한 MC 반복의 격리 테스트"""
    cfg = linear_cfg("mc", methods=["rnr", "sandwich"], B=30, **{"mc.replications": 4, "mc.workers": 1})
    bad_seed = runners._replication_seeds(cfg["seed"], 2)[0]
    build_dataset = runners.build_dataset

    def failing_build_dataset(cfg, seed=None):
        if seed == bad_seed:
            raise NumericalEvaluationError("simulated data are not finite")
        return build_dataset(cfg, seed=seed)

    monkeypatch.setattr(runners, "build_dataset", failing_build_dataset)

    result = run_mc(cfg)

    frame = result["replications"]
    failed = frame[frame["status"] == "failed"]
    assert set(failed["replication"]) == {2}
    assert len(failed) == 4
    assert set(failed["error"]) == {"numerical"}
    assert set(frame.loc[frame["replication"] != 2, "status"]) == {"ok"}
    summary = result["summary"]
    assert set(summary["failures"]) == {1}
    assert set(summary["replications"]) == {3}
    assert summary["flagged"].all()


@pytest.mark.slow
def test_mc_coverage_of_rqn_on_linear_model(tmp_path):
    """선형 모형 rQN 의 5% 기각률 MC 테스트"""
    cfg = load_config(
        overrides={
            "dgp": {"kind": "LinearGaussian", "n": 200, "theta": [1.0, 0.5]},
            "method": "rqn",
            "scheme": "gaussian",
            "gamma": 0.1,
            "B": 1000,
            "mc.replications": 500,
            "mc.workers": 1,
            "output_dir": str(tmp_path),
        },
        command="mc",
    )

    summary = run_mc(cfg)["summary"]

    assert len(summary) == 2
    assert not summary["flagged"].any()
    for column in ("reject_quantile", "reject_se"):
        assert summary[column].between(0.025, 0.08).all(), summary[["coefficient", column]]


@pytest.mark.slow
def test_mc_split_panel_halves_variance_bias(tmp_path):
    """분할 패널 보정의 편향 감소와 기각률 MC 테스트"""
    cfg = load_config(
        overrides={
            "dgp": {"kind": "NonlinearPanel", "n": 100, "T": 20, "theta": [1.0, 0.0]},
            "model": "panel-variance",
            "method": "rnr",
            "split_panel": True,
            "gamma": 0.5,
            "B": 400,
            "mc.replications": 200,
            "mc.workers": 1,
            "output_dir": str(tmp_path),
        },
        command="mc",
    )

    summary = run_mc(cfg)["summary"].set_index(["method", "coefficient"])

    full = summary.loc[("split-full", "log_variance")]
    corrected = summary.loc[("split-corrected", "log_variance")]
    assert abs(corrected["bias"]) <= 0.5 * abs(full["bias"])
    assert 0.02 <= corrected["reject_se"] <= 0.09
    assert full["reject_se"] > corrected["reject_se"]


def test_summarize_replications_flags_failures():
    """MC 실패 비율 표시와 기각률 계산 테스트"""
    rows = [
        {"replication": r, "method": "rnr", "coefficient": "b", "truth": 0.0, "status": "ok",
         "estimate": 0.1 * r, "se": 0.1, "ci_lo": 0.1 * r - 0.15, "ci_hi": 0.1 * r + 0.15}
        for r in range(4)
    ]
    rows.append({"replication": 4, "method": "rnr", "coefficient": "b", "truth": 0.0, "status": "failed"})
    frame = pd.DataFrame(rows)

    summary = summarize_replications(frame, alpha=0.05).iloc[0]

    assert summary["failures"] == 1
    assert summary["failure_share"] == pytest.approx(0.2)
    assert summary["flagged"]
    assert summary["bias"] == pytest.approx(0.15)
    assert summary["reject_quantile"] == pytest.approx(0.5)
    assert summary["reject_se"] == pytest.approx(0.5)


def test_check_runs_every_builtin_model(tmp_path):
    """내장 모델 기울기 검사 테스트"""
    rows = run_check(load_config(overrides={"output_dir": str(tmp_path)}, command="check"))

    assert [row["model"] for row in rows] == ["ols", "probit", "nls-exp", "panel-variance", "quadratic"]
    assert all(row["ok"] for row in rows)


def test_saddle_demo_command(tmp_path):
    """saddle-demo 명령 테스트"""
    call_command("saddle_demo", "--output-dir", str(tmp_path), "--set", "saddle.c_grid=[0.0, 5.0]")

    frame = pd.read_csv(tmp_path / "saddle_demo.csv")
    assert len(frame) == 4
    assert set(frame["method"]) == {"nr", "rnr"}
