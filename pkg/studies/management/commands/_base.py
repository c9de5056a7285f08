import json

from django.core.management.base import BaseCommand, CommandError

from objective.exceptions import EstimationError
from studies.runners import load_config

# argparse dest -> 점 표기 설정 키
COMMON_FLAGS = {
    "data": "data",
    "outcome": "outcome",
    "regressors": "regressors",
    "cluster": "cluster",
    "unit": "unit",
    "time": "time",
    "model": "model",
    "method": "method",
    "scheme": "scheme",
    "gamma": "gamma",
    "alpha": "alpha",
    "B": "B",
    "burn": "burn",
    "m": "m",
    "seed": "seed",
    "output_dir": "output_dir",
    "qn_L": "qn.L",
    "workers": "mc.workers",
    "replications": "mc.replications",
}


def _parse_value(raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


class EstimationCommand(BaseCommand):
    """설정 파일과 플래그를 합쳐 runner 를 호출하는 명령의 공통 부분.

    EstimationError 는 CommandError 로 바꾸고 오류 분류에 맞는 종료 코드를 씁니다
    (2: 설정 오류, 3: 수치 오류).
    """

    command_name = "fit"

    def add_arguments(self, parser):
        parser.add_argument("--config", help="JSON 설정 파일")
        parser.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="점 표기 설정 덮어쓰기 (값은 JSON 으로 해석)",
        )
        parser.add_argument("--data", help="CSV 경로 또는 mroz")
        parser.add_argument("--outcome")
        parser.add_argument("--regressors", type=lambda raw: raw.split(","))
        parser.add_argument("--cluster")
        parser.add_argument("--unit")
        parser.add_argument("--time")
        parser.add_argument("--model")
        parser.add_argument("--method")
        parser.add_argument("--scheme")
        parser.add_argument("--gamma", type=float)
        parser.add_argument("--alpha", type=float)
        parser.add_argument("--B", dest="B", type=int)
        parser.add_argument("--burn", type=int)
        parser.add_argument("--m", type=int)
        parser.add_argument("--seed", type=int)
        parser.add_argument("--qn-L", dest="qn_L", type=int)
        parser.add_argument("--output-dir", dest="output_dir")
        parser.add_argument("--cluster-aware", dest="cluster_aware", action="store_true", default=None)
        parser.add_argument("--penalty", dest="penalty", action="store_true", default=None)

    def overrides(self, options):
        values = {key: options.get(dest) for dest, key in COMMON_FLAGS.items()}
        if options.get("cluster_aware"):
            values["cluster_aware"] = True
        if options.get("penalty"):
            values["penalty.enabled"] = True
        for item in options.get("set") or []:
            key, sep, raw = item.partition("=")
            if not sep:
                raise CommandError(f"--set expects KEY=VALUE, got {item!r}", returncode=2)
            values[key.strip()] = _parse_value(raw)
        return values

    def execute_runner(self, cfg):
        raise NotImplementedError

    def handle(self, *args, **options):
        try:
            cfg = load_config(options.get("config"), self.overrides(options), command=self.command_name)
            return self.execute_runner(cfg)
        except EstimationError as exc:
            raise CommandError(f"[{exc.category}] {exc.message}", returncode=exc.exit_code) from exc
