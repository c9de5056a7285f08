from studies.runners import run_mc
from ._base import EstimationCommand


class Command(EstimationCommand):
    help = "시뮬레이션 DGP 로 반복 실험을 돌려 방법별 편향과 기각률을 집계합니다."

    command_name = "mc"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--replications", type=int)
        parser.add_argument("--workers", type=int)
        parser.add_argument("--methods", type=lambda raw: raw.split(","))
        parser.add_argument("--split-panel", dest="split_panel", action="store_true", default=None)

    def overrides(self, options):
        values = super().overrides(options)
        values["methods"] = options.get("methods")
        if options.get("split_panel"):
            values["split_panel"] = True
        return values

    def execute_runner(self, cfg):
        result = run_mc(cfg)
        self.stdout.write(result["summary"].to_string(index=False))
        self.stdout.write(self.style.SUCCESS(f"결과 저장: {result['output_dir']}"))
