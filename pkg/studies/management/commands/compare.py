from studies.runners import run_compare
from ._base import EstimationCommand


class Command(EstimationCommand):
    help = "같은 데이터와 시드로 여러 추론 방법을 실행해 비교표를 만듭니다."

    command_name = "compare"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--methods", type=lambda raw: raw.split(","))

    def overrides(self, options):
        values = super().overrides(options)
        values["methods"] = options.get("methods")
        return values

    def execute_runner(self, cfg):
        result = run_compare(cfg)
        for method, outcome in result["outcome"].items():
            if outcome["status"] != "ok":
                self.stderr.write(f"{method}: {outcome['error']['category']} {outcome['error']['message']}")
        for item in result["results"]:
            for row in item.report.rows():
                self.stdout.write(
                    f"{item.method:>16} {row['coefficient']:>14} {row['estimate']} se={row['se']}"
                )
        self.stdout.write(self.style.SUCCESS(f"결과 저장: {result['output_dir']}"))
