from studies.runners import run_fit
from ._base import EstimationCommand


def _fmt(value):
    return "nan" if value is None else f"{value: .6f}"


class Command(EstimationCommand):
    help = "데이터셋 하나에 재표본 최적화 체인을 돌리고 draws/report/diagnostics 를 저장합니다."

    command_name = "fit"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--split-panel", dest="split_panel", action="store_true", default=None)
        parser.add_argument("--half-delay", dest="half_delay", type=int)

    def overrides(self, options):
        values = super().overrides(options)
        if options.get("split_panel"):
            values["split_panel"] = True
        values["half_delay"] = options.get("half_delay")
        return values

    def execute_runner(self, cfg):
        result = run_fit(cfg)
        report = result["report"]
        self.stdout.write(f"method={report.method} B={report.B} phi={report.phi_gamma:.4f}")
        for row in report.rows():
            self.stdout.write(
                f"{row['coefficient']:>14} {_fmt(row['estimate'])} se={_fmt(row['se'])} "
                f"[{_fmt(row['ci_lo'])}, {_fmt(row['ci_hi'])}]"
            )
        self.stdout.write(self.style.SUCCESS(f"결과 저장: {result['output_dir']}"))
