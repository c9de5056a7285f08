from studies.runners import run_check
from ._base import EstimationCommand


class Command(EstimationCommand):
    help = "내장 모델의 해석적 기울기를 중앙차분과 비교합니다."

    command_name = "check"

    def execute_runner(self, cfg):
        rows = run_check(cfg)
        for row in rows:
            status = self.style.SUCCESS("ok") if row["ok"] else self.style.ERROR("FAIL")
            self.stdout.write(f"{row['model']:>16} points={row['points']} max={row['max_discrepancy']:.3e} {status}")
