from studies.runners import run_saddle_demo
from ._base import EstimationCommand


class Command(EstimationCommand):
    help = "안장점 근처에서 수정 NR 과 잡음 rNR 의 거동을 비교합니다."

    command_name = "saddle-demo"

    def execute_runner(self, cfg):
        for row in run_saddle_demo(cfg):
            theta = ", ".join(f"{v:.4g}" for v in row["theta"])
            self.stdout.write(
                f"c={row['c']:<6g} {row['method']:>4} theta=({theta}) Q={row['q']:.4g} diverged={row['diverged']}"
            )
