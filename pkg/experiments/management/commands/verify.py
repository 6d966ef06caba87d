from experiments.management.base import ExperimentCommand
from experiments.verify import verify


class Command(ExperimentCommand):
    help = "Run the acceptance suite and write the report."
    subcommand = "verify"

    def add_experiment_arguments(self, parser):
        scale = parser.add_mutually_exclusive_group()
        scale.add_argument("--quick", dest="scale", action="store_const", const="quick")
        scale.add_argument("--full", dest="scale", action="store_const", const="full")

    def perform(self, run, params):
        def progress(check):
            style = {"pass": self.style.SUCCESS, "fail": self.style.ERROR}.get(check.status, self.style.WARNING)
            self.stdout.write(style(f"{check.status:>9}  {check.name}  value={check.value}"))

        report = verify(params["scale"], params["seed"], params["threads"], progress)
        run.write(report)
        run.summary = {"ok": report.ok, "failed": [c.name for c in report.failed]}
        run.checks_failed = not report.ok
        if not report.ok:
            return f"{len(report.failed)} check(s) failed: {', '.join(c.name for c in report.failed)}"
