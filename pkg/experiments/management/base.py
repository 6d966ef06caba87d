# experiments/management/base.py
from django.core.management.base import BaseCommand, CommandError

from dyadlab.errors import BudgetExceeded, ConfigError, DyadlabError, SolverError
from experiments.runner import ExperimentRunner, resolve_params


class ExperimentCommand(BaseCommand):
    """
    Shared flags, parameter resolution and exit codes for the experiment subcommands:
    2 for rejected parameters, 3 for solver and budget failures, 1 for failed checks.
    """

    subcommand = ""

    def add_arguments(self, parser):
        parser.add_argument("--config", help=f"TOML file whose [{self.subcommand}] table supplies defaults.")
        parser.add_argument("--seed", type=int)
        parser.add_argument("--out", help="Output path, relative to DYADLAB_OUTPUT_DIR unless absolute.")
        parser.add_argument("--format", choices=["csv", "json"])
        parser.add_argument("--threads", type=int)
        self.add_experiment_arguments(parser)

    def add_experiment_arguments(self, parser):
        pass

    def perform(self, run: ExperimentRunner, params: dict) -> str | None:
        """Compute, write outputs through `run` and return a failure message if checks failed."""
        raise NotImplementedError

    def handle(self, *args, **options):
        try:
            params = resolve_params(self.subcommand, options, options.get("config"))
        except ConfigError as exc:
            raise CommandError(str(exc), returncode=2)

        try:
            with ExperimentRunner(self.subcommand, params) as run:
                message = self.perform(run, params)
        except SolverError as exc:
            detail = f" (residual {exc.residual:.3g} after {exc.iterations} iterations)" if exc.residual is not None else ""
            raise CommandError(f"{exc}{detail}", returncode=3)
        except BudgetExceeded as exc:
            detail = f" (walker {exc.walker}, {exc.steps} steps)" if exc.walker is not None else ""
            raise CommandError(f"{exc}{detail}", returncode=3)
        except DyadlabError as exc:
            raise CommandError(str(exc), returncode=2)

        for path in run.outputs:
            self.stdout.write(f"wrote {path}")
        if run.checks_failed:
            raise CommandError(message or "checks failed", returncode=1)
        self.stdout.write(self.style.SUCCESS(f"{self.subcommand} done (seed {run.seed})"))
