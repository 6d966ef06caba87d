import warnings

from dyadlab.errors import FitWarning
from experiments.management.base import ExperimentCommand
from measures.crest import crest_series, solve_crest


class Command(ExperimentCommand):
    help = "Solve esc_n for a range of n, normalize levels 1 and 2 and extrapolate the limits."
    subcommand = "crest"

    def add_experiment_arguments(self, parser):
        parser.add_argument("--max-depth", type=int)
        parser.add_argument("--min-depth", type=int)
        parser.add_argument("--tol", type=float)
        parser.add_argument("--window", type=int, help="Number of trailing terms in the ratio-2 fit.")
        parser.add_argument("--field-depth", type=int, help="Also write the crest field esc_n for this n.")

    def perform(self, run, params):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", FitWarning)
            series = crest_series(params["max_depth"], params["tol"], params["min_depth"], params["window"])
        for w in caught:
            if issubclass(w.category, FitWarning):
                self.stdout.write(self.style.WARNING(str(w.message)))
        run.write(series)

        n = params["field_depth"]
        if n:
            run.write(solve_crest(n, params["tol"]), run.sibling(f"field{n}"))

        run.summary = {"esc0": series.esc0, "p3": series.p3, "relations": series.relations()}
        self.stdout.write(f"esc(0) ~ {series.esc0:.6f}   p3 ~ {series.p3:.6f}")
