from experiments.management.base import ExperimentCommand
from experiments.runner import Table
from measures.chains import stationary_histogram, stationary_trend, truncated_stationary


class Command(ExperimentCommand):
    help = "Stationary vector of the L-bit chain, its bit-reversed histogram, or the trend over L."
    subcommand = "stationary_chain"

    def add_experiment_arguments(self, parser):
        parser.add_argument("--length", "-L", type=int)
        parser.add_argument("--tol", type=float)
        parser.add_argument("--leading-bit", choices=["zero", "random"])
        parser.add_argument("--view", choices=["vector", "histogram", "trend"])
        parser.add_argument("--resolution", type=int)
        parser.add_argument("--trend-from", type=int)
        parser.add_argument("--trend-to", type=int)

    def perform(self, run, params):
        if params["view"] == "trend":
            rows = stationary_trend(range(params["trend_from"], params["trend_to"] + 1), params["tol"])
            run.write(Table(["length", "p3", "marginal_gap"], [(r.length, r.p3, r.marginal_gap) for r in rows]))
            run.summary = {"p3": {str(r.length): r.p3 for r in rows}}
            for r in rows:
                self.stdout.write(f"L={r.length:2d}  p3={r.p3:.9f}  gap={r.marginal_gap:.3e}")
            return

        chain = truncated_stationary(params["length"], params["tol"], params["leading_bit"])
        if params["view"] == "histogram":
            run.write(stationary_histogram(chain, params["resolution"]))
        else:
            run.write(chain)
        run.summary = chain.to_dict()
        self.stdout.write(f"L={chain.length}  p3={chain.p3:.9f}  ({chain.iterations} iterations)")
