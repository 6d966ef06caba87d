from experiments.management.base import ExperimentCommand
from measures.increments import k1_law


class Command(ExperimentCommand):
    help = "Law of 2K1 from the Dirichlet problem between an inner and an outer depth."
    subcommand = "k1_law"

    def add_experiment_arguments(self, parser):
        parser.add_argument("--inner", type=int)
        parser.add_argument("--target", type=int)
        parser.add_argument("--outer", type=int)
        parser.add_argument("--tol", type=float)
        parser.add_argument("--compare-outer", type=int)

    def perform(self, run, params):
        depths = params["inner"], params["target"]
        law = k1_law(*depths, params["outer"], params["tol"])
        run.write(law)
        run.summary = law.to_dict()
        other = params["compare_outer"]
        if other:
            tv = law.tv(k1_law(*depths, other, params["tol"]))
            run.summary["truncation_tv"] = {"other_outer": other, "tv": tv}
            self.stdout.write(f"TV(outer={params['outer']}, outer={other}) = {tv:.3e}")
        self.stdout.write(f"P[2K1 = 0] = {law.mass(0):.9f}   asymmetry {law.asymmetry():.2e}")
