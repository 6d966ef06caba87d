import argparse

import numpy as np

from experiments.management.base import ExperimentCommand
from experiments.runner import Table
from measures.histograms import g_derivative, g_profile, harmonic_histogram, singularity_report, two_bit_statistics
from measures.increments import k1_law


class Command(ExperimentCommand):
    help = "Harmonic measure of the wrapped graph with its g profile, entropy and singularity diagnostics."
    subcommand = "harmonic"

    def add_experiment_arguments(self, parser):
        parser.add_argument("--terms", type=int)
        parser.add_argument("--resolution", type=int)
        parser.add_argument("--inner", type=int)
        parser.add_argument("--target", type=int)
        parser.add_argument("--outer", type=int)
        parser.add_argument("--tol", type=float)
        parser.add_argument("--symmetrize", action=argparse.BooleanOptionalAction)
        parser.add_argument("--derivative-step", type=int)

    def perform(self, run, params):
        law = k1_law(params["inner"], params["target"], params["outer"], params["tol"])
        h = harmonic_histogram(law, params["terms"], params["resolution"], params["symmetrize"])
        run.write(h)

        profile = g_profile(h)
        run.write(profile, run.sibling("g"))
        step = params["derivative_step"]
        d1, dn = g_derivative(profile, 1), g_derivative(profile, step)
        rows = [(k, _cell(a), _cell(b)) for k, (a, b) in enumerate(zip(d1, dn))]
        run.write(Table(["bin_index", "step_1", f"step_{step}"], rows), run.sibling("g_derivative"))

        report = singularity_report(h, range(6, params["resolution"] + 1))
        run.write(report, run.sibling("singularity"))

        two_bit = two_bit_statistics(h)
        run.summary = {
            "histogram": h.to_dict(),
            "entropy": profile.entropy,
            "g_at_quarter": profile.at(0.25),
            "two_bit": two_bit.to_dict(),
            "singularity": report.to_dict(),
        }
        self.stdout.write(
            f"mass(0)={h.mass('0'):.9f}  excess={two_bit.excess:.3e} (error {h.error:.1e})  h={profile.entropy:.6f}"
        )
        if profile.flagged:
            self.stdout.write(self.style.WARNING(f"{len(profile.flagged)} bins have no mass in their sibling pair"))


def _cell(x):
    return None if np.isnan(x) else float(x)
