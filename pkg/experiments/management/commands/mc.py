import argparse

from experiments.management.base import ExperimentCommand
from experiments.runner import Summary
from measures.histograms import DyadicHistogram
from walks.sampling import (
    estimate_dual_speed,
    estimate_p3,
    estimate_speed,
    leaving_distribution,
    sample_dual_harmonic_histogram,
    sample_harmonic_points,
    sample_stationary_strings,
)


class Command(ExperimentCommand):
    help = "Monte Carlo experiments on the primal and dual walks."
    subcommand = "mc"

    def add_experiment_arguments(self, parser):
        parser.add_argument(
            "experiment",
            nargs="?",
            choices=["p3", "speed", "leaving", "harmonic-sample", "dual-speed", "dual-harmonic", "stationary-sample"],
        )
        parser.add_argument("--steps", type=int, help="Total walk steps for time averages.")
        parser.add_argument("--walkers", type=int)
        parser.add_argument("--samples", type=int)
        parser.add_argument("--level", type=int)
        parser.add_argument("--max-depth", type=int)
        parser.add_argument("--graph", choices=["wrapped", "plus", "dual"])
        parser.add_argument("--resolution", type=int)
        parser.add_argument("--length", type=int)
        parser.add_argument("--dual", action=argparse.BooleanOptionalAction)
        parser.add_argument("--burn-in", type=int)
        parser.add_argument("--confirmation-depth", type=int)
        parser.add_argument("--budget", type=int)

    def perform(self, run, params):
        experiment = params["experiment"]
        seed, threads = params["seed"], params["threads"]

        if experiment in ("p3", "speed", "dual-speed"):
            steps, walkers = params["steps"], params["walkers"]
            if experiment == "p3":
                result = estimate_p3(steps, seed, walkers, threads)
                line = f"p3 = {result.p3}"
            elif experiment == "speed":
                result = estimate_speed(steps, seed, walkers, threads)
                line = f"speed = {result}"
            else:
                result = estimate_dual_speed(steps, seed, walkers, threads)
                line = f"dual speed = {result}"
            run.write(Summary(result.to_dict()))

        elif experiment == "leaving":
            result = leaving_distribution(
                params["level"], params["samples"], seed, params["confirmation_depth"], params["budget"], threads
            )
            run.write(result)
            line = f"{result.samples} leaving positions at depth {result.level}"

        elif experiment == "harmonic-sample":
            result = sample_harmonic_points(
                params["max_depth"], params["samples"], seed, params["graph"],
                params["confirmation_depth"], params["budget"], threads,
            )
            run.write(result)
            resolution = min(params["resolution"], params["max_depth"])
            if result.samples:
                hist = DyadicHistogram.from_counts(result.histogram_counts(resolution))
                run.write(hist, run.sibling("histogram"))
            line = f"{result.samples} points at depth {result.max_depth}, error bound {result.error_bound:.2e}"

        elif experiment == "dual-harmonic":
            result = sample_dual_harmonic_histogram(params["resolution"], params["samples"], seed, threads=threads)
            run.write(result)
            line = f"chi2 = {result.chi2:.2f}, p = {result.pvalue:.4f}"

        else:
            result = sample_stationary_strings(
                params["length"], params["samples"], seed, params["dual"], params["burn_in"], threads
            )
            run.write(result)
            line = f"{len(result.values)} strings of {result.length} bits"

        run.summary = result.to_dict()
        self.stdout.write(line)
        exceeded = getattr(result, "exceeded", 0)
        if exceeded:
            self.stdout.write(self.style.WARNING(f"{exceeded} walkers ran out of budget and were dropped"))
