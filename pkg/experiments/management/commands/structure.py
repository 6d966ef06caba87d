from experiments.management.base import ExperimentCommand
from experiments.runner import Table
from lattice.dyadic import PeriodicTailProvider, ProviderKind, SeededTailProvider, ZeroTailProvider
from lattice.structure import BoundedOracle, dump_edges, read_root_bits, recover_structure, structure_window
from lattice.words import Word


def make_provider(params, index):
    kind = ProviderKind(params["provider"])
    if kind is ProviderKind.ZERO_TAIL:
        return ZeroTailProvider(params["suffix"])
    if kind is ProviderKind.PERIODIC_TAIL:
        return PeriodicTailProvider(params["suffix"], params["period"])
    return SeededTailProvider(params["suffix"], params["seed"] + index)


class Command(ExperimentCommand):
    help = "Recover root bits, edge classes and vertical orientations from the bare graph and compare with the construction."
    subcommand = "structure"

    def add_experiment_arguments(self, parser):
        parser.add_argument("check", nargs="?", choices=["read-bits", "classify", "orient"])
        parser.add_argument("--providers", type=int, help="Number of providers (seeded tails use seed, seed+1, ...).")
        parser.add_argument("--provider", choices=[k.value for k in ProviderKind])
        parser.add_argument("--suffix")
        parser.add_argument("--period")
        parser.add_argument("--bits", type=int)
        parser.add_argument("--depth-min", type=int)
        parser.add_argument("--depth-max", type=int)
        parser.add_argument("--radius", type=int)
        parser.add_argument("--dump-edges", action="store_true", default=None)

    def perform(self, run, params):
        check = params["check"]
        depth_range = (params["depth_min"], params["depth_max"])
        rows = []
        for i in range(params["providers"]):
            provider = make_provider(params, i)
            if check == "read-bits":
                bits = params["bits"]
                read = read_root_bits(BoundedOracle(provider, min_depth=-bits, max_depth=1), bits)
                expected = Word.from_bits(provider.bit_at(j) for j in range(bits))
                mismatches = sum(a != b for a, b in zip(read.bits, expected.bits))
                rows.append((i, str(read), bits, mismatches))
            else:
                report = recover_structure(provider, params["radius"], depth_range, root_bits=0)
                mismatches = report.classify_mismatches if check == "classify" else report.orient_mismatches
                checked = report.edges if check == "classify" else report.vertical
                rows.append((i, report.edges, checked, mismatches))

        if check == "read-bits":
            header = ["provider", "bits_read", "bits_checked", "mismatches"]
        else:
            header = ["provider", "edges", "checked", "mismatches"]
        run.write(Table(header, rows, check=check))

        if params["dump_edges"]:
            _, edges = structure_window(make_provider(params, 0), params["radius"], depth_range)
            run.outputs.append(dump_edges(edges, run.sibling("edges", "csv")))

        bad = [r[0] for r in rows if r[-1]]
        checked = sum(r[2] for r in rows)
        run.summary = {"check": check, "providers": len(rows), "checked": checked, "failing_providers": bad}
        run.checks_failed = bool(bad)
        if bad:
            return f"{check}: {len(bad)} of {len(rows)} providers disagree with the construction"
        self.stdout.write(f"{check}: {checked} items agree across {len(rows)} providers")
