import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.db import DatabaseError
from django.test import SimpleTestCase, TestCase, override_settings

from dyadlab.errors import ConfigError
from measures.chains import truncated_stationary
from measures.crest import dirichlet_system

from .models import ExperimentRun
from .runner import ExperimentRunner, Summary, Table, resolve_params
from .verify import ESC0, Check, VerifyReport, VerifySuite


class ResolveParamsTests(SimpleTestCase):
    def write_toml(self, text):
        tmp = tempfile.NamedTemporaryFile("w", suffix=".toml", delete=False, encoding="utf-8")
        tmp.write(text)
        tmp.close()
        self.addCleanup(Path(tmp.name).unlink)
        return tmp.name

    def test_defaults(self):
        params = resolve_params("crest", {})
        self.assertEqual(params["max_depth"], 20)
        self.assertEqual(params["tol"], 1e-12)
        self.assertEqual(params["out"], "crest.csv")
        self.assertEqual(params["threads"], settings.DYADLAB_THREADS)
        self.assertIsNone(params["seed"])

    def test_flag_beats_toml_beats_default(self):
        path = self.write_toml("[crest]\nmax-depth = 8\ntol = 1e-10\n\n[harmonic]\nterms = 14\n")
        params = resolve_params("crest", {"max_depth": 9, "tol": None}, path)
        self.assertEqual(params["max_depth"], 9)
        self.assertEqual(params["tol"], 1e-10)
        self.assertEqual(params["min_depth"], 2)

    def test_toml_errors(self):
        with self.assertRaises(ConfigError):
            resolve_params("crest", {}, self.write_toml("[crest]\nmax_dept = 8\n"))
        with self.assertRaises(ConfigError):
            resolve_params("crest", {}, self.write_toml("[crest\n"))
        with self.assertRaises(ConfigError):
            resolve_params("crest", {}, "/nonexistent/dyadlab.toml")

    def test_cross_field_checks(self):
        with self.assertRaises(ConfigError) as ctx:
            resolve_params("harmonic", {"terms": 12, "resolution": 10})
        self.assertIn("__all__", ctx.exception.errors)
        with self.assertRaises(ConfigError) as ctx:
            resolve_params("k1_law", {"compare_outer": 19})
        self.assertIn("compare_outer", ctx.exception.errors)
        with self.assertRaises(ConfigError):
            resolve_params("mc", {"experiment": "leaving", "level": 16, "confirmation_depth": 50})

    def test_randomized_runs_choose_a_seed(self):
        params = resolve_params("mc", {"experiment": "p3"})
        self.assertIsInstance(params["seed"], int)
        self.assertEqual(resolve_params("mc", {"experiment": "p3", "seed": 7})["seed"], 7)
        self.assertEqual(resolve_params("verify", {})["format"], "json")


class TableTests(SimpleTestCase):
    def test_summary_flattens(self):
        rows = list(Summary({"c": [2, 3], "a": {"b": 1}}).csv_rows())
        self.assertEqual(rows, [("a.b", 1), ("c.0", 2), ("c.1", 3)])

    def test_table(self):
        t = Table(["x", "y"], [(1, 2)], kind="demo")
        self.assertEqual(t.to_dict(), {"kind": "demo", "rows": [{"x": 1, "y": 2}]})


class VerifyReportTests(SimpleTestCase):
    def test_soft_checks_never_fail(self):
        report = VerifyReport("quick", 1, [Check("a", True), Check("entropy", False, soft=True)])
        self.assertTrue(report.ok)
        self.assertEqual(report.to_dict()["checks"][1]["status"], "soft-fail")
        report.checks.append(Check("b", False))
        self.assertFalse(report.ok)
        self.assertEqual([c.name for c in report.failed], ["b"])


def single_counted_double_edge(top, bottom, top_values):
    """dirichlet_system with the two 0–1 edges at depth 1 counted as one."""
    matrix, b = dirichlet_system(top, bottom, top_values)
    if top == 0:
        matrix = matrix.tolil()
        matrix[0, 1] = matrix[1, 0] = -1.0
        matrix = matrix.tocsr()
    return matrix, b


class VerifySuiteTests(SimpleTestCase):
    def test_crest_checks_catch_a_miscounted_double_edge(self):
        with mock.patch("measures.crest.dirichlet_system", side_effect=single_counted_double_edge):
            suite = VerifySuite("quick", seed=1)
            checks = suite.check_crest() + suite.check_conversion()
        self.assertEqual([c.status for c in checks], ["fail", "fail"])
        self.assertGreater(abs(suite.series.esc0 - ESC0), 1e-2)

    def test_depth_tail_check(self):
        suite = VerifySuite("quick", seed=1)
        checks = suite.check_hoeffding()
        self.assertEqual([c.name for c in checks], ["depth_tail_t50", "depth_tail_t100"])
        self.assertTrue(all(c.passed for c in checks))


class CommandTestCase(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        override = override_settings(DYADLAB_OUTPUT_DIR=Path(self.tmp.name))
        override.enable()
        self.addCleanup(override.disable)

    def call(self, *args, **kwargs):
        out = StringIO()
        call_command(*args, stdout=out, **kwargs)
        return out.getvalue()

    def path(self, name):
        return Path(self.tmp.name) / name

    def manifest(self, name):
        return json.loads(self.path(name).read_text(encoding="utf-8"))


class CrestCommandTests(CommandTestCase):
    def test_writes_series_and_manifest(self):
        output = self.call("crest", "--max-depth", "6", "--field-depth", "3")
        self.assertIn("esc(0)", output)
        lines = self.path("crest.csv").read_text(encoding="utf-8").splitlines()
        self.assertTrue(lines[0].startswith("# esc_0_limit="))
        self.assertTrue(self.path("crest.field3.csv").exists())

        manifest = self.manifest("crest.manifest.json")
        self.assertEqual(manifest["config"]["max_depth"], 6)
        self.assertEqual([o["file"] for o in manifest["outputs"]], ["crest.csv", "crest.field3.csv"])
        self.assertNotIn("runtime", json.dumps(manifest))

        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, "succeeded")
        self.assertEqual(run.config["max_depth"], 6)
        self.assertIsNotNone(run.runtime_seconds)

    def test_identical_configs_give_identical_files(self):
        self.call("crest", "--max-depth", "6")
        first = self.path("crest.csv").read_bytes(), self.path("crest.manifest.json").read_bytes()
        with tempfile.TemporaryDirectory() as other, override_settings(DYADLAB_OUTPUT_DIR=Path(other)):
            self.call("crest", "--max-depth", "6")
            second = (Path(other) / "crest.csv").read_bytes(), (Path(other) / "crest.manifest.json").read_bytes()
        self.assertEqual(first, second)

    def test_usage_error(self):
        with self.assertRaises(CommandError) as ctx:
            self.call("crest", "--max-depth", "4")
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn("--max-depth", str(ctx.exception))
        self.assertFalse(ExperimentRun.objects.exists())

    @override_settings(DYADLAB_SOLVER_MAX_ITER=5)
    def test_solver_failure(self):
        with self.assertRaises(CommandError) as ctx:
            self.call("crest", "--max-depth", "8")
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertIn("residual", str(ctx.exception))
        self.assertEqual(ExperimentRun.objects.get().status, "failed")
        self.assertFalse(self.path("crest.manifest.json").exists())


class MeasureCommandTests(CommandTestCase):
    def test_stationary_chain(self):
        self.call("stationary_chain", "-L", "6", "--format", "json")
        data = json.loads(self.path("stationary_chain.json").read_text(encoding="utf-8"))
        self.assertEqual(data["length"], 6)
        self.call("stationary_chain", "--view", "trend", "--trend-from", "4", "--trend-to", "5", "--out", "trend.csv")
        rows = self.path("trend.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(rows[0], "length,p3,marginal_gap")
        self.assertEqual(len(rows), 3)

    def test_k1_law(self):
        self.call("k1_law", "--inner", "3", "--target", "4", "--outer", "9", "--compare-outer", "8")
        manifest = self.manifest("k1_law.manifest.json")
        self.assertIn("truncation_tv", manifest["summary"])
        rows = self.path("k1_law.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(rows[0], "displacement_num,mass")
        self.assertEqual(len(rows), 18)

    def test_harmonic(self):
        self.call(
            "harmonic", "--inner", "3", "--target", "4", "--outer", "9", "--terms", "12", "--resolution", "8",
        )
        for name in ("harmonic.csv", "harmonic.g.csv", "harmonic.g_derivative.csv", "harmonic.singularity.csv"):
            self.assertTrue(self.path(name).exists(), name)
        header = self.path("harmonic.csv").read_text(encoding="utf-8").splitlines()[0]
        self.assertEqual(header, "bin_index,left_endpoint,mass,density,bit_changes")
        self.assertIn("entropy", self.manifest("harmonic.manifest.json")["summary"])


class MonteCarloCommandTests(CommandTestCase):
    def test_p3_is_thread_independent(self):
        self.call("mc", "p3", "--steps", "20000", "--walkers", "64", "--seed", "3", "--threads", "1", "--out", "a.csv")
        self.call("mc", "p3", "--steps", "20000", "--walkers", "64", "--seed", "3", "--threads", "2", "--out", "b.csv")
        self.assertEqual(self.path("a.csv").read_bytes(), self.path("b.csv").read_bytes())
        self.assertIn("key,value", self.path("a.csv").read_text(encoding="utf-8"))

    def test_leaving_and_stationary(self):
        self.call("mc", "leaving", "--level", "1", "--samples", "200", "--seed", "5")
        rows = self.path("mc.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(rows[0], "word,count,mass,stderr")
        self.assertEqual(len(rows), 3)
        self.call("mc", "stationary-sample", "--length", "4", "--samples", "50", "--seed", "1", "--out", "s.csv")
        rows = self.path("s.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(rows[0], "sample,bits")
        self.assertTrue(all(len(r.split(",")[1]) == 4 for r in rows[1:]))

    def test_auto_seed_is_recorded(self):
        self.call("mc", "dual-speed", "--steps", "20000", "--walkers", "32")
        run = ExperimentRun.objects.get()
        self.assertIsNotNone(run.seed)
        self.assertEqual(self.manifest("mc.manifest.json")["seed"], run.seed)

    def test_missing_experiment(self):
        with self.assertRaises(CommandError) as ctx:
            self.call("mc")
        self.assertEqual(ctx.exception.returncode, 2)


class StructureCommandTests(CommandTestCase):
    def test_read_bits(self):
        output = self.call("structure", "read-bits", "--providers", "3", "--bits", "16", "--seed", "1")
        self.assertIn("agree", output)
        rows = self.path("structure.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(len(rows), 4)
        self.assertTrue(all(r.endswith(",0") for r in rows[1:]))

    def test_classify_with_edge_dump(self):
        self.call(
            "structure", "classify", "--providers", "1", "--depth-max", "6", "--radius", "2",
            "--seed", "2", "--dump-edges",
        )
        edges = self.path("structure.edges.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(edges[0], "depth_u,label_u,depth_v,label_v,class,upper")
        self.assertGreater(len(edges), 1)
        self.assertEqual(ExperimentRun.objects.get().status, "succeeded")


class VerifyCommandTests(CommandTestCase):
    def test_failed_checks_exit_with_one(self):
        report = VerifyReport("quick", 1, [Check("crest_esc0", False, 0.5, 0.547846, 1e-3)])
        with mock.patch("experiments.management.commands.verify.verify", return_value=report):
            with self.assertRaises(CommandError) as ctx:
                self.call("verify", "--quick")
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn("crest_esc0", str(ctx.exception))
        self.assertEqual(ExperimentRun.objects.get().status, "checks_failed")
        self.assertFalse(self.manifest("verify.manifest.json")["summary"]["ok"])

    def test_passing_report(self):
        report = VerifyReport("full", 1, [Check("chain_p3_L12", True, 0.382332, 0.382332, 5e-6)])
        with mock.patch("experiments.management.commands.verify.verify", return_value=report) as patched:
            self.call("verify", "--full", "--seed", "1")
        patched.assert_called_once()
        self.assertEqual(patched.call_args.args[:2], ("full", 1))
        data = json.loads(self.path("verify.json").read_text(encoding="utf-8"))
        self.assertTrue(data["ok"])


class RunRecordTests(CommandTestCase):
    def test_files_survive_a_missing_table(self):
        params = resolve_params("stationary_chain", {"length": 4})
        with mock.patch.object(ExperimentRun.objects, "create", side_effect=DatabaseError("no such table")):
            with self.assertLogs("experiments.runner", "WARNING"):
                with ExperimentRunner("stationary_chain", params) as run:
                    run.write(truncated_stationary(4))
        self.assertTrue(self.path("stationary_chain.csv").exists())
        self.assertTrue(self.path("stationary_chain.manifest.json").exists())
        self.assertFalse(ExperimentRun.objects.exists())

    def test_str(self):
        run = ExperimentRun(subcommand="mc", seed=4, status="succeeded")
        self.assertEqual(str(run), "mc seed=4 [succeeded]")
