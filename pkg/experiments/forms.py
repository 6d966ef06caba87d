# experiments/forms.py
"""
One form per subcommand. Field `initial` values are the built-in defaults; fields left
empty fall back to django.conf.settings in their clean_* method.
"""
import secrets

from django import forms
from django.conf import settings
from django.core.exceptions import ValidationError

from lattice.dyadic import ProviderKind
from measures.chains import LEADING_BITS
from measures.crest import MAX_CREST_DEPTH
from measures.histograms import MAX_GRID_BITS
from walks.batch import WINDOW
from walks.sampling import MIN_HARMONIC_DEPTH

FORMATS = [("csv", "CSV"), ("json", "JSON")]


# ------------------------------- Base ---------------------------------

class RunForm(forms.Form):
    seed = forms.IntegerField(required=False, min_value=0, max_value=2**63 - 1)
    out = forms.CharField(required=False, max_length=500)
    format = forms.ChoiceField(choices=FORMATS, initial="csv")
    threads = forms.IntegerField(required=False, min_value=1, max_value=256)

    subcommand = ""
    # randomized runs record an auto-chosen seed when none is given
    randomized = False

    def clean_threads(self):
        return self.cleaned_data.get("threads") or settings.DYADLAB_THREADS

    def clean(self):
        data = super().clean()
        if self.randomized and data.get("seed") is None:
            data["seed"] = secrets.randbits(63)
        if not data.get("out"):
            data["out"] = f"{self.subcommand}.{data.get('format') or 'csv'}"
        return data


def _positive_float(form, name):
    value = form.cleaned_data.get(name)
    if value is not None and value <= 0:
        raise ValidationError("Must be positive.")
    return value


def _confirmation(data):
    return data.get("confirmation_depth") or settings.DYADLAB_CONFIRMATION_DEPTH


# ------------------------------- Crest --------------------------------

class CrestForm(RunForm):
    subcommand = "crest"

    max_depth = forms.IntegerField(min_value=6, max_value=MAX_CREST_DEPTH, initial=20)
    min_depth = forms.IntegerField(min_value=2, max_value=MAX_CREST_DEPTH, initial=2)
    tol = forms.FloatField(initial=1e-12)
    window = forms.IntegerField(required=False, min_value=4)
    field_depth = forms.IntegerField(
        required=False, min_value=2, max_value=MAX_CREST_DEPTH,
        help_text="Also write the full crest field esc_n for this n.",
    )

    def clean_tol(self):
        return _positive_float(self, "tol")

    def clean(self):
        data = super().clean()
        lo, hi = data.get("min_depth"), data.get("max_depth")
        if lo is not None and hi is not None and hi - max(lo, 3) < 3:
            raise ValidationError("max_depth must exceed max(min_depth, 3) by at least 3.")
        return data


# --------------------------- Stationary chain --------------------------

class StationaryChainForm(RunForm):
    subcommand = "stationary_chain"

    VIEWS = [("vector", "Stationary vector"), ("histogram", "Bit-reversed histogram"), ("trend", "Trend over L")]

    length = forms.IntegerField(min_value=2, max_value=20, initial=12)
    tol = forms.FloatField(initial=1e-13)
    leading_bit = forms.ChoiceField(choices=[(b, b) for b in LEADING_BITS], initial="zero")
    view = forms.ChoiceField(choices=VIEWS, initial="vector")
    resolution = forms.IntegerField(min_value=1, max_value=20, initial=6)
    trend_from = forms.IntegerField(min_value=2, max_value=19, initial=8)
    trend_to = forms.IntegerField(min_value=2, max_value=19, initial=16)

    def clean_tol(self):
        return _positive_float(self, "tol")

    def clean(self):
        data = super().clean()
        if data.get("view") == "histogram" and (data.get("resolution") or 0) > (data.get("length") or 0):
            self.add_error("resolution", "Resolution cannot exceed the chain length.")
        if data.get("view") == "trend" and (data.get("trend_from") or 0) > (data.get("trend_to") or 0):
            self.add_error("trend_to", "trend_to must be at least trend_from.")
        return data


# -------------------------------- K1 law -------------------------------

class IncrementDepthsMixin(forms.Form):
    inner = forms.IntegerField(min_value=1, max_value=MAX_CREST_DEPTH, initial=6)
    target = forms.IntegerField(min_value=2, max_value=MAX_CREST_DEPTH, initial=7)
    outer = forms.IntegerField(min_value=3, max_value=MAX_CREST_DEPTH, initial=19)

    def clean_depths(self, data):
        inner, target, outer = data.get("inner"), data.get("target"), data.get("outer")
        if None not in (inner, target, outer) and not inner < target < outer:
            raise ValidationError("Need inner < target < outer.")


class K1LawForm(IncrementDepthsMixin, RunForm):
    subcommand = "k1_law"

    tol = forms.FloatField(initial=1e-12)
    compare_outer = forms.IntegerField(
        required=False, min_value=3, max_value=MAX_CREST_DEPTH,
        help_text="Report the TV distance to the law truncated at this depth.",
    )

    def clean_tol(self):
        return _positive_float(self, "tol")

    def clean(self):
        data = super().clean()
        self.clean_depths(data)
        other = data.get("compare_outer")
        if other is not None and (other <= (data.get("target") or 0) or other == data.get("outer")):
            self.add_error("compare_outer", "Must be deeper than target and differ from outer.")
        return data


# ------------------------------ Harmonic -------------------------------

class HarmonicForm(IncrementDepthsMixin, RunForm):
    subcommand = "harmonic"

    terms = forms.IntegerField(min_value=12, max_value=MAX_GRID_BITS, initial=22)
    resolution = forms.IntegerField(min_value=8, max_value=20, initial=14)
    tol = forms.FloatField(initial=1e-12)
    symmetrize = forms.BooleanField(required=False, initial=True)
    derivative_step = forms.IntegerField(min_value=1, initial=21)

    def clean_tol(self):
        return _positive_float(self, "tol")

    def clean(self):
        data = super().clean()
        self.clean_depths(data)
        terms, resolution = data.get("terms"), data.get("resolution")
        if terms is not None and resolution is not None and terms < resolution + 4:
            raise ValidationError("terms must be at least resolution + 4.")
        inner, target = data.get("inner"), data.get("target")
        if None not in (terms, inner, target) and terms + target - inner - 1 > MAX_GRID_BITS:
            raise ValidationError(f"terms + (target - inner) - 1 must not exceed {MAX_GRID_BITS}.")
        return data


# ------------------------------ Monte Carlo ----------------------------

class McForm(RunForm):
    subcommand = "mc"
    randomized = True

    EXPERIMENTS = [
        ("p3", "Fraction of time at degree 3"),
        ("speed", "Downward speed"),
        ("leaving", "Leaving distribution"),
        ("harmonic-sample", "Harmonic points"),
        ("dual-speed", "Dual downward speed"),
        ("dual-harmonic", "Dual harmonic histogram"),
        ("stationary-sample", "Stationary strings"),
    ]
    GRAPHS = [("wrapped", "wrapped"), ("plus", "plus"), ("dual", "dual")]

    experiment = forms.ChoiceField(choices=EXPERIMENTS)
    steps = forms.IntegerField(min_value=10_000, initial=10**7)
    walkers = forms.IntegerField(min_value=1, initial=1024)
    samples = forms.IntegerField(min_value=1, initial=10_000)
    level = forms.IntegerField(min_value=1, max_value=16, initial=2)
    max_depth = forms.IntegerField(min_value=MIN_HARMONIC_DEPTH, max_value=WINDOW, initial=20)
    graph = forms.ChoiceField(choices=GRAPHS, initial="wrapped")
    resolution = forms.IntegerField(min_value=1, max_value=16, initial=8)
    length = forms.IntegerField(min_value=1, max_value=64, initial=16)
    dual = forms.BooleanField(required=False, initial=False)
    burn_in = forms.IntegerField(required=False, min_value=0)
    confirmation_depth = forms.IntegerField(required=False, min_value=1, max_value=WINDOW - 1)
    budget = forms.IntegerField(required=False, min_value=1)

    def clean(self):
        data = super().clean()
        experiment = data.get("experiment")
        c = _confirmation(data)
        if experiment == "leaving" and (data.get("level") or 0) + c > WINDOW:
            raise ValidationError(f"level + confirmation depth must not exceed {WINDOW}.")
        if experiment == "harmonic-sample" and (data.get("max_depth") or 0) + c > WINDOW:
            raise ValidationError(f"max_depth + confirmation depth must not exceed {WINDOW}.")
        if experiment == "dual-harmonic" and max(data.get("resolution") or 0, 16) + c > WINDOW:
            raise ValidationError(f"max(resolution, 16) + confirmation depth must not exceed {WINDOW}.")
        return data


# ------------------------------- Structure -----------------------------

class StructureForm(RunForm):
    subcommand = "structure"
    randomized = True

    CHECKS = [("read-bits", "Read root bits"), ("classify", "Classify edges"), ("orient", "Orient vertical edges")]

    check = forms.ChoiceField(choices=CHECKS)
    providers = forms.IntegerField(min_value=1, max_value=10_000, initial=100)
    provider = forms.ChoiceField(choices=[(k.value, k.value) for k in ProviderKind], initial=ProviderKind.SEEDED_TAIL.value)
    suffix = forms.CharField(required=False, max_length=256)
    period = forms.CharField(required=False, max_length=64, initial="1")
    bits = forms.IntegerField(min_value=1, max_value=1024, initial=64)
    depth_min = forms.IntegerField(min_value=1, initial=2)
    depth_max = forms.IntegerField(min_value=2, max_value=40, initial=12)
    radius = forms.IntegerField(min_value=1, max_value=8, initial=4)
    dump_edges = forms.BooleanField(required=False, initial=False)

    def _bit_string(self, name):
        value = self.cleaned_data.get(name) or ""
        if set(value) - {"0", "1"}:
            raise ValidationError("Use only the characters 0 and 1.")
        return value

    def clean_suffix(self):
        return self._bit_string("suffix")

    def clean_period(self):
        return self._bit_string("period") or "1"

    def clean(self):
        data = super().clean()
        if (data.get("depth_min") or 0) >= (data.get("depth_max") or 0):
            self.add_error("depth_max", "depth_max must exceed depth_min.")
        return data


# -------------------------------- Verify -------------------------------

class VerifyForm(RunForm):
    subcommand = "verify"

    SCALES = [("quick", "Quick"), ("full", "Full")]

    format = forms.ChoiceField(choices=FORMATS, initial="json")
    scale = forms.ChoiceField(choices=SCALES, initial="quick")
    seed = forms.IntegerField(required=False, min_value=0, max_value=2**63 - 1, initial=20240)


FORMS = {
    form.subcommand: form
    for form in (CrestForm, StationaryChainForm, K1LawForm, HarmonicForm, McForm, StructureForm, VerifyForm)
}
