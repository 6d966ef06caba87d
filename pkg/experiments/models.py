# experiments/models.py
from django.db import models
from django.db.models import Q


SUBCOMMANDS = [
    ("crest", "Crest probabilities"),
    ("stationary_chain", "Truncated stationary chain"),
    ("k1_law", "K1 increment law"),
    ("harmonic", "Harmonic measure"),
    ("mc", "Monte Carlo"),
    ("structure", "Structure recovery"),
    ("verify", "Verification suite"),
]

STATUS = [
    ("running", "Running"),
    ("succeeded", "Succeeded"),
    ("failed", "Failed"),
    ("checks_failed", "Checks failed"),
]


class ExperimentRun(models.Model):
    subcommand = models.CharField(max_length=20, choices=SUBCOMMANDS)
    seed = models.BigIntegerField(null=True, blank=True)

    # SNAPSHOT FIELDS (the resolved parameters and the manifest as written)
    config = models.JSONField(default=dict)
    manifest = models.JSONField(default=dict, blank=True)
    outputs = models.JSONField(default=list, blank=True)

    status = models.CharField(max_length=15, choices=STATUS, default="running")
    error = models.TextField(blank=True)
    code_version = models.CharField(max_length=60, blank=True)
    threads = models.PositiveIntegerField(default=1)
    runtime_seconds = models.FloatField(null=True, blank=True)

    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ["-created_at"]
        indexes = [
            models.Index(fields=["subcommand", "created_at"], name="run_subcommand_idx"),
            models.Index(fields=["status"], name="run_status_idx"),
        ]
        constraints = [
            models.CheckConstraint(
                condition=Q(runtime_seconds__isnull=True) | Q(runtime_seconds__gte=0),
                name="run_runtime_nonnegative",
            ),
        ]

    @property
    def is_finished(self) -> bool:
        return self.status != "running"

    def __str__(self):
        seed = "" if self.seed is None else f" seed={self.seed}"
        return f"{self.subcommand}{seed} [{self.status}]"
