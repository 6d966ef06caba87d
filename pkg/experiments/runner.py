# experiments/runner.py
"""
Parameter resolution, run bookkeeping and manifests.

Resolution order for every parameter: command-line flag > the subcommand's table in the
TOML config file > django.conf.settings > the form field's initial value.
"""
from __future__ import annotations

import hashlib
import logging
import subprocess
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any

from django.conf import settings
from django.db import DatabaseError
from django.utils import timezone

import dyadlab
from dyadlab.emit import emit, jsonable, write_json
from dyadlab.errors import ConfigError
from dyadlab.utils import manifest_path, output_path

from .forms import FORMS
from .models import ExperimentRun

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------

def load_config_table(path: str | Path, subcommand: str) -> dict:
    """The `[subcommand]` table of a TOML file (dashes and underscores are interchangeable)."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}")
    table = data.get(subcommand, data.get(subcommand.replace("_", "-"), {}))
    if not isinstance(table, dict):
        raise ConfigError(f"[{subcommand}] in {path} must be a table")
    return {key.replace("-", "_"): value for key, value in table.items()}


def resolve_params(subcommand: str, options: dict, config: str | Path | None = None) -> dict:
    form_class = FORMS[subcommand]
    fields = form_class.base_fields
    data = {name: f.initial for name, f in fields.items() if f.initial is not None}
    if config:
        table = load_config_table(config, subcommand)
        unknown = sorted(set(table) - set(fields))
        if unknown:
            raise ConfigError(f"unknown keys in [{subcommand}]: {', '.join(unknown)}")
        data.update(table)
    data.update({k: v for k, v in options.items() if k in fields and v is not None})

    form = form_class(data)
    if not form.is_valid():
        errors = {k: [str(m) for m in v] for k, v in form.errors.items()}
        raise ConfigError(_describe(errors), errors)
    return {name: form.cleaned_data.get(name) for name in fields}


def _describe(errors: dict) -> str:
    parts = []
    for name, messages in errors.items():
        label = "parameters" if name == "__all__" else f"--{name.replace('_', '-')}"
        parts.append(f"{label}: {' '.join(messages)}")
    return "invalid parameters; " + "; ".join(parts)


# ---------------------------------------------------------------------
# Versions and tables
# ---------------------------------------------------------------------

def code_version() -> str:
    return dyadlab.__version__


def git_commit() -> str | None:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            cwd=settings.BASE_DIR,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return None
    if out.returncode != 0:
        return None
    return out.stdout.strip() or None


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


class Summary:
    """Key/value view of a nested dict, for results that have no table of their own."""

    def __init__(self, data: dict):
        self.data = data

    def to_dict(self):
        return self.data

    def csv_header(self):
        return ["key", "value"]

    def csv_rows(self):
        yield from _flatten(self.data)


class Table:
    """Rows under a fixed header; `extra` is merged into the JSON form."""

    def __init__(self, header: list[str], rows: list, **extra):
        self.header = header
        self.rows = [tuple(r) for r in rows]
        self.extra = extra

    def to_dict(self):
        return {**self.extra, "rows": [dict(zip(self.header, r)) for r in self.rows]}

    def csv_header(self):
        return self.header

    def csv_rows(self):
        yield from self.rows


def _flatten(data: Any, prefix: str = ""):
    if isinstance(data, dict):
        for key in sorted(data, key=str):
            yield from _flatten(data[key], f"{prefix}{key}.")
    elif isinstance(data, (list, tuple)):
        for i, value in enumerate(data):
            yield from _flatten(value, f"{prefix}{i}.")
    else:
        yield prefix.rstrip("."), data


# ---------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------

class ExperimentRunner:
    """
    Context manager around one invocation: writes outputs under DYADLAB_OUTPUT_DIR, writes
    the manifest next to the primary output on success and keeps the ExperimentRun row current.
    The manifest has no wall-clock fields; runtimes go to the database only.
    """

    def __init__(self, subcommand: str, params: dict):
        self.subcommand = subcommand
        self.params = params
        self.primary = output_path(params["out"])
        self.outputs: list[Path] = []
        self.summary: dict = {}
        self.checks_failed = False
        self.record: ExperimentRun | None = None
        self._started = 0.0

    @property
    def fmt(self) -> str:
        return self.params["format"]

    @property
    def seed(self) -> int | None:
        return self.params.get("seed")

    def sibling(self, name: str, fmt: str | None = None) -> Path:
        """`runs/harmonic.csv` + `g` -> `runs/harmonic.g.csv`"""
        return self.primary.with_name(f"{self.primary.stem}.{name}.{fmt or self.fmt}")

    def write(self, data, path: Path | None = None, fmt: str | None = None) -> Path:
        written = emit(data, fmt or self.fmt, path or self.primary)
        self.outputs.append(written)
        return written

    def manifest(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "config": self.params,
            "seed": self.seed,
            "threads": self.params.get("threads"),
            "code_version": code_version(),
            "git_commit": git_commit(),
            "outputs": [{"file": p.name, "sha256": file_sha256(p)} for p in self.outputs],
            "summary": self.summary,
        }

    def __enter__(self):
        self._started = time.perf_counter()
        self.record = self._save(
            None,
            subcommand=self.subcommand,
            seed=self.seed,
            config=_plain(self.params),
            threads=self.params.get("threads") or 1,
            code_version=code_version(),
        )
        logger.info("%s started with seed %s", self.subcommand, self.seed)
        return self

    def __exit__(self, exc_type, exc, tb):
        runtime = time.perf_counter() - self._started
        manifest = {}
        if exc is None:
            manifest = self.manifest()
            write_json(manifest_path(self.primary), manifest)
            status = "checks_failed" if self.checks_failed else "succeeded"
        else:
            status = "failed"
        if self.record is not None:
            self._save(
                self.record,
                status=status,
                error="" if exc is None else f"{type(exc).__name__}: {exc}",
                manifest=_plain(manifest),
                outputs=[str(p) for p in self.outputs],
                runtime_seconds=runtime,
                finished_at=timezone.now(),
            )
        logger.info("%s %s in %.2fs", self.subcommand, status, runtime)
        return False

    def _save(self, record, **fields):
        try:
            if record is None:
                return ExperimentRun.objects.create(**fields)
            for name, value in fields.items():
                setattr(record, name, value)
            record.save()
            return record
        except DatabaseError as exc:
            logger.warning("could not record the run (%s); run `manage.py migrate`", exc)
            return record


def _plain(data: Any) -> Any:
    """JSON-safe copy for JSONField."""
    return jsonable(data)
