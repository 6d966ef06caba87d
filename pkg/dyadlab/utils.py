# dyadlab/utils.py
from pathlib import Path

from django.conf import settings


def output_path(path: str | Path) -> Path:
    """
    Resolve an output path against DYADLAB_OUTPUT_DIR instead of the working directory.
    Absolute paths pass through untouched; parent folders are created.
    """
    p = Path(path)
    if not p.is_absolute():
        p = Path(settings.DYADLAB_OUTPUT_DIR) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def manifest_path(path: str | Path) -> Path:
    """`runs/crest.csv` -> `runs/crest.manifest.json`"""
    p = Path(path)
    return p.with_name(p.stem + ".manifest.json")
