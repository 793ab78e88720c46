"""Utility functions for output files and provenance."""

import json
import os
import subprocess
from pathlib import Path
from typing import Any

import pandas as pd

from . import __version__
from .config import SimConfig, dump_config


def version_string() -> str:
    """`git describe` of the source tree when available, else the package version."""
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
            check=False,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    described = result.stdout.strip()
    if result.returncode != 0 or not described:
        return __version__
    return f"{__version__}+{described}"


def provenance_lines(sim_config: SimConfig, extra: dict[str, Any] | None = None) -> list[str]:
    """Header lines embedding the version and the full resolved config."""
    lines = [f"# version: {version_string()}"]
    for line in dump_config(sim_config).splitlines():
        lines.append(f"# config: {line}")
    for key, value in (extra or {}).items():
        lines.append(f"# {key}: {value}")
    return lines


def validate_output_dir(path: Path) -> tuple[bool, str]:
    """
    Check that results can be written to a directory, creating it if needed.

    Returns:
        Tuple of (is_valid, error_message)
    """
    if path.exists() and not path.is_dir():
        return False, f"Output path is not a directory: {path}"
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        return False, f"Cannot create output directory {path}: {e}"
    if not os.access(path, os.W_OK):
        return False, f"Output directory is not writable: {path}"
    return True, ""


def write_report_csv(frame: pd.DataFrame, path: Path, header: list[str]) -> Path:
    """Write a CSV preceded by `#` header lines."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            for line in header:
                f.write(line + "\n")
            frame.to_csv(f, index=False, lineterminator="\n")
    except OSError as e:
        raise OSError(f"Failed to write report {path}: {e}") from e
    return path


def read_report_csv(path: Path) -> pd.DataFrame:
    """Read a report written by write_report_csv, skipping its header lines."""
    return pd.read_csv(path, comment="#", float_precision="round_trip")


def write_json(payload: dict[str, Any], path: Path) -> Path:
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise OSError(f"Failed to write summary {path}: {e}") from e
    return path
