"""Deterministic report files: CSV tables, verdict lines, sidecar metadata.

Data files must be byte-identical across runs with the same config and seed,
so they never carry timestamps; wall-clock provenance goes into a sidecar
JSON. All writes are atomic (temp file + rename) so concurrent runs into
distinct directories never interleave.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

__all__ = [
    "VerdictLine",
    "fmt",
    "write_text_atomic",
    "write_csv",
    "read_csv",
    "write_verdicts",
    "write_metadata",
]


@dataclass(frozen=True)
class VerdictLine:
    """One pass/fail criterion: a named value checked against a threshold."""

    name: str
    threshold: str
    value: float
    passed: bool

    def render(self) -> str:
        status = "pass" if self.passed else "fail"
        return f"{self.name}\t{self.threshold}\t{fmt(self.value)}\t{status}"


def fmt(value) -> str:
    """Shortest round-trip decimal form; deterministic across runs."""
    if isinstance(value, (bool,)):
        return str(value)
    if isinstance(value, (int,)):
        return str(value)
    return repr(float(value))


def write_text_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows) -> None:
    """Write a CSV with a header row; every cell formatted via fmt()."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) if not isinstance(v, str) else v for v in row))
    write_text_atomic(path, "\n".join(lines) + "\n")


def read_csv(path) -> tuple[list[str], dict[str, list[float]]]:
    """Read a numeric CSV back into per-column float lists."""
    with open(path, "r", newline="") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    cols: dict[str, list[float]] = {h: [] for h in header}
    for ln in lines[1:]:
        for h, cell in zip(header, ln.split(",")):
            try:
                cols[h].append(float(cell))
            except ValueError:
                cols[h].append(float("nan"))
    return header, cols


def write_verdicts(path, verdicts) -> None:
    write_text_atomic(path, "\n".join(v.render() for v in verdicts) + "\n")


def write_metadata(directory, config_echo: dict) -> None:
    """Sidecar with the run timestamp and config echo (the only dated file)."""
    payload = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "config": config_echo,
    }
    write_text_atomic(Path(directory) / "metadata.json", json.dumps(payload, indent=2) + "\n")
