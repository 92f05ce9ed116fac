"""Report bundle emission: TSV tables, fit results, run manifest.

Every writer is deterministic: identical inputs produce byte-identical
files, which is what makes run manifests meaningful.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .assoc import escape_value
from .dimstats import DimStatsRow, ExemplarRecord, narrative

DIMSTATS_COLUMNS = ("date", "variable", "nrow", "ncol", "nnz", "maxval", "maxcount", "maxfrac")


def fmt_sig3(value: float) -> str:
    """3 significant digits, the precision used in report tables."""
    return f"{value:.3g}"


def _fmt(value: float) -> str:
    # repr keeps full float fidelity and is stable across runs
    return repr(float(value))


def write_dimstats(rows: Iterable[DimStatsRow], fh) -> None:
    fh.write("\t".join(DIMSTATS_COLUMNS) + "\n")
    for row in rows:
        fh.write(f"{row.date}\t{row.variable}\t{row.nrow}\t{row.ncol}\t{row.nnz}\t"
                 f"{escape_value(row.maxval)}\t{row.maxcount}\t{fmt_sig3(row.maxfrac)}\n")


def write_exemplars(records: Iterable[ExemplarRecord], fh) -> None:
    fh.write("variable\tmaxval\tmaxcount\tmaxfrac\tdate\n")
    for record in records:
        for variable in sorted(record.assignments):
            value, count, frac = record.assignments[variable]
            fh.write(f"{variable}\t{escape_value(value)}\t{count}\t"
                     f"{fmt_sig3(frac)}\t{record.date}\n")


def write_exemplar_narratives(records: Iterable[ExemplarRecord], fh) -> None:
    for record in records:
        fh.write(narrative(record) + "\n")


def write_distribution(labels: Sequence[int], empirical: Sequence[float],
                       model: Sequence[float], fh) -> None:
    fh.write("bin\tempirical\tmodel\n")
    for label, emp, mod in zip(labels, empirical, model):
        fh.write(f"{int(label)}\t{_fmt(emp)}\t{_fmt(mod)}\n")


def write_categorical(entries: Sequence[tuple[str, float]], fh) -> None:
    fh.write("value\tfraction\n")
    for value, fraction in entries:
        fh.write(f"{escape_value(value)}\t{_fmt(fraction)}\n")


def write_hours(fractions: np.ndarray, fh) -> None:
    fh.write("hour\tfraction\n")
    for hour, fraction in enumerate(fractions):
        fh.write(f"{hour:02d}\t{_fmt(fraction)}\n")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_path(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_manifest(version: str, config: dict, inputs: dict[str, Path],
                   outputs: dict[str, Path]) -> dict:
    """Everything needed to re-execute and verify a run.

    Deliberately excludes wall-clock time so identical runs produce
    identical manifests.
    """
    return {
        "version": version,
        "config": config,
        "configSha256": sha256_bytes(canonical_json(config).encode("utf-8")),
        "inputs": {
            name: {"path": str(path), "sha256": sha256_path(path)}
            for name, path in sorted(inputs.items())
        },
        "outputs": {
            path.name: sha256_path(path)
            for _, path in sorted(outputs.items())
        },
    }


class OutputTracker:
    """Tracks files written during a run so a failed stage can clean up."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.files: dict[str, Path] = {}

    def open(self, name: str):
        path = self.out_dir / name
        self.files[name] = path
        return open(path, "w", encoding="utf-8", newline="\n")

    def write_text(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        self.files[name] = path
        path.write_text(text, encoding="utf-8", newline="\n")
        return path

    def cleanup(self) -> None:
        for path in self.files.values():
            try:
                path.unlink()
            except FileNotFoundError:
                pass
