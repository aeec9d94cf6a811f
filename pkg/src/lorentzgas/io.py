"""Persistence: CSV tables, schema-checked JSON reports and the run manifest.

Data files never contain timestamps, so reruns with the same configuration
produce identical bytes.  Files are first written with a ``.partial``
suffix and only renamed once the whole run has succeeded; the manifest is
written last, through an atomic rename.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

SCHEMA_VERSION = "1.0"
PARTIAL = ".partial"


def fmt(x) -> str:
    """CSV cell text: integers verbatim, floats with 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(x)


def jsonable(obj):
    """Plain JSON structure from dataclasses and numpy values; non-finite floats become null."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def load_schema() -> dict:
    text = resources.files("lorentzgas").joinpath("schema/report.schema.json").read_text()
    return json.loads(text)


def document(kind: str, report, config: dict) -> dict:
    cfg = jsonable(config)
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "config": cfg,
        "report": jsonable(report),
    }


def validate(doc: dict) -> None:
    jsonschema.validate(doc, load_schema())


class OutputSet:
    """Files of one run, staged under ``.partial`` names until commit."""

    def __init__(self, outdir: Path):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []

    def _stage(self, name: str) -> Path:
        final = self.outdir / name
        self.files.append(final)
        return final.with_name(final.name + PARTIAL)

    def csv(self, name: str, header: list[str], rows) -> Path:
        path = self._stage(name)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
        return path

    def json(self, name: str, kind: str, report, config: dict) -> Path:
        doc = document(kind, report, config)
        validate(doc)
        path = self._stage(name)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
        return path

    def text(self, name: str, body: str) -> Path:
        path = self._stage(name)
        path.write_text(body, encoding="utf-8")
        return path

    def commit(self) -> list[str]:
        for final in self.files:
            os.replace(final.with_name(final.name + PARTIAL), final)
        return [str(p) for p in self.files]


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    version: str
    started: str
    finished: str = ""
    status: str = "running"
    outputs: list = field(default_factory=list)
    error: dict | None = None
    threads: int | None = None


def write_manifest(outdir: Path, manifest: RunManifest, name: str = "manifest.json") -> Path:
    final = Path(outdir) / name
    tmp = final.with_name(final.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(jsonable(manifest), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, final)
    return final


def read_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    validate(doc)
    return doc
