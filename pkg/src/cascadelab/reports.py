"""Experiment reports: schema, serialization, persistence.

Reports are plain nested dicts under a versioned schema.  Every float is
serialized with 17 significant digits so a parsed report reproduces the
exact binary values; rerunning an experiment with the same config and
thread count must reproduce every field outside the `audit` section
bit-for-bit, and `fingerprint` hashes exactly that deterministic part.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any

SCHEMA_VERSION = 1


class ReportValidationError(ValueError):
    pass


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    results: dict
    checks: dict[str, bool] = field(default_factory=dict)
    audit: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def deterministic_part(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "experiment": self.experiment,
            "config": self.config,
            "results": self.results,
            "checks": self.checks,
        }

    def to_dict(self) -> dict:
        out = self.deterministic_part()
        out["audit"] = self.audit
        return out


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj: Any, indent: int = 0) -> str:
    """JSON with floats at 17 significant digits (exact round-trip)."""
    pad = " " * indent
    if isinstance(obj, dict):
        items = ",\n".join(f'{pad}  {json.dumps(str(k))}: {dumps(v, indent + 2).lstrip()}'
                           for k, v in obj.items())
        return f"{pad}{{\n{items}\n{pad}}}" if obj else f"{pad}{{}}"
    if isinstance(obj, (list, tuple)):
        items = ",\n".join(dumps(v, indent + 2) for v in obj)
        return f"{pad}[\n{items}\n{pad}]" if len(obj) else f"{pad}[]"
    if isinstance(obj, bool):
        return pad + ("true" if obj else "false")
    if isinstance(obj, float):
        return pad + _fmt_float(obj)
    if isinstance(obj, (int, str)) or obj is None:
        return pad + json.dumps(obj)
    if hasattr(obj, "item"):  # numpy scalar
        return dumps(obj.item(), indent)
    if hasattr(obj, "tolist"):  # numpy array
        return dumps(obj.tolist(), indent)
    raise TypeError(f"cannot serialize {type(obj)!r}")


def report_to_json(report: ExperimentReport) -> str:
    return dumps(report.to_dict())


def fingerprint(report: ExperimentReport) -> str:
    """Hash of the deterministic part of the report."""
    return hashlib.sha256(dumps(report.deterministic_part()).encode()).hexdigest()


def load_report(text: str) -> dict:
    data = json.loads(text, parse_constant=lambda c: {"NaN": math.nan,
                                                      "Infinity": math.inf,
                                                      "-Infinity": -math.inf}[c])
    validate_report(data)
    return data


def validate_report(data: dict) -> None:
    if "schema_version" not in data:
        raise ReportValidationError("report lacks a schema_version")
    if data["schema_version"] != SCHEMA_VERSION:
        raise ReportValidationError(f"unsupported schema version {data['schema_version']}")
    seed = data.get("config", {}).get("seed")
    if not isinstance(seed, int):
        raise ReportValidationError("report config must record an integer seed")


def write_report(report: ExperimentReport, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{report.experiment}_report.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report_to_json(report))
        fh.write("\n")
    return path


def write_table(path: str, header: list[str], rows: list[list]) -> None:
    """RFC 4180 CSV, UTF-8, mandatory header, floats at 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt_float(v) if isinstance(v, float) else v for v in row])
