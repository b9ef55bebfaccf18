"""Deterministic experiment reports: CSV tables plus a JSON summary.

Output bytes are a pure function of (config, seed): floats are written with
repr (shortest round-trip), JSON keys are sorted, and run-environment facts
(wall-clock, thread count, output paths) are never serialized.  Rerunning
the same config and seed therefore rewrites every file bit-identically.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from ._version import __version__
from .errors import ConfigError


def format_cell(value):
    """One CSV cell: ints plain, floats via repr, strings as-is."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, str):
        if "," in value or "\n" in value or '"' in value:
            raise ConfigError(f"CSV cell {value!r} needs quoting; use simpler labels")
        return value
    raise ConfigError(f"cannot format {type(value).__name__} as a CSV cell")


def jsonable(obj):
    """Recursively convert numpy scalars/arrays so json.dumps accepts them."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise ConfigError(f"cannot serialize {type(obj).__name__} into a report")


def dump_json(obj):
    return json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class Table:
    header: tuple
    rows: list


@dataclass
class ExperimentReport:
    """Everything one experiment produced, ready to serialize.

    `wall_clock_seconds` is informational only (printed to stderr by the
    runners); it is deliberately excluded from every file so that outputs
    stay byte-identical across reruns.
    """

    experiment: str
    config: dict
    seed: int
    lineage: dict
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    version: str = __version__
    wall_clock_seconds: float | None = None

    def table_csv(self, name):
        """The named table rendered as CSV text."""
        table = self.tables[name]
        lines = [",".join(table.header)]
        for row in table.rows:
            if len(row) != len(table.header):
                raise ConfigError(
                    f"table {name!r} row has {len(row)} cells, header has {len(table.header)}"
                )
            lines.append(",".join(format_cell(v) for v in row))
        return "\n".join(lines) + "\n"

    def to_payload(self, include_tables):
        payload = {
            "experiment": self.experiment,
            "version": self.version,
            "seed": self.seed,
            "config": self.config,
            "lineage": self.lineage,
            "summary": self.summary,
        }
        if include_tables:
            payload["tables"] = {
                name: {"header": list(t.header), "rows": [list(r) for r in t.rows]}
                for name, t in self.tables.items()
            }
        else:
            payload["tables"] = {name: f"{name}.csv" for name in self.tables}
        return payload

    def write(self, out_dir, fmt="csv"):
        """Write all artifacts under out_dir; returns the written paths."""
        if fmt not in ("csv", "json"):
            raise ConfigError(f"format must be 'csv' or 'json', got {fmt!r}")
        os.makedirs(out_dir, exist_ok=True)
        written = []
        if fmt == "csv":
            for name in sorted(self.tables):
                path = os.path.join(out_dir, f"{name}.csv")
                with open(path, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(self.table_csv(name))
                written.append(path)
            path = os.path.join(out_dir, f"{self.experiment}_summary.json")
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(dump_json(self.to_payload(include_tables=False)))
            written.append(path)
        else:
            path = os.path.join(out_dir, f"{self.experiment}_report.json")
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(dump_json(self.to_payload(include_tables=True)))
            written.append(path)
        return written
