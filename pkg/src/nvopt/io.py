"""Output files: CSV tables, JSON records, pulse files and the MANIFEST.

All writes for one experiment go through a single :class:`OutputWriter`,
which stamps every file with the config hash and amplitude convention.
CSV floats are written with ``repr`` so equal inputs give equal bytes.
"""

from __future__ import annotations

import csv
import io
import json
import platform
import sys
from importlib import metadata
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .liouville import Trajectory
from .pulses import ControlField

RECORD_SCHEMA = 1


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def csv_text(columns: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None) -> str:
    """CSV with ``# key=value`` header lines followed by a column row."""
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def read_csv(path: str | Path) -> tuple[dict, list[str], list[list[str]]]:
    """Inverse of ``csv_text``: (meta, columns, rows as strings)."""
    meta, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta[k] = v
        else:
            body.append(line)
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]


def read_pulse(path: str | Path) -> ControlField:
    return ControlField.from_dict(json.loads(Path(path).read_text()))


def versions() -> dict[str, str]:
    from . import __version__

    out = {"python": platform.python_version(), "nvopt": __version__}
    for pkg in ("numpy", "scipy", "numba", "pydantic"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


class OutputWriter:
    """Writes one experiment directory.

    Layout: ``spec.json`` (echo of the effective config), ``results.csv``,
    optional extra CSVs, ``runs/*.json`` and ``MANIFEST``.
    """

    def __init__(self, out_dir: str | Path, config_hash: str, convention: str):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.config_hash = config_hash
        self.convention = convention
        self.files: list[str] = []

    @property
    def meta(self) -> dict:
        return {"config_hash": self.config_hash, "convention": self.convention}

    def _write(self, rel: str, text: str) -> Path:
        path = self.dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        if rel not in self.files:
            self.files.append(rel)
        return path

    def json(self, rel: str, obj: dict) -> Path:
        data = {"schema_version": RECORD_SCHEMA, **self.meta, **_jsonable(obj)}
        return self._write(rel, json.dumps(data, indent=2, sort_keys=True) + "\n")

    def csv(self, rel: str, columns: Sequence[str], rows: Iterable[Sequence], **extra_meta) -> Path:
        return self._write(rel, csv_text(columns, rows, {**self.meta, **extra_meta}))

    def spec(self, effective_config: dict, command: str, argv: Sequence[str]) -> Path:
        return self.json("spec.json", {"command": command, "argv": list(argv), "config": effective_config})

    def run_record(self, name: str, record: dict) -> Path:
        return self.json(f"runs/{name}.json", record)

    def pulse(self, rel: str, field: ControlField) -> Path:
        return self.json(rel, field.to_dict(self.convention))

    def trajectory(self, rel: str, traj: Trajectory, stride: int = 1) -> Path:
        """Columns t_ns, P_<label> for every recorded level, trace."""
        labels = [lvl.name.lower() for lvl in traj.record]
        cols = ["t_ns"] + [f"P_{lab}" for lab in labels] + ["trace"]
        idx = np.arange(0, len(traj.times), stride)
        if idx[-1] != len(traj.times) - 1:
            idx = np.append(idx, len(traj.times) - 1)
        pops, tr = traj.populations, traj.traces
        rows = ([traj.times[i], *pops[i], tr[i]] for i in idx)
        return self.csv(rel, cols, rows, stride=stride)

    def manifest(self, seeds: Sequence[int] | None = None, extra: dict | None = None) -> Path:
        lines = [f"config_hash: {self.config_hash}", f"convention: {self.convention}"]
        lines += [f"version.{k}: {v}" for k, v in versions().items()]
        lines.append(f"platform: {sys.platform}")
        if seeds is not None:
            lines.append("seeds: " + " ".join(str(s) for s in seeds))
        for k, v in (extra or {}).items():
            lines.append(f"{k}: {v}")
        lines.append("files:")
        lines += [f"  {f}" for f in sorted(self.files)]
        return self._write("MANIFEST", "\n".join(lines) + "\n")
