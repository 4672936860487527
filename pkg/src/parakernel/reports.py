"""Report containers and deterministic, atomic writers."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


def _plain(obj):
    """Convert numpy scalars/arrays and tuples to JSON-friendly values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=1)


def config_hash(config) -> str:
    text = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def atomic_write(path, data) -> Path:
    """Write text or bytes to ``path`` through a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _parse_cell(text):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def worker_count(default=1) -> int:
    """Worker cap from ``PARAKERNEL_THREADS`` (at least 1)."""
    try:
        return max(int(os.environ.get("PARAKERNEL_THREADS", default)), 1)
    except ValueError:
        return default


def ordered_map(fn, items, workers=None):
    """``[fn(x) for x in items]``, optionally in worker processes; order is preserved."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


@dataclass
class SweepReport:
    """Tabular result of a certification or sweep, plus verdict and provenance.

    ``rows`` share the keys in ``columns``; ``summary`` holds fitted
    constants and per-direction diagnostics; ``provenance`` holds the config,
    seed, path and grid descriptions and the error-bar method.
    """

    kind: str
    columns: list
    rows: list
    verdict: str
    summary: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def column(self, name):
        return np.array([r[name] for r in self.rows])

    def to_csv(self) -> str:
        return rows_to_csv(self.columns, self.rows)

    def to_json(self) -> str:
        prov = dict(self.provenance)
        prov.setdefault("version", __version__)
        prov.setdefault("config_hash", config_hash(prov.get("config", {})))
        return canonical_json({"kind": self.kind, "verdict": self.verdict,
                               "summary": self.summary, "flags": self.flags,
                               "provenance": prov, "columns": self.columns}) + "\n"

    @classmethod
    def read(cls, stem) -> "SweepReport":
        """Load a report written by :meth:`write` (JSON metadata plus CSV rows)."""
        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        with open(stem.with_suffix(".csv"), newline="") as fh:
            rows = [{k: _parse_cell(v) for k, v in r.items()} for r in csv.DictReader(fh)]
        return cls(meta["kind"], meta["columns"], rows, meta["verdict"], meta.get("summary", {}),
                   meta.get("provenance", {}), meta.get("flags", []))

    def write(self, stem) -> tuple:
        stem = Path(stem)
        c = atomic_write(stem.with_suffix(".csv"), self.to_csv())
        j = atomic_write(stem.with_suffix(".json"), self.to_json())
        return c, j
