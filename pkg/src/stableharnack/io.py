"""Reproducible artifact files: JSON documents and CSV tables with a config header."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__

__all__ = ["provenance", "clean", "dumps", "write_json", "write_csv", "read_csv", "write_long_csv"]


def provenance(config: dict) -> dict:
    return {"tool": "stableharnack", "version": __version__, "config": clean(config)}


def clean(obj):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else ("nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf"))
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return clean(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(path: str | Path, payload: dict, config: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"meta": provenance(config), **payload}
    path.write_text(dumps(doc))
    return path


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return json.dumps(clean(v))
    return str(v)


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence], config: dict) -> Path:
    """CSV with two ``#`` header lines naming the tool version and the full config."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(f"# stableharnack {__version__}\n")
    buf.write("# config " + json.dumps(clean(config), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    path.write_text(buf.getvalue())
    return path


def read_csv(path: str | Path) -> tuple[dict, list[dict]]:
    """``(config, rows)``; cell values are returned as strings."""
    lines = Path(path).read_text().splitlines()
    config = {}
    body = []
    for ln in lines:
        if ln.startswith("# config "):
            config = json.loads(ln[len("# config "):])
        elif not ln.startswith("#"):
            body.append(ln)
    return config, list(csv.DictReader(body))


def write_long_csv(path: str | Path, records: Iterable[tuple], config: dict) -> Path:
    """Long-format plot table ``series, x, value, ci_low, ci_high``."""
    return write_csv(path, ["series", "x", "value", "ci_low", "ci_high"], records, config)
