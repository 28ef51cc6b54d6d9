"""Report and CSV writers.  Output is deterministic: no timestamps, sorted keys."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def to_json(data) -> str:
    return json.dumps(_plain(data), sort_keys=True, indent=2) + "\n"


def render_text(title: str, rows) -> str:
    """Human-readable summary: one ``PASS``/``FAIL`` line per row."""
    lines = [f"== {title} =="]
    for r in rows:
        status = "PASS" if r["passed"] else "FAIL"
        note = f"  [warning: {r['warning']}]" if r.get("warning") else ""
        detail = ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(r.items()) if k not in ("name", "passed", "warning"))
        lines.append(f"{status}  {r['name']}{note}" + (f"  ({detail})" if detail else ""))
    ok = all(r["passed"] for r in rows)
    lines.append(f"overall: {'PASS' if ok else 'FAIL'}")
    return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(_plain(v))


def write_report(out_dir: Path, stem: str, title: str, rows, data=None) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"title": title, "results": rows, "passed": all(r["passed"] for r in rows)}
    if data is not None:
        payload["data"] = data
    jpath = out_dir / f"{stem}.json"
    tpath = out_dir / f"{stem}.txt"
    jpath.write_text(to_json(payload))
    tpath.write_text(render_text(title, rows))
    return jpath, tpath


def write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path
