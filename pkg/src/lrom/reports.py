"""CSV/JSON report writers. Floats are written with 17 significant digits so tables round-trip."""

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ArtifactError


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return "" if v is None else str(v)


def write_csv(path, header, rows):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([fmt(v) for v in r])
    except OSError as exc:
        raise ArtifactError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path):
    """Header and rows; numeric cells parsed (int if integral text, else float), others kept as text."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc}") from exc
    return rows[0], [[_parse(c) for c in r] for r in rows[1:]]


def _parse(cell):
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return cell


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(path, obj):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise ArtifactError(f"cannot write {path}: {exc}") from exc
    return path
