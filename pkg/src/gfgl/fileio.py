"""File formats: CSV series, key-value simulation configs, JSON reports."""

import csv
import json
import math
from dataclasses import fields

import numpy as np

from .core import GroundTruth, TimeSeries
from .simulate import SimSpec

FIT_FORMAT = "gfgl-fit/1"
TRUTH_FORMAT = "gfgl-truth/1"


class InputFormatError(ValueError):
    pass


def read_series_csv(path):
    """Read a T x p CSV (rows are time points).

    A first row that does not parse as numbers is taken as a header.
    Errors name the 1-based line and column of the offending cell.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1)
                if r and any(c.strip() for c in r)]
    if rows:
        try:
            [float(c) for c in rows[0][1]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise InputFormatError(f"{path}: no data rows")
    width = len(rows[0][1])
    data = np.empty((len(rows), width))
    for t, (line, row) in enumerate(rows):
        if len(row) != width:
            raise InputFormatError(f"{path}: line {line} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row):
            try:
                data[t, j] = float(cell)
            except ValueError:
                raise InputFormatError(
                    f"{path}: line {line}, column {j + 1}: cannot parse {cell!r} as a number"
                ) from None
    try:
        return TimeSeries(data)
    except ValueError as exc:
        raise InputFormatError(f"{path}: {exc}") from None


def write_series_csv(path, series, header=True):
    data = series.data if isinstance(series, TimeSeries) else np.asarray(series)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([f"x{j + 1}" for j in range(data.shape[1])])
        for row in data:
            w.writerow([repr(float(v)) for v in row])


def _clean(obj):
    """JSON-safe copy: arrays to lists, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def write_json(path, obj):
    """Floats are written with repr, i.e. the shortest string that
    round-trips the double exactly (up to 17 significant digits)."""
    text = json.dumps(_clean(obj), indent=2)
    if path is None or path == "-":
        print(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}: invalid JSON ({exc})") from None


def _parse_value(name, kind, text):
    text = text.strip()
    if text.lower() in ("none", "null", ""):
        return None
    if name in ("true_changepoints",):
        return tuple(int(v) for v in text.replace(",", " ").split())
    if name in ("edge_weight_range",):
        return tuple(float(v) for v in text.replace(",", " ").split())
    if "bool" in kind:
        if text.lower() in ("true", "yes", "1"):
            return True
        if text.lower() in ("false", "no", "0"):
            return False
        raise ValueError(f"{name}: expected true/false, got {text!r}")
    if "int" in kind and "float" not in kind:
        return int(text)
    if "float" in kind and "int" not in kind:
        return float(text)
    return text


def read_simspec_config(path):
    """Parse ``key = value`` lines into a dict of SimSpec fields.

    ``#`` starts a comment. Lists (``true_changepoints``,
    ``edge_weight_range``) are comma or space separated.
    """
    kinds = {f.name: str(f.type) for f in fields(SimSpec)}
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputFormatError(f"{path}: line {lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in kinds:
                raise InputFormatError(f"{path}: line {lineno}: unknown key {key!r}")
            try:
                values[key] = _parse_value(key, kinds[key], val)
            except ValueError as exc:
                raise InputFormatError(f"{path}: line {lineno}: {exc}") from None
    return values


def truth_to_dict(truth, spec=None):
    d = {
        "format": TRUTH_FORMAT,
        "T": truth.T,
        "p": truth.p,
        "changepoints": list(truth.true_changepoints),
        "block_covariances": truth.block_covariances,
        "block_precisions": truth.block_precisions,
        "edge_sets": [sorted([i, j] for i, j in e if i < j) for e in truth.edge_sets],
        "eta_min": truth.eta_min,
        "phi_max": truth.phi_max,
    }
    if spec is not None:
        d["spec"] = spec.to_dict()
    return d


def truth_from_dict(d):
    if d.get("format") != TRUTH_FORMAT:
        raise InputFormatError(f"not a ground-truth file (format={d.get('format')!r})")
    return GroundTruth(np.array(d["block_covariances"], dtype=float),
                       np.array(d["block_precisions"], dtype=float),
                       tuple(d["changepoints"]), int(d["T"]))

