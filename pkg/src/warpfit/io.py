"""File formats: long-form sample CSV in, JSON reports out."""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .empirical import from_samples
from .exceptions import WarpfitError

SAMPLE_COLUMNS = ("sample_id", "value")


class DataError(WarpfitError):
    """Malformed input file."""


def parse_samples(text, source="<input>"):
    """Parse ``sample_id,value`` rows into labelled samples.

    Samples keep the order in which their ids first appear.

    Returns
    -------
    ids : list of str
    samples : list of ndarray
    """
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"{source}: empty file") from None
    header = [h.strip().lstrip("﻿") for h in header]
    if tuple(header) != SAMPLE_COLUMNS:
        raise DataError(f"{source}: header must be 'sample_id,value', got {','.join(header)!r}")
    groups = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise DataError(f"{source}:{lineno}: expected 2 fields, got {len(row)}")
        sid, raw = row[0].strip(), row[1].strip()
        if not sid:
            raise DataError(f"{source}:{lineno}: empty sample_id")
        try:
            v = float(raw)
        except ValueError:
            raise DataError(f"{source}:{lineno}: not a number: {raw!r}") from None
        if not math.isfinite(v):
            raise DataError(f"{source}:{lineno}: non-finite value {raw!r}")
        groups.setdefault(sid, []).append(v)
    if not groups:
        raise DataError(f"{source}: no data rows")
    ids = list(groups)
    return ids, [np.asarray(groups[i]) for i in ids]


def read_samples(path):
    """Read a long-form CSV file into ``(ids, distributions)``."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None
    except UnicodeDecodeError:
        raise DataError(f"{path}: not valid UTF-8") from None
    ids, arrays = parse_samples(text, source=str(path))
    return ids, [from_samples(a) for a in arrays]


def write_samples(path, ids, samples):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_COLUMNS)
        for sid, xs in zip(ids, samples):
            for v in np.asarray(xs, dtype=float).ravel():
                w.writerow([sid, repr(float(v))])


def _plain(obj):
    # numpy scalars and arrays to JSON-native types
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps_json(obj):
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=True) + "\n"


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
