"""Result records and their CSV / JSON serialisation."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

CSV_COLUMNS = ["quantity", "k", "d", "family", "p", "n", "lambda", "window_lo", "window_hi",
               "budget", "value", "stderr", "n_samples", "censor_rate", "seed", "warning"]


@dataclass
class EstimateRecord:
    quantity: str
    params: dict
    value: float
    stderr: float
    n_samples: int
    censor_rate: float = 0.0
    seed: int = 0
    warning: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stderr < 0 or math.isnan(self.stderr):
            raise ValueError(f"stderr must be >= 0, got {self.stderr}")
        if not 0.0 <= self.censor_rate <= 1.0:
            raise ValueError(f"censor_rate outside [0, 1]: {self.censor_rate}")

    def row(self):
        pr = self.params
        out = {"quantity": self.quantity, "value": self.value, "stderr": self.stderr,
               "n_samples": self.n_samples, "censor_rate": self.censor_rate, "seed": self.seed,
               "warning": self.warning}
        for col in ("k", "d", "family", "p", "n", "lambda", "window_lo", "window_hi", "budget"):
            out[col] = pr.get(col, "")
        return out

    def to_dict(self):
        out = self.row()
        out["params"] = dict(self.params)
        if self.extra:
            out["extra"] = self.extra
        return out

    def within(self, target, nsigma=3.0):
        return abs(self.value - target) <= nsigma * self.stderr


@dataclass
class SeriesRecord:
    quantity: str
    index: list
    records: list
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.index, self.index[1:])):
            raise ValueError("series indices must be strictly increasing")
        if len(self.index) != len(self.records):
            raise ValueError("one record per index required")

    def values(self):
        return [r.value for r in self.records]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def to_csv(records, fh=None):
    """Write records as long-format CSV; returns the text when ``fh`` is None."""
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        row = rec.row()
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    if fh is None:
        return buf.getvalue()


def to_json(records):
    return json.dumps([r.to_dict() for r in records], indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if hasattr(o, "item"):
        return o.item()
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    return str(o)


def flatten(items):
    out = []
    for it in items:
        if isinstance(it, SeriesRecord):
            out.extend(it.records)
        elif isinstance(it, (list, tuple)):
            out.extend(flatten(it))
        else:
            out.append(it)
    return out
