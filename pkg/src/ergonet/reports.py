"""Tabular experiment reports with deterministic CSV/JSON serialization."""
import csv
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np


def format_cell(v):
    """Locale-independent text for one CSV cell (floats at 17 significant digits)."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else str(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


@dataclass
class ExperimentReport:
    """Rows of one experiment plus named verdicts.

    ``verdicts`` maps a check name to ``{"passed": bool, "detail": str}``;
    a report passes when every verdict does. ``plot`` names the x column and
    the y columns written to the plot-data file.
    """

    name: str
    columns: list
    rows: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    plot: tuple = ()

    def add_row(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} cells, report has {len(self.columns)} columns")
        self.rows.append(tuple(values))

    def add_verdict(self, name, passed, detail=""):
        self.verdicts[name] = {"passed": bool(passed), "detail": detail}

    @property
    def passed(self):
        return all(v["passed"] for v in self.verdicts.values())

    def sorted_rows(self):
        return sorted(self.rows, key=lambda r: r[0])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.sorted_rows():
            w.writerow([format_cell(v) for v in row])
        return buf.getvalue()

    def plot_csv(self):
        if not self.plot:
            return None
        xcol, ycols = self.plot[0], list(self.plot[1:])
        idx = [self.columns.index(c) for c in [xcol] + ycols]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x"] + ycols)
        for row in self.sorted_rows():
            w.writerow([format_cell(row[i]) for i in idx])
        return buf.getvalue()

    def to_dict(self):
        return _jsonable({
            "name": self.name,
            "columns": self.columns,
            "rows": [list(r) for r in self.sorted_rows()],
            "verdicts": self.verdicts,
            "passed": self.passed,
            "metadata": self.metadata,
        })

    @classmethod
    def from_dict(cls, d):
        rep = cls(d["name"], list(d["columns"]), [tuple(r) for r in d["rows"]],
                  dict(d["verdicts"]), dict(d.get("metadata", {})))
        return rep

    def write(self, out_dir, prefix="report"):
        """Write ``<prefix>.csv``, ``<prefix>.json`` and, when configured, ``plot.csv``."""
        os.makedirs(out_dir, exist_ok=True)
        paths = {}
        for name, text in ((f"{prefix}.csv", self.to_csv()),
                           (f"{prefix}.json", json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"),
                           ("plot.csv", self.plot_csv())):
            if text is None:
                continue
            path = os.path.join(out_dir, name)
            tmp = path + ".tmp"
            with open(tmp, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
            paths[name] = path
        return paths


def loglog_slope(xs, ys):
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])
