"""Pearson correlation and labelled pairwise correlation matrices."""

from __future__ import annotations

import io
import math
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, NotAligned, TooShort, ZeroVariance
from .series import DateIndexedSeries, align_common_dates, as_values, format_float


def _pearson_values(x: np.ndarray, y: np.ndarray) -> float:
    if len(x) != len(y):
        raise NotAligned(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise TooShort(f"pearson needs at least 3 paired values, got {len(x)}")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ZeroVariance("pearson is undefined for a constant series")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(np.dot(dx, dx)), float(np.dot(dy, dy))
    denom = math.sqrt(sxx * syy)
    if not math.isfinite(denom) or denom == 0:
        denom = math.sqrt(sxx) * math.sqrt(syy)
    r = float(np.dot(dx, dy)) / denom
    return min(1.0, max(-1.0, r))


def pearson(x: DateIndexedSeries | Sequence[float], y: DateIndexedSeries | Sequence[float]) -> float:
    """Pearson's r between two series on identical dates.

    Deviations from the mean are formed first and then multiplied, which keeps
    the result accurate when the values are large relative to their spread.
    Plain sequences are accepted and paired by position.
    """
    if isinstance(x, DateIndexedSeries) and isinstance(y, DateIndexedSeries):
        if not np.array_equal(x.dates, y.dates):
            raise NotAligned(f"{x.label} and {y.label} are not on the same dates; align them first")
    return _pearson_values(as_values(x), as_values(y))


@dataclass
class CorrelationMatrix:
    """Symmetric matrix of pairwise r; undefined cells are NaN.

    ``windows[(i, j)]`` holds the (first, last, n) common window used for the
    i < j cell and ``errors[(i, j)]`` the reason a cell is missing.
    """

    labels: list[str]
    values: np.ndarray
    windows: dict[tuple[int, int], tuple[str, str, int]] = field(default_factory=dict)
    errors: dict[tuple[int, int], str] = field(default_factory=dict)

    def __getitem__(self, pair: tuple[str, str]) -> float | None:
        i, j = self.labels.index(pair[0]), self.labels.index(pair[1])
        v = self.values[i, j]
        return None if np.isnan(v) else float(v)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("," + ",".join(self.labels) + "\n")
        for label, row in zip(self.labels, self.values):
            cells = ["" if np.isnan(v) else format_float(v) for v in row]
            buf.write(label + "," + ",".join(cells) + "\n")
        return buf.getvalue()

    def to_json_obj(self) -> dict:
        windows = []
        for (i, j), (start, end, n) in sorted(self.windows.items()):
            windows.append({"row": self.labels[i], "col": self.labels[j], "start": start, "end": end, "n": n})
        return {
            "labels": list(self.labels),
            "values": [[None if np.isnan(v) else float(v) for v in row] for row in self.values],
            "windows": windows,
            "errors": [
                {"row": self.labels[i], "col": self.labels[j], "error": msg}
                for (i, j), msg in sorted(self.errors.items())
            ],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "CorrelationMatrix":
        labels = obj["labels"]
        idx = {l: k for k, l in enumerate(labels)}
        values = np.array([[np.nan if v is None else v for v in row] for row in obj["values"]], dtype=float)
        windows = {(idx[w["row"]], idx[w["col"]]): (w["start"], w["end"], w["n"]) for w in obj["windows"]}
        errors = {(idx[e["row"]], idx[e["col"]]): e["error"] for e in obj.get("errors", [])}
        return cls(labels, values, windows, errors)

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2)


def _cell(a: DateIndexedSeries, b: DateIndexedSeries):
    try:
        xa, xb = align_common_dates(a, b)
        r = pearson(xa, xb)
        return r, (str(xa.dates[0]), str(xa.dates[-1]), len(xa)), None
    except DataError as exc:
        return float("nan"), None, f"{type(exc).__name__}: {exc}"


def correlation_matrix(series: Sequence[DateIndexedSeries], threads: int = 1) -> CorrelationMatrix:
    """Pairwise-complete correlation matrix.

    Each cell is computed over the dates its two series share; a cell whose
    correlation is undefined is left NaN with the reason recorded, rather than
    failing the whole matrix.
    """
    if len(series) < 2:
        raise TooShort("a correlation matrix needs at least 2 series")
    labels = [s.label for s in series]
    if len(set(labels)) != len(labels):
        raise DataError(f"duplicate series labels: {labels}")
    k = len(series)
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda ij: _cell(series[ij[0]], series[ij[1]]), pairs))
    else:
        results = [_cell(series[i], series[j]) for i, j in pairs]
    values = np.eye(k)
    windows, errors = {}, {}
    for (i, j), (r, window, err) in zip(pairs, results):
        values[i, j] = values[j, i] = r
        if window is not None:
            windows[(i, j)] = window
        if err is not None:
            errors[(i, j)] = err
    return CorrelationMatrix(labels, values, windows, errors)
