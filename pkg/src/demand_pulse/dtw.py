"""Dynamic time warping with warping-path recovery.

Indices in :class:`WarpingPath` are 1-based: the first step is always (1, 1)
and the last (n, m).
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, EmptyInput, InvariantViolation
from .series import DateIndexedSeries, as_values, format_float, normalize

COST_MODES = ("absolute", "squared")

GROUPS = (
    "daily_epidemic",
    "cumulative_epidemic",
    "daily_vaccination",
    "cumulative_vaccination",
)


@dataclass(frozen=True)
class CostMatrix:
    values: np.ndarray
    mode: str = "absolute"

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class WarpingPath:
    steps: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.steps)

    def validate(self, n: int, m: int) -> None:
        """Raise :class:`InvariantViolation` unless this is a legal n x m path."""
        s = self.steps
        if not s or s[0] != (1, 1) or s[-1] != (n, m):
            raise InvariantViolation(f"path must run from (1, 1) to ({n}, {m}); got {s[:1]}..{s[-1:]}")
        for (i, j), (i2, j2) in zip(s, s[1:]):
            di, dj = i2 - i, j2 - j
            if di not in (0, 1) or dj not in (0, 1) or di + dj == 0:
                raise InvariantViolation(f"illegal step ({i}, {j}) -> ({i2}, {j2})")
        if not max(n, m) <= len(s) <= n + m - 1:
            raise InvariantViolation(f"path length {len(s)} outside [{max(n, m)}, {n + m - 1}]")

    def cost(self, cost: CostMatrix) -> float:
        return math.fsum(cost.values[i - 1, j - 1] for i, j in self.steps)


@dataclass(frozen=True)
class DtwResult:
    distance: float
    path: WarpingPath | None
    normalization_mode: str = "none"

    def to_json_obj(self) -> dict:
        return {
            "distance": self.distance,
            "normalization_mode": self.normalization_mode,
            "path": None if self.path is None else [list(p) for p in self.path.steps],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DtwResult":
        path = None if obj["path"] is None else WarpingPath(tuple(tuple(p) for p in obj["path"]))
        return cls(obj["distance"], path, obj["normalization_mode"])


def pointwise_cost(q, c, mode: str = "absolute") -> CostMatrix:
    """n x m matrix of |q_i - c_j| (or the squared difference)."""
    qv, cv = as_values(q), as_values(c)
    if len(qv) == 0 or len(cv) == 0:
        raise EmptyInput("DTW needs two non-empty series")
    diff = qv[:, None] - cv[None, :]
    if mode == "absolute":
        values = np.abs(diff)
    elif mode == "squared":
        values = diff * diff
    else:
        raise ValueError(f"unknown cost mode {mode!r}; expected one of {COST_MODES}")
    values.flags.writeable = False
    return CostMatrix(values, mode)


def _accumulate(cost: np.ndarray) -> list[list[float]]:
    n, m = cost.shape
    inf = math.inf
    rows = cost.tolist()
    acc = [[inf] * m for _ in range(n)]
    prev = None
    for i in range(n):
        row = rows[i]
        cur = acc[i]
        for j in range(m):
            if i == 0 and j == 0:
                cur[0] = row[0]
                continue
            best = inf
            if i > 0 and j > 0:
                best = prev[j - 1]
            if i > 0 and prev[j] < best:
                best = prev[j]
            if j > 0 and cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = row[j] + best
        prev = cur
    return acc


def dtw_distance(cost: CostMatrix, normalization_mode: str = "none") -> DtwResult:
    """Minimum cumulative cost over all warping paths, with the path itself.

    Ties between predecessors go to the diagonal, then to (i-1, j), then to
    (i, j-1), both when filling the table and when backtracking.
    """
    n, m = cost.shape
    if n == 0 or m == 0:
        raise EmptyInput("empty cost matrix")
    acc = _accumulate(cost.values)
    i, j = n - 1, m - 1
    steps = [(n, m)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag, up, left = acc[i - 1][j - 1], acc[i - 1][j], acc[i][j - 1]
            if diag <= up and diag <= left:
                i, j = i - 1, j - 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        steps.append((i + 1, j + 1))
    steps.reverse()
    return DtwResult(acc[n - 1][m - 1], WarpingPath(tuple(steps)), normalization_mode)


def dtw_distance_only(cost: CostMatrix | None = None, q=None, c=None, mode: str = "absolute") -> float:
    """Distance without the path, in O(min(n, m)) memory.

    Pass either a cost matrix or the two series; with series the cost matrix is
    never materialised. Produces the same value as :func:`dtw_distance`.
    """
    if cost is not None:
        getcost = lambda i, j: cost.values[i, j]  # noqa: E731
        n, m = cost.shape
        transpose = False
    else:
        qv, cv = as_values(q), as_values(c)
        transpose = len(cv) > len(qv)
        if transpose:
            qv, cv = cv, qv
        n, m = len(qv), len(cv)
        sq = mode == "squared"
        getcost = lambda i, j: (qv[i] - cv[j]) ** 2 if sq else abs(qv[i] - cv[j])  # noqa: E731
    if n == 0 or m == 0:
        raise EmptyInput("DTW needs two non-empty series")
    inf = math.inf
    prev = [inf] * m
    for i in range(n):
        cur = [inf] * m
        for j in range(m):
            if i == 0 and j == 0:
                cur[0] = float(getcost(0, 0))
                continue
            # transposing swaps the up/left roles; min() is symmetric so the value is unchanged
            best = prev[j - 1] if (i > 0 and j > 0) else inf
            if i > 0 and prev[j] < best:
                best = prev[j]
            if j > 0 and cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = float(getcost(i, j)) + best
        prev = cur
    return prev[m - 1]


def dtw(q, c, normalization: str = "none", cost_mode: str = "absolute") -> DtwResult:
    """Normalize both inputs the same way, then run :func:`dtw_distance`."""
    if normalization != "none":
        q = normalize(q if isinstance(q, DateIndexedSeries) else DateIndexedSeries.from_values("q", "2000-01-01", q), normalization)
        c = normalize(c if isinstance(c, DateIndexedSeries) else DateIndexedSeries.from_values("c", "2000-01-01", c), normalization)
    return dtw_distance(pointwise_cost(q, c, cost_mode), normalization)


@dataclass
class DtwRow:
    label: str
    group: str | None
    result: DtwResult | None
    error: str | None = None

    @property
    def distance(self) -> float | None:
        return None if self.result is None else self.result.distance


@dataclass
class DtwReport:
    target: str
    normalization: str
    cost_mode: str
    rows: list[DtwRow] = field(default_factory=list)

    @property
    def group_means(self) -> dict[str, float]:
        buckets: dict[str, list[float]] = {}
        for row in self.rows:
            if row.group is not None and row.distance is not None:
                buckets.setdefault(row.group, []).append(row.distance)
        order = {g: k for k, g in enumerate(GROUPS)}
        return {
            g: math.fsum(v) / len(v)
            for g, v in sorted(buckets.items(), key=lambda kv: (order.get(kv[0], len(order)), kv[0]))
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("label,distance,group\n")
        for row in self.rows:
            d = "" if row.distance is None else format_float(row.distance)
            buf.write(f"{row.label},{d},{row.group or ''}\n")
        for g, v in self.group_means.items():
            buf.write(f"mean:{g},{format_float(v)},{g}\n")
        return buf.getvalue()

    def to_json_obj(self, include_paths: bool = True) -> dict:
        return {
            "target": self.target,
            "normalization_mode": self.normalization,
            "cost_mode": self.cost_mode,
            "rows": [
                {
                    "label": r.label,
                    "group": r.group,
                    "distance": r.distance,
                    "error": r.error,
                    "result": None if r.result is None or not include_paths else r.result.to_json_obj(),
                }
                for r in self.rows
            ],
            "group_means": self.group_means,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DtwReport":
        rows = []
        for r in obj["rows"]:
            if r["result"] is not None:
                result = DtwResult.from_json_obj(r["result"])
            elif r["distance"] is not None:
                result = DtwResult(r["distance"], None, obj["normalization_mode"])
            else:
                result = None
            rows.append(DtwRow(r["label"], r["group"], result, r["error"]))
        return cls(obj["target"], obj["normalization_mode"], obj["cost_mode"], rows)


def dtw_report(
    pairs: Sequence[tuple],
    target: DateIndexedSeries,
    normalization: str = "zscore",
    cost_mode: str = "absolute",
    threads: int = 1,
) -> DtwReport:
    """DTW distance from every ``(label, series[, group])`` entry to ``target``.

    A normalization failure (e.g. a constant series under zscore) is recorded
    on that row; the rest of the report is unaffected.
    """
    try:
        norm_target = normalize(target, normalization)
        target_error = None
    except DataError as exc:
        norm_target, target_error = None, f"{type(exc).__name__}: {exc}"

    def one(entry) -> DtwRow:
        label, s = entry[0], entry[1]
        group = entry[2] if len(entry) > 2 else None
        if target_error is not None:
            return DtwRow(label, group, None, f"target: {target_error}")
        try:
            ns = normalize(s, normalization)
        except DataError as exc:
            return DtwRow(label, group, None, f"{type(exc).__name__}: {exc}")
        result = dtw_distance(pointwise_cost(ns, norm_target, cost_mode), normalization)
        result.path.validate(len(ns), len(norm_target))
        return DtwRow(label, group, result)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(one, pairs))
    else:
        rows = [one(p) for p in pairs]
    return DtwReport(target.label, normalization, cost_mode, rows)
