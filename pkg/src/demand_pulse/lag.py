"""Time-lagged cross-correlation (TLCC) and lead/lag verdicts.

At offset ``l`` the pairs (x[t - l], y[t]) are correlated over the part of
the window where both exist. A positive best offset therefore means ``x``
leads ``y`` by that many days.
"""

from __future__ import annotations

import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .correlation import _pearson_values
from .errors import DataError, NotAligned, TooShort
from .series import DateIndexedSeries, as_values, format_float

CONVENTION = "positive offset => x leads y"
DEFAULT_MAX_OFFSET = 30


def _paired(x, y) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(x, DateIndexedSeries) and isinstance(y, DateIndexedSeries):
        if not np.array_equal(x.dates, y.dates):
            raise NotAligned(f"{x.label} and {y.label} are not on the same dates; align them first")
        if not x.is_contiguous():
            raise NotAligned(f"{x.label}: TLCC needs a contiguous daily window")
    xv, yv = as_values(x), as_values(y)
    if len(xv) != len(yv):
        raise NotAligned(f"length mismatch: {len(xv)} vs {len(yv)}")
    return xv, yv


def _at(xv: np.ndarray, yv: np.ndarray, l: int) -> float:
    n = len(xv)
    if n - abs(l) < 3:
        raise TooShort(f"offset {l} leaves {max(n - abs(l), 0)} overlapping days; need at least 3")
    if l >= 0:
        return _pearson_values(xv[: n - l], yv[l:])
    return _pearson_values(xv[-l:], yv[: n + l])


def tlcc_at(x, y, l: int) -> float:
    """Correlation of (x[t - l], y[t]) over the truncated overlap."""
    xv, yv = _paired(x, y)
    return _at(xv, yv, int(l))


@dataclass(frozen=True)
class TlccProfile:
    offsets: tuple[int, ...]
    r_values: tuple[float | None, ...]
    best_offset: int
    best_r: float
    convention: str = CONVENTION
    x_label: str = "x"
    y_label: str = "y"

    def r_at(self, offset: int) -> float | None:
        return self.r_values[self.offsets.index(offset)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("offset,r\n")
        for o, r in zip(self.offsets, self.r_values):
            buf.write(f"{o},{'' if r is None else format_float(r)}\n")
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "x": self.x_label,
            "y": self.y_label,
            "best_offset": self.best_offset,
            "best_r": self.best_r,
            "convention": self.convention,
            "verdict": interpret(self, self.x_label, self.y_label),
        }

    def to_json(self) -> str:
        return json.dumps(self.summary())


def _best(offsets, r_values) -> tuple[int, float]:
    candidates = [(r, o) for o, r in zip(offsets, r_values) if r is not None]
    if not candidates:
        raise DataError("no offset produced a defined correlation")
    best_r = max(r for r, _ in candidates)
    # ties: smallest |offset|, then the negative one
    best_o = min((o for r, o in candidates if r == best_r), key=lambda o: (abs(o), o))
    return best_o, best_r


def tlcc_sweep(x, y, max_offset: int = DEFAULT_MAX_OFFSET, threads: int = 1) -> TlccProfile:
    """Correlation at every offset in [-max_offset, max_offset].

    Offsets whose overlap is degenerate (constant) are left as None and take
    no part in choosing the best offset.
    """
    xv, yv = _paired(x, y)
    L = int(max_offset)
    if L < 0:
        raise ValueError("max_offset must be non-negative")
    if len(xv) <= L + 3:
        raise TooShort(f"series of length {len(xv)} is too short for offsets up to {L}")
    offsets = tuple(range(-L, L + 1))

    def one(l):
        try:
            return _at(xv, yv, l)
        except DataError:
            return None

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            r_values = tuple(pool.map(one, offsets))
    else:
        r_values = tuple(one(l) for l in offsets)
    best_o, best_r = _best(offsets, r_values)
    xl = x.label if isinstance(x, DateIndexedSeries) else "x"
    yl = y.label if isinstance(y, DateIndexedSeries) else "y"
    return TlccProfile(offsets, r_values, best_o, best_r, CONVENTION, xl, yl)


def interpret(profile: TlccProfile, x_label: str, y_label: str) -> str:
    d = profile.best_offset
    if d == 0:
        return "synchronous"
    leader, follower = (x_label, y_label) if d > 0 else (y_label, x_label)
    days = abs(d)
    return f"{leader} leads {follower} by {days} day{'s' if days != 1 else ''}"
