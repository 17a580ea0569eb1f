"""Exponential and power-law finite-size fits in log space."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

EXPONENTIAL = "exponential"
POWERLAW = "powerlaw"
EXPRESSIONS = {EXPONENTIAL: "a exp(-b L)", POWERLAW: "a / L^b"}


class FitError(ValueError):
    pass


@dataclass
class ScalingSeries:
    label: str
    L: np.ndarray
    values: np.ndarray

    def __init__(self, label: str, L: Sequence[float], values: Sequence[float]):
        self.label = label
        self.L = np.asarray(L, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.L.shape != self.values.shape:
            raise ValueError("L and values must have the same length")
        if np.any(np.diff(self.L) <= 0):
            raise ValueError("L must be strictly increasing")

    @classmethod
    def from_points(cls, label: str, points: Sequence[tuple[float, float]]):
        L, v = zip(*points) if points else ((), ())
        return cls(label, L, v)


@dataclass
class FitResult:
    model: str
    a: float
    b: float
    points_used: int
    rms_log_residual: float
    b_stderr: float = float("nan")
    label: str = ""
    L_used: list = field(default_factory=list)

    @property
    def expression(self) -> str:
        return EXPRESSIONS[self.model]

    def predict(self, L) -> np.ndarray:
        L = np.asarray(L, dtype=float)
        if self.model == EXPONENTIAL:
            return self.a * np.exp(-self.b * L)
        return self.a / L ** self.b


def _tail(series: ScalingSeries, last_k: int) -> tuple[np.ndarray, np.ndarray]:
    if last_k < 2:
        raise FitError("a fit needs at least two points")
    if len(series.L) < last_k:
        raise FitError(f"{series.label or 'series'}: {len(series.L)} points, need {last_k}")
    L, v = series.L[-last_k:], series.values[-last_k:]
    if np.any(v == 0) or not np.all(np.isfinite(v)):
        raise FitError(f"{series.label or 'series'}: zero or non-finite value in fit window")
    if not (np.all(v > 0) or np.all(v < 0)):
        raise FitError(f"{series.label or 'series'}: values change sign in fit window")
    return L, np.abs(v)


def _line_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """OLS ``y = c0 + c1 x``; returns ``(c0, c1, rms residual, stderr of c1)``."""
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    rms = float(np.sqrt(np.mean(resid ** 2)))
    n = len(x)
    if n > 2:
        s2 = float(resid @ resid) / (n - 2)
        se = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    else:
        se = float("nan")
    return float(coef[0]), float(coef[1]), rms, se


def fit_exponential(series: ScalingSeries, last_k: int = 4) -> FitResult:
    """``|value| ~ a exp(-b L)`` over the last ``last_k`` points."""
    L, v = _tail(series, last_k)
    c0, c1, rms, se = _line_fit(L, np.log(v))
    return FitResult(EXPONENTIAL, math.exp(c0), -c1, last_k, rms, se, series.label, L.tolist())


def fit_powerlaw(series: ScalingSeries, last_k: int = 4) -> FitResult:
    """``|value| ~ a / L^b`` over the last ``last_k`` points."""
    L, v = _tail(series, last_k)
    c0, c1, rms, se = _line_fit(np.log(L), np.log(v))
    return FitResult(POWERLAW, math.exp(c0), -c1, last_k, rms, se, series.label, L.tolist())


FITTERS = {EXPONENTIAL: fit_exponential, POWERLAW: fit_powerlaw}

# Fitted components per table, in display order. F111_L is listed but never
# fitted: its decay is faster than exponential.
TABLE_COMPONENTS = [
    ("F11_L", EXPONENTIAL), ("F11_T", POWERLAW),
    ("F111_L", None), ("F111_T", POWERLAW),
    ("F1111_L", EXPONENTIAL), ("F1111_T", POWERLAW),
    ("C", EXPONENTIAL), ("P", POWERLAW),
]


@dataclass
class TableRow:
    component: str
    model: str | None
    fit: FitResult | None = None
    note: str = ""


def fit_table(columns: dict[str, ScalingSeries], components=None, last_k: int = 4) -> list[TableRow]:
    rows = []
    for name, model in (components or TABLE_COMPONENTS):
        if model is None:
            rows.append(TableRow(name, None, note="not fitted"))
            continue
        series = columns.get(name)
        if series is None:
            rows.append(TableRow(name, model, note="missing"))
            continue
        try:
            rows.append(TableRow(name, model, FITTERS[model](series, last_k)))
        except FitError as exc:
            rows.append(TableRow(name, model, note=str(exc)))
    return rows


def table_csv(rows: list[TableRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["component", "model", "expression", "a", "b", "b_stderr", "points_used",
                "rms_log_residual", "note"])
    for r in rows:
        if r.fit is None:
            w.writerow([r.component, r.model or "", EXPRESSIONS.get(r.model, ""), "", "", "", "", "", r.note])
        else:
            f = r.fit
            w.writerow([r.component, f.model, f.expression, f"{f.a:.17g}", f"{f.b:.17g}",
                        f"{f.b_stderr:.17g}", f.points_used, f"{f.rms_log_residual:.17g}", r.note])
    return buf.getvalue()


def table_text(rows: list[TableRow], title: str = "") -> str:
    lines = [title] if title else []
    lines.append(f"{'Component':<12} {'Model Expression':<18} {'a':>10} {'b':>10}")
    lines.append("-" * 53)
    for r in rows:
        expr = EXPRESSIONS.get(r.model, EXPRESSIONS[EXPONENTIAL] if r.component.endswith("_L") else "")
        if r.fit is None:
            lines.append(f"{r.component:<12} {expr:<18} {'---':>10} {'---':>10}")
        else:
            lines.append(f"{r.component:<12} {expr:<18} {r.fit.a:>10.4f} {r.fit.b:>10.4f}")
    return "\n".join(lines) + "\n"
