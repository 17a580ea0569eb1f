"""Static SVG figures of error-term scaling with system size."""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .fitting import FitResult, ScalingSeries, TableRow  # noqa: E402

log = logging.getLogger(__name__)

# Fixed salt and no date keep SVG output byte-stable between runs.
SVG_RC = {"svg.hashsalt": "ethscale", "svg.fonttype": "path"}
SVG_METADATA = {"Date": None}

QUANTITIES = ["m1", "m2", "F11", "F11_L", "F11_T", "F111", "F111_L", "F111_T",
              "F1111", "F1111_L", "F1111_T", "F21", "F31", "F211_1", "F211_2", "F22", "C", "P"]

LABELS = {"F11": r"$F_{11}$", "F11_L": r"$F_{11}^L$", "F11_T": r"$F_{11}^T$",
          "F111": r"$F_{111}$", "F111_L": r"$F_{111}^L$", "F111_T": r"$F_{111}^T$",
          "F1111": r"$F_{1111}$", "F1111_L": r"$F_{1111}^L$", "F1111_T": r"$F_{1111}^T$",
          "F21": r"$F_{21}$", "F31": r"$F_{31}$", "F211_1": r"$F_{211}^{(1)}$",
          "F211_2": r"$F_{211}^{(2)}$", "F22": r"$F_{22}$", "C": r"$C$", "P": r"$P$",
          "m1": r"$m_1$", "m2": r"$m_2$", "m4": r"$m_4$", "m2_sq": r"$m_2^2$"}

# Composite layouts: rows of (panel title, [quantities]); each row is drawn on a
# log axis (left) and a log-log axis (right).
LAYOUTS = {
    "moments": [("F11", ["F11", "F11_L", "F11_T"]),
                ("F111", ["F111", "F111_L", "F111_T"]),
                ("F1111", ["F1111", "F1111_L", "F1111_T"])],
    "mixed": [("F21, F31, F211_1", ["F21", "F31", "F211_1"]),
              ("F22", ["F22", "m4", "m2_sq", "C"]),
              ("F211_2", ["F211_2", "m4", "P"])],
}


def _series(rows: list[dict], name: str) -> ScalingSeries | None:
    rows = sorted(rows, key=lambda r: r["L"])
    if name == "m2_sq":
        vals = [r["m2"] ** 2 for r in rows]
    else:
        vals = [r.get(name, np.nan) for r in rows]
    pts = [(r["L"], v) for r, v in zip(rows, vals) if np.isfinite(v) and v != 0]
    if not pts:
        return None
    return ScalingSeries.from_points(name, pts)


def _draw(ax, series: ScalingSeries, fit: FitResult | None, color, loglog: bool):
    L, v = series.L, series.values
    y = np.abs(v)
    ax.plot(L, y, "-", color=color, lw=1.0, label=LABELS.get(series.label, series.label))
    neg = v < 0
    ax.plot(L[~neg], y[~neg], "o", color=color, ms=4)
    if neg.any():
        # open markers flag negative values drawn by magnitude
        ax.plot(L[neg], y[neg], "o", mfc="none", color=color, ms=4)
    if fit is not None:
        grid = np.linspace(fit.L_used[0], fit.L_used[-1], 50)
        ax.plot(grid, fit.predict(grid), "--", color=color, lw=1.0)
    ax.set_yscale("log")
    if loglog:
        ax.set_xscale("log")
    ax.set_xlabel("L")


def _save(fig, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)


def plot_quantity(series: ScalingSeries, fit: FitResult | None, path: Path):
    """One quantity on a log panel and a log-log panel."""
    with plt.rc_context(SVG_RC):
        fig, axes = plt.subplots(1, 2, figsize=(7, 3))
        for ax, loglog in zip(axes, (False, True)):
            _draw(ax, series, fit, "C0", loglog)
            ax.set_ylabel(LABELS.get(series.label, series.label))
        fig.tight_layout()
        _save(fig, path)


def plot_layout(rows: list[dict], layout: str, fits: dict[str, FitResult], path: Path) -> list[str]:
    """Composite figure; returns notes about skipped series."""
    notes = []
    spec = LAYOUTS[layout]
    with plt.rc_context(SVG_RC):
        fig, axes = plt.subplots(len(spec), 2, figsize=(8, 3 * len(spec)), squeeze=False)
        for (title, names), pair in zip(spec, axes):
            for loglog, ax in zip((False, True), pair):
                drawn = 0
                for i, name in enumerate(names):
                    s = _series(rows, name)
                    if s is None:
                        if not loglog:
                            notes.append(f"{layout}: series {name} is empty, skipped")
                        continue
                    _draw(ax, s, fits.get(name), f"C{i}", loglog)
                    drawn += 1
                ax.set_title(title + (" (log-log)" if loglog else " (log)"), fontsize=9)
                if drawn:
                    ax.legend(fontsize=7)
        fig.tight_layout()
        _save(fig, path)
    return notes


def plot_all(rows: list[dict], table: list[TableRow], outdir: Path,
             observable_kind: str = "") -> tuple[list[Path], list[str]]:
    """Per-quantity panels plus the composite layouts; returns (files, notes)."""
    outdir = Path(outdir)
    fits = {r.component: r.fit for r in table if r.fit is not None}
    written, notes = [], []
    names = [q for q in QUANTITIES if q != "m1" or observable_kind == "two_site_ZZ_center"]
    for name in names:
        s = _series(rows, name)
        if s is None:
            notes.append(f"series {name} is empty; no plot written")
            log.warning("series %s is empty; no plot written", name)
            continue
        p = outdir / f"{name}.svg"
        plot_quantity(s, fits.get(name), p)
        written.append(p)
    for layout in LAYOUTS:
        p = outdir / f"{layout}.svg"
        notes += plot_layout(rows, layout, fits, p)
        written.append(p)
    return written, notes
