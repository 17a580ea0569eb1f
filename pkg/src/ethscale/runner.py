"""Config-driven sweeps over system sizes and disorder realizations."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .cache import SpectrumCache, spectrum_key
from .config import ConfigError, ExperimentConfig, config_from_dict
from .cumulants import DISTINCTNESS, otoc_series
from .eth import error_terms, window_partition
from .fitting import (EXPONENTIAL, POWERLAW, TABLE_COMPONENTS, FitError, ScalingSeries,
                      fit_powerlaw, fit_table, table_csv, table_text)
from .model import HamiltonianSpec, model_from_dict, sector_dimensions
from .spectral import compute_spectral_data, spacing_ratio

log = logging.getLogger(__name__)

CSV_COLUMNS = ["model", "L", "sector_dim", "observable", "delta", "realization",
               "m1", "m2", "m3", "m4", "F11", "F11_L", "F11_T", "F111", "F111_L", "F111_T",
               "F1111", "F1111_L", "F1111_T", "F21", "F31", "F211_1", "F211_2", "F22", "C", "P",
               "r_mean"]
NUMERIC_COLUMNS = CSV_COLUMNS[6:]
OTOC_COLUMNS = ["t", "otoc", "otoc_eth"]


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "nan" if math.isnan(x) else f"{float(x):.17g}"
    return str(x)


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class Job:
    L: int
    realization: int


def job_spec(config: ExperimentConfig, job: Job) -> HamiltonianSpec:
    params = dict(config.params)
    if config.model == "xxz":
        params.setdefault("seed", config.seed)
        params["realization"] = job.realization
    model = model_from_dict(config.model, params, config.terms or None)
    return HamiltonianSpec(model, job.L)


def jobs_for(config: ExperimentConfig) -> list[Job]:
    return [Job(L, k) for L in config.sizes for k in range(config.realizations)]


def check_size_guard(config: ExperimentConfig):
    sector = config.resolved_sector()
    for L in config.sizes:
        dim = sector_dimensions(L, sector)[0]
        if dim > config.max_sector_dim and not config.allow_large:
            raise ConfigError(f"L={L} has sector dimension {dim} > {config.max_sector_dim}; "
                              "pass --allow-large to run it")


def run_job(config_dict: dict, job: Job) -> dict:
    """Compute one (L, realization) job; never raises."""
    config = config_from_dict(config_dict)
    out = {"L": job.L, "realization": job.realization, "status": "ok", "error": "",
           "cache_hit": False, "seconds": 0.0, "row": None, "otoc": None, "warnings": []}
    start = time.perf_counter()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            spec = job_spec(config, job)
            sector = config.resolved_sector()
            key = spectrum_key(spec.to_dict(), str(sector), config.observable.to_dict())
            cache = SpectrumCache(config.cache_dir)
            spectral, hit = cache.get_or_compute(
                key, lambda: compute_spectral_data(spec, config.observable, sector))
            window = window_partition(spectral.eigenvalues, config.delta, config.window_anchor_value())
            report = error_terms(spectral, window)
            fields = report.as_row()
            row = {"model": config.model, "L": job.L, "sector_dim": spectral.dim,
                   "observable": config.observable.label, "delta": config.delta,
                   "realization": job.realization}
            for col in NUMERIC_COLUMNS[:-1]:
                row[col] = float(fields[col])
            row["r_mean"] = spacing_ratio(spectral.eigenvalues) if spectral.dim >= 3 else float("nan")
            out.update(row=row, cache_hit=hit, involution=report.involution_flag, method=report.method)
            if config.otoc.enabled:
                series = otoc_series(spectral, config.otoc.T, config.otoc.dt, config.otoc.integrand)
                out["otoc"] = {"times": series.times.tolist(), "otoc": series.otoc.tolist(),
                               "otoc_eth": series.otoc_eth.tolist(), "summary": series.summary()}
        out["warnings"] = sorted({str(w.message) for w in caught})
    except Exception as exc:
        out["status"] = "failed"
        out["error"] = f"{type(exc).__name__}: {exc}"
        log.debug("job %s failed:\n%s", job, traceback.format_exc())
    out["seconds"] = time.perf_counter() - start
    return out


def aggregate(rows: list[dict]) -> list[dict]:
    """Mean and standard error across realizations for every L."""
    out = []
    for L in sorted({r["L"] for r in rows}):
        group = [r for r in rows if r["L"] == L]
        n = len(group)
        mean = dict(group[0], realization="mean")
        err = dict(group[0], realization="stderr")
        for col in NUMERIC_COLUMNS:
            vals = np.array([r[col] for r in group], dtype=float)
            mean[col] = float(vals.mean())
            err[col] = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
        out += [mean, err]
    return out


def write_csv(path: Path, rows: list[dict], columns: list[str]):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) for c in columns])


def read_error_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["L"] = int(r["L"])
        for col in NUMERIC_COLUMNS:
            r[col] = float(r[col])
    return rows


def fit_rows(rows: list[dict]) -> list[dict]:
    """The rows a fit should use: aggregate means when present, else the single realization."""
    means = [r for r in rows if r["realization"] == "mean"]
    if means:
        return means
    return [r for r in rows if r["realization"] not in ("mean", "stderr")]


def table_components(model: str, observable_kind: str):
    comps = list(TABLE_COMPONENTS)
    if observable_kind == "two_site_ZZ_center":
        comps.insert(0, ("m1", POWERLAW if model == "xxz" else EXPONENTIAL))
    return comps


def series_from_rows(rows: list[dict]) -> dict[str, ScalingSeries]:
    rows = sorted(rows, key=lambda r: r["L"])
    Ls = [r["L"] for r in rows]
    cols = {c: ScalingSeries(c, Ls, [r[c] for r in rows]) for c in NUMERIC_COLUMNS}
    cols["m2_sq"] = ScalingSeries("m2_sq", Ls, [r["m2"] ** 2 for r in rows])
    return cols


def clear_previous_outputs(outdir: Path):
    """Delete files listed by an earlier manifest so stale outputs never linger unlisted."""
    old = outdir / "manifest.json"
    if not old.exists():
        return
    try:
        listed = json.loads(old.read_text()).get("files", [])
    except (json.JSONDecodeError, OSError):
        return
    for entry in listed:
        (outdir / entry["path"]).unlink(missing_ok=True)
    old.unlink()


def run(config: ExperimentConfig, plots: bool = True) -> dict:
    """Execute a sweep and write all outputs; returns the run manifest."""
    check_size_guard(config)
    outdir = Path(config.output)
    outdir.mkdir(parents=True, exist_ok=True)
    clear_previous_outputs(outdir)
    jobs = jobs_for(config)
    cfg = config.to_dict()
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(run_job, [cfg] * len(jobs), jobs))
    else:
        results = [run_job(cfg, j) for j in jobs]
    results.sort(key=lambda r: (r["L"], r["realization"]))

    files: list[Path] = []
    notes: list[str] = []
    rows = [r["row"] for r in results if r["status"] == "ok"]
    all_rows = list(rows)
    if config.realizations > 1 and rows:
        all_rows += aggregate(rows)
        all_rows.sort(key=lambda r: (r["L"], str(r["realization"]) if isinstance(r["realization"], str)
                                     else f"{r['realization']:08d}"))
    csv_path = outdir / "error_terms.csv"
    write_csv(csv_path, all_rows, CSV_COLUMNS)
    files.append(csv_path)

    otoc_records = []
    for r in results:
        if r.get("otoc"):
            p = outdir / "otoc" / f"otoc_L{r['L']}_r{r['realization']}.csv"
            data = r["otoc"]
            write_csv(p, [dict(zip(OTOC_COLUMNS, v)) for v in zip(data["times"], data["otoc"], data["otoc_eth"])],
                      OTOC_COLUMNS)
            files.append(p)
            otoc_records.append({"L": r["L"], "realization": r["realization"], **data["summary"]})

    fit_input = fit_rows(all_rows)
    table = []
    if fit_input:
        table = fit_table(series_from_rows(fit_input), table_components(config.model, config.observable.kind),
                          config.last_k)
        (outdir / "fits.csv").write_text(table_csv(table))
        (outdir / "fits.txt").write_text(table_text(table, title=f"Fitted parameters: {config.label}"))
        files += [outdir / "fits.csv", outdir / "fits.txt"]

    if otoc_records:
        summary = {"conventions": {"integrand": config.otoc.integrand, "distinctness": DISTINCTNESS,
                                   "quadrature": "trapezoid"},
                   "T": config.otoc.T, "dt": config.otoc.dt, "per_size": otoc_records}
        by_L = {}
        for rec in otoc_records:
            by_L.setdefault(rec["L"], []).append(rec)
        Ls = sorted(by_L)
        for metric in ("e_avg", "e_mid"):
            vals = [float(np.mean([x[metric] for x in by_L[L]])) for L in Ls]
            try:
                f = fit_powerlaw(ScalingSeries(metric, Ls, vals), min(config.last_k, len(Ls)))
                summary[f"{metric}_fit"] = {"model": f.model, "a": f.a, "b": f.b, "points_used": f.points_used}
            except FitError as exc:
                summary[f"{metric}_fit"] = {"note": str(exc)}
        p = outdir / "otoc_summary.json"
        p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        files.append(p)

    if plots and fit_input:
        from .plotting import plot_all
        written, plot_notes = plot_all(fit_input, table, outdir / "plots",
                                       observable_kind=config.observable.kind)
        files += written
        notes += plot_notes

    manifest = {
        "config_hash": config.hash(),
        "code_version": __version__,
        "config": cfg,
        "conventions": {"p_term": "unrestricted", "e_avg_integrand": config.otoc.integrand,
                        "distinctness": DISTINCTNESS, "window_anchor": config.window_anchor,
                        "energy_shift": "sector mean"},
        "jobs": [{k: r.get(k) for k in ("L", "realization", "status", "error", "cache_hit", "seconds",
                                        "warnings", "involution", "method")} for r in results],
        "notes": notes,
        "files": [{"path": p.relative_to(outdir).as_posix(), "sha256": sha256_file(p)}
                  for p in sorted(files)],
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def manifest_failed(manifest: dict) -> bool:
    return any(j["status"] != "ok" for j in manifest["jobs"])
