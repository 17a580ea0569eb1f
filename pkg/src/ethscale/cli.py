"""Command-line entry point: ``ethscale run|oracle|fit|plot|cache``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__

EXIT_OK, EXIT_JOB_FAILED, EXIT_INVALID = 0, 1, 2

log = logging.getLogger("ethscale")


def _cmd_run(args) -> int:
    from .config import ConfigError, load_config
    from .runner import manifest_failed, run

    try:
        config = load_config(args.config)
        overrides = {"output": args.output, "workers": args.workers, "cache_dir": args.cache_dir}
        for k, v in overrides.items():
            if v is not None:
                setattr(config, k, v)
        if args.allow_large:
            config.allow_large = True
        config.validate()
        manifest = run(config, plots=not args.no_plots)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for job in manifest["jobs"]:
        status = job["status"] + ("" if job["status"] == "ok" else f" ({job['error']})")
        hit = "hit" if job["cache_hit"] else "miss"
        print(f"L={job['L']:<3} r={job['realization']:<3} {status:<8} cache={hit:<4} {job['seconds']:.2f}s")
    print(f"wrote {len(manifest['files'])} files to {config.output}")
    return EXIT_JOB_FAILED if manifest_failed(manifest) else EXIT_OK


def _cmd_oracle(args) -> int:
    from .oracle import run_oracle

    report = run_oracle(seed=args.seed, p_convention=args.p_convention, n_cases=args.cases)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_INVALID


def _load_rows(path: str):
    from .runner import fit_rows, read_error_csv

    rows = read_error_csv(Path(path))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return fit_rows(rows)


def _observable_kind(label: str) -> str:
    return label if label in ("single_site_Z_center", "two_site_ZZ_center") else "custom"


def _cmd_fit(args) -> int:
    from .fitting import fit_table, table_csv, table_text
    from .runner import series_from_rows, table_components

    try:
        rows = _load_rows(args.csv)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    comps = table_components(rows[0]["model"], _observable_kind(rows[0]["observable"]))
    table = fit_table(series_from_rows(rows), comps, args.last_k)
    sys.stdout.write(table_csv(table) if args.format == "csv" else table_text(table))
    return EXIT_OK


def _cmd_plot(args) -> int:
    from .fitting import fit_table
    from .plotting import plot_all
    from .runner import series_from_rows, table_components

    try:
        rows = _load_rows(args.csv)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    kind = _observable_kind(rows[0]["observable"])
    table = fit_table(series_from_rows(rows), table_components(rows[0]["model"], kind), args.last_k)
    outdir = Path(args.output) if args.output else Path(args.csv).parent / "plots"
    written, notes = plot_all(rows, table, outdir, observable_kind=kind)
    for note in notes:
        print(f"note: {note}", file=sys.stderr)
    print(f"wrote {len(written)} SVG files to {outdir}")
    return EXIT_OK


def _cmd_cache(args) -> int:
    from .cache import SpectrumCache, read_header

    cache = SpectrumCache(args.cache_dir)
    if args.action == "ls":
        for path in cache.entries():
            try:
                meta = read_header(path).get("meta", {})
                ham = meta.get("hamiltonian", {})
                desc = (f"{ham.get('model', '?')} L={ham.get('sites', '?')} "
                        f"sector={meta.get('sector', '?')} D={meta.get('dim', '?')}")
            except Exception as exc:  # a listing must survive damaged entries
                desc = f"unreadable ({exc})"
            print(f"{path.stem[:16]}  {path.stat().st_size:>12d}  {desc}")
        return EXIT_OK
    if not args.prefix and not args.all:
        print("error: give a key prefix or --all", file=sys.stderr)
        return EXIT_INVALID
    n = cache.remove("" if args.all else args.prefix)
    print(f"removed {n} entries")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ethscale", description="Finite-size ETH error-term studies")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a sweep from a TOML/JSON config")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="output directory (overrides the config)")
    r.add_argument("-j", "--workers", type=int, help="parallel worker processes")
    r.add_argument("--cache-dir", help="spectrum cache directory")
    r.add_argument("--allow-large", action="store_true", help="permit sectors above the size cap")
    r.add_argument("--no-plots", action="store_true")
    r.set_defaults(func=_cmd_run)

    o = sub.add_parser("oracle", help="brute-force validation suites")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--cases", type=int, default=200)
    o.add_argument("--p-convention", choices=["unrestricted", "restricted"], default="unrestricted",
                   help="P-term index convention (restricted is wrong; useful as a fault injection)")
    o.set_defaults(func=_cmd_oracle)

    f = sub.add_parser("fit", help="fit table from an error_terms.csv")
    f.add_argument("csv")
    f.add_argument("--last-k", type=int, default=4)
    f.add_argument("--format", choices=["text", "csv"], default="text")
    f.set_defaults(func=_cmd_fit)

    pl = sub.add_parser("plot", help="SVG plots from an error_terms.csv")
    pl.add_argument("csv")
    pl.add_argument("-o", "--output")
    pl.add_argument("--last-k", type=int, default=4)
    pl.set_defaults(func=_cmd_plot)

    c = sub.add_parser("cache", help="inspect or prune the spectrum cache")
    c.add_argument("action", choices=["ls", "rm"])
    c.add_argument("prefix", nargs="?", default="")
    c.add_argument("--all", action="store_true", help="with rm: remove every entry")
    c.add_argument("--cache-dir")
    c.set_defaults(func=_cmd_cache)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
