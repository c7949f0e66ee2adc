"""Command-line interface: ``structrec <command> [options]``.

Commands
--------
curves      recovery and loss curves for a list of B values
simulate    Monte Carlo realizations of the correlated diffusion
gen-data    synthetic issuers/ratings/events dataset with a ground-truth manifest
cohort      rolling cohorts with withdrawal-adjusted default rates
correlate   Pearson correlation of cohort PD and mean recovery
fit         bin cohort points and fit B to the loss curve

Every parameter can come from a ``--config`` file of ``key = value`` lines
(``#`` starts a comment); command-line flags override the file.  Each run
writes ``<command>.resolved.cfg`` next to its outputs.

Exit codes: 0 success, 1 usage/config/I-O error, 2 data validation error,
3 degenerate computation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import date
from pathlib import Path

import numpy as np
import pandas as pd

from . import calibration, cohort, model, simulator
from .dates import month_range
from .exceptions import (
    ConfigError,
    DataValidationError,
    DegenerateCohortError,
    DomainError,
    InsufficientDataError,
    ZeroVarianceError,
)

log = logging.getLogger("structural_recovery.cli")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE = 0, 1, 2, 3
FLOAT_FORMAT = "%.17g"

# execution details that never change results; kept out of the echoed config
_NOT_ECHOED = {"config", "threads", "out_dir", "verbose", "command"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _words(text) -> list[str]:
    if isinstance(text, (list, tuple)):
        return list(text)
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in {"1", "true", "yes", "on"}:
        return True
    if value in {"0", "false", "no", "off"}:
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _date(text) -> date:
    if isinstance(text, date):
        return text
    try:
        return date.fromisoformat(str(text).strip())
    except ValueError as exc:
        raise ConfigError(f"not an ISO-8601 date: {text!r}") from exc


def read_config(path) -> dict[str, str]:
    """Parse a flat ``key = value`` file."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        values[key.replace("-", "_")] = value
    return values


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, date):
        return value.isoformat()
    return str(value)


def write_resolved(cfg: dict, command: str, out_dir: Path) -> Path:
    lines = [f"# resolved configuration for '{command}'"]
    lines += [f"{k} = {_format_value(v)}" for k, v in sorted(cfg.items()) if k not in _NOT_ECHOED]
    path = out_dir / f"{command}.resolved.cfg"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# per-command parameters: name -> (converter, default)
PARAMS: dict[str, dict[str, tuple]] = {
    "curves": {
        "b": (_floats, "0.2,0.6,1.0,1.4"),
        "grid_n": (int, 99),
        "grid_min": (float, 0.01),
        "grid_max": (float, 0.99),
        "out": (str, "curves.csv"),
    },
    "simulate": {
        "mu": (float, 0.0),
        "sigma": (float, 0.4),
        "c": (float, 0.5),
        "T": (float, 1.0),
        "V0": (float, 1.0),
        "F": (float, 0.8),
        "K": (int, 10_000),
        "M": (int, 2000),
        "seed": (int, 0),
        "out": (str, "realizations.csv"),
    },
    "gen-data": {
        "b": (float, 0.882),
        "maturity": (int, 2),
        "c": (float, 0.3),
        "mu": (float, 0.0),
        "V0": (float, 1.0),
        "ratings": (_words, ",".join(simulator.SPECULATIVE_RATINGS)),
        "target_pds": (_floats, ",".join(str(simulator.DEFAULT_TARGET_PDS[r])
                                        for r in simulator.SPECULATIVE_RATINGS)),
        "p_w": (float, 0.1),
        "issuers_per_rating": (int, 500),
        "first_start": (_date, "2000-01-01"),
        "last_start": (_date, "2010-01-01"),
        "seniority": (str, "senior_secured"),
        "p_missing_recovery": (float, 0.0),
        "seed": (int, 0),
    },
    "cohort": {
        "data_dir": (str, None),
        "ratings": (_words, "Caa1,Caa2,Caa3"),
        "seniority": (str, "senior_secured"),
        "maturity": (int, 1),
        "first_start": (_date, "2000-01-01"),
        "last_start": (_date, None),
        "per_rating": (_bool, False),
        "strict": (_bool, True),
        "out": (str, "cohorts.csv"),
    },
    "correlate": {
        "input": (str, None),
        "out": (str, "correlation.json"),
    },
    "fit": {
        "input": (_words, None),
        "maturity": (_floats, ""),
        "bins": (int, calibration.N_BINS),
        "min_count": (int, calibration.MIN_COUNT),
        "domain": (str, "observed"),
        "weights": (str, "none"),
        "out": (str, "fit"),
    },
}

HELP = {
    "curves": "recovery/loss curves for a list of B values",
    "simulate": "Monte Carlo realizations of the correlated diffusion",
    "gen-data": "synthetic issuers/ratings/events dataset",
    "cohort": "rolling cohorts with withdrawal-adjusted PD",
    "correlate": "PD-RR Pearson correlation over a cohort series",
    "fit": "bin cohort points and fit B to the loss curve",
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="structrec", description="Structural recovery model toolkit.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, params in PARAMS.items():
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--out-dir", default=".", help="output directory (default: .)")
        p.add_argument("--threads", type=int, default=1, help="worker threads (simulate)")
        p.add_argument("-v", "--verbose", action="store_true")
        for key in params:
            flag = "--" + key.replace("_", "-")
            if key in {"seed"}:
                p.add_argument(flag, default=None, type=int)
            else:
                p.add_argument(flag, dest=key, default=None)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags, then convert types."""
    raw = {k: default for k, (_, default) in PARAMS[args.command].items()}
    if args.config:
        file_values = read_config(args.config)
        unknown = sorted(set(file_values) - set(raw))
        if unknown:
            raise ConfigError(f"{args.config}: unknown key(s) for '{args.command}': {unknown}")
        raw.update(file_values)
    for key in raw:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    cfg = {}
    for key, (convert, _) in PARAMS[args.command].items():
        value = raw[key]
        try:
            cfg[key] = None if value is None else convert(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from exc
    cfg["threads"] = args.threads
    cfg["out_dir"] = Path(args.out_dir)
    return cfg


def _require(cfg: dict, *keys: str):
    missing = [k for k in keys if cfg.get(k) in (None, [], "")]
    if missing:
        raise UsageError("missing required parameter(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_curves(cfg: dict) -> int:
    b_values = cfg["b"]
    if not b_values:
        raise UsageError("--b needs at least one value")
    if any(b < 0 or not np.isfinite(b) for b in b_values):
        raise UsageError(f"B values must be >= 0, got {b_values}")
    if not 0 < cfg["grid_min"] < cfg["grid_max"] < 1 or cfg["grid_n"] < 1:
        raise UsageError("grid needs 0 < grid_min < grid_max < 1 and grid_n >= 1")
    grid = model.default_pd_grid(cfg["grid_n"], cfg["grid_min"], cfg["grid_max"])
    rows = [(b, p.pd, p.rr, p.loss) for b, points in model.sample_curves(b_values, grid) for p in points]
    table = pd.DataFrame(rows, columns=["b", "pd", "rr", "loss"])
    path = cfg["out_dir"] / cfg["out"]
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    log.info("wrote %d curve points to %s", len(table), path)
    return EXIT_OK


def cmd_simulate(cfg: dict) -> int:
    params = model.ModelParams(mu=cfg["mu"], sigma=cfg["sigma"], c=cfg["c"], T=cfg["T"],
                               V0=cfg["V0"], F=cfg["F"])
    sim = simulator.SimConfig(params, cfg["K"], cfg["M"], cfg["seed"])
    realizations = simulator.simulate(sim, threads=cfg["threads"])
    table = pd.DataFrame({
        "realization_index": [r.index for r in realizations],
        "pd_real": [r.pd_real for r in realizations],
        "rr_real": [np.nan if r.rr_real is None else r.rr_real for r in realizations],
    })
    path = cfg["out_dir"] / cfg["out"]
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    log.info("wrote %d realizations (B = %.6g) to %s", len(table), model.compound_b(params), path)
    return EXIT_OK


def cmd_gen_data(cfg: dict) -> int:
    ratings, targets = cfg["ratings"], cfg["target_pds"]
    if len(ratings) != len(targets):
        raise ConfigError(f"{len(ratings)} ratings but {len(targets)} target PDs")
    unknown = set(ratings) - set(cohort.RATING_SCALE)
    if unknown:
        raise ConfigError(f"unknown rating(s) {sorted(unknown)}")
    if cfg["seniority"] not in cohort.SENIORITIES:
        raise ConfigError(f"unknown seniority {cfg['seniority']!r}")
    params = simulator.rating_params_for_b(
        cfg["b"], cfg["maturity"], c=cfg["c"], mu=cfg["mu"], V0=cfg["V0"],
        target_pds=dict(zip(ratings, targets)),
    )
    try:
        starts = month_range(cfg["first_start"], cfg["last_start"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    ds_cfg = simulator.SyntheticDatasetConfig(
        params, p_w=cfg["p_w"], issuers_per_rating=cfg["issuers_per_rating"],
        start_dates=starts, seed=cfg["seed"], seniority=cfg["seniority"],
        p_missing_recovery=cfg["p_missing_recovery"],
    )
    dataset = simulator.generate_dataset(ds_cfg)
    dataset.write(cfg["out_dir"])
    log.info("dataset written to %s (B = %s)", cfg["out_dir"], dataset.manifest["B"])
    return EXIT_OK


COHORT_COLUMNS = ("start_date", "window_end", "ratings", "seniority", "maturity_years",
                  "n_c", "n_w", "n_d", "pd", "mean_rr", "rr_count", "flag")


def cmd_cohort(cfg: dict) -> int:
    _require(cfg, "data_dir")
    store = cohort.ingest_dir(cfg["data_dir"], strict=cfg["strict"])
    for diag in store.diagnostics:
        log.warning("%s", diag)
    first = cfg["first_start"]
    last = cfg["last_start"] or first
    groups = [[r] for r in cfg["ratings"]] if cfg["per_rating"] else [cfg["ratings"]]
    rows = []
    for group in groups:
        try:
            spec = cohort.CohortSpec(first, cfg["maturity"], group, cfg["seniority"])
            series = cohort.rolling_series(store, spec, first, last)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for point in series:
            o = point.outcome
            rows.append({
                "start_date": point.start_date.isoformat(),
                "window_end": spec.at(point.start_date).window_end.isoformat(),
                "ratings": "|".join(sorted(group, key=cohort.RATING_SCALE.index)),
                "seniority": cfg["seniority"],
                "maturity_years": cfg["maturity"],
                "n_c": o.n_c, "n_w": o.n_w, "n_d": o.n_d,
                "pd": np.nan if o.pd is None else o.pd,
                "mean_rr": np.nan if o.mean_rr is None else o.mean_rr,
                "rr_count": o.rr_count,
                "flag": point.flag or "",
            })
    table = pd.DataFrame(rows, columns=list(COHORT_COLUMNS))
    path = cfg["out_dir"] / cfg["out"]
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")

    if len(table) <= 12:
        for row in rows:
            pd_text = "undefined" if np.isnan(row["pd"]) else repr(row["pd"])
            rr_text = "absent" if np.isnan(row["mean_rr"]) else repr(row["mean_rr"])
            print(f"{row['start_date']} {row['ratings']}: n_c={row['n_c']} n_w={row['n_w']} "
                  f"n_d={row['n_d']} pd={pd_text} mean_rr={rr_text}"
                  + (f" [{row['flag']}]" if row["flag"] else ""))
    n_flagged = int((table["flag"] != "").sum())
    print(f"{len(table)} cohorts written to {path} ({n_flagged} flagged)")
    if table["pd"].isna().all():
        log.error("default rate undefined for every cohort")
        return EXIT_DEGENERATE
    return EXIT_OK


def _read_points(path: str) -> np.ndarray:
    try:
        table = pd.read_csv(path)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise DataValidationError(f"{path}: cannot parse CSV ({exc})") from exc
    if {"pd", "mean_rr"} <= set(table.columns):
        if "flag" in table.columns:
            table = table[table["flag"].isna() | (table["flag"] == "")]
        pd_, rr = table["pd"], table["mean_rr"]
    elif {"pd_real", "rr_real"} <= set(table.columns):
        pd_, rr = table["pd_real"], table["rr_real"]
    else:
        raise DataValidationError(
            f"{path}: expected columns (pd, mean_rr) or (pd_real, rr_real), got {list(table.columns)}")
    pts = np.column_stack([pd_.to_numpy(dtype=float), rr.to_numpy(dtype=float)])
    keep = ~np.isnan(pts).any(axis=1) & (pts[:, 0] > 0) & (pts[:, 0] < 1)
    dropped = int((~keep).sum())
    if dropped:
        log.info("%s: skipped %d rows without a usable (pd, rr) pair", path, dropped)
    return pts[keep]


def cmd_correlate(cfg: dict) -> int:
    _require(cfg, "input")
    table = pd.read_csv(cfg["input"])
    if not {"pd", "mean_rr"} <= set(table.columns):
        raise DataValidationError(f"{cfg['input']}: expected cohort series with pd, mean_rr columns")
    flag = table["flag"].fillna("") if "flag" in table.columns else pd.Series("", index=table.index)
    usable = (flag == "") & table["pd"].notna() & table["mean_rr"].notna()
    pairs = table.loc[usable, ["pd", "mean_rr"]].to_numpy(dtype=float)
    r = cohort.pearson(pairs)
    result = {"pearson": r, "n_cohorts": int(usable.sum()), "n_skipped": int((~usable).sum())}
    path = cfg["out_dir"] / cfg["out"]
    path.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    print(f"pearson = {r:.6f} over {result['n_cohorts']} cohorts ({result['n_skipped']} skipped)")
    return EXIT_OK


def cmd_fit(cfg: dict) -> int:
    _require(cfg, "input")
    inputs, maturities = cfg["input"], cfg["maturity"]
    if maturities and len(maturities) != len(inputs):
        raise ConfigError(f"{len(inputs)} inputs but {len(maturities)} maturities")
    fits = []
    for k, path in enumerate(inputs):
        T = maturities[k] if maturities else None
        points = _read_points(path)
        if points.size == 0:
            raise InsufficientDataError(f"{path}: no usable (pd, rr) points")
        binned = calibration.bin_series(points, n_bins=cfg["bins"], min_count=cfg["min_count"],
                                        domain=cfg["domain"])
        fit = calibration.fit_b(binned, weights=cfg["weights"], maturity=T)
        report = calibration.fit_report(fit, binned)
        stem = cfg["out"] if len(inputs) == 1 else f"{cfg['out']}_T{T:g}" if T else f"{cfg['out']}_{k}"
        report.write(cfg["out_dir"], stem)
        fits.append(fit)
        label = f"T={T:g}: " if T else ""
        print(f"{label}b_hat = {fit.b_hat:.6f}  sse = {fit.sse:.6g}  bins = {fit.n_bins_used}")
    if len(fits) > 1:
        summary = calibration.maturity_summary(fits)
        (cfg["out_dir"] / f"{cfg['out']}_summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n")
        if "note" in summary:
            print(summary["note"])
    return EXIT_OK


COMMANDS = {
    "curves": cmd_curves,
    "simulate": cmd_simulate,
    "gen-data": cmd_gen_data,
    "cohort": cmd_cohort,
    "correlate": cmd_correlate,
    "fit": cmd_fit,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve(args)
        if cfg["threads"] < 1:
            raise UsageError("--threads must be >= 1")
        cfg["out_dir"].mkdir(parents=True, exist_ok=True)
        write_resolved(cfg, args.command, cfg["out_dir"])
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataValidationError as exc:
        print(f"data validation error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateCohortError, InsufficientDataError, ZeroVarianceError) as exc:
        print(f"degenerate computation: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
