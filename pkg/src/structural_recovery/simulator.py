"""Monte Carlo oracle for the correlated diffusion and a synthetic default-database generator.

Terminal asset values are sampled exactly,

    V_k(T) = V0 exp((mu - sigma**2/2) T + sqrt(c) sigma sqrt(T) Z_m
                    + sqrt(1 - c) sigma sqrt(T) Z_k),

with one market shock ``Z_m`` per realization and i.i.d. idiosyncratic
shocks ``Z_k``.  A firm defaults iff ``V_k(T) < F`` and then recovers
``V_k(T) / F``.  Each realization draws from its own substream, so results do
not depend on how realizations are spread over threads.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .dates import add_months
from .exceptions import ConfigError
from .model import ModelParams, compound_b
from .numerics import SeedSpec, norm_cdf_inv, substream

log = logging.getLogger(__name__)

__all__ = [
    "SimConfig",
    "MarketRealization",
    "terminal_values",
    "simulate",
    "realization_arrays",
    "realization_points",
    "SyntheticDatasetConfig",
    "SyntheticDataset",
    "generate_dataset",
    "rating_params_for_b",
    "face_value_for_pd",
    "SPECULATIVE_RATINGS",
    "DEFAULT_TARGET_PDS",
]

SPECULATIVE_RATINGS = ("B1", "B2", "B3", "Caa1", "Caa2", "Caa3")

# unconditional horizon PDs, increasing with rating risk; artifact choice
DEFAULT_TARGET_PDS = {
    "B1": 0.03,
    "B2": 0.05,
    "B3": 0.08,
    "Caa1": 0.13,
    "Caa2": 0.20,
    "Caa3": 0.30,
}


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo configuration.

    Realization ``i`` draws from ``substream(SeedSpec(seed, i))``.
    """

    params: ModelParams
    K: int
    M: int
    seed: int = 0

    def __post_init__(self):
        if int(self.K) < 1 or int(self.M) < 1:
            raise ConfigError(f"K and M must be >= 1, got K={self.K}, M={self.M}")
        SeedSpec(self.seed)  # validates the range


@dataclass(frozen=True)
class MarketRealization:
    """Outcome of one market scenario.

    ``rr_real`` is None when no firm defaulted.  ``loss_real`` is the mean
    of ``(1 - V/F) * 1{default}`` over all K firms.
    """

    index: int
    w_m: float
    pd_real: float
    rr_real: float | None
    loss_real: float
    n_default: int


def _draw(config: SimConfig, realization_index: int) -> tuple[float, np.ndarray]:
    if not 0 <= realization_index < config.M:
        raise ConfigError(f"realization_index {realization_index} outside [0, {config.M})")
    rng = substream(SeedSpec(config.seed, realization_index))
    z_m = float(rng.standard_normal())
    z_k = rng.standard_normal(int(config.K))
    p = config.params
    log_v = math.log(p.V0) + p.log_drift + p.market_scale * z_m + p.idio_scale * z_k
    return z_m, np.exp(log_v)


def terminal_values(config: SimConfig, realization_index: int) -> np.ndarray:
    """Terminal asset values V_k(T) of the K firms in one realization."""
    return _draw(config, realization_index)[1]


def _realize(config: SimConfig, index: int) -> MarketRealization:
    z_m, v = _draw(config, index)
    defaulted = v < config.params.F
    n_d = int(np.count_nonzero(defaulted))
    recoveries = np.clip(v[defaulted] / config.params.F, 0.0, 1.0)
    rr = float(recoveries.mean()) if n_d else None
    loss = float(np.sum(1.0 - recoveries)) / config.K
    return MarketRealization(index, z_m, n_d / config.K, rr, loss, n_d)


def simulate(config: SimConfig, threads: int = 1) -> list[MarketRealization]:
    """Run all M realizations and return them in index order.

    Parameters
    ----------
    config : SimConfig
    threads : int
        Worker threads.  The output is identical for every value.
    """
    if threads <= 1:
        return [_realize(config, i) for i in range(config.M)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: _realize(config, i), range(config.M)))


def realization_arrays(realizations: Sequence[MarketRealization]) -> tuple[np.ndarray, np.ndarray]:
    """(pd_real, rr_real) arrays; missing recoveries become NaN."""
    pd_real = np.array([r.pd_real for r in realizations], dtype=float)
    rr_real = np.array([np.nan if r.rr_real is None else r.rr_real for r in realizations])
    return pd_real, rr_real


def realization_points(realizations: Sequence[MarketRealization]) -> np.ndarray:
    """(pd, rr) rows usable on the recovery curve: a recovery exists and 0 < pd < 1."""
    pd_real, rr_real = realization_arrays(realizations)
    keep = ~np.isnan(rr_real) & (pd_real > 0) & (pd_real < 1)
    return np.column_stack([pd_real[keep], rr_real[keep]])


# ---------------------------------------------------------------------------
# Synthetic default-and-recovery dataset
# ---------------------------------------------------------------------------


def face_value_for_pd(target_pd: float, sigma: float, T: float, mu: float = 0.0, V0: float = 1.0) -> float:
    """Face value F for which P(V(T) < F) equals ``target_pd`` unconditionally."""
    if not 0.0 < target_pd < 1.0:
        raise ConfigError(f"target PD must lie in (0, 1), got {target_pd}")
    q = norm_cdf_inv(target_pd)
    return V0 * math.exp((mu - 0.5 * sigma**2) * T + sigma * math.sqrt(T) * q)


def rating_params_for_b(
    b: float,
    maturity_years: int,
    c: float = 0.3,
    mu: float = 0.0,
    V0: float = 1.0,
    target_pds: Mapping[str, float] | None = None,
) -> dict[str, ModelParams]:
    """Per-rating parameters sharing one compound parameter ``b``.

    Volatility follows from ``b = sqrt((1 - c) sigma**2 T)``; each rating's
    face value is set so its unconditional PD hits the target.
    """
    if not b > 0:
        raise ConfigError(f"target B must be > 0, got {b}")
    if not 0.0 <= c < 1.0:
        raise ConfigError(f"c must lie in [0, 1), got {c}")
    sigma = b / math.sqrt((1.0 - c) * maturity_years)
    targets = DEFAULT_TARGET_PDS if target_pds is None else target_pds
    return {
        rating: ModelParams(
            mu=mu, sigma=sigma, c=c, T=float(maturity_years), V0=V0,
            F=face_value_for_pd(pd_, sigma, maturity_years, mu, V0),
        )
        for rating, pd_ in targets.items()
    }


@dataclass(frozen=True)
class SyntheticDatasetConfig:
    """Configuration of a synthetic issuer/rating/event dataset.

    Every ``(start_date, rating)`` pair gets ``issuers_per_rating`` fresh
    issuers rated at that date; a ``WR`` snapshot the next day retires them
    from later cohorts, so each cohort has a known ground truth.  Market
    shocks come from one monthly Brownian path, so overlapping windows share
    shocks as real rolling cohorts do.
    """

    rating_params: Mapping[str, ModelParams]
    p_w: float
    issuers_per_rating: int
    start_dates: Sequence[date]
    seed: int = 0
    seniority: str = "senior_secured"
    p_missing_recovery: float = 0.0

    def __post_init__(self):
        if not self.rating_params:
            raise ConfigError("rating_params must not be empty")
        if not 0.0 <= self.p_w <= 1.0:
            raise ConfigError(f"p_w must lie in [0, 1], got {self.p_w}")
        if not 0.0 <= self.p_missing_recovery <= 1.0:
            raise ConfigError("p_missing_recovery must lie in [0, 1]")
        if int(self.issuers_per_rating) < 1:
            raise ConfigError("issuers_per_rating must be >= 1")
        if not self.start_dates:
            raise ConfigError("start_dates must not be empty")
        if list(self.start_dates) != sorted(set(self.start_dates)):
            raise ConfigError("start_dates must be strictly increasing")
        maturities = {p.T for p in self.rating_params.values()}
        if len(maturities) != 1:
            raise ConfigError(f"all ratings must share one maturity, got {sorted(maturities)}")
        (T,) = maturities
        if T != int(T):
            raise ConfigError(f"maturity must be a whole number of years, got {T}")
        SeedSpec(self.seed)

    @property
    def maturity_years(self) -> int:
        return int(next(iter(self.rating_params.values())).T)


@dataclass
class SyntheticDataset:
    issuers: pd.DataFrame
    ratings: pd.DataFrame
    events: pd.DataFrame
    manifest: dict = field(default_factory=dict)

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        """Write ``issuers.csv``, ``ratings.csv``, ``events.csv`` and ``manifest.json``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "issuers": out / "issuers.csv",
            "ratings": out / "ratings.csv",
            "events": out / "events.csv",
            "manifest": out / "manifest.json",
        }
        self.issuers.to_csv(paths["issuers"], index=False, lineterminator="\n")
        self.ratings.to_csv(paths["ratings"], index=False, lineterminator="\n")
        self.events.to_csv(
            paths["events"], index=False, float_format="%.17g", na_rep="", lineterminator="\n"
        )
        paths["manifest"].write_text(json.dumps(self.manifest, indent=2, sort_keys=True) + "\n")
        return paths


def _market_path(cfg: SyntheticDatasetConfig, months: list[int], horizon: int) -> np.ndarray:
    """Standardized market shock for each start, from one monthly random walk."""
    rng = substream(SeedSpec(cfg.seed, 0))
    increments = rng.standard_normal(max(months) + horizon)
    level = np.concatenate([[0.0], np.cumsum(increments)])
    idx = np.asarray(months)
    return (level[idx + horizon] - level[idx]) / math.sqrt(horizon)


def generate_dataset(cfg: SyntheticDatasetConfig) -> SyntheticDataset:
    """Generate issuers, rating history and default/withdrawal events.

    Withdrawals are drawn independently of defaults.  A withdrawn issuer's
    default, if any, is never observed, which is exactly the situation the
    withdrawal-adjusted default rate corrects for.
    """
    T = cfg.maturity_years
    horizon = 12 * T
    starts = list(cfg.start_dates)
    first = starts[0]
    months = [(d.year - first.year) * 12 + (d.month - first.month) for d in starts]
    z_market = _market_path(cfg, months, horizon)
    ratings_order = list(cfg.rating_params)
    n = int(cfg.issuers_per_rating)

    issuer_ids: list[str] = []
    rating_rows: list[tuple[str, str, str, str]] = []
    ev_ids: list[str] = []
    ev_type: list[str] = []
    ev_date: list[str] = []
    ev_rr: list[float] = []
    cohorts = []

    for j, start in enumerate(starts):
        end = add_months(start, horizon)
        window_days = (end - start).days
        start_iso = start.isoformat()
        retire_iso = (start + timedelta(days=1)).isoformat()
        for r, rating in enumerate(ratings_order):
            p = cfg.rating_params[rating]
            stream = 1 + j * len(ratings_order) + r
            rng = substream(SeedSpec(cfg.seed, stream))
            z_k = rng.standard_normal(n)
            u_w = rng.random(n)
            u_day = rng.random(n)
            u_miss = rng.random(n)

            log_v = math.log(p.V0) + p.log_drift + p.market_scale * z_market[j] + p.idio_scale * z_k
            v = np.exp(log_v)
            defaulted = v < p.F
            withdrawn = u_w < cfg.p_w
            days = np.minimum((u_day * window_days).astype(np.int64), window_days - 1)

            ids = [f"S{start:%Y%m%d}-{rating}-{i:05d}" for i in range(n)]
            issuer_ids.extend(ids)
            for iid in ids:
                rating_rows.append((iid, start_iso, rating, cfg.seniority))
                rating_rows.append((iid, retire_iso, "WR", cfg.seniority))

            n_def = n_wd = 0
            for i in np.flatnonzero(withdrawn | defaulted):
                ev_ids.append(ids[i])
                ev_date.append((start + timedelta(days=int(days[i]))).isoformat())
                if withdrawn[i]:
                    ev_type.append("withdrawal")
                    ev_rr.append(np.nan)
                    n_wd += 1
                else:
                    ev_type.append("default")
                    missing = u_miss[i] < cfg.p_missing_recovery
                    ev_rr.append(np.nan if missing else float(min(max(v[i] / p.F, 0.0), 1.0)))
                    n_def += 1

            cohorts.append({
                "start_date": start_iso,
                "rating": rating,
                "stream_index": stream,
                "z_market": float(z_market[j]),
                "conditional_pd": float(p.conditional_pd(z_market[j])),
                "n_issuers": n,
                "n_defaults": n_def,
                "n_withdrawals": n_wd,
            })

    issuers = pd.DataFrame({"issuer_id": issuer_ids, "name": [f"Synthetic issuer {i}" for i in issuer_ids]})
    ratings = pd.DataFrame(rating_rows, columns=["issuer_id", "date", "rating", "seniority"])
    events = pd.DataFrame({
        "issuer_id": ev_ids, "event_type": ev_type, "date": ev_date, "recovery_rate": ev_rr,
    })
    events = events.sort_values(["date", "issuer_id"], kind="mergesort").reset_index(drop=True)

    b_by_rating = {r: compound_b(p) for r, p in cfg.rating_params.items()}
    manifest = {
        "maturity_years": T,
        "B": {str(T): b_by_rating[ratings_order[0]]} if len(set(b_by_rating.values())) == 1 else None,
        "B_by_rating": b_by_rating,
        "p_w": cfg.p_w,
        "p_missing_recovery": cfg.p_missing_recovery,
        "seed": cfg.seed,
        "seniority": cfg.seniority,
        "issuers_per_rating": n,
        "ratings": {
            r: {
                "mu": p.mu, "sigma": p.sigma, "c": p.c, "T": p.T, "V0": p.V0, "F": p.F,
                "unconditional_pd": p.unconditional_pd(),
            }
            for r, p in cfg.rating_params.items()
        },
        "cohorts": cohorts,
        "row_counts": {"issuers": len(issuers), "ratings": len(ratings), "events": len(events)},
    }
    log.info(
        "generated %d issuers, %d rating rows, %d events over %d start dates",
        len(issuers), len(ratings), len(events), len(starts),
    )
    return SyntheticDataset(issuers, ratings, events, manifest)
