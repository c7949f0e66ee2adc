"""Cohort construction from issuer, rating and event records.

A cohort is the set of issuers whose rating (for one seniority class) at the
start date lies in a chosen rating set.  Over the model-maturity window
``[start, start + 12 T months)`` each member ends in exactly one state: the
first event by date decides between default and withdrawal, otherwise the
member survives.  Withdrawn issuers leave the denominator of the default
rate, ``pd = n_d / (n_c - n_w)``.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .exceptions import (
    DataValidationError,
    DegenerateCohortError,
    DuplicateKeyError,
    InsufficientDataError,
    ZeroVarianceError,
)
from .dates import add_months, month_range

log = logging.getLogger(__name__)

__all__ = [
    "RATING_SCALE",
    "SENIORITIES",
    "EVENT_TYPES",
    "CohortSpec",
    "CohortOutcome",
    "SeriesPoint",
    "RecordStore",
    "ingest",
    "ingest_dir",
    "default_rate",
    "build_cohort",
    "rolling_series",
    "series_pairs",
    "pearson",
]

RATING_SCALE = (
    "Aaa", "Aa1", "Aa2", "Aa3", "A1", "A2", "A3", "Baa1", "Baa2", "Baa3",
    "Ba1", "Ba2", "Ba3", "B1", "B2", "B3", "Caa1", "Caa2", "Caa3", "Ca", "C",
    "WR",
)
SENIORITIES = ("senior_secured", "senior_unsecured", "other")
EVENT_TYPES = ("default", "withdrawal")

ISSUER_COLUMNS = ("issuer_id", "name")
RATING_COLUMNS = ("issuer_id", "date", "rating", "seniority")
EVENT_COLUMNS = ("issuer_id", "event_type", "date", "recovery_rate")

_ISO_DATE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_NO_EVENT = np.iinfo(np.int64).max
_NO_PRIOR = np.iinfo(np.int64).min


@dataclass(frozen=True)
class CohortSpec:
    """Cohort selection: start date, model-maturity, rating set, seniority."""

    start_date: date
    maturity_years: int
    ratings: frozenset[str]
    seniority: str = "senior_secured"

    def __post_init__(self):
        object.__setattr__(self, "ratings", frozenset(self.ratings))
        if int(self.maturity_years) < 1 or self.maturity_years != int(self.maturity_years):
            raise ValueError(f"maturity_years must be a positive integer, got {self.maturity_years}")
        unknown = self.ratings - set(RATING_SCALE)
        if unknown or not self.ratings:
            raise ValueError(f"invalid rating set {sorted(self.ratings)}")
        if self.seniority not in SENIORITIES:
            raise ValueError(f"unknown seniority {self.seniority!r}")

    @property
    def window_end(self) -> date:
        """Exclusive end of the maturity window."""
        return add_months(self.start_date, 12 * int(self.maturity_years))

    def at(self, start: date) -> "CohortSpec":
        return CohortSpec(start, self.maturity_years, self.ratings, self.seniority)


@dataclass(frozen=True)
class CohortOutcome:
    """Counts and rates of one cohort.

    ``pd`` is None only for degenerate cohorts reported by
    :func:`rolling_series`; :func:`build_cohort` raises instead.
    """

    n_c: int
    n_w: int
    n_d: int
    pd: float | None
    mean_rr: float | None
    rr_count: int

    @property
    def n_survived(self) -> int:
        return self.n_c - self.n_w - self.n_d


@dataclass(frozen=True)
class SeriesPoint:
    start_date: date
    outcome: CohortOutcome
    flag: str | None = None  # "empty", "degenerate" or "no_recovery"

    @property
    def usable(self) -> bool:
        return self.flag is None


def default_rate(n_c: int, n_w: int, n_d: int) -> float:
    """Withdrawal-adjusted default rate ``n_d / (n_c - n_w)``."""
    if min(n_c, n_w, n_d) < 0 or n_w + n_d > n_c:
        raise ValueError(f"inconsistent counts n_c={n_c}, n_w={n_w}, n_d={n_d}")
    if n_c == 0:
        raise DegenerateCohortError("empty cohort", n_c, n_w, n_d)
    if n_c == n_w:
        raise DegenerateCohortError("every member withdrawn; default rate undefined", n_c, n_w, n_d)
    return n_d / (n_c - n_w)


def _days(values) -> np.ndarray:
    return np.asarray(values, dtype="datetime64[D]").astype(np.int64)


def _day(d: date) -> int:
    return int(np.datetime64(d, "D").astype(np.int64))


class RecordStore:
    """Validated, immutable issuer/rating/event records with lookup indices.

    Build it with :func:`ingest` (from CSV files) or :meth:`from_frames`.
    The ``issuers``, ``ratings`` and ``events`` frames keep the validated
    rows; the private arrays are sorted copies used by :func:`build_cohort`.
    """

    def __init__(self, issuers: pd.DataFrame, ratings: pd.DataFrame, events: pd.DataFrame,
                 diagnostics: Sequence[str] = ()):
        self.issuers = issuers.reset_index(drop=True)
        self.ratings = ratings.reset_index(drop=True)
        self.events = events.reset_index(drop=True)
        self.diagnostics = tuple(diagnostics)

        self._ids = pd.Index(self.issuers["issuer_id"])
        n_issuers = len(self._ids)

        r_code = self._ids.get_indexer(self.ratings["issuer_id"])
        r_sen = pd.Categorical(self.ratings["seniority"], categories=SENIORITIES).codes.astype(np.int64)
        r_day = _days(self.ratings["date"])
        r_rating = pd.Categorical(self.ratings["rating"], categories=RATING_SCALE).codes
        order = np.lexsort((r_day, r_sen, r_code))
        self._r_code = r_code[order]
        self._r_sen = r_sen[order]
        self._r_key = self._r_code * len(SENIORITIES) + self._r_sen
        self._r_day = r_day[order]
        self._r_rating = np.asarray(r_rating)[order]

        e_code = self._ids.get_indexer(self.events["issuer_id"])
        e_day = _days(self.events["date"])
        # same-day tie: default before withdrawal, then by recovery (missing last)
        e_type = (self.events["event_type"].to_numpy() == "withdrawal").astype(np.int64)
        e_rr = self.events["recovery_rate"].to_numpy(dtype=float)
        rr_key = np.where(np.isnan(e_rr), np.inf, e_rr)
        order = np.lexsort((rr_key, e_type, e_day, e_code))
        self._e_code = e_code[order]
        self._e_day = e_day[order]
        self._e_type = e_type[order]
        self._e_rr = e_rr[order]
        self._n_issuers = n_issuers

    @classmethod
    def from_frames(cls, issuers: pd.DataFrame, ratings: pd.DataFrame, events: pd.DataFrame,
                    strict: bool = True) -> "RecordStore":
        """Validate in-memory tables (all columns as strings or native types)."""
        return _validate(_as_text(issuers, ISSUER_COLUMNS, "issuers"),
                         _as_text(ratings, RATING_COLUMNS, "ratings"),
                         _as_text(events, EVENT_COLUMNS, "events"), strict)

    def __len__(self) -> int:
        return self._n_issuers

    def ratings_for(self, issuer_id: str) -> pd.DataFrame:
        return self.ratings[self.ratings["issuer_id"] == issuer_id].sort_values("date")

    def events_for(self, issuer_id: str) -> pd.DataFrame:
        return self.events[self.events["issuer_id"] == issuer_id].sort_values("date")

    def start_dates(self) -> list[date]:
        """Distinct rating-snapshot dates, ascending."""
        return sorted({date.fromisoformat(d) for d in self.ratings["date"].unique()})


# ---------------------------------------------------------------------------
# ingestion and validation
# ---------------------------------------------------------------------------


def _as_text(df: pd.DataFrame, columns: tuple[str, ...], name: str) -> pd.DataFrame:
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise DataValidationError(f"{name}: missing columns {missing}")
    out = df.loc[:, list(columns)].copy()
    for col in columns:
        text = ["" if v is None or (isinstance(v, float) and np.isnan(v))
                else (v.isoformat() if isinstance(v, date) else str(v)) for v in out[col]]
        out[col] = pd.Series(text, index=out.index, dtype=object)
    return out


def _read_csv(path, columns: tuple[str, ...], name: str) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as exc:
        raise DataValidationError(f"{name} ({path}): file is empty, header row required") from exc
    except pd.errors.ParserError as exc:
        raise DataValidationError(f"{name} ({path}): malformed CSV: {exc}") from exc
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise DataValidationError(f"{name} ({path}): missing columns {missing}")
    return df.loc[:, list(columns)]


def _bad_dates(values: pd.Series) -> np.ndarray:
    shape_ok = values.str.match(_ISO_DATE).to_numpy(dtype=bool)
    parsed = pd.to_datetime(values.where(shape_ok, None), format="%Y-%m-%d", errors="coerce")
    return ~shape_ok | parsed.isna().to_numpy()


def _parse_float(text: str) -> float:
    # float() rounds correctly, so %.17g text reads back bit for bit
    try:
        return float(text)
    except ValueError:
        return math.nan


def _validate(issuers: pd.DataFrame, ratings: pd.DataFrame, events: pd.DataFrame,
              strict: bool) -> RecordStore:
    diags: list[str] = []
    dup_diags: list[str] = []

    def report(name, mask, message, frame, sink=diags):
        for i in np.flatnonzero(mask):
            sink.append(f"{name} line {i + 2}: {message} ({frame.iloc[i].to_dict()})")

    # issuers
    bad_i = (issuers["issuer_id"].str.strip() == "").to_numpy()
    report("issuers", bad_i, "empty issuer_id", issuers)
    dup_i = issuers["issuer_id"].duplicated().to_numpy() & ~bad_i
    report("issuers", dup_i, "duplicate issuer_id", issuers, dup_diags)
    issuers = issuers[~(bad_i | dup_i)]
    known = set(issuers["issuer_id"])

    # ratings
    unknown = ~ratings["issuer_id"].isin(known).to_numpy()
    report("ratings", unknown, "unknown issuer_id", ratings)
    bad_d = _bad_dates(ratings["date"])
    report("ratings", bad_d, "bad ISO-8601 date", ratings)
    bad_r = ~ratings["rating"].isin(RATING_SCALE).to_numpy()
    report("ratings", bad_r, "rating out of vocabulary", ratings)
    bad_s = ~ratings["seniority"].isin(SENIORITIES).to_numpy()
    report("ratings", bad_s, "unknown seniority", ratings)
    bad = unknown | bad_d | bad_r | bad_s
    dup_r = ratings.duplicated(["issuer_id", "seniority", "date"]).to_numpy() & ~bad
    report("ratings", dup_r, "duplicate (issuer_id, seniority, date)", ratings, dup_diags)
    ratings = ratings[~(bad | dup_r)]

    # events
    unknown = ~events["issuer_id"].isin(known).to_numpy()
    report("events", unknown, "unknown issuer_id", events)
    bad_t = ~events["event_type"].isin(EVENT_TYPES).to_numpy()
    report("events", bad_t, "event_type must be default or withdrawal", events)
    bad_d = _bad_dates(events["date"])
    report("events", bad_d, "bad ISO-8601 date", events)
    rr_text = events["recovery_rate"].str.strip()
    rr = np.array([_parse_float(t) for t in rr_text], dtype=float)
    present = (rr_text != "").to_numpy()
    bad_num = present & np.isnan(rr)
    report("events", bad_num, "recovery_rate is not a number", events)
    out_of_range = present & ~np.isnan(rr) & ~((rr >= 0.0) & (rr <= 1.0))
    report("events", out_of_range, "recovery_rate outside [0, 1]", events)
    wd_rr = present & (events["event_type"] == "withdrawal").to_numpy()
    report("events", wd_rr, "recovery_rate must be empty for withdrawals", events)
    bad = unknown | bad_t | bad_d | bad_num | out_of_range | wd_rr
    events = events[~bad].copy()
    events["recovery_rate"] = np.where(present[~bad], rr[~bad], np.nan)

    if strict and diags:
        raise DataValidationError(f"{len(diags)} invalid row(s)", diags + dup_diags)
    if strict and dup_diags:
        raise DuplicateKeyError(f"{len(dup_diags)} duplicate key(s)", dup_diags)
    all_diags = diags + dup_diags
    if all_diags:
        log.warning("dropped %d invalid row(s)", len(all_diags))
    return RecordStore(issuers, ratings, events, all_diags)


def ingest(issuers_path, ratings_path, events_path, strict: bool = True) -> RecordStore:
    """Read and validate the three CSV files.

    Parameters
    ----------
    issuers_path, ratings_path, events_path : path-like
        ``issuers.csv`` (issuer_id,name), ``ratings.csv``
        (issuer_id,date,rating,seniority) and ``events.csv``
        (issuer_id,event_type,date,recovery_rate).
    strict : bool
        Raise on any invalid row (default).  Otherwise invalid rows are
        dropped and listed in ``store.diagnostics``.

    Raises
    ------
    DataValidationError
        Malformed rows, bad dates, out-of-vocabulary values or recovery
        rates outside [0, 1].
    DuplicateKeyError
        Repeated issuer ids or repeated (issuer_id, seniority, date) ratings.
    """
    issuers = _read_csv(issuers_path, ISSUER_COLUMNS, "issuers")
    ratings = _read_csv(ratings_path, RATING_COLUMNS, "ratings")
    events = _read_csv(events_path, EVENT_COLUMNS, "events")
    store = _validate(issuers, ratings, events, strict)
    log.info("ingested %d issuers, %d ratings, %d events",
             len(store.issuers), len(store.ratings), len(store.events))
    return store


def ingest_dir(data_dir, strict: bool = True) -> RecordStore:
    d = Path(data_dir)
    return ingest(d / "issuers.csv", d / "ratings.csv", d / "events.csv", strict=strict)


# ---------------------------------------------------------------------------
# cohorts
# ---------------------------------------------------------------------------


def _last_per_group(idx: np.ndarray, keys: np.ndarray) -> np.ndarray:
    if idx.size == 0:
        return idx
    k = keys[idx]
    return idx[np.r_[k[1:] != k[:-1], True]]


def _first_per_group(idx: np.ndarray, keys: np.ndarray) -> np.ndarray:
    if idx.size == 0:
        return idx
    k = keys[idx]
    return idx[np.r_[True, k[1:] != k[:-1]]]


def _cohort_counts(store: RecordStore, spec: CohortSpec) -> tuple[int, int, int, np.ndarray]:
    s, e = _day(spec.start_date), _day(spec.window_end)

    # membership: latest snapshot on or before the start date
    last = _last_per_group(np.flatnonzero(store._r_day <= s), store._r_key)
    wanted = np.isin(store._r_rating[last], [RATING_SCALE.index(r) for r in spec.ratings])
    wanted &= store._r_sen[last] == SENIORITIES.index(spec.seniority)
    members = store._r_code[last[wanted]]
    snap_day = store._r_day[last[wanted]]

    # an event between the snapshot and the start ends the issuer's rated life
    prior = _last_per_group(np.flatnonzero(store._e_day < s), store._e_code)
    last_prior = np.full(store._n_issuers, _NO_PRIOR, dtype=np.int64)
    last_prior[store._e_code[prior]] = store._e_day[prior]
    keep = last_prior[members] < snap_day
    members = members[keep]

    # first event on or after the start decides the outcome
    first = _first_per_group(np.flatnonzero(store._e_day >= s), store._e_code)
    first_day = np.full(store._n_issuers, _NO_EVENT, dtype=np.int64)
    first_type = np.zeros(store._n_issuers, dtype=np.int64)
    first_rr = np.full(store._n_issuers, np.nan)
    codes = store._e_code[first]
    first_day[codes] = store._e_day[first]
    first_type[codes] = store._e_type[first]
    first_rr[codes] = store._e_rr[first]

    in_window = first_day[members] < e
    withdrawn = in_window & (first_type[members] == 1)
    defaulted = in_window & (first_type[members] == 0)
    recoveries = first_rr[members[defaulted]]
    return members.size, int(withdrawn.sum()), int(defaulted.sum()), recoveries[~np.isnan(recoveries)]


def build_cohort(store: RecordStore, spec: CohortSpec) -> CohortOutcome:
    """Count members, withdrawals and defaults of one cohort.

    Raises
    ------
    DegenerateCohortError
        If the cohort is empty or every member was withdrawn.
    """
    n_c, n_w, n_d, rr = _cohort_counts(store, spec)
    pd_ = default_rate(n_c, n_w, n_d)
    mean_rr = float(np.mean(rr)) if rr.size else None
    return CohortOutcome(n_c, n_w, n_d, pd_, mean_rr, int(rr.size))


def rolling_series(store: RecordStore, base_spec: CohortSpec, first_start: date,
                   last_start: date, step: int = 1) -> list[SeriesPoint]:
    """One cohort per ``step``-month start date from ``first_start`` to ``last_start``.

    Degenerate cohorts and cohorts without any recovery observation are
    returned with a flag instead of raising.
    """
    points = []
    for start in month_range(first_start, last_start, step):
        spec = base_spec.at(start)
        try:
            out = build_cohort(store, spec)
        except DegenerateCohortError as exc:
            flag = "empty" if exc.n_c == 0 else "degenerate"
            points.append(SeriesPoint(start, CohortOutcome(exc.n_c, exc.n_w, exc.n_d, None, None, 0), flag))
            continue
        points.append(SeriesPoint(start, out, None if out.mean_rr is not None else "no_recovery"))
    return points


def series_pairs(series: Iterable[SeriesPoint]) -> list[tuple[float, float]]:
    """(pd, mean_rr) of the unflagged points."""
    return [(p.outcome.pd, p.outcome.mean_rr) for p in series if p.usable]


def pearson(pairs) -> float:
    """Sample Pearson correlation of (x, y) pairs.

    Raises
    ------
    InsufficientDataError
        Fewer than two pairs.
    ZeroVarianceError
        One coordinate is constant.
    """
    arr = np.asarray(list(pairs), dtype=float).reshape(-1, 2)
    if arr.shape[0] < 2:
        raise InsufficientDataError(f"need at least 2 pairs, got {arr.shape[0]}")
    x, y = arr[:, 0], arr[:, 1]
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ZeroVarianceError("a coordinate has zero variance")
    x = x - x.mean()
    y = y - y.mean()
    r = float(np.dot(x, y) / np.sqrt(np.dot(x, x) * np.dot(y, y)))
    return min(1.0, max(-1.0, r))
