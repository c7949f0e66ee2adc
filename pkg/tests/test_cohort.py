import math
from datetime import date

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from structural_recovery.cohort import (
    CohortSpec,
    RecordStore,
    build_cohort,
    default_rate,
    ingest,
    ingest_dir,
    pearson,
    rolling_series,
    series_pairs,
)
from structural_recovery.dates import month_range
from structural_recovery.exceptions import (
    DataValidationError,
    DegenerateCohortError,
    DuplicateKeyError,
    InsufficientDataError,
    ZeroVarianceError,
)
from structural_recovery.simulator import SyntheticDatasetConfig, generate_dataset, rating_params_for_b

import handmade

B2_COHORT = CohortSpec(date(2005, 1, 1), 1, {"B2"})


def store_of(*tables, strict=True):
    return RecordStore.from_frames(*tables, strict=strict)


class TestDefaultRate:
    def test_hundred_issuers(self):
        assert default_rate(100, 20, 8) == 0.1

    @pytest.mark.parametrize("counts", [(0, 0, 0), (5, 5, 0)])
    def test_degenerate(self, counts):
        with pytest.raises(DegenerateCohortError):
            default_rate(*counts)

    def test_inconsistent_counts(self):
        with pytest.raises(ValueError):
            default_rate(10, 6, 5)


class TestBuildCohort:
    def test_hundred_issuer_store(self):
        events = [(f"I{i:03d}", "withdrawal", "2005-02-01", None) for i in range(20)]
        events += [(f"I{i:03d}", "default", "2005-06-01", 0.5) for i in range(20, 28)]
        issuers = [f"I{i:03d}" for i in range(100)]
        out = build_cohort(store_of(*handmade.frames(events, issuers=issuers)), B2_COHORT)
        assert (out.n_c, out.n_w, out.n_d) == (100, 20, 8)
        assert out.pd == 0.1

    def test_six_issuer_hand_store(self):
        out = build_cohort(store_of(*handmade.six_issuers()), B2_COHORT)
        assert (out.n_c, out.n_w, out.n_d, out.n_survived) == (6, 1, 2, 3)
        assert out.pd == 0.4
        assert out.mean_rr == 0.5
        assert out.rr_count == 2

    def test_withdrawal_before_default_counts_as_withdrawal(self):
        events = [("A", "withdrawal", "2005-04-01", None), ("A", "default", "2005-10-01", 0.3),
                  ("B", "default", "2005-02-01", 0.7)]
        out = build_cohort(store_of(*handmade.frames(events)), B2_COHORT)
        assert (out.n_c, out.n_w, out.n_d) == (2, 1, 1)
        assert out.mean_rr == 0.7

    def test_same_day_tie_default_wins(self):
        events = [("A", "withdrawal", "2005-04-01", None), ("A", "default", "2005-04-01", 0.3),
                  ("B", "withdrawal", "2005-04-01", None)]
        out = build_cohort(store_of(*handmade.frames(events)), B2_COHORT)
        assert (out.n_w, out.n_d) == (1, 1)

    def test_only_first_default_counts(self):
        events = [("A", "default", "2005-03-01", 0.2), ("A", "default", "2005-09-01", 0.9),
                  ("B", "default", "2005-03-01", None)]
        out = build_cohort(store_of(*handmade.frames(events)), B2_COHORT)
        assert out.n_d == 2 and out.rr_count == 1 and out.mean_rr == 0.2

    def test_events_outside_window_ignored(self):
        events = [("A", "default", "2006-01-01", 0.2), ("B", "withdrawal", "2004-12-31", None)]
        ratings = [("A", "2005-01-01", "B2", "senior_secured"), ("B", "2004-06-01", "B2", "senior_secured")]
        out = build_cohort(store_of(*handmade.frames(events, ratings=ratings)), B2_COHORT)
        # A defaults on the exclusive window end; B left before the start
        assert (out.n_c, out.n_w, out.n_d) == (1, 0, 0)

    def test_last_day_of_window_counts(self):
        out = build_cohort(store_of(*handmade.frames([("A", "default", "2005-12-31", 0.1)])), B2_COHORT)
        assert out.n_d == 1

    def test_membership_uses_latest_snapshot(self):
        ratings = [
            ("A", "2003-01-01", "Caa1", "senior_secured"), ("A", "2004-01-01", "B2", "senior_secured"),
            ("B", "2004-01-01", "B2", "senior_secured"), ("B", "2004-12-01", "B3", "senior_secured"),
            ("C", "2005-01-02", "B2", "senior_secured"),
            ("D", "2004-01-01", "B2", "senior_unsecured"),
        ]
        tables = handmade.frames([], ratings=ratings, issuers=["A", "B", "C", "D"])
        store = store_of(*tables)
        assert build_cohort(store, B2_COHORT).n_c == 1
        assert build_cohort(store, CohortSpec(date(2005, 1, 1), 1, {"B2"}, "senior_unsecured")).n_c == 1
        assert build_cohort(store, CohortSpec(date(2005, 1, 1), 1, {"B2", "B3"})).n_c == 2

    def test_withdrawn_rating_excludes(self):
        ratings = [("A", "2004-01-01", "B2", "senior_secured"), ("A", "2004-06-01", "WR", "senior_secured"),
                   ("B", "2004-01-01", "B2", "senior_secured")]
        store = store_of(*handmade.frames([], ratings=ratings, issuers=["A", "B"]))
        assert build_cohort(store, B2_COHORT).n_c == 1

    def test_prior_event_after_snapshot_excludes(self):
        ratings = [("A", "2004-01-01", "B2", "senior_secured"), ("B", "2004-01-01", "B2", "senior_secured")]
        events = [("A", "withdrawal", "2004-08-01", None)]
        store = store_of(*handmade.frames(events, ratings=ratings, issuers=["A", "B"]))
        assert build_cohort(store, B2_COHORT).n_c == 1

    @pytest.mark.parametrize("events", [[], [("A", "withdrawal", "2005-02-01", None)]])
    def test_degenerate_cohorts_raise(self, events):
        issuers = ["A"]
        tables = handmade.frames(events, issuers=issuers, rating="B2" if events else "B1")
        with pytest.raises(DegenerateCohortError):
            build_cohort(store_of(*tables), B2_COHORT)

    def test_window_monotone_in_maturity(self):
        ds = generate_dataset(_synthetic_config(p_w=0.2, maturity=3, n_months=1))
        store = RecordStore.from_frames(ds.issuers, ds.ratings, ds.events)
        spec = CohortSpec(date(2003, 1, 1), 1, {"Caa1"})
        counts = []
        for T in (1, 2, 3, 4):
            out = build_cohort(store, CohortSpec(spec.start_date, T, spec.ratings))
            counts.append(out.n_d + out.n_w)
            assert out.n_c == 500
        assert counts == sorted(counts)

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_row_order_never_matters(self, data):
        issuers = [f"P{i}" for i in range(8)]
        row = st.tuples(
            st.sampled_from(issuers),
            st.sampled_from(["default", "withdrawal"]),
            st.integers(-40, 420).map(lambda k: (pd.Timestamp("2005-01-01") + pd.Timedelta(days=k)).date().isoformat()),
            st.one_of(st.none(), st.sampled_from([0.0, 0.25, 0.5, 1.0])),
        ).map(lambda r: r if r[1] == "default" else (r[0], r[1], r[2], None))
        events = data.draw(st.lists(row, max_size=20))
        shuffled = data.draw(st.permutations(events))
        ratings = [(i, "2004-12-15", "B2", "senior_secured") for i in issuers]
        results = []
        for evs in (events, shuffled):
            store = store_of(*handmade.frames(list(evs), ratings=ratings, issuers=issuers))
            try:
                results.append(build_cohort(store, B2_COHORT))
            except DegenerateCohortError as exc:
                results.append((exc.n_c, exc.n_w, exc.n_d))
        assert results[0] == results[1]
        if not isinstance(results[0], tuple):
            out = results[0]
            assert out.n_c == out.n_d + out.n_w + out.n_survived
            assert out.pd * (out.n_c - out.n_w) == pytest.approx(out.n_d, abs=1e-12)


class TestIngest:
    def test_hand_files(self, tmp_path):
        store = ingest_dir(handmade.write(tmp_path, handmade.six_issuers()))
        assert len(store) == 6 and len(store.events) == 3
        assert build_cohort(store, B2_COHORT).pd == 0.4

    def test_empty_events_file(self, tmp_path):
        d = handmade.write(tmp_path, handmade.frames([], issuers=["A"]))
        store = ingest_dir(d)
        assert len(store.events) == 0
        assert build_cohort(store, B2_COHORT).n_survived == 1

    def test_recovery_above_one_rejected(self, tmp_path):
        tables = handmade.frames([("A", "default", "2005-03-01", 1.2)])
        d = handmade.write(tmp_path, tables)
        with pytest.raises(DataValidationError) as err:
            ingest_dir(d)
        assert "events line 2" in err.value.diagnostics[0]
        assert "outside [0, 1]" in err.value.diagnostics[0]
        lenient = ingest_dir(d, strict=False)
        assert len(lenient.events) == 0 and len(lenient.diagnostics) == 1

    @pytest.mark.parametrize("bad", [
        ("events", ("A", "default", "2005-13-01", 0.5)),
        ("events", ("A", "default", "05/03/2005", 0.5)),
        ("events", ("A", "bankrupt", "2005-03-01", 0.5)),
        ("events", ("A", "withdrawal", "2005-03-01", 0.5)),
        ("events", ("A", "default", "2005-03-01", "n/a")),
        ("events", ("Z", "default", "2005-03-01", 0.5)),
        ("ratings", ("A", "2005-01-01", "BBB", "senior_secured")),
        ("ratings", ("A", "2005-01-01", "B2", "junior")),
    ])
    def test_invalid_rows(self, tmp_path, bad):
        issuers, ratings, events = handmade.frames([], issuers=["A"])
        table, row = bad
        if table == "events":
            events = pd.DataFrame([row], columns=events.columns)
        else:
            ratings = pd.concat([ratings, pd.DataFrame([row], columns=ratings.columns)])
        d = handmade.write(tmp_path, (issuers, ratings, events))
        with pytest.raises(DataValidationError) as err:
            ingest_dir(d)
        assert not isinstance(err.value, DuplicateKeyError)

    def test_duplicate_rating_key(self, tmp_path):
        ratings = [("A", "2005-01-01", "B2", "senior_secured"), ("A", "2005-01-01", "B3", "senior_secured")]
        d = handmade.write(tmp_path, handmade.frames([], ratings=ratings, issuers=["A"]))
        with pytest.raises(DuplicateKeyError):
            ingest_dir(d)

    def test_duplicate_issuer(self, tmp_path):
        d = handmade.write(tmp_path, handmade.frames([], issuers=["A", "A"]))
        with pytest.raises(DuplicateKeyError):
            ingest_dir(d)

    def test_same_date_other_seniority_is_fine(self, tmp_path):
        ratings = [("A", "2005-01-01", "B2", "senior_secured"), ("A", "2005-01-01", "B3", "senior_unsecured")]
        store = ingest_dir(handmade.write(tmp_path, handmade.frames([], ratings=ratings, issuers=["A"])))
        assert len(store.ratings) == 2

    def test_missing_column(self, tmp_path):
        d = handmade.write(tmp_path, handmade.six_issuers())
        (d / "events.csv").write_text("issuer_id,event_type,date\n")
        with pytest.raises(DataValidationError):
            ingest_dir(d)

    def test_headerless_empty_file(self, tmp_path):
        d = handmade.write(tmp_path, handmade.six_issuers())
        (d / "events.csv").write_text("")
        with pytest.raises(DataValidationError):
            ingest(d / "issuers.csv", d / "ratings.csv", d / "events.csv")

    def test_synthetic_round_trip_is_lossless(self, tmp_path):
        ds = generate_dataset(_synthetic_config(p_w=0.1, p_missing_recovery=0.2, n_months=3))
        store = ingest_dir(ds.write(tmp_path)["issuers"].parent)
        assert len(store.issuers) == ds.manifest["row_counts"]["issuers"]
        assert len(store.ratings) == ds.manifest["row_counts"]["ratings"]
        assert len(store.events) == ds.manifest["row_counts"]["events"]
        assert store.diagnostics == ()
        got = store.events["recovery_rate"].to_numpy()
        want = ds.events["recovery_rate"].to_numpy()
        assert np.array_equal(got, want, equal_nan=True)


def _synthetic_config(p_w, maturity=1, n_months=24, ratings=("Caa1",), p_missing_recovery=0.0, seed=17):
    first = date(2003, 1, 1)
    return SyntheticDatasetConfig(
        rating_params=rating_params_for_b(0.8, maturity, target_pds={r: 0.15 for r in ratings}),
        p_w=p_w,
        issuers_per_rating=500,
        start_dates=month_range(first, date(first.year + (n_months - 1) // 12, (n_months - 1) % 12 + 1, 1)),
        seed=seed,
        p_missing_recovery=p_missing_recovery,
    )


class TestRollingSeries:
    def test_decade_of_monthly_windows(self):
        store = store_of(*handmade.six_issuers())
        series = rolling_series(store, B2_COHORT, date(2000, 1, 1), date(2010, 1, 1))
        assert len(series) == 121
        last = B2_COHORT.at(series[-1].start_date)
        assert last.window_end == date(2011, 1, 1)  # exclusive: the window ends 2010-12-31
        # H2's default on 2005-07-22 is in every window starting 2005-01 to 2005-07
        assert [p.start_date.month for p in series if p.usable] == [1, 2, 3, 4, 5, 6, 7]
        assert all(p.flag == "empty" for p in series[:60])

    def test_single_start(self):
        store = store_of(*handmade.six_issuers())
        (point,) = rolling_series(store, B2_COHORT, date(2005, 1, 1), date(2005, 1, 1))
        assert point.usable and point.outcome.pd == 0.4

    def test_flags(self):
        store = store_of(*handmade.frames([("A", "withdrawal", "2005-02-01", None)]))
        (w,) = rolling_series(store, B2_COHORT, date(2005, 1, 1), date(2005, 1, 1))
        assert w.flag == "degenerate" and w.outcome.pd is None
        store = store_of(*handmade.frames([("B", "default", "2005-02-01", None)]))
        (nr,) = rolling_series(store, B2_COHORT, date(2005, 1, 1), date(2005, 1, 1))
        assert nr.flag == "no_recovery" and nr.outcome.pd == 1.0
        assert series_pairs([w, nr]) == []

    def test_bad_range(self):
        with pytest.raises(ValueError):
            rolling_series(store_of(*handmade.six_issuers()), B2_COHORT, date(2005, 2, 1), date(2005, 1, 1))

    def test_synthetic_pd_tracks_ground_truth(self):
        ds = generate_dataset(_synthetic_config(p_w=0.1))
        store = RecordStore.from_frames(ds.issuers, ds.ratings, ds.events)
        series = rolling_series(store, CohortSpec(date(2003, 1, 1), 1, {"Caa1"}), date(2003, 1, 1), date(2004, 12, 1))
        assert len(series) == 24
        truth = {c["start_date"]: c for c in ds.manifest["cohorts"]}
        for p in series:
            c = truth[p.start_date.isoformat()]
            out = p.outcome
            assert (out.n_c, out.n_w, out.n_d) == (c["n_issuers"], c["n_withdrawals"], c["n_defaults"])
            exposed = out.n_c - out.n_w
            q = c["conditional_pd"]
            assert abs(out.pd - q) <= 3 * math.sqrt(q * (1 - q) / exposed) + 1e-12


class TestPearson:
    def test_perfect_positive(self):
        assert pearson([(1, 2), (2, 4), (3, 6)]) == 1.0

    def test_perfect_negative(self):
        assert pearson([(1, 6), (2, 4), (3, 2)]) == -1.0

    def test_insufficient(self):
        with pytest.raises(InsufficientDataError):
            pearson([(1, 2)])
        with pytest.raises(InsufficientDataError):
            pearson([])

    def test_zero_variance(self):
        with pytest.raises(ZeroVarianceError):
            pearson([(1, 2), (1, 3), (1, 4)])

    @settings(max_examples=100)
    @given(
        st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=3, max_size=30),
        st.floats(0.01, 100), st.floats(-50, 50), st.floats(0.01, 100), st.floats(-50, 50),
    )
    def test_bounded_and_affine_invariant(self, pairs, a, b, c, d):
        arr = np.array(pairs)
        if np.ptp(arr[:, 0]) < 1e-3 or np.ptp(arr[:, 1]) < 1e-3:
            return
        r = pearson(arr)
        assert -1.0 <= r <= 1.0
        scaled = np.column_stack([a * arr[:, 0] + b, c * arr[:, 1] + d])
        assert pearson(scaled) == pytest.approx(r, abs=1e-9)

    def test_synthetic_market_driven_is_negative(self):
        ds = generate_dataset(_synthetic_config(p_w=0.1, n_months=36))
        store = RecordStore.from_frames(ds.issuers, ds.ratings, ds.events)
        series = rolling_series(store, CohortSpec(date(2003, 1, 1), 1, {"Caa1"}), date(2003, 1, 1), date(2005, 12, 1))
        assert pearson(series_pairs(series)) < 0
