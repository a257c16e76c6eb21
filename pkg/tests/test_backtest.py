"""Split/window arithmetic, the precision metric, and the report pipeline."""

import sys
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import synthetic
from coindbn.backtest import (
    FEATURE_GROUPS,
    BacktestReport,
    BaselineResult,
    ConfusionCounts,
    CoinDataset,
    FeatureGroupSpec,
    GroupResult,
    assemble_dataset,
    group_matrix,
    precision,
    run_backtest,
    split,
    tally,
    windows,
)
from coindbn.errors import NoPositivePredictions, TooFewRows, TooShort
from coindbn.ingest import DOWN, UP, DirectionMatrix


def matrix_of(n, seed=0, names=("a", "b"), target=None):
    rng = np.random.default_rng(seed)
    states = rng.integers(0, 2, size=(n, len(names))).astype(np.int8)
    dates = [date(2019, 1, 1) + timedelta(days=i) for i in range(n)]
    return DirectionMatrix(dates, list(names), states, target or names[0])


SMALL_ARIMA_GRIDS = ((0, 1), (0, 1), (0,))
SMALL_SVR_GRIDS = ((1.0,), (0.1,), (0.1,))


class TestSplit:
    def test_hundred_rows(self):
        train, test = split(matrix_of(100))
        assert (len(train), len(test)) == (67, 33)

    def test_paper_row_count(self):
        train, test = split(matrix_of(1206))
        assert (len(train), len(test)) == (808, 398)

    def test_chronological_and_exhaustive(self):
        m = matrix_of(50)
        train, test = split(m)
        assert max(train.dates) < min(test.dates)
        assert train.dates + test.dates == m.dates
        np.testing.assert_array_equal(
            np.vstack([train.states, test.states]), m.states)

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            split(matrix_of(3))


class TestWindows:
    def test_exact_length_gives_one_window(self):
        m = matrix_of(5)
        out = windows(m)
        assert len(out) == 1
        np.testing.assert_array_equal(out[0][0].states, m.states)

    def test_paper_test_segment(self):
        assert len(windows(matrix_of(398))) == 394

    def test_stride_one(self):
        m = matrix_of(8)
        out = windows(m)
        assert len(out) == 4
        for k, (block, actual) in enumerate(out):
            np.testing.assert_array_equal(block.states, m.states[k:k + 5])
            assert actual == m.states[k + 4, 0]

    def test_too_short(self):
        with pytest.raises(TooShort):
            windows(matrix_of(4))


class TestPrecision:
    def test_formula(self):
        assert precision(ConfusionCounts(3, 1, 0, 0)) == 75.0

    def test_no_false_positives(self):
        assert precision(ConfusionCounts(7, 0, 2, 2)) == 100.0

    def test_no_positive_predictions(self):
        with pytest.raises(NoPositivePredictions):
            precision(ConfusionCounts(0, 0, 5, 5))

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ConfusionCounts(-1, 0, 0, 0)

    def test_tally_routes_every_outcome(self):
        counts = tally([UP, UP, DOWN, DOWN], [UP, DOWN, DOWN, UP])
        assert (counts.tp, counts.fp, counts.tn, counts.fn) == (1, 1, 1, 1)
        assert counts.windows == 4

    def test_tally_requires_equal_lengths(self):
        with pytest.raises(ValueError):
            tally([UP], [UP, DOWN])


class TestFeatureGroups:
    def test_paper_feature_counts(self):
        counts = {gid: spec.paper_feature_count
                  for gid, spec in FEATURE_GROUPS.items()}
        assert counts == {1: 5, 2: 11, 3: 15, 4: 23}

    def test_selection_flags(self):
        assert all(spec.include_ohlcv for spec in FEATURE_GROUPS.values())
        assert {g for g, s in FEATURE_GROUPS.items() if s.include_external} == {2, 4}
        assert {g for g, s in FEATURE_GROUPS.items() if s.include_indicators} == {3, 4}

    def test_column_selection(self):
        spec = FEATURE_GROUPS[2]
        assert spec.selects("price.close")
        assert spec.selects("macro.gold")
        assert spec.selects("social.tweet_count")
        assert not spec.selects("ti.rsi")
        assert not FEATURE_GROUPS[1].selects("macro.gold")
        assert FEATURE_GROUPS[4].selects("ti.rsi")


@pytest.fixture(scope="module")
def rich_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("rich")
    dates = synthetic.make_dates(90, weekdays_only=True)
    ohlcv = synthetic.realistic_ohlcv_csv(root / "coin.csv", 90, seed=3,
                                          dates=dates)
    macro = synthetic.write_macro_csv(root / "gold.csv",
                                      synthetic.random_walk(90, seed=4),
                                      dates=dates)
    tweets = synthetic.write_tweets_csv(root / "tweets.csv",
                                        [100 + (i * 37) % 91 for i in range(90)],
                                        dates=dates)
    return assemble_dataset("testcoin", ohlcv, [macro], tweets,
                            with_indicators=True)


class TestDatasetAssembly:
    def test_group_column_counts(self, rich_dataset):
        sizes = {gid: len(group_matrix(rich_dataset, spec).variables)
                 for gid, spec in FEATURE_GROUPS.items()}
        assert sizes == {1: 5, 2: 7, 3: 16, 4: 18}

    def test_groups_share_rows_and_target(self, rich_dataset):
        matrices = [group_matrix(rich_dataset, spec)
                    for spec in FEATURE_GROUPS.values()]
        for m in matrices:
            assert m.dates == matrices[0].dates
            assert m.target_name == "price.close"

    def test_actual_directions_identical_across_groups(self, rich_dataset):
        matrices = [group_matrix(rich_dataset, spec)
                    for spec in FEATURE_GROUPS.values()]
        for m in matrices[1:]:
            np.testing.assert_array_equal(
                m.states[:, m.target_index],
                matrices[0].states[:, matrices[0].target_index])


@pytest.fixture(scope="module")
def sticky_coin(tmp_path_factory):
    root = tmp_path_factory.mktemp("sticky")
    directions = synthetic.persistence_directions(300, stay=0.85, seed=5)
    closes = synthetic.closes_from_directions(directions)
    path = synthetic.write_ohlcv_csv(root / "sticky.csv", closes)
    return assemble_dataset("sticky", path, with_indicators=False)


class TestRunBacktest:
    def test_report_shape_and_counts(self, sticky_coin):
        report = run_backtest(sticky_coin, groups=(1,), restarts=2, seed=0,
                              arima_grids=SMALL_ARIMA_GRIDS,
                              svr_grids=SMALL_SVR_GRIDS)
        doc = report.to_document()
        assert set(doc) == {"coin", "rows", "groups", "baselines",
                            "best_performing", "notes"}
        assert doc["coin"] == "sticky"
        assert doc["rows"] == 299
        (group,) = doc["groups"]
        assert set(group) == {"id", "features", "precision", "tp", "fp",
                              "tn", "fn", "windows", "model_path"}
        assert group["id"] == 1
        assert group["features"] == 5
        assert group["windows"] == 95
        assert group["tp"] + group["fp"] + group["tn"] + group["fn"] == 95
        assert group["model_path"] == "model_g1.json"
        assert doc["best_performing"] == 1
        assert set(doc["baselines"]) == {"arima", "svr"}
        assert len(doc["baselines"]["arima"]["order"]) == 3
        assert set(doc["baselines"]["svr"]["params"]) == {
            "kernel", "c", "epsilon", "gamma"}

    def test_sticky_directions_are_predictable(self, sticky_coin):
        report = run_backtest(sticky_coin, groups=(1,), restarts=2, seed=0,
                              arima_grids=SMALL_ARIMA_GRIDS,
                              svr_grids=SMALL_SVR_GRIDS)
        (group,) = report.groups
        assert group.precision_or_none is not None
        assert group.precision_or_none > 60.0

    def test_byte_identical_reruns(self, sticky_coin):
        kwargs = dict(groups=(1,), restarts=2, seed=11,
                      arima_grids=SMALL_ARIMA_GRIDS,
                      svr_grids=SMALL_SVR_GRIDS)
        a = run_backtest(sticky_coin, **kwargs)
        b = run_backtest(sticky_coin, **kwargs)
        assert a.to_json() == b.to_json()
        assert a.to_text() == b.to_text()

    def test_missing_tweets_annotated_for_external_groups(self, rich_dataset,
                                                          tmp_path):
        dates = synthetic.make_dates(300, weekdays_only=True)
        directions = synthetic.persistence_directions(300, stay=0.85, seed=5)
        closes = synthetic.closes_from_directions(directions)
        ohlcv = synthetic.write_ohlcv_csv(tmp_path / "c.csv", closes, dates)
        macro = synthetic.write_macro_csv(
            tmp_path / "m.csv", synthetic.random_walk(300, seed=9), dates)
        dataset = assemble_dataset("tether", ohlcv, [macro],
                                   tweets_path=None, with_indicators=False)
        report = run_backtest(dataset, groups=(1, 2), restarts=2, seed=0,
                              arima_grids=SMALL_ARIMA_GRIDS,
                              svr_grids=SMALL_SVR_GRIDS)
        assert any("tweet" in note for note in report.notes)
        group2 = report.groups[1]
        assert group2.spec.id == 2
        assert not any(v.startswith("social.")
                       for v in group_matrix(dataset,
                                             FEATURE_GROUPS[2]).variables)
        # no tweets requested and no external groups -> no note
        quiet = run_backtest(dataset, groups=(1,), restarts=2, seed=0,
                             arima_grids=SMALL_ARIMA_GRIDS,
                             svr_grids=SMALL_SVR_GRIDS)
        assert quiet.notes == ()

    def test_unknown_group_rejected(self, sticky_coin):
        with pytest.raises(ValueError):
            run_backtest(sticky_coin, groups=(5,))
        with pytest.raises(ValueError):
            run_backtest(sticky_coin, groups=())


class TestReportRendering:
    def make_report(self, tp, fp, tn, fn):
        spec = FEATURE_GROUPS[1]
        group = GroupResult(spec=spec, feature_count=5,
                            counts=ConfusionCounts(tp, fp, tn, fn),
                            model=None, model_path="model_g1.json")
        arima = BaselineResult("arima", {"order": (1, 0, 0)},
                               ConfusionCounts(10, 10, 5, 5))
        svr = BaselineResult("svr", {"kernel": "rbf", "c": 1.0,
                                     "epsilon": 0.1, "gamma": 0.1},
                             ConfusionCounts(0, 0, 15, 15))
        return BacktestReport(coin="demo", rows=100, groups=(group,),
                              arima=arima, svr=svr, notes=("a note",))

    def test_na_never_rendered_as_number(self):
        report = self.make_report(0, 0, 10, 10)
        doc = report.to_document()
        assert doc["groups"][0]["precision"] == "N/A"
        assert doc["best_performing"] == "N/A"
        assert doc["baselines"]["svr"]["precision"] == "N/A"
        text = report.to_text()
        assert "N/A" in text

    def test_text_mirrors_table_columns(self):
        report = self.make_report(8, 2, 5, 5)
        text = report.to_text()
        header = text.splitlines()[0]
        assert header.index("DBN(1)") < header.index("Best")
        assert header.index("Best") < header.index("ARIMA")
        assert header.index("ARIMA") < header.index("SVR")
        assert "80.00" in text
        assert "note: a note" in text

    def test_best_performing_attains_max(self):
        spec1, spec2 = FEATURE_GROUPS[1], FEATURE_GROUPS[2]
        g1 = GroupResult(spec1, 5, ConfusionCounts(6, 4, 0, 0), None, "m1")
        g2 = GroupResult(spec2, 7, ConfusionCounts(9, 1, 0, 0), None, "m2")
        arima = BaselineResult("arima", {"order": (0, 0, 0)},
                               ConfusionCounts(1, 1, 0, 0))
        svr = BaselineResult("svr", {"kernel": "rbf", "c": 1.0,
                                     "epsilon": 0.1, "gamma": 0.1},
                             ConfusionCounts(1, 1, 0, 0))
        report = BacktestReport("demo", 50, (g1, g2), arima, svr)
        assert report.best_performing == 2
