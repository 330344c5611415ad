"""CSV loading, dataset recipes, splitting, normalization, snapshots."""

import numpy as np
import pytest

from mnam.data import (
    Dataset,
    load_csv,
    load_snapshot,
    normalize,
    preprocess_generic,
    preprocess_gmsc,
    preprocess_taiwan,
    save_snapshot,
    split,
)
from mnam.errors import DataError
from mnam.model import FeatureMeta

TAIWAN_NAMED_HEADER = (
    "ID,LIMIT_BAL,SEX,EDUCATION,MARRIAGE,AGE,PAY_0,PAY_2,PAY_3,PAY_4,PAY_5,PAY_6,"
    "BILL_AMT1,BILL_AMT2,BILL_AMT3,BILL_AMT4,BILL_AMT5,BILL_AMT6,"
    "PAY_AMT1,PAY_AMT2,PAY_AMT3,PAY_AMT4,PAY_AMT5,PAY_AMT6,default.payment.next.month"
)


def taiwan_rows(n, seed=0):
    """Synthesize rows in the named Taiwan schema; labels alternate."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        limit = 10000 + 1000 * i
        demo = [1 + i % 2, 2, 1, 30 + i]
        pays = rng.integers(-2, 9, 6).tolist()
        bills = rng.integers(0, 50000, 6).tolist()
        amts = rng.integers(0, 20000, 6).tolist()
        label = i % 2
        rows.append([i + 1, limit, *demo, *pays, *bills, *amts, label])
    return rows


def write_taiwan_named(path, n=8):
    rows = taiwan_rows(n)
    lines = [TAIWAN_NAMED_HEADER] + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return rows


def write_taiwan_xcoded(path, n=8):
    """The spreadsheet-export variant: X1..X23 headers plus a sub-header row."""
    rows = taiwan_rows(n)
    header = "," + ",".join(f"X{k}" for k in range(1, 24)) + ",Y"
    subheader = TAIWAN_NAMED_HEADER  # the human-readable names ride in row one
    lines = [header, subheader] + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return rows


GMSC_HEADER = (
    ",SeriousDlqin2yrs,RevolvingUtilizationOfUnsecuredLines,age,"
    "NumberOfTime30-59DaysPastDueNotWorse,DebtRatio,MonthlyIncome,"
    "NumberOfOpenCreditLinesAndLoans,NumberOfTimes90DaysLate,"
    "NumberRealEstateLoansOrLines,NumberOfTime60-89DaysPastDueNotWorse,"
    "NumberOfDependents"
)


def write_gmsc(path, rows):
    lines = [GMSC_HEADER] + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


class TestLoadCsv:
    def test_exact_values(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("a,b,c\n1,2.5,3\n4,5,6\n7,8,9.25\n")
        raw = load_csv(f)
        assert raw.columns == ["a", "b", "c"]
        np.testing.assert_array_equal(raw.values,
                                      [[1, 2.5, 3], [4, 5, 6], [7, 8, 9.25]])
        assert not raw.flagged.any()

    def test_header_only_rejected(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("a,b,c\n")
        with pytest.raises(DataError, match="no data rows"):
            load_csv(f)

    def test_empty_file_rejected(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("")
        with pytest.raises(DataError, match="empty"):
            load_csv(f)

    def test_blank_cell_flags_row(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("a,b\n1,2\n3,\n5,6\n")
        raw = load_csv(f)
        np.testing.assert_array_equal(raw.flagged, [False, True, False])

    def test_unparseable_cell_flags_row(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("a,b\n1,2\noops,4\n")
        raw = load_csv(f)
        np.testing.assert_array_equal(raw.flagged, [False, True])

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_csv(tmp_path / "nope.csv")

    def test_missing_label_column(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("a,b\n1,2\n")
        with pytest.raises(DataError, match="label column"):
            load_csv(f, label_column="target")


class TestTaiwanRecipe:
    def test_named_schema(self, tmp_path):
        f = tmp_path / "taiwan.csv"
        rows = write_taiwan_named(f)
        ds = preprocess_taiwan(load_csv(f), verify_counts=False)
        assert ds.n_features == 19
        assert ds.feature_names[:2] == ["LIMIT_BAL", "PAY_0"]
        assert ds.feature_names[-1] == "PAY_AMT6"
        # demographic columns are really gone and untouched values survive
        np.testing.assert_array_equal(ds.features[:, 0], [r[1] for r in rows])
        np.testing.assert_array_equal(ds.labels, [r[-1] for r in rows])

    def test_xcoded_schema_matches_named(self, tmp_path):
        a, b = tmp_path / "named.csv", tmp_path / "xcoded.csv"
        write_taiwan_named(a)
        write_taiwan_xcoded(b)
        da = preprocess_taiwan(load_csv(a), verify_counts=False)
        db = preprocess_taiwan(load_csv(b), verify_counts=False)
        assert da.feature_names == db.feature_names
        np.testing.assert_array_equal(da.features, db.features)
        np.testing.assert_array_equal(da.labels, db.labels)

    def test_count_verification(self, tmp_path):
        f = tmp_path / "taiwan.csv"
        write_taiwan_named(f, n=8)
        with pytest.raises(DataError, match="expected 30000"):
            preprocess_taiwan(load_csv(f))

    def test_schema_mismatch_lists_columns(self, tmp_path):
        f = tmp_path / "taiwan.csv"
        header = TAIWAN_NAMED_HEADER.replace("PAY_3,", "").replace(",BILL_AMT2", ",WEIRD")
        f.write_text(header + "\n" + ",".join(["1"] * 23) + "\n")
        with pytest.raises(DataError) as exc:
            preprocess_taiwan(load_csv(f), verify_counts=False)
        message = str(exc.value)
        assert "PAY_3" in message and "BILL_AMT2" in message and "WEIRD" in message


class TestGmscRecipe:
    def rows(self):
        # idx, label, x1, age, 30-59, debt, income, open, 90d, realestate, 60-89, deps
        return [
            [1, 0, 0.10, 40, 0, 0.30, 5000, 5, 0, 1, 0, 2],
            [2, 1, 0.90, 55, 98, 0.80, 3000, 8, 96, 0, 2, 1],
            [3, 0, 0.40, 30, 1, 0.20, "", 4, 0, 2, 0, 0],  # missing income
            [4, 1, 0.70, 45, 3, 0.55, 4000, 6, 1, 1, 1, 3],
            [5, 0, 0.20, 60, 0, 0.10, 9000, 3, 0, 0, 0, 0],
        ]

    def test_missing_rows_dropped_and_pastdues_clipped(self, tmp_path):
        f = tmp_path / "gmsc.csv"
        write_gmsc(f, self.rows())
        ds = preprocess_gmsc(load_csv(f), verify_counts=False)
        assert ds.n == 4  # the incomplete row is gone
        assert ds.n_features == 9
        assert "age" not in ds.feature_names
        thirty = ds.feature_names.index("NumberOfTime30-59DaysPastDueNotWorse")
        ninety = ds.feature_names.index("NumberOfTimes90DaysLate")
        assert ds.features[1, thirty] == 8.0  # 98 clipped
        assert ds.features[1, ninety] == 8.0  # 96 clipped

    def test_shared_group_is_the_three_counters(self, tmp_path):
        f = tmp_path / "gmsc.csv"
        write_gmsc(f, self.rows())
        ds = preprocess_gmsc(load_csv(f), verify_counts=False)
        assert len(ds.shared_groups) == 1
        names = [ds.feature_names[i] for i in ds.shared_groups[0]]
        assert set(names) == {
            "NumberOfTime30-59DaysPastDueNotWorse",
            "NumberOfTimes90DaysLate",
            "NumberOfTime60-89DaysPastDueNotWorse",
        }

    def test_count_verification(self, tmp_path):
        f = tmp_path / "gmsc.csv"
        write_gmsc(f, self.rows())
        with pytest.raises(DataError, match="expected 120269"):
            preprocess_gmsc(load_csv(f))


class TestGenericRecipe:
    def test_basic(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("keep,drop_me,also,target\n1,9,5,0\n2,9,6,1\n3,9,7,0\n4,9,8,1\n")
        ds = preprocess_generic(load_csv(f), "target", drop=["drop_me"])
        assert ds.feature_names == ["keep", "also"]
        assert ds.n == 4

    def test_clip_and_groups(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,b,y\n0,1,0\n12,3,1\n2,5,0\n3,9,1\n")
        ds = preprocess_generic(load_csv(f), "y", clip_upper={"a": 5.0},
                                shared_groups=[["a", "b"]])
        assert ds.features[:, 0].max() == 5.0
        assert ds.shared_groups == [[0, 1]]

    def test_unknown_label(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,y\n1,0\n2,1\n")
        with pytest.raises(DataError, match="label column"):
            preprocess_generic(load_csv(f), "target")

    def test_nonbinary_labels_rejected(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,y\n1,0\n2,2\n")
        with pytest.raises(DataError, match="labels must be 0/1"):
            preprocess_generic(load_csv(f), "y")


def toy_dataset(n=100, p=3, seed=0, groups=()):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 10, (n, p))
    y = rng.integers(0, 2, n)
    y[0], y[1] = 0, 1
    meta = [FeatureMeta(f"f{i}", i, float(X[:, i].min()), float(X[:, i].max()))
            for i in range(p)]
    return Dataset(X, y, meta, shared_groups=[list(g) for g in groups])


class TestSplit:
    def test_seventy_five_twenty_five(self):
        train, test = split(toy_dataset(100), 0.75, seed=1)
        assert train.n == 75 and test.n == 25

    def test_same_seed_same_split(self):
        data = toy_dataset(80)
        a_train, a_test = split(data, 0.6, seed=5)
        b_train, b_test = split(data, 0.6, seed=5)
        np.testing.assert_array_equal(a_train.features, b_train.features)
        np.testing.assert_array_equal(a_test.labels, b_test.labels)

    def test_union_is_exhaustive_and_disjoint(self):
        data = toy_dataset(60)
        train, test = split(data, 0.7, seed=2)
        combined = np.vstack([train.features, test.features])
        assert combined.shape == data.features.shape
        # every original row appears exactly once
        original = {tuple(r) for r in data.features}
        recombined = [tuple(r) for r in combined]
        assert len(recombined) == len(set(recombined))
        assert set(recombined) == original

    def test_empty_side_rejected(self):
        with pytest.raises(DataError):
            split(toy_dataset(3), 0.01, seed=0)
        with pytest.raises(DataError):
            split(toy_dataset(3), 0.99, seed=0)


class TestNormalize:
    def test_unit_interval_from_integer_range(self):
        X = np.arange(9, dtype=float)[:, None]
        y = np.r_[np.zeros(4, dtype=int), np.ones(5, dtype=int)]
        data = Dataset(X, y, [FeatureMeta("c", 0, 0.0, 8.0)])
        train_n, _ = normalize(data)
        np.testing.assert_allclose(train_n.features[:, 0], X[:, 0] / 8.0)
        assert train_n.meta[0].raw_min == 0.0 and train_n.meta[0].raw_max == 8.0

    def test_test_values_clipped(self):
        train = toy_dataset(50, p=1, seed=3)
        test = toy_dataset(20, p=1, seed=4)
        test.features[0, 0] = 1e9
        test.features[1, 0] = -1e9
        _, test_n = normalize(train, test)
        assert test_n.features[0, 0] == 1.0
        assert test_n.features[1, 0] == 0.0
        assert test_n.features.min() >= 0.0 and test_n.features.max() <= 1.0

    def test_shared_group_uses_group_range(self):
        X = np.column_stack([np.linspace(0, 8, 9), np.linspace(0, 6, 9)])
        y = np.r_[np.zeros(4, dtype=int), np.ones(5, dtype=int)]
        meta = [FeatureMeta("a", 0, 0.0, 8.0), FeatureMeta("b", 1, 0.0, 6.0)]
        data = Dataset(X, y, meta, shared_groups=[[0, 1]])
        train_n, _ = normalize(data)
        # both columns scaled by the shared [0, 8] range
        assert train_n.features[-1, 0] == 1.0
        assert train_n.features[-1, 1] == pytest.approx(6.0 / 8.0)
        assert train_n.meta[0].raw_min == train_n.meta[1].raw_min == 0.0
        assert train_n.meta[0].raw_max == train_n.meta[1].raw_max == 8.0
        assert train_n.meta[0].domain_lo == train_n.meta[1].domain_lo
        assert train_n.meta[0].domain_hi == train_n.meta[1].domain_hi

    def test_stats_fitted_on_train_only(self):
        train = toy_dataset(50, p=2, seed=5)
        test = toy_dataset(50, p=2, seed=6)
        train_n, _ = normalize(train, test)
        # recompute from the raw training matrix; must match exactly
        for i, (lo, hi) in enumerate(train_n.normalization):
            assert lo == train.features[:, i].min()
            assert hi == train.features[:, i].max()

    def test_zero_range_maps_to_constant_zero(self):
        X = np.column_stack([np.full(10, 7.0), np.arange(10, dtype=float)])
        y = np.r_[np.zeros(5, dtype=int), np.ones(5, dtype=int)]
        meta = [FeatureMeta("const", 0, 6.9, 7.1), FeatureMeta("var", 1, 0.0, 9.0)]
        train_n, _ = normalize(Dataset(X, y, meta))
        assert np.all(train_n.features[:, 0] == 0.0)


class TestSnapshot:
    def test_round_trip(self, tmp_path):
        data = toy_dataset(40, p=2, seed=7, groups=[[0, 1]])
        path = tmp_path / "snap.npz"
        save_snapshot(data, path)
        again = load_snapshot(path)
        np.testing.assert_array_equal(again.features, data.features)
        np.testing.assert_array_equal(again.labels, data.labels)
        assert again.shared_groups == data.shared_groups
        assert [vars(m) for m in again.meta] == [vars(m) for m in data.meta]

    def test_tamper_detection(self, tmp_path):
        data = toy_dataset(20, p=2, seed=8)
        path = tmp_path / "snap.npz"
        save_snapshot(data, path)
        with np.load(path, allow_pickle=False) as z:
            payload = dict(z)
        payload["features"] = payload["features"] + 1.0
        np.savez_compressed(path, **payload)
        with pytest.raises(DataError, match="content-hash"):
            load_snapshot(path)


class TestPipelineReproducibility:
    def test_bit_for_bit(self, tmp_path):
        f = tmp_path / "gmsc.csv"
        write_gmsc(f, TestGmscRecipe().rows() * 10)
        outputs = []
        for _ in range(2):
            ds = preprocess_gmsc(load_csv(f), verify_counts=False)
            train, test = split(ds, 0.75, seed=3)
            train_n, test_n = normalize(train, test)
            outputs.append((train_n.features.copy(), test_n.features.copy(),
                            train_n.labels.copy()))
        np.testing.assert_array_equal(outputs[0][0], outputs[1][0])
        np.testing.assert_array_equal(outputs[0][1], outputs[1][1])
        np.testing.assert_array_equal(outputs[0][2], outputs[1][2])

    def test_pair_members_share_normalization(self, tmp_path):
        f = tmp_path / "gmsc.csv"
        write_gmsc(f, TestGmscRecipe().rows() * 6)
        ds = preprocess_gmsc(load_csv(f), verify_counts=False)
        train, test = split(ds, 0.75, seed=0)
        train_n, _ = normalize(train, test)
        group = train_n.shared_groups[0]
        stats = {train_n.normalization[i] for i in group}
        assert len(stats) == 1  # identical (min, max) across the group
