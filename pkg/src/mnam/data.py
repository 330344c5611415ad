"""CSV ingestion, dataset recipes, splitting, and normalization.

Two credit datasets get dedicated recipes.  The Taiwan card-default export
keeps the credit limit, the six repayment-status codes, and the twelve
billing/payment amounts (19 features), dropping the demographic columns.
The GMSC export drops the row index and age, removes rows with missing
values, and truncates the three past-due counters at eight.

Column headers are matched case- and punctuation-insensitively, and the
x1..x23 / x1..x10 positional codes used by some exports are accepted as
aliases, so files from either common source load unchanged.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError
from .model import FeatureMeta

__all__ = [
    "RawTable",
    "Dataset",
    "RecipeSpec",
    "TAIWAN_RECIPE",
    "GMSC_RECIPE",
    "load_csv",
    "preprocess_taiwan",
    "preprocess_gmsc",
    "preprocess_generic",
    "split",
    "normalize",
    "save_snapshot",
    "load_snapshot",
]

log = logging.getLogger(__name__)


def _norm(name: str) -> str:
    """Case/punctuation-insensitive key for header matching."""
    return re.sub(r"[^0-9a-z]", "", str(name).lower())


@dataclass
class RawTable:
    """Parsed CSV: float values with NaN where a cell failed to parse."""

    columns: list[str]
    values: np.ndarray  # (n, m)

    @property
    def flagged(self) -> np.ndarray:
        """Rows containing at least one unparseable or missing cell."""
        return np.isnan(self.values).any(axis=1)


@dataclass
class Dataset:
    """Numeric feature matrix with binary labels and per-feature metadata.

    shared_groups lists index groups that must share min/max during
    normalization so dominance pairs compare like raw units.
    """

    features: np.ndarray
    labels: np.ndarray
    meta: list[FeatureMeta]
    shared_groups: list[list[int]] = field(default_factory=list)
    normalized: bool = False

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2:
            raise DataError("feature matrix must be 2-d")
        if len(self.labels) != len(self.features):
            raise DataError("labels and features disagree on row count")
        if len(self.meta) != self.features.shape[1]:
            raise DataError("feature metadata does not match matrix width")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def feature_names(self) -> list[str]:
        return [m.name for m in self.meta]

    @property
    def normalization(self) -> list[tuple[float, float]]:
        return [(m.raw_min, m.raw_max) for m in self.meta]


@dataclass
class RecipeSpec:
    """Declarative description of one preprocessing recipe."""

    name: str
    feature_order: list[str]
    aliases: dict[str, str]      # normalized header -> canonical feature name
    label_aliases: set[str]
    drop_aliases: set[str]
    clip_upper: dict[str, float] = field(default_factory=dict)
    shared_groups: list[list[str]] = field(default_factory=list)
    expected_rows: int | None = None
    expected_positives: int | None = None


def _alias_pairs(pairs) -> dict[str, str]:
    out = {}
    for canonical, extra in pairs:
        out[_norm(canonical)] = canonical
        for alias in extra:
            out[_norm(alias)] = canonical
    return out


_TAIWAN_FEATURES = (
    [("LIMIT_BAL", ["x1"]), ("PAY_0", ["x6"])]
    + [(f"PAY_{k}", [f"x{5 + k}"]) for k in range(2, 7)]       # x7..x11
    + [(f"BILL_AMT{k}", [f"x{11 + k}"]) for k in range(1, 7)]  # x12..x17
    + [(f"PAY_AMT{k}", [f"x{17 + k}"]) for k in range(1, 7)]   # x18..x23
)

TAIWAN_RECIPE = RecipeSpec(
    name="taiwan",
    feature_order=[c for c, _ in _TAIWAN_FEATURES],
    aliases=_alias_pairs(_TAIWAN_FEATURES),
    label_aliases={_norm(a) for a in ["default payment next month", "default.payment.next.month", "y", "default"]},
    drop_aliases={_norm(a) for a in ["ID", "SEX", "EDUCATION", "MARRIAGE", "AGE",
                                     "x2", "x3", "x4", "x5", "Unnamed: 0", ""]},
    expected_rows=30_000,
    expected_positives=6_639,
)

_GMSC_FEATURES = [
    ("RevolvingUtilizationOfUnsecuredLines", ["x1"]),
    ("NumberOfTime30-59DaysPastDueNotWorse", ["x3"]),
    ("DebtRatio", ["x4"]),
    ("MonthlyIncome", ["x5"]),
    ("NumberOfOpenCreditLinesAndLoans", ["x6"]),
    ("NumberOfTimes90DaysLate", ["x7"]),
    ("NumberRealEstateLoansOrLines", ["x8"]),
    ("NumberOfTime60-89DaysPastDueNotWorse", ["x9"]),
    ("NumberOfDependents", ["x10"]),
]

# Counters with the same past-due semantics share a normalization domain so
# their derivative gaps compare like units.
_GMSC_PASTDUE = [
    "NumberOfTime30-59DaysPastDueNotWorse",
    "NumberOfTimes90DaysLate",
    "NumberOfTime60-89DaysPastDueNotWorse",
]

GMSC_RECIPE = RecipeSpec(
    name="gmsc",
    feature_order=[c for c, _ in _GMSC_FEATURES],
    aliases=_alias_pairs(_GMSC_FEATURES),
    label_aliases={_norm("SeriousDlqin2yrs"), _norm("y")},
    drop_aliases={_norm(a) for a in ["age", "x2", "ID", "Unnamed: 0", ""]},
    clip_upper={name: 8.0 for name in _GMSC_PASTDUE},
    shared_groups=[list(_GMSC_PASTDUE)],
    expected_rows=120_269,
    expected_positives=8_357,
)

RECIPES = {"taiwan": TAIWAN_RECIPE, "gmsc": GMSC_RECIPE}


def load_csv(path, label_column: str | None = None) -> RawTable:
    """Read a CSV with a header row into a float table.

    Cells that cannot be parsed as numbers (including empty and NA cells)
    become NaN; the table's `flagged` property marks the affected rows.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataError(f"empty data file (no header row): {path}") from None
    if df.shape[0] == 0:
        raise DataError(f"no data rows in {path}")
    columns = [str(c).strip() for c in df.columns]
    if label_column is not None and label_column not in columns:
        raise DataError(
            f"label column {label_column!r} not found in {path}; "
            f"available: {columns}"
        )
    values = np.column_stack([
        pd.to_numeric(df.iloc[:, j], errors="coerce").to_numpy(dtype=float)
        for j in range(df.shape[1])
    ])
    return RawTable(columns, values)


def _resolve_columns(raw: RawTable, recipe: RecipeSpec):
    """Map canonical feature names to raw column indices, or fail loudly."""
    feature_cols: dict[str, int] = {}
    label_col = None
    unexpected = []
    for j, col in enumerate(raw.columns):
        key = _norm(col)
        if key in recipe.label_aliases:
            label_col = j
        elif key in recipe.aliases:
            canonical = recipe.aliases[key]
            if canonical in feature_cols:
                raise DataError(f"{recipe.name}: duplicate column for {canonical!r}")
            feature_cols[canonical] = j
        elif key in recipe.drop_aliases:
            continue
        else:
            unexpected.append(col)
    missing = [c for c in recipe.feature_order if c not in feature_cols]
    if missing or label_col is None or unexpected:
        parts = [f"{recipe.name}: column mismatch against the expected schema."]
        if missing:
            parts.append(f"  missing feature columns: {missing}")
        if label_col is None:
            parts.append("  missing label column")
        if unexpected:
            parts.append(f"  unrecognized columns: {unexpected}")
        raise DataError("\n".join(parts))
    return feature_cols, label_col


def _build_dataset(raw: RawTable, recipe: RecipeSpec, verify_counts: bool) -> Dataset:
    feature_cols, label_col = _resolve_columns(raw, recipe)
    col_idx = [feature_cols[c] for c in recipe.feature_order] + [label_col]
    selected = raw.values[:, col_idx]
    keep = ~np.isnan(selected).any(axis=1)
    dropped = int(np.sum(~keep))
    if dropped:
        log.info("%s: dropped %d rows with missing or unparseable values",
                 recipe.name, dropped)
    selected = selected[keep]
    if len(selected) == 0:
        raise DataError(f"{recipe.name}: no complete rows left after dropping flagged rows")
    X = selected[:, :-1]
    y_raw = selected[:, -1]
    if not np.all(np.isin(y_raw, (0.0, 1.0))):
        bad = sorted(set(np.unique(y_raw)) - {0.0, 1.0})
        raise DataError(f"{recipe.name}: labels must be 0/1, found {bad}")
    y = y_raw.astype(int)
    if y.min() == y.max():
        raise DataError(f"{recipe.name}: only one label class present")

    for name, cap in recipe.clip_upper.items():
        j = recipe.feature_order.index(name)
        X[:, j] = np.minimum(X[:, j], cap)

    if verify_counts and recipe.expected_rows is not None and len(X) != recipe.expected_rows:
        raise DataError(
            f"{recipe.name}: expected {recipe.expected_rows} complete rows, got {len(X)}"
        )
    if verify_counts and recipe.expected_positives is not None and int(y.sum()) != recipe.expected_positives:
        raise DataError(
            f"{recipe.name}: expected {recipe.expected_positives} positive labels, got {int(y.sum())}"
        )

    meta = []
    for i, name in enumerate(recipe.feature_order):
        lo, hi = float(X[:, i].min()), float(X[:, i].max())
        if lo == hi:
            hi = lo + 1.0  # degenerate column; keeps the domain well-formed
        meta.append(FeatureMeta(name, i, lo, hi, raw_min=lo, raw_max=hi))
    groups = [[recipe.feature_order.index(n) for n in g] for g in recipe.shared_groups]
    return Dataset(X, y, meta, shared_groups=groups)


def preprocess_taiwan(raw: RawTable, verify_counts: bool = True) -> Dataset:
    """Taiwan card-default recipe: 19 features, demographics dropped."""
    return _build_dataset(raw, TAIWAN_RECIPE, verify_counts)


def preprocess_gmsc(raw: RawTable, verify_counts: bool = True) -> Dataset:
    """GMSC recipe: 9 features, rows with gaps removed, past dues capped at 8."""
    return _build_dataset(raw, GMSC_RECIPE, verify_counts)


def preprocess_generic(raw: RawTable, label_column: str, drop=(),
                       clip_upper: dict[str, float] | None = None,
                       shared_groups=()) -> Dataset:
    """Build a dataset from an arbitrary CSV: every kept column is a feature."""
    if label_column not in raw.columns:
        raise DataError(f"label column {label_column!r} not in {raw.columns}")
    drop = set(drop)
    unknown = drop - set(raw.columns)
    if unknown:
        raise DataError(f"drop columns not present: {sorted(unknown)}")
    features = [c for c in raw.columns if c != label_column and c not in drop]
    if not features:
        raise DataError("no feature columns remain")
    recipe = RecipeSpec(
        name="generic",
        feature_order=features,
        aliases={_norm(c): c for c in features},
        label_aliases={_norm(label_column)},
        drop_aliases={_norm(c) for c in drop},
        clip_upper=dict(clip_upper or {}),
        shared_groups=[list(g) for g in shared_groups],
    )
    return _build_dataset(raw, recipe, verify_counts=False)


def split(data: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle followed by a disjoint, exhaustive partition."""
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n)
    n_train = int(round(data.n * train_fraction))
    if n_train == 0 or n_train == data.n:
        raise DataError(f"split leaves an empty side (n={data.n}, fraction={train_fraction})")
    tr, te = perm[:n_train], perm[n_train:]
    return (
        Dataset(data.features[tr], data.labels[tr], list(data.meta),
                list(data.shared_groups), data.normalized),
        Dataset(data.features[te], data.labels[te], list(data.meta),
                list(data.shared_groups), data.normalized),
    )


def normalize(train: Dataset, test: Dataset | None = None):
    """Min-max scale to [0, 1] using training-set statistics only.

    Features in a shared group are scaled by the group-wide min/max so that
    equal normalized values mean equal raw values across the group.  Test
    values outside the training range are clipped into [0, 1].  Zero-range
    features are mapped to the constant 0 and logged.
    """
    if train.n == 0:
        raise DataError("cannot fit normalization on an empty training set")
    mins = train.features.min(axis=0)
    maxs = train.features.max(axis=0)
    for group in train.shared_groups:
        mins[group] = mins[group].min()
        maxs[group] = maxs[group].max()
    ranges = maxs - mins
    degenerate = ranges == 0
    for i in np.flatnonzero(degenerate):
        log.warning("feature %r has zero range on the training set; mapped to constant 0",
                    train.meta[i].name)

    def apply(X):
        out = (X - mins) / np.where(degenerate, 1.0, ranges)
        out[:, degenerate] = 0.0
        return np.clip(out, 0.0, 1.0)

    meta = [
        FeatureMeta(m.name, m.index, 0.0, 1.0,
                    raw_min=float(mins[i]), raw_max=float(maxs[i]))
        for i, m in enumerate(train.meta)
    ]
    train_n = Dataset(apply(train.features), train.labels, meta,
                      list(train.shared_groups), normalized=True)
    if test is None:
        return train_n, None
    test_n = Dataset(apply(test.features), test.labels, meta,
                     list(test.shared_groups), normalized=True)
    return train_n, test_n


def _content_hash(features: np.ndarray, labels: np.ndarray, meta_json: str) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(features).tobytes())
    h.update(np.ascontiguousarray(labels).tobytes())
    h.update(meta_json.encode())
    return h.hexdigest()


def save_snapshot(data: Dataset, path):
    """Cache a processed dataset with an embedded content hash."""
    meta_json = json.dumps(
        {
            "meta": [vars(m).copy() for m in data.meta],
            "shared_groups": data.shared_groups,
            "normalized": data.normalized,
        },
        sort_keys=True,
    )
    np.savez_compressed(
        path,
        features=data.features,
        labels=data.labels,
        meta_json=np.array(meta_json),
        content_hash=np.array(_content_hash(data.features, data.labels, meta_json)),
    )


def load_snapshot(path) -> Dataset:
    """Load a cached dataset, verifying its content hash."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"snapshot not found: {path}")
    with np.load(path, allow_pickle=False) as z:
        features = z["features"]
        labels = z["labels"]
        meta_json = str(z["meta_json"])
        stored = str(z["content_hash"])
    if _content_hash(features, labels, meta_json) != stored:
        raise DataError(f"snapshot {path} failed its content-hash check")
    doc = json.loads(meta_json)
    meta = [FeatureMeta(**m) for m in doc["meta"]]
    return Dataset(features, labels, meta, doc["shared_groups"], doc["normalized"])
