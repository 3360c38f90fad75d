"""Data ingestion, validation, and the wide-format representation.

All models consume a :class:`Dataset`: an outcome vector, a full-rank
fixed-effect design matrix (intercept plus reference-coded covariates),
one or more n x T exposure matrices sharing the same lag count, and an
optional table of candidate modifier columns.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DataError, ShapeError

MAX_CATEGORICAL_SPLITS = 32


@dataclass(frozen=True)
class ExposureMatrix:
    """A named n x T matrix of lagged exposure measurements."""

    name: str
    values: np.ndarray
    scale_factor: float = 1.0

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if values.ndim != 2:
            raise ShapeError(f"exposure {self.name!r}: expected a 2-d matrix")
        n, T = values.shape
        if n < 1 or T < 2:
            raise ShapeError(f"exposure {self.name!r}: need n >= 1 and T >= 2, got {values.shape}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise DataError(
                f"exposure {self.name!r}: missing or non-finite value at row {bad[0]}, lag {bad[1] + 1}"
            )
        if not self.scale_factor > 0:
            raise DataError(f"exposure {self.name!r}: scale_factor must be > 0")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def n_lags(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ModifierColumn:
    """One candidate modifier: continuous values or coded categorical levels."""

    name: str
    kind: str  # "continuous" | "categorical"
    values: np.ndarray  # float for continuous, int level codes for categorical
    levels: tuple[str, ...] = ()  # categorical only; code i maps to levels[i]

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise DataError(f"modifier {self.name!r}: unknown kind {self.kind!r}")
        dtype = np.float64 if self.kind == "continuous" else np.int64
        values = np.ascontiguousarray(np.asarray(self.values, dtype=dtype))
        if self.kind == "continuous" and not np.all(np.isfinite(values)):
            raise DataError(f"modifier {self.name!r}: missing value")
        if self.kind == "categorical" and (values.min(initial=0) < 0 or values.max(initial=0) >= len(self.levels)):
            raise DataError(f"modifier {self.name!r}: level code out of range")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ModifierDef:
    """Split candidates for one modifier.

    Continuous candidates are strictly increasing thresholds inside the
    observed range; categorical candidates are tuples of level codes
    (membership sends an observation left).
    """

    name: str
    kind: str
    split_candidates: tuple = ()
    n_levels: int = 0  # categorical only: size of the level universe

    def __post_init__(self):
        if self.kind == "continuous":
            cands = tuple(float(c) for c in self.split_candidates)
            if any(b <= a for a, b in zip(cands, cands[1:])):
                raise DataError(f"modifier {self.name!r}: thresholds must be strictly increasing")
            object.__setattr__(self, "split_candidates", cands)
        else:
            object.__setattr__(
                self, "split_candidates", tuple(tuple(sorted(s)) for s in self.split_candidates)
            )


@dataclass(frozen=True)
class Dataset:
    """Validated wide-format data shared read-only by all chains."""

    outcome: np.ndarray
    design: np.ndarray
    design_names: tuple[str, ...]
    exposures: tuple[ExposureMatrix, ...]
    modifiers: tuple[ModifierColumn, ...] = ()

    def __post_init__(self):
        outcome = np.ascontiguousarray(np.asarray(self.outcome, dtype=np.float64))
        design = np.ascontiguousarray(np.asarray(self.design, dtype=np.float64))
        n = outcome.shape[0]
        if not np.all(np.isfinite(outcome)):
            raise DataError("outcome contains missing or non-finite values")
        if not np.all(np.isfinite(design)):
            raise DataError("design matrix contains missing or non-finite values")
        if design.shape[0] != n:
            raise ShapeError(f"design has {design.shape[0]} rows, outcome has {n}")
        if len(self.design_names) != design.shape[1]:
            raise ShapeError("design_names length does not match design columns")
        if np.linalg.matrix_rank(design) < design.shape[1]:
            raise DataError("design matrix is rank deficient")
        if not self.exposures:
            raise DataError("at least one exposure matrix is required")
        T = self.exposures[0].n_lags
        names = [e.name for e in self.exposures]
        if len(set(names)) != len(names):
            raise DataError("exposure names must be distinct")
        for e in self.exposures:
            if e.n != n:
                raise ShapeError(f"exposure {e.name!r} has {e.n} rows, outcome has {n}")
            if e.n_lags != T:
                raise ShapeError(
                    f"exposure {e.name!r} has {e.n_lags} lags, expected {T} (all exposures share T)"
                )
        for m in self.modifiers:
            if m.values.shape[0] != n:
                raise ShapeError(f"modifier {m.name!r} has {m.values.shape[0]} rows, outcome has {n}")
        outcome.flags.writeable = False
        design.flags.writeable = False
        object.__setattr__(self, "outcome", outcome)
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "design_names", tuple(self.design_names))
        object.__setattr__(self, "exposures", tuple(self.exposures))
        object.__setattr__(self, "modifiers", tuple(self.modifiers))

    @property
    def n(self) -> int:
        return self.outcome.shape[0]

    @property
    def n_lags(self) -> int:
        return self.exposures[0].n_lags

    @property
    def exposure_names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.exposures)

    def modifier(self, name: str) -> ModifierColumn:
        for m in self.modifiers:
            if m.name == name:
                return m
        raise KeyError(name)


def expand_design(frame: pd.DataFrame, covariates: list[str]) -> tuple[np.ndarray, list[str]]:
    """Intercept column plus covariates, with categoricals reference-coded.

    The reference level is the first level in lexicographic order;
    indicator columns are named ``<column><level>``. Column ordering is
    deterministic: intercept, then covariates in the given order, each
    categorical expanded in sorted level order.
    """
    n = len(frame)
    cols = [np.ones(n)]
    names = ["(Intercept)"]
    for cov in covariates:
        col = frame[cov]
        if pd.api.types.is_numeric_dtype(col):
            if col.isna().any():
                row = int(col.isna().idxmax())
                raise DataError(f"missing value in column {cov!r} at row {row}")
            cols.append(col.to_numpy(dtype=np.float64))
            names.append(cov)
        else:
            values = col.astype(str)
            if col.isna().any():
                row = int(col.isna().idxmax())
                raise DataError(f"missing value in column {cov!r} at row {row}")
            levels = sorted(values.unique())
            for level in levels[1:]:
                cols.append((values == level).to_numpy(dtype=np.float64))
                names.append(f"{cov}{level}")
    return np.column_stack(cols), names


def _modifier_columns(frame: pd.DataFrame, modifiers: list[str]) -> list[ModifierColumn]:
    out = []
    for name in modifiers:
        col = frame[name]
        if col.isna().any():
            row = int(col.isna().idxmax())
            raise DataError(f"missing value in modifier column {name!r} at row {row}")
        if pd.api.types.is_numeric_dtype(col) and col.nunique() > 2:
            out.append(ModifierColumn(name, "continuous", col.to_numpy(dtype=np.float64)))
        else:
            values = col.astype(str)
            levels = tuple(sorted(values.unique()))
            codes = values.map({lev: i for i, lev in enumerate(levels)}).to_numpy(dtype=np.int64)
            out.append(ModifierColumn(name, "categorical", codes, levels))
    return out


def load_wide_table(
    path,
    outcome: str,
    covariates: list[str] | None = None,
    exposure_groups: dict[str, list[str]] | None = None,
    modifiers: list[str] | None = None,
    sep: str = ",",
) -> Dataset:
    """Load a wide-format delimited file into a validated Dataset.

    ``exposure_groups`` maps each exposure name to its ordered lag
    column labels; all groups must list the same number of lag columns.
    """
    covariates = covariates or []
    modifiers = modifiers or []
    if not exposure_groups:
        raise DataError("at least one exposure group is required")
    try:
        frame = pd.read_csv(path, sep=sep)
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    return dataset_from_frame(frame, outcome, covariates, exposure_groups, modifiers)


def dataset_from_frame(
    frame: pd.DataFrame,
    outcome: str,
    covariates: list[str],
    exposure_groups: dict[str, list[str]],
    modifiers: list[str] | None = None,
) -> Dataset:
    """Build a Dataset from an in-memory wide-format frame."""
    modifiers = modifiers or []
    needed = [outcome, *covariates, *modifiers]
    for cols in exposure_groups.values():
        needed.extend(cols)
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise DataError(f"missing column(s): {', '.join(missing)}")

    lag_counts = {name: len(cols) for name, cols in exposure_groups.items()}
    if len(set(lag_counts.values())) > 1:
        raise ShapeError(f"exposure groups have unequal lag counts: {lag_counts}")

    y = frame[outcome]
    if y.isna().any():
        row = int(y.isna().idxmax())
        raise DataError(f"missing value in column {outcome!r} at row {row}")
    design, names = expand_design(frame, covariates)
    exposures = []
    for name, cols in exposure_groups.items():
        block = frame[cols]
        if block.isna().any().any():
            bad_col = block.columns[block.isna().any()][0]
            row = int(block[bad_col].isna().idxmax())
            raise DataError(f"missing value in column {bad_col!r} at row {row}")
        exposures.append(ExposureMatrix(name, block.to_numpy(dtype=np.float64)))
    return Dataset(
        outcome=y.to_numpy(dtype=np.float64),
        design=design,
        design_names=tuple(names),
        exposures=tuple(exposures),
        modifiers=tuple(_modifier_columns(frame, modifiers)),
    )


def exposure_columns_by_prefix(columns, prefix: str) -> list[str]:
    """Lag columns named ``<prefix><index>``, ordered by the integer index."""
    found = []
    for col in columns:
        if col.startswith(prefix) and col[len(prefix) :].isdigit():
            found.append((int(col[len(prefix) :]), col))
    if not found:
        raise DataError(f"no columns match prefix {prefix!r}")
    found.sort()
    return [c for _, c in found]


def pivot_time_series(
    table: pd.DataFrame,
    date_col: str,
    exposure_cols: list[str],
    lags: int,
    keep_cols: list[str] | None = None,
) -> pd.DataFrame:
    """Pivot a time-series table to wide format with explicit lag columns.

    Output has one row per date t with t > lags; column ``<col>_<l>``
    holds the value of ``col`` at date t - l. Non-exposure columns named
    in ``keep_cols`` (e.g. the outcome) are carried at time t.
    """
    if lags < 1:
        raise DataError("lag count must be >= 1")
    if lags >= len(table):
        raise DataError(f"lag count {lags} >= number of rows {len(table)}")
    dates = pd.to_datetime(table[date_col]) if table[date_col].dtype == object else table[date_col]
    diffs = np.diff(dates.to_numpy())
    if len(diffs) and (not np.all(diffs == diffs[0]) or not (diffs[0] > np.timedelta64(0) if np.issubdtype(diffs.dtype, np.timedelta64) else diffs[0] > 0)):
        raise DataError(f"dates in {date_col!r} must be sorted and equally spaced with no gaps")
    keep_cols = keep_cols if keep_cols is not None else [
        c for c in table.columns if c != date_col and c not in exposure_cols
    ]
    out = {date_col: table[date_col].to_numpy()[lags:]}
    for col in keep_cols:
        out[col] = table[col].to_numpy()[lags:]
    for col in exposure_cols:
        series = table[col].to_numpy()
        for lag in range(1, lags + 1):
            out[f"{col}_{lag}"] = series[lags - lag : len(series) - lag]
    return pd.DataFrame(out)


def iqr_scale(matrix: ExposureMatrix) -> ExposureMatrix:
    """Scale an exposure matrix by the interquartile range of all pooled entries."""
    q25, q75 = np.quantile(matrix.values, [0.25, 0.75], method="linear")
    iqr = float(q75 - q25)
    if iqr <= 0:
        raise DataError(f"exposure {matrix.name!r}: interquartile range is zero")
    return ExposureMatrix(matrix.name, matrix.values / iqr, scale_factor=iqr)


def modifier_split_candidates(column: ModifierColumn, max_splits: int = 10) -> ModifierDef:
    """Split candidates for one modifier.

    Continuous: up to ``max_splits`` thresholds at evenly spaced interior
    quantiles of the observed values, deduplicated and restricted to the
    open observed range. Categorical: all distinct two-block partitions
    up to 2^(levels-1)-1 candidates capped at 32, falling back to
    one-vs-rest splits beyond the cap.
    """
    if max_splits < 1:
        raise DataError("max_splits must be >= 1")
    if column.kind == "continuous":
        values = column.values
        qs = np.arange(1, max_splits + 1) / (max_splits + 1)
        thresholds = np.quantile(values, qs, method="linear")
        lo, hi = values.min(), values.max()
        uniq = sorted({float(t) for t in thresholds if lo < t < hi})
        return ModifierDef(column.name, "continuous", tuple(uniq))
    k = len(column.levels)
    if k < 2:
        return ModifierDef(column.name, "categorical", (), n_levels=k)
    if 2 ** (k - 1) - 1 <= MAX_CATEGORICAL_SPLITS:
        # canonical representative of each partition: the block containing level 0
        subsets = []
        others = list(range(1, k))
        for size in range(k - 1):
            for extra in itertools.combinations(others, size):
                subsets.append((0, *extra))
        return ModifierDef(column.name, "categorical", tuple(subsets), n_levels=k)
    return ModifierDef(column.name, "categorical", tuple((i,) for i in range(k)), n_levels=k)
