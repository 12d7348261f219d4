"""Trip table schemas, CSV ingestion, preprocessing, splitting and encoding.

Tables are stored column-wise: categorical columns are object arrays of
``str`` (``None`` marks a missing cell), numeric columns are ``float64``
arrays (``NaN`` marks a missing cell). Integer columns hold integral floats.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

DATETIME_FORMATS = ("%Y-%m-%d %H:%M:%S", "%m/%d/%Y %I:%M:%S %p")
_MISSING_TOKENS = {"", "nan", "NaN", "NAN", "null", "NULL", "None", "NA"}


class ColumnKind(str, Enum):
    CATEGORICAL = "categorical"
    INTEGER = "integer"
    FLOAT = "float"

    @property
    def numeric(self) -> bool:
        return self is not ColumnKind.CATEGORICAL

    @classmethod
    def parse(cls, value: str | "ColumnKind") -> "ColumnKind":
        if isinstance(value, ColumnKind):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise DataError(f"unknown column kind {value!r}") from None


@dataclass(frozen=True)
class Column:
    name: str
    kind: ColumnKind


@dataclass(frozen=True)
class TableSchema:
    columns: tuple[Column, ...]
    target: str | None = None

    def __post_init__(self):
        cols = tuple(
            c if isinstance(c, Column) else Column(c[0], ColumnKind.parse(c[1]))
            for c in self.columns
        )
        object.__setattr__(self, "columns", cols)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise DataError(f"duplicate column names: {dup}")
        if self.target is not None:
            if self.target not in names:
                raise DataError(f"target column {self.target!r} not in schema")
            if self.kind(self.target) is not ColumnKind.FLOAT:
                raise DataError(f"target column {self.target!r} must be a float column")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def kind(self, name: str) -> ColumnKind:
        for c in self.columns:
            if c.name == name:
                return c.kind
        raise DataError(f"unknown column {name!r}")

    def __contains__(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def to_dict(self) -> dict:
        return {
            "columns": [{"name": c.name, "kind": c.kind.value} for c in self.columns],
            "target": self.target,
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "TableSchema":
        try:
            cols = tuple(Column(c["name"], ColumnKind.parse(c["kind"])) for c in obj["columns"])
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed schema: {exc}") from None
        return cls(cols, obj.get("target"))

    @classmethod
    def load(cls, path: str | Path) -> "TableSchema":
        path = Path(path)
        if not path.exists():
            raise DataError(f"schema file not found: {path}")
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DataTable:
    """Immutable column store bound to a schema."""

    schema: TableSchema
    data: Mapping[str, np.ndarray]

    def __post_init__(self):
        cols = {}
        n = None
        for c in self.schema.columns:
            if c.name not in self.data:
                raise DataError(f"missing data for column {c.name!r}")
            raw = self.data[c.name]
            if c.kind.numeric:
                arr = np.array(raw, dtype=np.float64)
            else:
                arr = np.empty(len(raw), dtype=object)
                arr[:] = [None if v is None else str(v) for v in raw]
            if arr.ndim != 1:
                raise DataError(f"column {c.name!r} must be one-dimensional")
            if n is None:
                n = len(arr)
            elif len(arr) != n:
                raise DataError(f"column {c.name!r} has {len(arr)} rows, expected {n}")
            cols[c.name] = _freeze(arr)
        extra = set(self.data) - set(self.schema.names)
        if extra:
            raise DataError(f"data columns not in schema: {sorted(extra)}")
        object.__setattr__(self, "data", cols)

    @property
    def n_rows(self) -> int:
        if not self.schema.columns:
            return 0
        return len(self.data[self.schema.columns[0].name])

    def __len__(self) -> int:
        return self.n_rows

    def column(self, name: str) -> np.ndarray:
        if name not in self.data:
            raise DataError(f"unknown column {name!r}")
        return self.data[name]

    def missing_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_rows, dtype=bool)
        for c in self.schema.columns:
            col = self.data[c.name]
            if c.kind.numeric:
                mask |= ~np.isfinite(col)
            else:
                mask |= np.array([v is None for v in col], dtype=bool)
        return mask

    def take(self, indices: Sequence[int] | np.ndarray) -> "DataTable":
        idx = np.asarray(indices, dtype=np.intp)
        return DataTable(self.schema, {k: v[idx] for k, v in self.data.items()})

    def rows(self) -> Iterable[tuple]:
        cols = [self.data[n] for n in self.schema.names]
        return zip(*cols)

    def equals(self, other: "DataTable") -> bool:
        if self.schema != other.schema or self.n_rows != other.n_rows:
            return False
        for c in self.schema.columns:
            a, b = self.data[c.name], other.data[c.name]
            if c.kind.numeric:
                if not np.array_equal(a, b, equal_nan=True):
                    return False
            elif list(a) != list(b):
                return False
        return True

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(self.schema.names)
            kinds = [c.kind for c in self.schema.columns]
            for row in self.rows():
                writer.writerow([_format_cell(v, k) for v, k in zip(row, kinds)])


def _format_cell(value, kind: ColumnKind) -> str:
    if kind is ColumnKind.CATEGORICAL:
        return "" if value is None else value
    if not np.isfinite(value):
        return ""
    if kind is ColumnKind.INTEGER:
        return str(int(round(value)))
    return repr(float(value))


def _parse_numeric(text: str, kind: ColumnKind) -> float:
    text = text.strip()
    if text in _MISSING_TOKENS:
        return np.nan
    try:
        value = float(text)
    except ValueError:
        return np.nan
    if not np.isfinite(value):
        return np.nan
    if kind is ColumnKind.INTEGER and value != round(value):
        return np.nan
    return value


def load_csv(path: str | Path, schema: TableSchema) -> DataTable:
    """Read a headed CSV file. Unparseable numeric cells become missing."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        known = set(schema.names)
        for h in header:
            if h not in known:
                raise DataError(f"{path}: unknown column {h!r}")
        absent = [n for n in schema.names if n not in header]
        if absent or len(set(header)) != len(header):
            raise DataError(f"{path}: header mismatch, missing columns {absent}")
        width = len(header)
        cells: list[list[str]] = [[] for _ in header]
        for row in reader:
            if not row:
                continue
            if len(row) != width:
                raise DataError(
                    f"{path}: line {reader.line_num}: expected {width} fields, got {len(row)}"
                )
            for j, v in enumerate(row):
                cells[j].append(v)
    data = {}
    for j, name in enumerate(header):
        kind = schema.kind(name)
        if kind.numeric:
            data[name] = np.array([_parse_numeric(v, kind) for v in cells[j]], dtype=np.float64)
        else:
            data[name] = [None if v.strip() == "" else v for v in cells[j]]
    return DataTable(schema, data)


def parse_datetime(text: str) -> datetime | None:
    if text is None:
        return None
    text = text.strip()
    for fmt in DATETIME_FORMATS:
        try:
            return datetime.strptime(text, fmt)
        except ValueError:
            continue
    return None


@dataclass(frozen=True)
class PreprocessStats:
    rows_in: int
    rows_out: int
    unparseable_datetimes: int
    dropped_columns: tuple[str, ...] = ()

    @property
    def rows_removed(self) -> int:
        return self.rows_in - self.rows_out


def preprocess_trips(
    t: DataTable,
    drop_columns: Sequence[str] = ("Ehail_fee",),
    datetime_columns: Sequence[str] = (),
    *,
    return_stats: bool = False,
):
    """Drop columns, expand datetimes into weekday/time, remove incomplete rows.

    Each datetime column ``c`` becomes ``c_weekday`` (categorical "0".."6",
    Monday is "0") and ``c_time`` (seconds since midnight). Columns that were
    already dropped or expanded are skipped, so the operation is idempotent.
    """
    schema = t.schema
    if schema.target is not None and schema.target in drop_columns:
        raise DataError(f"cannot drop target column {schema.target!r}")
    for name in datetime_columns:
        if name == schema.target:
            raise DataError(f"cannot expand target column {name!r}")
        if name not in schema and not (
            f"{name}_weekday" in schema and f"{name}_time" in schema
        ):
            raise DataError(f"unknown datetime column {name!r}")

    drops = tuple(c for c in drop_columns if c in schema)
    columns: list[Column] = []
    data: dict[str, np.ndarray] = {}
    bad_dt = np.zeros(t.n_rows, dtype=bool)
    for c in schema.columns:
        if c.name in drops:
            continue
        if c.name in datetime_columns:
            if c.kind is not ColumnKind.CATEGORICAL:
                raise DataError(f"datetime column {c.name!r} must be loaded as categorical text")
            weekday = np.empty(t.n_rows, dtype=object)
            seconds = np.full(t.n_rows, np.nan)
            for i, text in enumerate(t.column(c.name)):
                stamp = parse_datetime(text)
                if stamp is None:
                    bad_dt[i] = True
                    continue
                weekday[i] = str(stamp.weekday())
                seconds[i] = float(stamp.hour * 3600 + stamp.minute * 60 + stamp.second)
            columns.append(Column(f"{c.name}_weekday", ColumnKind.CATEGORICAL))
            columns.append(Column(f"{c.name}_time", ColumnKind.FLOAT))
            data[f"{c.name}_weekday"] = weekday
            data[f"{c.name}_time"] = seconds
        else:
            columns.append(c)
            data[c.name] = t.column(c.name)

    out = DataTable(TableSchema(tuple(columns), schema.target), data)
    keep = ~out.missing_mask()
    out = out.take(np.flatnonzero(keep))
    stats = PreprocessStats(t.n_rows, out.n_rows, int(bad_dt.sum()), drops)
    logger.info(
        "preprocess: removed %d of %d rows (%d unparseable datetimes)",
        stats.rows_removed, stats.rows_in, stats.unparseable_datetimes,
    )
    return (out, stats) if return_stats else out


@dataclass(frozen=True)
class SplitSpec:
    train_size: int
    holdout_size: int
    seed: int = 0

    def __post_init__(self):
        if self.train_size < 0 or self.holdout_size < 0:
            raise DataError("split sizes must be non-negative")


def split(t: DataTable, spec: SplitSpec) -> tuple[DataTable, DataTable]:
    """Disjoint uniform sample without replacement, deterministic in ``spec.seed``."""
    if spec.train_size + spec.holdout_size > t.n_rows:
        raise DataError(
            f"split needs {spec.train_size + spec.holdout_size} rows, table has {t.n_rows}"
        )
    perm = np.random.default_rng(spec.seed).permutation(t.n_rows)
    train = perm[: spec.train_size]
    holdout = perm[spec.train_size : spec.train_size + spec.holdout_size]
    return t.take(train), t.take(holdout)


# ---------------------------------------------------------------------------
# encoding


@dataclass(frozen=True)
class Encoder:
    """One-hot (categorical) plus min-max (numeric) embedding descriptor."""

    columns: tuple[Column, ...]
    vocabularies: Mapping[str, tuple[str, ...]]
    numeric_ranges: Mapping[str, tuple[float, float]]
    column_map: Mapping[str, tuple[int, int]] = field(default=None)

    def __post_init__(self):
        if self.column_map is None:
            cmap, start = {}, 0
            for c in self.columns:
                width = len(self.vocabularies[c.name]) if c.kind is ColumnKind.CATEGORICAL else 1
                cmap[c.name] = (start, start + width)
                start += width
            object.__setattr__(self, "column_map", cmap)

    @property
    def width(self) -> int:
        return max((stop for _, stop in self.column_map.values()), default=0)

    @property
    def fingerprint(self) -> str:
        payload = json.dumps(
            {
                "columns": [(c.name, c.kind.value) for c in self.columns],
                "vocab": {k: list(v) for k, v in self.vocabularies.items()},
                "ranges": {k: [repr(a), repr(b)] for k, (a, b) in self.numeric_ranges.items()},
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def describe(self) -> dict:
        return {
            "embedding": "one-hot categorical + min-max numeric, L2 ground metric",
            "width": self.width,
            "fingerprint": self.fingerprint,
        }


@dataclass(frozen=True, eq=False)
class EncodedMatrix:
    data: np.ndarray
    encoder: Encoder

    @property
    def column_map(self):
        return self.encoder.column_map

    @property
    def numeric_ranges(self):
        return self.encoder.numeric_ranges

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __len__(self) -> int:
        return self.data.shape[0]


def fit_encoder(t: DataTable, columns: Sequence[str] | None = None) -> Encoder:
    """Fit vocabularies (sorted) and numeric ranges on ``t``.

    A constant numeric column gets range ``(v, v)`` and encodes to 0.0.
    """
    names = list(t.schema.names if columns is None else columns)
    cols = tuple(Column(n, t.schema.kind(n)) for n in names)
    if t.n_rows and t.missing_mask().any():
        raise DataError("fit_encoder requires a preprocessed table without missing cells")
    vocab, ranges = {}, {}
    for c in cols:
        values = t.column(c.name)
        if c.kind is ColumnKind.CATEGORICAL:
            vocab[c.name] = tuple(sorted(set(values)))
        else:
            if len(values) == 0:
                raise DataError("cannot fit numeric range on an empty table")
            ranges[c.name] = (float(values.min()), float(values.max()))
    return Encoder(cols, vocab, ranges)


def encode(t: DataTable, encoder: Encoder) -> EncodedMatrix:
    out = np.zeros((t.n_rows, encoder.width), dtype=np.float64)
    for c in encoder.columns:
        if c.name not in t.schema or t.schema.kind(c.name) is not c.kind:
            raise DataError(f"schema mismatch: column {c.name!r} ({c.kind.value}) not in table")
        start, stop = encoder.column_map[c.name]
        values = t.column(c.name)
        if c.kind is ColumnKind.CATEGORICAL:
            lookup = {v: j for j, v in enumerate(encoder.vocabularies[c.name])}
            pos = np.array([lookup.get(v, -1) for v in values], dtype=np.intp)
            seen = np.flatnonzero(pos >= 0)
            out[seen, start + pos[seen]] = 1.0
        else:
            if not np.all(np.isfinite(values)):
                raise DataError(f"column {c.name!r} has missing cells; preprocess first")
            lo, hi = encoder.numeric_ranges[c.name]
            if hi > lo:
                out[:, start] = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    return EncodedMatrix(_freeze(out), encoder)


def decode(
    matrix: EncodedMatrix | np.ndarray, encoder: Encoder, schema: TableSchema | None = None
) -> DataTable:
    """Inverse of :func:`encode` (numeric values are not clamped).

    Categorical cells take the arg-max indicator; integer columns are rounded.
    ``schema`` (default: the encoder's columns, no target) must list exactly
    the encoded columns.
    """
    data = matrix.data if isinstance(matrix, EncodedMatrix) else np.asarray(matrix, dtype=float)
    cols = {}
    for c in encoder.columns:
        start, stop = encoder.column_map[c.name]
        if c.kind is ColumnKind.CATEGORICAL:
            vocab = np.array(encoder.vocabularies[c.name], dtype=object)
            cols[c.name] = vocab[np.argmax(data[:, start:stop], axis=1)]
        else:
            lo, hi = encoder.numeric_ranges[c.name]
            vals = lo + data[:, start] * (hi - lo)
            if c.kind is ColumnKind.INTEGER:
                vals = np.round(vals)
            cols[c.name] = vals
    if schema is None:
        schema = TableSchema(encoder.columns)
    return DataTable(schema, cols)


def as_matrix(x) -> np.ndarray:
    """Coerce an EncodedMatrix or array-like into a 2-D float array."""
    arr = x.data if isinstance(x, EncodedMatrix) else np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DataError("expected a 2-D matrix")
    return arr


def check_same_encoder(*mats) -> None:
    """Raise if encoded inputs were produced by different encoders or widths differ."""
    fps = {m.encoder.fingerprint for m in mats if isinstance(m, EncodedMatrix)}
    if len(fps) > 1:
        raise DataError("encoder mismatch: inputs were encoded with different descriptors")
    widths = {as_matrix(m).shape[1] for m in mats}
    if len(widths) > 1:
        raise DataError(f"encoder mismatch: feature widths differ {sorted(widths)}")
