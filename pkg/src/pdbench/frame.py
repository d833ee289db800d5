"""Quarterly panel container, strict CSV ingestion, and logged transforms.

A TimeSeriesFrame is immutable: every transform returns a new frame and
appends a replayable entry to ``transform_log``, so any transformed frame
can be reproduced bit-for-bit from the raw one.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, replace

import numpy as np

from . import transforms

# canonical satellite-panel header: target then eight macro covariates
CANONICAL_COLUMNS = ("PD", "GDP", "UNE", "INF", "RRE", "EQP", "EXR", "STR", "LTR")
TARGET_COLUMN = "PD"

_PERIOD_RE = re.compile(r"^(\d{4})Q([1-4])$")


class DataError(ValueError):
    """Raised for malformed input panels; message names row and column."""


def parse_period(label: str) -> tuple[int, int]:
    m = _PERIOD_RE.match(label.strip())
    if not m:
        raise DataError(f"period {label!r} does not match YYYYQn with n in 1..4")
    return int(m.group(1)), int(m.group(2))


def next_period(label: str) -> str:
    year, q = parse_period(label)
    return f"{year}Q{q + 1}" if q < 4 else f"{year + 1}Q1"


@dataclass(frozen=True)
class TimeSeriesFrame:
    """Aligned quarterly series keyed by column name.

    index holds contiguous period labels; values holds one float array per
    column, each of length len(index); transform_log records the ops that
    produced this frame from the raw panel.
    """

    index: tuple[str, ...]
    columns: tuple[str, ...]
    values: dict[str, np.ndarray]
    transform_log: tuple[dict, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.index) == 0:
            raise DataError("frame must contain at least one period")
        if tuple(self.values.keys()) != self.columns:
            raise DataError("values keys must match columns in order")
        seen = set()
        prev = None
        for label in self.index:
            parse_period(label)
            if label in seen:
                raise DataError(f"duplicate period {label!r}")
            if prev is not None and label != next_period(prev):
                raise DataError(f"gap in quarterly index between {prev!r} and {label!r}")
            seen.add(label)
            prev = label
        n = len(self.index)
        frozen: dict[str, np.ndarray] = {}
        for col, arr in self.values.items():
            a = np.asarray(arr, dtype=float)
            if a.shape != (n,):
                raise DataError(
                    f"column {col!r} has length {a.shape}, expected ({n},)"
                )
            if not np.isfinite(a).all():
                row = int(np.flatnonzero(~np.isfinite(a))[0])
                raise DataError(
                    f"column {col!r} has a non-finite value at period "
                    f"{self.index[row]!r} (row {row})"
                )
            a = a.copy()
            a.setflags(write=False)
            frozen[col] = a
        object.__setattr__(self, "values", frozen)
        object.__setattr__(self, "index", tuple(self.index))
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "transform_log", tuple(self.transform_log))

    def __len__(self) -> int:
        return len(self.index)

    def column(self, name: str) -> np.ndarray:
        if name not in self.values:
            raise DataError(f"unknown column {name!r}")
        return self.values[name]

    def _with(self, *, index=None, values=None, log_entry=None) -> "TimeSeriesFrame":
        return replace(
            self,
            index=tuple(index) if index is not None else self.index,
            values=values if values is not None else dict(self.values),
            transform_log=self.transform_log + ((log_entry,) if log_entry else ()),
        )

    # --- logged transforms -------------------------------------------------

    def logit(self, column: str = TARGET_COLUMN) -> "TimeSeriesFrame":
        vals = dict(self.values)
        try:
            vals[column] = transforms.logit_transform(self.column(column))
        except transforms.TransformError as exc:
            raise DataError(f"column {column!r}: {exc}") from exc
        return self._with(values=vals, log_entry={"op": "logit", "column": column})

    def seasonal_adjust(self, columns, period: int = 4) -> "TimeSeriesFrame":
        columns = list(columns)
        vals = dict(self.values)
        for col in columns:
            try:
                vals[col] = transforms.seasonal_adjust(self.column(col), period)
            except transforms.TransformError as exc:
                raise DataError(f"column {col!r}: {exc}") from exc
        entry = {"op": "seasonal_adjust", "columns": columns, "period": period}
        return self._with(values=vals, log_entry=entry)

    def difference(self, order: int = 1) -> "TimeSeriesFrame":
        if order >= len(self):
            raise DataError(f"cannot difference {len(self)} rows at order {order}")
        vals = {c: transforms.difference(v, order) for c, v in self.values.items()}
        return self._with(
            index=self.index[order:],
            values=vals,
            log_entry={"op": "difference", "order": order},
        )


def replay_transforms(raw: TimeSeriesFrame, log) -> TimeSeriesFrame:
    """Re-apply a transform log to a raw frame; reproduces the result exactly."""
    frame = raw
    for entry in log:
        op = entry["op"]
        if op == "logit":
            frame = frame.logit(entry["column"])
        elif op == "seasonal_adjust":
            frame = frame.seasonal_adjust(entry["columns"], entry["period"])
        elif op == "difference":
            frame = frame.difference(entry["order"])
        else:
            raise DataError(f"unknown transform op {op!r}")
    return frame


def ingest_csv(path) -> TimeSeriesFrame:
    """Read a quarterly panel CSV with the canonical header.

    Requires columns ``period,PD,GDP,...`` exactly as in CANONICAL_COLUMNS,
    strictly increasing contiguous quarters, and numeric cells throughout.
    No imputation is attempted; the first violation is reported with its
    row number (1-based, counting the header as row 1) and column name.
    """
    expected = ("period",) + CANONICAL_COLUMNS
    rows: list[tuple[str, list[float]]] = []
    try:
        fh = open(path, "r", newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = tuple(h.strip() for h in header)
        if header != expected:
            raise DataError(
                f"{path}: header must be {','.join(expected)!r}, got {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                if row and row[0].strip().startswith("#"):
                    continue
                raise DataError(f"{path}: row {lineno} is empty")
            if row[0].strip().startswith("#"):
                continue  # trailing metadata comment lines
            if len(row) != len(expected):
                raise DataError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(expected)}"
                )
            period = row[0].strip()
            try:
                parse_period(period)
            except DataError as exc:
                raise DataError(f"{path}: row {lineno}, column 'period': {exc}") from None
            numbers = []
            for col, cell in zip(CANONICAL_COLUMNS, row[1:]):
                cell = cell.strip()
                if cell == "":
                    raise DataError(
                        f"{path}: row {lineno}, column {col!r}: missing value"
                    )
                try:
                    val = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {lineno}, column {col!r}: "
                        f"non-numeric value {cell!r}"
                    ) from None
                if not np.isfinite(val):
                    raise DataError(
                        f"{path}: row {lineno}, column {col!r}: non-finite value {cell!r}"
                    )
                numbers.append(val)
            rows.append((period, numbers))
    if not rows:
        raise DataError(f"{path}: no data rows")
    index = tuple(r[0] for r in rows)
    mat = np.asarray([r[1] for r in rows], dtype=float)
    values = {col: mat[:, j] for j, col in enumerate(CANONICAL_COLUMNS)}
    try:
        return TimeSeriesFrame(index=index, columns=CANONICAL_COLUMNS, values=values)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def fmt_float(x) -> str:
    """Shortest round-trip decimal form; stable rendering for emitted CSVs."""
    return repr(float(x))


def write_csv(frame: TimeSeriesFrame, path, metadata: str | None = None) -> None:
    """Write a panel in the canonical layout; optional trailing comment line."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("period",) + frame.columns)
        for i, label in enumerate(frame.index):
            writer.writerow(
                [label] + [fmt_float(frame.values[c][i]) for c in frame.columns]
            )
        if metadata:
            fh.write(f"# {metadata}\n")
