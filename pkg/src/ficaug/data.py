"""Labeled feature datasets: ingestion, serialization, scaling and fold planning."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import DatasetError, FoldError, IngestionError, SchemaError, UnsupportedError


class Sample(NamedTuple):
    features: np.ndarray
    label: int
    subject_id: str | None
    view: int | None


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FeatureDataset:
    """Immutable labeled feature matrix.

    ``X`` is ``(n, d)`` float64 and ``y`` holds dense class indices into
    ``label_names``.  ``ids`` are stable sample identifiers (the source row
    index for loaded files) that survive subsetting, so provenance can always
    be traced back to the original rows.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    label_names: tuple[str, ...]
    subject_ids: np.ndarray | None = None
    views: np.ndarray | None = None
    view_names: tuple[str, ...] | None = None
    ids: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise DatasetError(f"feature matrix must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if d != len(self.feature_names):
            raise DatasetError(f"{d} feature columns but {len(self.feature_names)} feature names")
        if not np.all(np.isfinite(X)):
            raise DatasetError("feature values must be finite")
        y = np.asarray(self.y, dtype=np.int64)
        if y.shape != (n,):
            raise DatasetError("label vector length does not match sample count")
        L = len(self.label_names)
        if n and (y.min() < 0 or y.max() >= L):
            raise DatasetError("label index out of range")
        if len(np.unique(y)) < 2:
            raise DatasetError("at least 2 distinct labels are required")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "label_names", tuple(self.label_names))
        if self.subject_ids is not None:
            s = np.asarray(self.subject_ids, dtype=object)
            if s.shape != (n,) or any(v is None or v == "" for v in s):
                raise DatasetError("subject_id must be present on every sample")
            object.__setattr__(self, "subject_ids", _frozen(s))
        if self.views is not None:
            v = np.asarray(self.views, dtype=np.int64)
            names = tuple(self.view_names or ())
            if v.shape != (n,) or (n and (v.min() < 0 or v.max() >= len(names))):
                raise DatasetError("view index out of range")
            object.__setattr__(self, "views", _frozen(v))
            object.__setattr__(self, "view_names", names)
        ids = np.arange(n) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        object.__setattr__(self, "ids", _frozen(ids))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    def __len__(self):
        return self.n

    def __iter__(self) -> Iterator[Sample]:
        for i in range(self.n):
            yield self.sample(i)

    def sample(self, i) -> Sample:
        return Sample(
            self.X[i],
            int(self.y[i]),
            None if self.subject_ids is None else str(self.subject_ids[i]),
            None if self.views is None else int(self.views[i]),
        )

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)

    def subset(self, index) -> "FeatureDataset":
        """Rows ``index`` (positional) as a new dataset with the same label space.

        Unlike the constructor this does not insist on two labels, so a fold's
        one-class remainder stays representable.
        """
        index = np.asarray(index, dtype=np.int64)
        new = object.__new__(FeatureDataset)
        values = dict(
            X=_frozen(self.X[index]),
            y=_frozen(self.y[index]),
            feature_names=self.feature_names,
            label_names=self.label_names,
            subject_ids=None if self.subject_ids is None else _frozen(self.subject_ids[index]),
            views=None if self.views is None else _frozen(self.views[index]),
            view_names=self.view_names,
            ids=_frozen(self.ids[index]),
        )
        for k, v in values.items():
            object.__setattr__(new, k, v)
        return new

    def with_features(self, X) -> "FeatureDataset":
        return FeatureDataset(
            X, self.y, self.feature_names, self.label_names,
            self.subject_ids, self.views, self.view_names, self.ids,
        )

    def equals(self, other: "FeatureDataset") -> bool:
        """Exact (bit-level) equality of every field."""

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and bool(np.all(a == b))

        return (
            self.feature_names == other.feature_names
            and self.label_names == other.label_names
            and self.view_names == other.view_names
            and np.array_equal(self.X.view(np.uint64), other.X.view(np.uint64))
            and same(self.y, other.y)
            and same(self.subject_ids, other.subject_ids)
            and same(self.views, other.views)
        )


@dataclass(frozen=True)
class ColumnSchema:
    label_col: str = "label"
    subject_col: str | None = None
    view_col: str | None = None
    feature_cols: Sequence[str] | None = None
    delimiter: str | None = None


def _sniff_delimiter(header_line):
    return "\t" if "\t" in header_line and "," not in header_line else ","


def _parse_float(text):
    try:
        value = float(text)
    except ValueError:
        return None
    return value


def load_dataset(path, schema: ColumnSchema | None = None) -> FeatureDataset:
    """Read a delimited text file with one header row into a validated dataset.

    Feature columns default to every column not claimed by the label, subject
    or view roles, skipping columns that hold no numeric value at all.  Class
    indices follow the sorted label strings; view indices follow the sorted
    view strings.
    """
    schema = schema or ColumnSchema()
    path = Path(path)
    with path.open(newline="") as fh:
        first = fh.readline()
        fh.seek(0)
        delimiter = schema.delimiter or _sniff_delimiter(first)
        rows = list(csv.reader(fh, delimiter=delimiter))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    col = {name: j for j, name in enumerate(header)}

    def need(name, role):
        if name not in col:
            raise SchemaError(f"{path}: {role} column {name!r} not found in header {header}")
        return col[name]

    label_j = need(schema.label_col, "label")
    subject_j = need(schema.subject_col, "subject") if schema.subject_col else None
    view_j = need(schema.view_col, "view") if schema.view_col else None
    reserved = {label_j, subject_j, view_j}

    for i, r in enumerate(body):
        if len(r) != len(header):
            raise IngestionError(
                f"{path}: row {i + 2} has {len(r)} fields, expected {len(header)}", row=i + 2
            )

    if schema.feature_cols is not None:
        feature_js = [need(name, "feature") for name in schema.feature_cols]
    else:
        feature_js = []
        for j, name in enumerate(header):
            if j in reserved:
                continue
            cells = [r[j].strip() for r in body]
            if cells and all(c and _parse_float(c) is None for c in cells):
                continue  # wholly textual column: not a feature
            feature_js.append(j)
    if not feature_js:
        raise SchemaError(f"{path}: no feature columns")

    X = np.empty((len(body), len(feature_js)))
    for i, r in enumerate(body):
        for k, j in enumerate(feature_js):
            cell = r[j].strip()
            value = _parse_float(cell) if cell else None
            if value is None or not math.isfinite(value):
                raise IngestionError(
                    f"{path}: row {i + 2}, column {header[j]!r}: "
                    f"{'blank' if not cell else repr(cell)} is not a finite number",
                    row=i + 2,
                    column=header[j],
                )
            X[i, k] = value

    raw_labels = [r[label_j].strip() for r in body]
    label_names = sorted(set(raw_labels))
    if len(label_names) < 2:
        raise DatasetError(f"{path}: need at least 2 classes, found {label_names}")
    lookup = {name: i for i, name in enumerate(label_names)}
    y = np.array([lookup[v] for v in raw_labels], dtype=np.int64)

    subject_ids = None
    if subject_j is not None:
        subject_ids = [r[subject_j].strip() for r in body]
        for i, s in enumerate(subject_ids):
            if not s:
                raise IngestionError(f"{path}: row {i + 2}: missing subject id", row=i + 2,
                                     column=header[subject_j])
    views = view_names = None
    if view_j is not None:
        raw_views = [r[view_j].strip() for r in body]
        view_names = sorted(set(raw_views))
        vlookup = {name: i for i, name in enumerate(view_names)}
        views = [vlookup[v] for v in raw_views]

    return FeatureDataset(
        X, y, [header[j] for j in feature_js], label_names, subject_ids, views, view_names
    )


def save_dataset(ds: FeatureDataset, path, delimiter=",") -> Path:
    """Write ``ds`` in the canonical ``subject,view,label,<features>`` layout.

    Floats are written with ``repr`` so a reload is bit-exact.
    """
    path = Path(path)
    header = []
    if ds.subject_ids is not None:
        header.append("subject")
    if ds.views is not None:
        header.append("view")
    header.append("label")
    header.extend(ds.feature_names)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter)
        w.writerow(header)
        for i in range(ds.n):
            row = []
            if ds.subject_ids is not None:
                row.append(ds.subject_ids[i])
            if ds.views is not None:
                row.append(ds.view_names[ds.views[i]])
            row.append(ds.label_names[ds.y[i]])
            row.extend(repr(float(v)) for v in ds.X[i])
            w.writerow(row)
    return path


def canonical_schema(ds_or_header=None) -> ColumnSchema:
    """Schema matching files produced by :func:`save_dataset`."""
    if ds_or_header is None:
        return ColumnSchema(label_col="label", subject_col="subject", view_col="view")
    if isinstance(ds_or_header, FeatureDataset):
        has_subject = ds_or_header.subject_ids is not None
        has_view = ds_or_header.views is not None
    else:
        has_subject = "subject" in ds_or_header
        has_view = "view" in ds_or_header
    return ColumnSchema(
        label_col="label",
        subject_col="subject" if has_subject else None,
        view_col="view" if has_view else None,
    )


@dataclass(frozen=True)
class ScalingParams:
    mean: np.ndarray
    scale: np.ndarray
    zero_variance: np.ndarray  # bool mask of passed-through features


def standardize(ds: FeatureDataset) -> tuple[FeatureDataset, ScalingParams]:
    """Zero-mean, unit (population) variance per feature.

    Constant features are left untouched and flagged in ``zero_variance``.
    """
    mean = ds.X.mean(axis=0)
    std = ds.X.std(axis=0)
    zero = std == 0
    mean = np.where(zero, 0.0, mean)
    scale = np.where(zero, 1.0, std)
    params = ScalingParams(_frozen(mean), _frozen(scale), _frozen(zero))
    return ds.with_features((ds.X - mean) / scale), params


def unstandardize(ds: FeatureDataset, params: ScalingParams) -> FeatureDataset:
    return ds.with_features(ds.X * params.scale + params.mean)


@dataclass(frozen=True)
class FoldPlan:
    """Leave-pair-out folds.

    ``folds[i]`` is ``(val, train)`` with ``val`` a pair of positional indices
    ``(class-0 sample, class-1 sample)`` and ``train`` the sorted remainder.
    """

    folds: list = field(default_factory=list)
    seed: int = 0

    def __len__(self):
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)


def make_leave_pair_out_folds(ds: FeatureDataset, seed: int = 0) -> FoldPlan:
    if ds.n_classes != 2:
        raise UnsupportedError(f"leave-pair-out needs binary labels, got {ds.n_classes} classes")
    members = [np.flatnonzero(ds.y == c) for c in range(2)]
    for c, m in enumerate(members):
        if len(m) < 2:
            raise FoldError(f"class {ds.label_names[c]!r} has {len(m)} samples; need at least 2")
    rng = np.random.default_rng(seed)
    members = [rng.permutation(m) for m in members]
    n_folds = max(len(m) for m in members)
    everything = np.arange(ds.n)
    folds = []
    for i in range(n_folds):
        val = (int(members[0][i % len(members[0])]), int(members[1][i % len(members[1])]))
        train = np.setdiff1d(everything, val)
        train.setflags(write=False)
        folds.append((val, train))
    return FoldPlan(folds, seed)


def split_by_view(ds: FeatureDataset) -> list[FeatureDataset]:
    if ds.views is None:
        raise SchemaError("dataset has no view column")
    if len(ds.view_names) == 1:
        return [ds]
    return [ds.subset(np.flatnonzero(ds.views == v)) for v in range(len(ds.view_names))]


def concat(parts: Sequence[FeatureDataset]) -> FeatureDataset:
    first = parts[0]
    cat = lambda name: (None if getattr(first, name) is None
                        else np.concatenate([getattr(p, name) for p in parts]))
    return FeatureDataset(
        np.vstack([p.X for p in parts]), cat("y"), first.feature_names, first.label_names,
        cat("subject_ids"), cat("views"), first.view_names, cat("ids"),
    )
