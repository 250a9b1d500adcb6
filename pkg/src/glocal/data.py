"""Dataset containers, the GML text format, masking and splitting.

Conventions used throughout the package:
  * features are stored column-wise (one instance per column),
  * label matrices hold -1 / 0 / +1 where 0 means "not observed",
  * label and feature indices are 1-based in files, 0-based in memory,
  * lines starting with '#' in any of our text formats are comments.

All containers are frozen and their arrays are marked read-only, so they
can be shared freely; masking and splitting return new objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class GmlFormatError(ValueError):
    """Raised when GML text does not conform to the format."""


def _frozen_array(values, dtype):
    out = np.array(values, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def round_half_away(x):
    """Round to the nearest integer, halves away from zero."""
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Dense d x n feature matrix, one instance per column."""

    values: np.ndarray

    def __post_init__(self):
        vals = _frozen_array(self.values, np.float64)
        if vals.ndim != 2:
            raise ValueError("feature matrix must be 2-D (d x n)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("feature matrix contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def d(self):
        return self.values.shape[0]

    @property
    def n(self):
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class LabelMatrix:
    """Dense l x n label matrix with entries in {-1, 0, +1}.

    A zero entry means the label is unobserved.  The observation
    indicator is derived from the values, so the two can never drift
    apart.
    """

    values: np.ndarray

    def __post_init__(self):
        vals = _frozen_array(self.values, np.int8)
        if vals.ndim != 2:
            raise ValueError("label matrix must be 2-D (l x n)")
        if vals.shape[0] < 2:
            raise ValueError("label matrix needs at least 2 labels")
        if not np.isin(vals, (-1, 0, 1)).all():
            raise ValueError("label entries must be -1, 0 or +1")
        object.__setattr__(self, "values", vals)

    @property
    def l(self):
        return self.values.shape[0]

    @property
    def n(self):
        return self.values.shape[1]

    @property
    def indicator(self):
        """0/1 observation mask as float64 (1 where a label is observed)."""
        return (self.values != 0).astype(np.float64)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Features plus labels over the same instances."""

    features: FeatureMatrix
    labels: LabelMatrix

    def __post_init__(self):
        if self.features.n != self.labels.n:
            raise ValueError(
                "feature and label instance counts differ: "
                f"{self.features.n} vs {self.labels.n}"
            )

    @property
    def n(self):
        return self.features.n

    @property
    def d(self):
        return self.features.d

    @property
    def l(self):
        return self.labels.l


@dataclass(frozen=True)
class MaskSpec:
    """Masking request: keep rho percent of label positions observed."""

    rho: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.rho <= 100.0:
            raise ValueError(f"rho must lie in [0, 100], got {self.rho}")


def _fail(line_no, message):
    raise GmlFormatError(f"line {line_no}: {message}")


def _parse_index_csv(text, limit, line_no, seen, kind):
    out = []
    if text == "":
        return out
    for tok in text.split(","):
        try:
            idx = int(tok)
        except ValueError:
            _fail(line_no, f"bad {kind} index {tok!r}")
        if not 1 <= idx <= limit:
            _fail(line_no, f"{kind} index {idx} out of range 1..{limit}")
        if idx in seen:
            _fail(line_no, f"duplicate {kind} index {idx}")
        seen.add(idx)
        out.append(idx)
    return out


def parse_gml(text):
    """Parse GML text into a Dataset.

    Format: a header line "n d l", then one line per instance of the
    form "+:<csv>|-:<csv>|<idx:value pairs>".  Indices are 1-based.
    Lines starting with '#' are comments and are skipped.

    Args:
        text: full file contents as a string.

    Returns:
        Dataset with float64 features and int8 labels.

    Raises:
        GmlFormatError: on any malformed line, with its line number.
    """
    header = None
    header_line = 0
    rows = []  # (line_no, content)
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if raw.startswith("#"):
            continue
        if header is None:
            header = raw
            header_line = line_no
        else:
            rows.append((line_no, raw))
    if header is None:
        raise GmlFormatError("line 1: missing header")

    parts = header.split()
    if len(parts) != 3:
        _fail(header_line, f"malformed header {header!r}, expected 'n d l'")
    try:
        n, d, l = (int(p) for p in parts)
    except ValueError:
        _fail(header_line, f"malformed header {header!r}, expected 'n d l'")
    if n < 1 or d < 1 or l < 2:
        _fail(header_line, f"bad dimensions n={n} d={d} l={l} (need n>=1, d>=1, l>=2)")
    if len(rows) != n:
        raise GmlFormatError(
            f"expected {n} instance lines, found {len(rows)}"
        )

    X = np.zeros((d, n), dtype=np.float64)
    Y = np.zeros((l, n), dtype=np.int8)
    for col, (line_no, raw) in enumerate(rows):
        fields = raw.split("|")
        if len(fields) != 3:
            _fail(line_no, "expected 3 '|'-separated fields")
        pos_f, neg_f, feat_f = fields
        if not pos_f.startswith("+:") or not neg_f.startswith("-:"):
            _fail(line_no, "label fields must start with '+:' and '-:'")
        seen_labels = set()
        for idx in _parse_index_csv(pos_f[2:], l, line_no, seen_labels, "label"):
            Y[idx - 1, col] = 1
        for idx in _parse_index_csv(neg_f[2:], l, line_no, seen_labels, "label"):
            Y[idx - 1, col] = -1
        seen_feats = set()
        for tok in feat_f.split():
            pair = tok.split(":", 1)
            if len(pair) != 2:
                _fail(line_no, f"bad feature token {tok!r}")
            try:
                idx = int(pair[0])
            except ValueError:
                _fail(line_no, f"bad feature index {pair[0]!r}")
            if not 1 <= idx <= d:
                _fail(line_no, f"feature index {idx} out of range 1..{d}")
            if idx in seen_feats:
                _fail(line_no, f"duplicate feature index {idx}")
            seen_feats.add(idx)
            try:
                val = float(pair[1])
            except ValueError:
                _fail(line_no, f"non-numeric feature value {pair[1]!r}")
            if not math.isfinite(val):
                _fail(line_no, f"non-finite feature value {pair[1]!r}")
            X[idx - 1, col] = val

    return Dataset(FeatureMatrix(X), LabelMatrix(Y))


def write_gml(data, comments=()):
    """Serialize a Dataset to GML text.

    Feature values are printed with full round-trip precision, so
    parse_gml(write_gml(d)) reproduces d exactly.  Only nonzero
    features are written.

    Args:
        data: Dataset to serialize.
        comments: optional strings emitted as leading '#' lines.

    Returns:
        GML text ending with a newline.
    """
    lines = [f"# {c}" for c in comments]
    lines.append(f"{data.n} {data.d} {data.l}")
    Y = data.labels.values
    X = data.features.values
    for i in range(data.n):
        pos = ",".join(str(j + 1) for j in np.flatnonzero(Y[:, i] == 1))
        neg = ",".join(str(j + 1) for j in np.flatnonzero(Y[:, i] == -1))
        feats = " ".join(
            f"{j + 1}:{float(X[j, i])!r}" for j in np.flatnonzero(X[:, i] != 0.0)
        )
        lines.append(f"+:{pos}|-:{neg}|{feats}")
    return "\n".join(lines) + "\n"


def apply_mask(data, spec):
    """Hide label entries, keeping rho percent of positions observed.

    Samples round(rho/100 * l*n) positions uniformly without
    replacement; every other position is zeroed.  For a fully observed
    input exactly that many positions remain observed.  Positions that
    were already zero stay zero, kept or not.

    Args:
        data: Dataset to mask.
        spec: MaskSpec with rho percentage and RNG seed.

    Returns:
        (masked Dataset, hidden entries) where hidden entries is a list
        of (label_idx, instance_idx, value) for every observation that
        was zeroed, 0-based, sorted by label then instance.
    """
    l, n = data.l, data.n
    total = l * n
    keep = round_half_away(spec.rho / 100.0 * total)
    rng = np.random.default_rng(spec.seed)
    kept = rng.choice(total, size=keep, replace=False)
    mask = np.zeros(total, dtype=bool)
    mask[kept] = True
    mask = mask.reshape(l, n)

    Y = data.labels.values
    masked = np.where(mask, Y, 0).astype(np.int8)
    hidden_pos = np.argwhere((Y != 0) & ~mask)
    hidden = [(int(j), int(i), int(Y[j, i])) for j, i in hidden_pos]
    hidden.sort()
    return Dataset(data.features, LabelMatrix(masked)), hidden


def take_instances(data, indices):
    """New Dataset restricted to the given instance columns, in order."""
    idx = np.asarray(indices, dtype=int)
    return Dataset(
        FeatureMatrix(data.features.values[:, idx]),
        LabelMatrix(data.labels.values[:, idx]),
    )


def split(data, train_fraction, seed):
    """Disjoint train/test split over instances.

    The train side gets round(train_fraction * n) instances chosen by a
    seeded permutation; both sides keep ascending instance order.

    Args:
        data: Dataset to split.
        train_fraction: fraction of instances for the train side.
        seed: RNG seed.

    Returns:
        (train Dataset, test Dataset).

    Raises:
        ValueError: if either side would be empty.
    """
    n = data.n
    n_train = round_half_away(train_fraction * n)
    if n_train <= 0 or n_train >= n:
        raise ValueError(
            f"train_fraction {train_fraction} leaves an empty side for n={n}"
        )
    perm = np.random.default_rng(seed).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return take_instances(data, train_idx), take_instances(data, test_idx)
