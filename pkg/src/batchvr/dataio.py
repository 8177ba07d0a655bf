"""LIBSVM text parsing and an immutable CSR dataset container."""

from __future__ import annotations

import gzip
import io
from dataclasses import dataclass

import numpy as np

GZIP_MAGIC = b"\x1f\x8b"


class ParseError(ValueError):
    """Malformed LIBSVM input; carries the (1-based) offending line number."""

    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class SparseDataset:
    """Immutable CSR feature matrix plus labels.

    Row i occupies ``col_indices[row_offsets[i]:row_offsets[i+1]]`` with
    matching ``values``; column indices are 0-based and strictly increasing
    within each row.
    """

    n_samples: int
    n_features: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    labels: np.ndarray

    def row(self, i):
        """Return (col_indices, values) of row i as views."""
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    @property
    def nnz(self):
        return len(self.values)

    def row_norms_sq(self):
        c = np.concatenate(([0.0], np.cumsum(self.values * self.values)))
        return c[self.row_offsets[1:]] - c[self.row_offsets[:-1]]

    def validate(self):
        off = self.row_offsets
        if off[0] != 0 or off[-1] != len(self.values) or len(off) != self.n_samples + 1:
            raise ValueError("inconsistent row offsets")
        if np.any(np.diff(off) < 0):
            raise ValueError("row offsets must be non-decreasing")
        if len(self.col_indices) != len(self.values):
            raise ValueError("col_indices/values length mismatch")
        if self.nnz and (self.col_indices.min() < 0 or self.col_indices.max() >= self.n_features):
            raise ValueError("column index out of range")
        for i in range(self.n_samples):
            cols = self.col_indices[off[i]:off[i + 1]]
            if len(cols) > 1 and np.any(np.diff(cols) <= 0):
                raise ValueError(f"row {i}: column indices not strictly increasing")
        if len(self.labels) != self.n_samples:
            raise ValueError("label count mismatch")
        return self


@dataclass(frozen=True)
class DatasetStats:
    n_samples: int
    n_features: int
    nnz: int
    nnz_ratio: float
    max_row_norm_sq: float


def _as_text_stream(source):
    if isinstance(source, (str, bytes)):
        data = source.encode() if isinstance(source, str) else source
        if data[:2] == GZIP_MAGIC:
            data = gzip.decompress(data)
        return io.StringIO(data.decode("ascii"))
    if hasattr(source, "read"):
        head = source.read(2)
        rest = source.read()
        data = head + rest
        if isinstance(data, str):
            return io.StringIO(data)
        if data[:2] == GZIP_MAGIC:
            data = gzip.decompress(data)
        return io.StringIO(data.decode("ascii"))
    raise TypeError(f"unsupported source type: {type(source)!r}")


def parse_libsvm(source, n_features=None) -> SparseDataset:
    """Parse LIBSVM text (``label idx:val ...``, 1-based strictly increasing
    indices) into a :class:`SparseDataset`.

    ``source`` may be a str, bytes (gzip sniffed by magic bytes), or a
    file-like object.  ``n_features`` forces the feature count; otherwise the
    maximum observed index is used.
    """
    stream = _as_text_stream(source)
    labels = []
    offsets = [0]
    cols = []
    vals = []
    max_col = -1
    line_no = 0
    saw_content = False
    for raw in stream:
        line_no += 1
        line = raw.strip()
        if not line:
            continue
        saw_content = True
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise ParseError(f"non-numeric label {tokens[0]!r}", line_no)
        prev = -1
        for tok in tokens[1:]:
            idx_s, _, val_s = tok.partition(":")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"malformed feature token {tok!r}", line_no)
            if idx < 1:
                raise ParseError(f"index {idx} must be >= 1", line_no)
            col = idx - 1
            if col <= prev:
                raise ParseError(f"non-increasing index {idx}", line_no)
            prev = col
            cols.append(col)
            vals.append(val)
            if col > max_col:
                max_col = col
        offsets.append(len(cols))
    if not saw_content:
        raise ParseError("empty input")
    d = max_col + 1
    if n_features is not None:
        if n_features < d:
            raise ParseError(f"n_features={n_features} smaller than max index {d}")
        d = n_features
    ds = SparseDataset(
        n_samples=len(labels),
        n_features=d,
        row_offsets=np.asarray(offsets, dtype=np.int64),
        col_indices=np.asarray(cols, dtype=np.int64),
        values=np.asarray(vals, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.float64),
    )
    return ds


def write_libsvm(ds: SparseDataset) -> str:
    """Serialize back to LIBSVM text (1-based indices, repr-exact values)."""
    lines = []
    for i in range(ds.n_samples):
        cols, vals = ds.row(i)
        parts = [repr(float(ds.labels[i]))]
        parts.extend(f"{c + 1}:{float(v)!r}" for c, v in zip(cols, vals))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def stats(ds: SparseDataset) -> DatasetStats:
    """n, d, nnz, density and the largest squared row norm."""
    denom = ds.n_samples * ds.n_features
    norms = ds.row_norms_sq()
    return DatasetStats(
        n_samples=ds.n_samples,
        n_features=ds.n_features,
        nnz=ds.nnz,
        nnz_ratio=ds.nnz / denom if denom else 0.0,
        max_row_norm_sq=float(norms.max()) if len(norms) else 0.0,
    )
