"""CSV reading and writing for feature batches and raw matrices.

A feature CSV has one sample per row. A header row is optional; when it is
present and its last column is named ``label``, that column holds integer
class labels.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .core import FeatureBatch
from .errors import ValidationError


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def parse_csv(text: str) -> tuple[np.ndarray, np.ndarray | None]:
    """Parse CSV text into a float matrix and optional integer labels."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValidationError("empty CSV")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise ValidationError("CSV has a header but no data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValidationError("CSV rows have unequal lengths")
    if header is not None and len(header) != width:
        raise ValidationError("CSV header length does not match data")
    try:
        data = np.array([[float(c) for c in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise ValidationError(f"non-numeric CSV entry: {exc}") from exc
    if not np.all(np.isfinite(data)):
        raise ValidationError("CSV contains non-finite values")
    labels = None
    if header is not None and header[-1] == "label":
        col = data[:, -1]
        if np.any(col != np.round(col)) or np.any(col < 0):
            raise ValidationError("label column must hold nonnegative integers")
        labels = col.astype(np.int64)
        data = data[:, :-1]
        if data.shape[1] == 0:
            raise ValidationError("CSV has labels but no feature columns")
    return data, labels


def read_feature_csv(path) -> FeatureBatch:
    """Read a feature CSV into a :class:`FeatureBatch`."""
    data, labels = parse_csv(Path(path).read_text(encoding="utf-8"))
    return FeatureBatch(data, labels)


def feature_csv_text(batch: FeatureBatch) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = [f"f{k}" for k in range(batch.dim)]
    if batch.labels is not None:
        header.append("label")
    writer.writerow(header)
    for k, row in enumerate(batch.rows):
        out = [repr(float(v)) for v in row]
        if batch.labels is not None:
            out.append(str(int(batch.labels[k])))
        writer.writerow(out)
    return buf.getvalue()


def write_feature_csv(batch: FeatureBatch, path):
    Path(path).write_text(feature_csv_text(batch), encoding="utf-8")


def write_matrix_csv(m, path):
    m = np.asarray(m, dtype=np.float64)
    lines = [",".join(repr(float(v)) for v in row) for row in m]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
