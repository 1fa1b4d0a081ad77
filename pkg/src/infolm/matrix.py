"""Score matrices (texts x systems) and their CSV representation.

Values are similarity-oriented: higher means the candidate is closer to
the reference.  Metric divergences are stored negated so that human
scores and metric scores correlate with the same sign convention.  The
CSV schema is `text_id,system_id,divergence,similarity,measure` with 12
significant digits; cells missing from a partial run are simply absent.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateInput, FormatError, NumericError, ShapeError

__all__ = ["ScoreMatrix", "CSV_HEADER", "format_value"]

CSV_HEADER = ("text_id", "system_id", "divergence", "similarity", "measure")


def format_value(value: float) -> str:
    """Decimal formatting at 12 significant digits; -0.0 normalizes to 0."""
    return f"{float(value) + 0.0:.12g}"


@dataclass
class ScoreMatrix:
    """N x S matrix of similarity-oriented scores, one column per system."""

    values: np.ndarray
    text_ids: tuple[str, ...]
    system_ids: tuple[str, ...]
    present: np.ndarray | None = None
    measure_label: str = ""
    failures: tuple[tuple[str, str, str], ...] = field(default=())

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.text_ids = tuple(self.text_ids)
        self.system_ids = tuple(self.system_ids)
        n, s = len(self.text_ids), len(self.system_ids)
        if self.values.shape != (n, s):
            raise ShapeError(
                f"values shape {self.values.shape} does not match "
                f"{n} texts x {s} systems"
            )
        if len(set(self.text_ids)) != n or len(set(self.system_ids)) != s:
            raise ShapeError("text_ids and system_ids must be unique")
        if self.present is None:
            self.present = np.ones((n, s), dtype=bool)
        else:
            self.present = np.asarray(self.present, dtype=bool)
            if self.present.shape != (n, s):
                raise ShapeError("present mask shape does not match values")
        if not np.all(np.isfinite(self.values[self.present])):
            raise NumericError("score matrix contains non-finite present entries")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def is_complete(self) -> bool:
        return bool(self.present.all())

    def same_labels(self, other: "ScoreMatrix") -> bool:
        return (
            self.text_ids == other.text_ids and self.system_ids == other.system_ids
        )

    def column_means(self) -> np.ndarray:
        """Per-system mean over present cells."""
        counts = self.present.sum(axis=0)
        if np.any(counts == 0):
            empty = [self.system_ids[j] for j in np.flatnonzero(counts == 0)]
            raise DegenerateInput(f"no present scores for system(s) {empty}")
        filled = np.where(self.present, self.values, 0.0)
        return filled.sum(axis=0) / counts

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for i, text_id in enumerate(self.text_ids):
            for j, system_id in enumerate(self.system_ids):
                if not self.present[i, j]:
                    continue
                similarity = self.values[i, j]
                writer.writerow(
                    (
                        text_id,
                        system_id,
                        format_value(-similarity),
                        format_value(similarity),
                        self.measure_label,
                    )
                )
        return buffer.getvalue()

    def save_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def from_csv(cls, path) -> "ScoreMatrix":
        path = Path(path)
        if not path.exists():
            raise FormatError(f"score CSV not found: {path}")
        with path.open(encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                raise FormatError(f"{path}: empty file") from None
            if tuple(header) != CSV_HEADER:
                raise FormatError(
                    f"{path}: row 1: expected header {','.join(CSV_HEADER)}, "
                    f"got {','.join(header)}"
                )
            cells: dict[tuple[str, str], float] = {}
            text_order: list[str] = []
            system_order: list[str] = []
            label = ""
            for row_number, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(CSV_HEADER):
                    raise FormatError(
                        f"{path}: row {row_number}: expected "
                        f"{len(CSV_HEADER)} columns, got {len(row)}"
                    )
                text_id, system_id, _, similarity, measure = row
                try:
                    value = float(similarity)
                except ValueError:
                    raise FormatError(
                        f"{path}: row {row_number}: column 'similarity': "
                        f"not a number: {similarity!r}"
                    ) from None
                key = (text_id, system_id)
                if key in cells:
                    raise FormatError(
                        f"{path}: row {row_number}: duplicate cell {key}"
                    )
                cells[key] = value
                if text_id not in text_order:
                    text_order.append(text_id)
                if system_id not in system_order:
                    system_order.append(system_id)
                label = measure
        if not cells:
            raise FormatError(f"{path}: no score rows")
        n, s = len(text_order), len(system_order)
        values = np.zeros((n, s))
        present = np.zeros((n, s), dtype=bool)
        for i, text_id in enumerate(text_order):
            for j, system_id in enumerate(system_order):
                key = (text_id, system_id)
                if key in cells:
                    values[i, j] = cells[key]
                    present[i, j] = True
        return cls(
            values=values,
            text_ids=tuple(text_order),
            system_ids=tuple(system_order),
            present=present,
            measure_label=label,
        )
