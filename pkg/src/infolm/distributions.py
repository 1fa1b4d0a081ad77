"""Temperature-scaled softmax, token importance weights, and aggregation.

A text is scored by masking each token position, collecting one
vocabulary distribution per position from the language model, and
averaging them into a single "bag of distributions" with importance
weights (uniform or smoothed inverse document frequency).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DomainError,
    EmptyInputError,
    FormatError,
    NumericError,
    ShapeError,
)

__all__ = [
    "MaskedPrediction",
    "IdfTable",
    "temperature_softmax",
    "entropy",
    "idf_weights",
    "uniform_weights",
    "aggregate",
]


@dataclass(frozen=True, eq=False)
class MaskedPrediction:
    """Vocabulary distribution predicted for one masked position."""

    position: int
    distribution: np.ndarray

    def __post_init__(self):
        if self.position < 0:
            raise DomainError(f"position must be nonnegative, got {self.position}")


@dataclass(frozen=True)
class IdfTable:
    """Document frequencies over a corpus, for IDF importance weights."""

    document_count: int
    doc_frequency: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.document_count < 1:
            raise DomainError("document_count must be >= 1")
        for token, df in self.doc_frequency.items():
            if not 0 <= df <= self.document_count:
                raise DomainError(
                    f"df for token {token} is {df}, outside [0, {self.document_count}]"
                )

    @classmethod
    def from_documents(cls, documents: Iterable[Sequence[int]]) -> "IdfTable":
        """Count, for each token id, the number of documents containing it."""
        df: dict[int, int] = {}
        count = 0
        for doc in documents:
            count += 1
            for token in set(doc):
                df[token] = df.get(token, 0) + 1
        if count == 0:
            raise EmptyInputError("cannot build an IDF table from an empty corpus")
        return cls(document_count=count, doc_frequency=df)

    def save(self, path) -> None:
        """Write line-delimited JSON: a header record, then one per token."""
        lines = [json.dumps({"document_count": self.document_count})]
        for token in sorted(self.doc_frequency):
            lines.append(
                json.dumps({"token_id": token, "df": self.doc_frequency[token]})
            )
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "IdfTable":
        text = Path(path).read_text(encoding="utf-8")
        header = None
        df: dict[int, int] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if header is None:
                if "document_count" not in record:
                    raise FormatError(f"{path}:{lineno}: missing document_count header")
                header = int(record["document_count"])
                continue
            try:
                df[int(record["token_id"])] = int(record["df"])
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: bad idf record: {exc}") from exc
        if header is None:
            raise FormatError(f"{path}: empty idf table file")
        try:
            return cls(document_count=header, doc_frequency=df)
        except DomainError as exc:
            raise FormatError(f"{path}: {exc}") from exc


def temperature_softmax(logits, temperature: float) -> np.ndarray:
    """softmax(logits / temperature), computed with max subtraction.

    Low temperatures sharpen the distribution toward the arg-max token;
    high temperatures flatten it toward uniform.
    """
    if not temperature > 0:
        raise DomainError(f"temperature must be > 0, got {temperature!r}")
    z = np.asarray(logits, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise ShapeError(f"expected a nonempty logit vector, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise NumericError("logits contain non-finite entries")
    z = z / temperature
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def entropy(p) -> float:
    """Shannon entropy -sum p ln p in nats, with 0 ln 0 = 0."""
    v = np.asarray(p, dtype=float)
    terms = np.where(v > 0, v * np.log(np.where(v > 0, v, 1.0)), 0.0)
    return float(-terms.sum())


def idf_weights(token_ids: Sequence[int], table: IdfTable) -> np.ndarray:
    """Smoothed-IDF importance weights for the tokens of one text.

    raw_k = ln((1 + N) / (1 + df(token_k))) + 1, normalized to sum 1.
    The +1 keeps weights strictly positive even for tokens present in
    every document.
    """
    ids = list(token_ids)
    if not ids:
        raise EmptyInputError("cannot weight an empty token sequence")
    n = table.document_count
    raw = np.array(
        [
            math.log((1.0 + n) / (1.0 + table.doc_frequency.get(t, 0))) + 1.0
            for t in ids
        ]
    )
    return raw / raw.sum()


def uniform_weights(length: int) -> np.ndarray:
    """Equal importance weights 1/length."""
    if length < 1:
        raise EmptyInputError("cannot weight an empty token sequence")
    return np.full(length, 1.0 / length)


def aggregate(
    predictions: Sequence[MaskedPrediction], weights
) -> np.ndarray:
    """Weighted bag of distributions: sum_k weights_k * distribution_k.

    The result is a convex combination, hence itself a distribution.
    """
    preds = list(predictions)
    if not preds:
        raise EmptyInputError("cannot aggregate zero predictions")
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.shape[0] != len(preds):
        raise ShapeError(
            f"{len(preds)} predictions but {w.shape} weights"
        )
    size = preds[0].distribution.shape[0]
    for pred in preds:
        if pred.distribution.shape != (size,):
            raise ShapeError("predictions span different vocabulary sizes")
    if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
        raise DomainError("weights must be nonnegative and sum to 1")
    stacked = np.stack([pred.distribution for pred in preds])
    return w @ stacked
