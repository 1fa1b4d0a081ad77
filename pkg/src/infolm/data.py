"""Evaluation datasets: references, per-system candidates, human scores.

The on-disk format is line-delimited JSON, one record per reference:

    {"text_id": ..., "reference": ...,
     "candidates": [{"system_id": ..., "text": ..., "human_scores": {...}}]}

Every entry must cover the same systems and every candidate must score
the same set of criteria (which may be empty for scoring-only datasets).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DomainError, FormatError, UnknownCriterion
from .matrix import ScoreMatrix

__all__ = ["CandidateRecord", "DatasetEntry", "EvalDataset", "candidate_text_id"]


def candidate_text_id(text_id: str, system_id: str) -> str:
    """Stable identifier for a candidate text inside providers and stores."""
    return f"{text_id}@{system_id}"


@dataclass(frozen=True)
class CandidateRecord:
    system_id: str
    text: str
    human_scores: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class DatasetEntry:
    text_id: str
    reference: str
    candidates: tuple[CandidateRecord, ...]


@dataclass(frozen=True)
class EvalDataset:
    entries: tuple[DatasetEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise DomainError("dataset has no entries")
        first_systems = tuple(c.system_id for c in self.entries[0].candidates)
        if not first_systems:
            raise DomainError(
                f"entry {self.entries[0].text_id!r} has no candidates"
            )
        criteria = frozenset(self.entries[0].candidates[0].human_scores)
        seen_texts = set()
        for entry in self.entries:
            if entry.text_id in seen_texts:
                raise DomainError(f"duplicate text_id {entry.text_id!r}")
            seen_texts.add(entry.text_id)
            systems = tuple(c.system_id for c in entry.candidates)
            if set(systems) != set(first_systems) or len(set(systems)) != len(systems):
                raise DomainError(
                    f"entry {entry.text_id!r} covers systems {sorted(systems)}, "
                    f"expected {sorted(first_systems)}"
                )
            for candidate in entry.candidates:
                if frozenset(candidate.human_scores) != criteria:
                    raise DomainError(
                        f"entry {entry.text_id!r}, system "
                        f"{candidate.system_id!r}: criteria "
                        f"{sorted(candidate.human_scores)} != {sorted(criteria)}"
                    )

    @property
    def text_ids(self) -> tuple[str, ...]:
        return tuple(entry.text_id for entry in self.entries)

    @property
    def system_ids(self) -> tuple[str, ...]:
        return tuple(c.system_id for c in self.entries[0].candidates)

    @property
    def criteria(self) -> tuple[str, ...]:
        return tuple(sorted(self.entries[0].candidates[0].human_scores))

    def candidate(self, text_id: str, system_id: str) -> CandidateRecord:
        for entry in self.entries:
            if entry.text_id == text_id:
                for candidate in entry.candidates:
                    if candidate.system_id == system_id:
                        return candidate
        raise KeyError((text_id, system_id))

    def scoring_items(self) -> list[tuple[str, str]]:
        """All (text_id, text) pairs a scoring run will request."""
        items = [(entry.text_id, entry.reference) for entry in self.entries]
        for entry in self.entries:
            for candidate in entry.candidates:
                items.append(
                    (candidate_text_id(entry.text_id, candidate.system_id),
                     candidate.text)
                )
        return items

    def human_matrix(self, criterion: str) -> ScoreMatrix:
        """Human scores for one criterion as a complete ScoreMatrix."""
        if criterion not in self.criteria:
            raise UnknownCriterion(
                f"unknown criterion {criterion!r}; available: "
                f"{', '.join(self.criteria) or '(none)'}"
            )
        systems = self.system_ids
        values = np.array(
            [
                [
                    entry.candidates[
                        [c.system_id for c in entry.candidates].index(system)
                    ].human_scores[criterion]
                    for system in systems
                ]
                for entry in self.entries
            ]
        )
        return ScoreMatrix(
            values=values,
            text_ids=self.text_ids,
            system_ids=systems,
            measure_label=f"human:{criterion}",
        )

    @classmethod
    def load(cls, path) -> "EvalDataset":
        path = Path(path)
        if not path.exists():
            raise FormatError(f"dataset file not found: {path}")
        entries = []
        with path.open(encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                locus = f"{path}:{lineno}"
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"{locus}: invalid JSON: {exc}") from exc
                try:
                    candidates = tuple(
                        CandidateRecord(
                            system_id=str(c["system_id"]),
                            text=str(c["text"]),
                            human_scores={
                                str(k): float(v)
                                for k, v in c.get("human_scores", {}).items()
                            },
                        )
                        for c in record["candidates"]
                    )
                    entries.append(
                        DatasetEntry(
                            text_id=str(record["text_id"]),
                            reference=str(record["reference"]),
                            candidates=candidates,
                        )
                    )
                except (KeyError, TypeError, ValueError) as exc:
                    raise FormatError(f"{locus}: bad dataset record: {exc}") from exc
        try:
            return cls(entries=tuple(entries))
        except DomainError as exc:
            raise FormatError(f"{path}: {exc}") from exc

    def save(self, path) -> None:
        lines = []
        for entry in self.entries:
            lines.append(
                json.dumps(
                    {
                        "text_id": entry.text_id,
                        "reference": entry.reference,
                        "candidates": [
                            {
                                "system_id": c.system_id,
                                "text": c.text,
                                "human_scores": dict(c.human_scores),
                            }
                            for c in entry.candidates
                        ],
                    },
                    sort_keys=True,
                )
            )
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
