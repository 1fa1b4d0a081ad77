"""End-to-end metric: mask every position, aggregate, apply the measure.

Reference and candidate are each reduced to one vocabulary-sized
distribution (no alignment between them is ever computed); the configured
information measure compares the two bags.  Dataset scoring reuses each
text's bag across all cells that mention it, which also lets parameter
sweeps re-evaluate measures without re-running the backend.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .backends import DistributionProvider, TokenizedText
from .data import EvalDataset, candidate_text_id
from .distributions import IdfTable, aggregate, idf_weights, uniform_weights
from .errors import (
    DomainError,
    InfoLMError,
    NumericError,
    ScoringError,
    UnknownPreset,
)
from .matrix import ScoreMatrix
from .measures import MeasureKind, MeasureSpec, evaluate_measure

__all__ = [
    "Weighting",
    "ScoreRequest",
    "ScoreResult",
    "Preset",
    "PRESETS",
    "preset",
    "infolm_score",
    "score_dataset",
    "dataset_bags",
    "matrix_from_bags",
    "build_idf_table",
]


class Weighting(str, Enum):
    """How per-position distributions are weighted during aggregation."""

    IDF = "idf"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class ScoreRequest:
    reference: TokenizedText
    candidate: TokenizedText
    measure: MeasureSpec
    weighting: Weighting = Weighting.IDF


@dataclass(frozen=True)
class ScoreResult:
    """Raw measure value (lower = more similar) plus its report transform."""

    divergence_value: float
    similarity_value: float
    measure: MeasureSpec
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.divergence_value):
            raise NumericError(
                f"divergence is not finite: {self.divergence_value!r}"
            )


@dataclass(frozen=True)
class Preset:
    """A named measure parameterization; the model temperature is part of it."""

    name: str
    measure: MeasureSpec
    temperature: float = 1.0


def _presets() -> dict[str, Preset]:
    def spec(kind, **kw):
        return MeasureSpec(kind=kind, **kw)

    catalog = {
        # summarization, extractive systems
        "summ-ext-alpha": spec(MeasureKind.ALPHA_DIVERGENCE, alpha=0.75),
        "summ-ext-gamma": spec(MeasureKind.GAMMA_DIVERGENCE, beta=0.5),
        "summ-ext-ab": spec(MeasureKind.AB_DIVERGENCE, alpha=0.5, beta=0.25),
        # summarization, abstractive systems
        "summ-abs-alpha": spec(MeasureKind.ALPHA_DIVERGENCE, alpha=3.0),
        "summ-abs-gamma": spec(MeasureKind.GAMMA_DIVERGENCE, beta=0.5),
        "summ-abs-ab": spec(MeasureKind.AB_DIVERGENCE, alpha=3.0, beta=0.25),
        # data-to-text generation
        "d2t-alpha": spec(MeasureKind.ALPHA_DIVERGENCE, alpha=0.75),
        "d2t-gamma": spec(MeasureKind.GAMMA_DIVERGENCE, beta=3.0),
        "d2t-ab": spec(MeasureKind.AB_DIVERGENCE, alpha=3.0, beta=0.25),
        # parameter-free measures
        "fisher-rao": spec(MeasureKind.FISHER_RAO),
        "jeffreys-kl": spec(MeasureKind.JEFFREYS_KL),
        "kl": spec(MeasureKind.KL),
        "l1": spec(MeasureKind.L1),
        "l2": spec(MeasureKind.L2),
        "linf": spec(MeasureKind.LINF),
    }
    return {name: Preset(name, measure) for name, measure in catalog.items()}


PRESETS = _presets()


def preset(name: str) -> Preset:
    """Look up a named parameter preset (measure spec + temperature 1)."""
    try:
        return PRESETS[name]
    except KeyError:
        raise UnknownPreset(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None


def _weights(tokenized: TokenizedText, weighting: Weighting, idf: IdfTable | None):
    if weighting is Weighting.UNIFORM:
        return uniform_weights(len(tokenized))
    if idf is None:
        raise DomainError("IDF weighting requires an IdfTable")
    return idf_weights(tokenized.token_ids, idf)


def text_bag(
    provider: DistributionProvider,
    tokenized: TokenizedText,
    weighting: Weighting,
    idf: IdfTable | None = None,
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Aggregate one text's masked predictions into a single distribution."""
    warnings: tuple[str, ...] = ()
    window = provider.context_window
    if window is not None and len(tokenized) > window:
        tokenized = tokenized.truncated(window)
        warnings = (f"truncated:{tokenized.text_id}",)
    predictions = provider.predict_masked(tokenized)
    weights = _weights(tokenized, weighting, idf)
    return aggregate(predictions, weights), warnings


def infolm_score(
    request: ScoreRequest,
    provider: DistributionProvider,
    idf: IdfTable | None = None,
) -> ScoreResult:
    """Score one (reference, candidate) pair.

    Zero means the aggregated distributions are identical (a perfect
    match); larger values mean the texts activate different regions of the
    vocabulary.
    """
    ref_bag, ref_warn = text_bag(provider, request.reference, request.weighting, idf)
    cand_bag, cand_warn = text_bag(provider, request.candidate, request.weighting, idf)
    divergence = evaluate_measure(request.measure, ref_bag, cand_bag)
    warnings = request.measure.warning_flags() + ref_warn + cand_warn
    return ScoreResult(
        divergence_value=divergence,
        similarity_value=-divergence,
        measure=request.measure,
        warnings=warnings,
    )


def build_idf_table(
    dataset: EvalDataset,
    provider: DistributionProvider,
    corpus: str = "union",
) -> IdfTable:
    """Document frequencies over the dataset's texts.

    `corpus` selects which side of the dataset counts as a document:
    "references", "candidates", or their "union" (default).
    """
    if corpus not in ("union", "references", "candidates"):
        raise DomainError(
            f"corpus must be union/references/candidates, got {corpus!r}"
        )
    documents = []
    if corpus in ("union", "references"):
        for entry in dataset.entries:
            documents.append((entry.text_id, entry.reference))
    if corpus in ("union", "candidates"):
        for entry in dataset.entries:
            for candidate in entry.candidates:
                documents.append(
                    (candidate_text_id(entry.text_id, candidate.system_id),
                     candidate.text)
                )
    provider.prefetch(documents)
    token_sets = [
        provider.tokenize(text_id, text).token_ids for text_id, text in documents
    ]
    return IdfTable.from_documents(token_sets)


def dataset_bags(
    dataset: EvalDataset,
    provider: DistributionProvider,
    weighting: Weighting = Weighting.IDF,
    idf: IdfTable | None = None,
    workers: int = 1,
) -> tuple[dict[str, np.ndarray], list[tuple[str, str, str]], list[str]]:
    """Aggregated bag per unique text id, plus per-text failures/warnings.

    Bags do not depend on the measure, so sweeps over measure parameters
    can reuse them.
    """
    if workers < 1:
        raise DomainError("workers must be >= 1")
    if weighting is Weighting.IDF and idf is None:
        idf = build_idf_table(dataset, provider)
    items = dataset.scoring_items()
    provider.prefetch(items)

    bags: dict[str, np.ndarray] = {}
    failures: list[tuple[str, str, str]] = []
    warnings: list[str] = []

    def compute(item: tuple[str, str]):
        text_id, text = item
        tokenized = provider.tokenize(text_id, text)
        return text_bag(provider, tokenized, weighting, idf)

    def run(item):
        try:
            return item[0], compute(item), None
        except InfoLMError as exc:
            return item[0], None, f"{type(exc).__name__}: {exc}"

    if workers == 1:
        outcomes = [run(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, items))

    failed: dict[str, str] = {}
    for text_id, result, error in outcomes:
        if error is not None:
            failed[text_id] = error
        else:
            bag, warn = result
            bags[text_id] = bag
            warnings.extend(warn)

    for entry in dataset.entries:
        ref_error = failed.get(entry.text_id)
        for candidate in entry.candidates:
            cand_error = failed.get(
                candidate_text_id(entry.text_id, candidate.system_id)
            )
            error = ref_error or cand_error
            if error is not None:
                failures.append((entry.text_id, candidate.system_id, error))
    return bags, failures, warnings


def matrix_from_bags(
    dataset: EvalDataset,
    measure: MeasureSpec,
    bags: dict[str, np.ndarray],
    failures: list[tuple[str, str, str]] = (),
    skip_errors: bool = False,
) -> ScoreMatrix:
    """Evaluate `measure` over precomputed bags into a ScoreMatrix."""
    text_ids = dataset.text_ids
    system_ids = dataset.system_ids
    column = {system_id: j for j, system_id in enumerate(system_ids)}
    n, s = len(text_ids), len(system_ids)
    values = np.zeros((n, s))
    present = np.ones((n, s), dtype=bool)
    all_failures = list(failures)
    failed_cells = {(t, sys) for t, sys, _ in all_failures}
    for i, entry in enumerate(dataset.entries):
        for candidate in entry.candidates:
            j = column[candidate.system_id]
            key = (entry.text_id, candidate.system_id)
            if key in failed_cells:
                present[i, j] = False
                continue
            ref_bag = bags[entry.text_id]
            cand_bag = bags[candidate_text_id(*key)]
            try:
                divergence = evaluate_measure(measure, ref_bag, cand_bag)
                if not math.isfinite(divergence):
                    raise NumericError(f"divergence is not finite: {divergence!r}")
            except InfoLMError as exc:
                all_failures.append((*key, f"{type(exc).__name__}: {exc}"))
                present[i, j] = False
                continue
            values[i, j] = -divergence
    if all_failures and not skip_errors:
        raise ScoringError(all_failures)
    return ScoreMatrix(
        values=values,
        text_ids=text_ids,
        system_ids=system_ids,
        present=present,
        measure_label=measure.label(),
        failures=tuple(all_failures),
    )


def score_dataset(
    dataset: EvalDataset,
    measure: MeasureSpec,
    provider: DistributionProvider,
    idf: IdfTable | None = None,
    *,
    weighting: Weighting = Weighting.IDF,
    skip_errors: bool = False,
    workers: int = 1,
) -> ScoreMatrix:
    """Score every (reference, candidate) cell of the dataset.

    Without `skip_errors` any failed cell aborts the run with a
    ScoringError listing all failures; with it, failed cells are marked
    missing and excluded pairwise downstream.
    """
    bags, failures, _ = dataset_bags(dataset, provider, weighting, idf, workers)
    return matrix_from_bags(dataset, measure, bags, failures, skip_errors)
