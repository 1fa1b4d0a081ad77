"""Meta-evaluation: correlation with human judgments and significance.

Text-level correlation averages, over references, the correlation between
the per-system metric scores and per-system human scores for that
reference.  System-level correlation first averages scores per system and
correlates the two length-S vectors.  The Williams/Steiger t-test decides
whether two metrics' correlations with the same human scores differ
significantly.

All correlations are computed against similarity-oriented values (higher
= better), so a positive coefficient always means agreement with humans;
coefficients are reported signed, never as absolute values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import betainc
from scipy.stats import kendalltau, rankdata

from .backends import DistributionProvider
from .data import EvalDataset
from .distributions import IdfTable
from .errors import (
    AllDegenerate,
    DegenerateInput,
    DomainError,
    InfoLMError,
    ShapeError,
)
from .matrix import ScoreMatrix
from .measures import MeasureKind, MeasureSpec
from .scoring import Weighting, dataset_bags, matrix_from_bags

__all__ = [
    "COEFFICIENTS",
    "CorrelationReport",
    "SignificanceResult",
    "SweepPoint",
    "GridCell",
    "DistributionReport",
    "pearson",
    "spearman",
    "kendall",
    "correlation",
    "text_level",
    "system_level",
    "williams_test",
    "metric_correlation_matrix",
    "temperature_sweep",
    "ab_grid_sweep",
    "score_distribution_report",
]


def _vectors(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or b.ndim != 1:
        raise ShapeError("correlation expects 1-d vectors")
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < 2:
        raise ShapeError("correlation needs at least 2 points")
    return a, b


def pearson(a, b) -> float:
    """Sample Pearson r; DegenerateInput if either vector is constant."""
    a, b = _vectors(a, b)
    da = a - a.mean()
    db = b - b.mean()
    na = math.sqrt(float(np.sum(da * da)))
    nb = math.sqrt(float(np.sum(db * db)))
    if na == 0.0 or nb == 0.0:
        raise DegenerateInput("pearson is undefined for a constant vector")
    r = float(np.sum(da * db)) / (na * nb)
    return min(1.0, max(-1.0, r))


def spearman(a, b) -> float:
    """Pearson correlation of average-fractional ranks (ties share ranks)."""
    a, b = _vectors(a, b)
    ra = rankdata(a, method="average")
    rb = rankdata(b, method="average")
    try:
        return pearson(ra, rb)
    except DegenerateInput:
        raise DegenerateInput(
            "spearman is undefined when all ranks tie in a vector"
        ) from None


def kendall(a, b) -> float:
    """Kendall tau-b (tie-corrected)."""
    a, b = _vectors(a, b)
    tau = kendalltau(a, b, variant="b").statistic
    if math.isnan(tau):
        raise DegenerateInput("kendall tau-b is undefined for a fully tied vector")
    return float(tau)


COEFFICIENTS: dict[str, Callable] = {
    "pearson": pearson,
    "spearman": spearman,
    "kendall": kendall,
}


def correlation(kind: str, a, b) -> float:
    try:
        fn = COEFFICIENTS[kind]
    except KeyError:
        raise DomainError(
            f"unknown coefficient {kind!r}; expected one of "
            f"{', '.join(COEFFICIENTS)}"
        ) from None
    return fn(a, b)


@dataclass(frozen=True)
class CorrelationReport:
    coefficient: str
    level: str  # "text" or "system"
    criterion: str
    value: float
    n_effective: int
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class SignificanceResult:
    t_statistic: float
    p_value: float
    degrees_of_freedom: int
    direction: str  # "metric1", "metric2", or "tie"


def _check_matrices(scores: ScoreMatrix, human: ScoreMatrix) -> None:
    if not scores.same_labels(human):
        raise ShapeError(
            "score and human matrices disagree on text/system labels"
        )
    if len(scores.system_ids) < 2:
        raise DomainError("correlation needs at least 2 systems")


def text_level(
    scores: ScoreMatrix, human: ScoreMatrix, kind: str, criterion: str = ""
) -> CorrelationReport:
    """Mean over references of the per-reference correlation across systems.

    Rows where the coefficient is undefined (constant vectors, too few
    present cells) are excluded with a warning and n_effective reduced.
    """
    _check_matrices(scores, human)
    values = []
    warnings = []
    for i, text_id in enumerate(scores.text_ids):
        mask = scores.present[i] & human.present[i]
        if int(mask.sum()) < 2:
            warnings.append(f"row-skipped:{text_id}:too-few-cells")
            continue
        try:
            values.append(
                correlation(kind, scores.values[i][mask], human.values[i][mask])
            )
        except DegenerateInput:
            warnings.append(f"row-skipped:{text_id}:degenerate")
    if not values:
        raise AllDegenerate(
            f"every row was degenerate for {kind} at the text level"
        )
    return CorrelationReport(
        coefficient=kind,
        level="text",
        criterion=criterion,
        value=float(np.mean(values)),
        n_effective=len(values),
        warnings=tuple(warnings),
    )


def system_level(
    scores: ScoreMatrix, human: ScoreMatrix, kind: str, criterion: str = ""
) -> CorrelationReport:
    """Correlation between per-system mean metric and human scores."""
    _check_matrices(scores, human)
    value = correlation(kind, scores.column_means(), human.column_means())
    return CorrelationReport(
        coefficient=kind,
        level="system",
        criterion=criterion,
        value=value,
        n_effective=len(scores.system_ids),
    )


def _t_sf(t: float, df: int) -> float:
    """Student-t survival function via the regularized incomplete beta."""
    x = df / (df + t * t)
    tail = 0.5 * float(betainc(df / 2.0, 0.5, x))
    return tail if t >= 0 else 1.0 - tail


def williams_test(
    r_metric1_human: float,
    r_metric2_human: float,
    r_metric1_metric2: float,
    n: int,
) -> SignificanceResult:
    """Williams/Steiger t-test for two dependent correlations.

    Tests whether metric1 correlates with the human scores more strongly
    than metric2 does, given their mutual correlation, over n items.
    One-tailed: p < 0.5 favors metric1, p > 0.5 favors metric2.
    """
    if n < 4:
        raise DomainError(f"williams test needs n >= 4, got {n}")
    r1, r2, r12 = r_metric1_human, r_metric2_human, r_metric1_metric2
    for name, r in (("r1", r1), ("r2", r2)):
        if not -1.0 < r < 1.0:
            raise DomainError(f"{name} must lie strictly inside (-1, 1), got {r!r}")
    if not -1.0 <= r12 <= 1.0:
        raise DomainError(f"r12 must lie in [-1, 1], got {r12!r}")
    df = n - 3
    if r1 == r2:
        # The numerator is identically zero; the closed form is 0/0 at
        # |r12| = 1, so the tie is resolved explicitly.
        return SignificanceResult(0.0, 0.5, df, "tie")
    k = 1.0 - r1 * r1 - r2 * r2 - r12 * r12 + 2.0 * r1 * r2 * r12
    numerator = (r1 - r2) * math.sqrt((n - 1.0) * (1.0 + r12))
    radicand = (
        2.0 * k * (n - 1.0) / (n - 3.0)
        + ((r1 + r2) ** 2 / 4.0) * (1.0 - r12) ** 3
    )
    if radicand <= 0.0:
        # k < 0 means (r1, r2, r12) is not a realizable correlation triple
        raise DomainError(
            f"correlations (r1={r1!r}, r2={r2!r}, r12={r12!r}) are not "
            "jointly realizable"
        )
    t = numerator / math.sqrt(radicand)
    return SignificanceResult(
        t_statistic=t,
        p_value=_t_sf(t, df),
        degrees_of_freedom=df,
        direction="metric1" if r1 > r2 else "metric2",
    )


def metric_correlation_matrix(
    score_matrices: Mapping[str, ScoreMatrix],
    kind: str = "pearson",
    per_system: bool = False,
) -> tuple[tuple[str, ...], np.ndarray]:
    """Pairwise correlation between metrics' scores on the same dataset.

    By default the full text x system score vectors are correlated
    (pairwise over cells present in both); with `per_system`, per-system
    mean vectors are used instead.
    """
    names = tuple(score_matrices)
    if len(names) < 2:
        raise ShapeError("metric correlation needs at least 2 metrics")
    matrices = [score_matrices[name] for name in names]
    first = matrices[0]
    for name, m in zip(names, matrices):
        if not m.same_labels(first):
            raise ShapeError(f"metric {name!r} has different text/system labels")
    size = len(names)
    out = np.eye(size)
    for i in range(size):
        for j in range(i + 1, size):
            a, b = matrices[i], matrices[j]
            if per_system:
                va, vb = a.column_means(), b.column_means()
            else:
                mask = a.present & b.present
                va, vb = a.values[mask], b.values[mask]
            out[i, j] = out[j, i] = correlation(kind, va, vb)
    return names, out


@dataclass(frozen=True)
class SweepPoint:
    temperature: float
    criterion: str
    coefficient: str
    value: float | None
    error: str | None = None


def temperature_sweep(
    dataset: EvalDataset,
    measure: MeasureSpec,
    provider_factory: Callable[[float], DistributionProvider],
    temperatures: Sequence[float],
    criterion: str,
    kinds: Sequence[str] = ("pearson",),
    *,
    weighting: Weighting = Weighting.IDF,
    idf: IdfTable | None = None,
    workers: int = 1,
) -> list[SweepPoint]:
    """System-level correlation at each temperature, in input order.

    A failure at one temperature is recorded on its rows and the sweep
    continues.
    """
    for t in temperatures:
        if not t > 0:
            raise DomainError(f"temperatures must be > 0, got {t!r}")
    human = dataset.human_matrix(criterion)
    points = []
    for t in temperatures:
        try:
            provider = provider_factory(t)
            bags, failures, _ = dataset_bags(
                dataset, provider, weighting, idf, workers
            )
            scores = matrix_from_bags(dataset, measure, bags, failures)
            for kind in kinds:
                report = system_level(scores, human, kind, criterion)
                points.append(SweepPoint(t, criterion, kind, report.value))
        except InfoLMError as exc:
            for kind in kinds:
                points.append(
                    SweepPoint(t, criterion, kind, None, f"{type(exc).__name__}: {exc}")
                )
    return points


@dataclass(frozen=True)
class GridCell:
    alpha: float
    beta: float
    value: float | None
    flag: str | None = None


def ab_grid_sweep(
    dataset: EvalDataset,
    alphas: Sequence[float],
    betas: Sequence[float],
    provider: DistributionProvider,
    criterion: str,
    kind: str = "pearson",
    *,
    weighting: Weighting = Weighting.IDF,
    idf: IdfTable | None = None,
    symmetrize: bool = True,
    workers: int = 1,
) -> list[list[GridCell]]:
    """System-level correlation over an (alpha, beta) grid.

    Bags are computed once and reused for every cell.  Cells whose
    parameters fall outside the measure's domain are flagged, not dropped.
    """
    human = dataset.human_matrix(criterion)
    bags, failures, _ = dataset_bags(dataset, provider, weighting, idf, workers)
    grid = []
    for alpha in alphas:
        row = []
        for beta in betas:
            try:
                measure = MeasureSpec(
                    kind=MeasureKind.AB_DIVERGENCE,
                    alpha=alpha,
                    beta=beta,
                    symmetrize=symmetrize,
                )
                scores = matrix_from_bags(dataset, measure, bags, failures)
                report = system_level(scores, human, kind, criterion)
                row.append(GridCell(alpha, beta, report.value))
            except InfoLMError as exc:
                row.append(
                    GridCell(alpha, beta, None, f"{type(exc).__name__}: {exc}")
                )
        grid.append(row)
    return grid


@dataclass(frozen=True)
class DistributionReport:
    """Histograms of rescaled scores, split at a human-score threshold."""

    threshold: float
    bin_edges: np.ndarray
    high_counts: np.ndarray
    low_counts: np.ndarray
    n_high: int
    n_low: int
    separation: float  # median(high) - median(low), in rescaled units
    rescaled: np.ndarray = field(repr=False, default=None)


def score_distribution_report(
    scores: ScoreMatrix,
    human: ScoreMatrix,
    threshold: float,
    bins: int = 20,
) -> DistributionReport:
    """Can the metric tell high-quality from low-quality candidates?

    Similarities are min-max rescaled to [0, 1] (equivalently: divergences
    rescaled and flipped), split by the human score being >= / < the
    threshold, and binned into `bins` equal-width bins over [0, 1].
    """
    _check_matrices(scores, human)
    mask = scores.present & human.present
    similarity = scores.values[mask]
    human_values = human.values[mask]
    if similarity.size == 0:
        raise DegenerateInput("no jointly present cells")
    hmin, hmax = float(human_values.min()), float(human_values.max())
    if not hmin <= threshold <= hmax:
        raise DomainError(
            f"threshold {threshold!r} outside the human-score range "
            f"[{hmin}, {hmax}]"
        )
    smin, smax = float(similarity.min()), float(similarity.max())
    if smax == smin:
        raise DegenerateInput("all scores are equal; rescaling is undefined")
    rescaled = (similarity - smin) / (smax - smin)
    high = rescaled[human_values >= threshold]
    low = rescaled[human_values < threshold]
    if high.size == 0 or low.size == 0:
        raise DegenerateInput(
            f"threshold {threshold!r} leaves an empty quality group "
            f"({high.size} high, {low.size} low)"
        )
    edges = np.linspace(0.0, 1.0, bins + 1)
    high_counts, _ = np.histogram(high, bins=edges)
    low_counts, _ = np.histogram(low, bins=edges)
    return DistributionReport(
        threshold=threshold,
        bin_edges=edges,
        high_counts=high_counts,
        low_counts=low_counts,
        n_high=int(high.size),
        n_low=int(low.size),
        separation=float(np.median(high) - np.median(low)),
        rescaled=rescaled,
    )
