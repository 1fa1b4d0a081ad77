"""Masked-LM bag-of-distributions text evaluation metrics.

A reference and a candidate text are each turned into one probability
distribution over the model vocabulary (mask every position, predict,
aggregate with importance weights) and compared with an information
measure; lower values mean more similar texts.  The package also ships
the meta-evaluation harness used to study such metrics: correlation with
human judgments at the text and system level, Williams significance
tests, temperature and parameter sweeps, and score-distribution reports.
"""

from .backends import (
    BackendDescriptor,
    DistributionProvider,
    DistributionStore,
    MockModel,
    RemoteClient,
    TokenizedText,
    check_descriptor,
    export_store,
    load_distribution_store,
    mock_model,
    remote_client,
)
from .data import CandidateRecord, DatasetEntry, EvalDataset, candidate_text_id
from .distributions import (
    IdfTable,
    MaskedPrediction,
    aggregate,
    entropy,
    idf_weights,
    temperature_softmax,
    uniform_weights,
)
from .errors import (
    AllDegenerate,
    BackendError,
    BackendUnavailable,
    ConfigError,
    DegenerateInput,
    DomainError,
    EmptyInputError,
    FormatError,
    InfoLMError,
    NumericError,
    ProtocolError,
    ScoringError,
    ShapeError,
    TokenizationError,
    UnknownCriterion,
    UnknownPreset,
    VocabMismatch,
)
from .matrix import ScoreMatrix
from .measures import (
    MeasureKind,
    MeasureSpec,
    ab_divergence,
    alpha_divergence,
    as_distribution,
    evaluate_measure,
    fisher_rao,
    floor_probabilities,
    gamma_divergence,
    jeffreys_kl,
    kl_divergence,
    lp_distance,
)
from .metaeval import (
    CorrelationReport,
    DistributionReport,
    SignificanceResult,
    ab_grid_sweep,
    kendall,
    metric_correlation_matrix,
    pearson,
    score_distribution_report,
    spearman,
    system_level,
    temperature_sweep,
    text_level,
    williams_test,
)
from .scoring import (
    Preset,
    PRESETS,
    ScoreRequest,
    ScoreResult,
    Weighting,
    build_idf_table,
    infolm_score,
    preset,
    score_dataset,
)

__version__ = "0.1.0"
