"""Exception types shared across the package."""


class InfoLMError(Exception):
    """Base class for every error raised by this package."""


class DomainError(InfoLMError, ValueError):
    """A parameter lies outside the mathematical domain of the operation."""


class ShapeError(InfoLMError, ValueError):
    """Vector or matrix operands have incompatible shapes or lengths."""


class NumericError(InfoLMError, ValueError):
    """Non-finite values appeared where finite numbers are required."""


class EmptyInputError(InfoLMError, ValueError):
    """An operation received an empty sequence it cannot handle."""


class DegenerateInput(InfoLMError, ValueError):
    """A statistic is undefined for this input (e.g. a constant vector)."""


class AllDegenerate(InfoLMError, ValueError):
    """Every row of a text-level correlation was degenerate."""


class UnknownPreset(InfoLMError, KeyError):
    """Requested parameter preset is not in the catalog."""


class UnknownCriterion(InfoLMError, KeyError):
    """Requested human-judgment criterion is absent from the dataset."""


class BackendError(InfoLMError):
    """Base class for distribution-provider failures."""


class BackendUnavailable(BackendError):
    """The provider cannot serve predictions (remote down, record missing)."""


class VocabMismatch(BackendError):
    """Provider vocabulary/tokenizer/temperature disagrees with the request."""


class TokenizationError(BackendError):
    """Text could not be tokenized, or tokenizations disagree."""


class FormatError(BackendError, ValueError):
    """A file failed to parse; the message carries the line/record locus."""


class ProtocolError(BackendError):
    """The remote sidecar returned a malformed or invalid response."""


class ScoringError(InfoLMError):
    """One or more dataset cells failed to score.

    `failures` lists (text_id, system_id, message) triples for every
    failed cell.
    """

    def __init__(self, failures):
        self.failures = tuple(failures)
        lines = [f"  ({t!r}, {s!r}): {m}" for t, s, m in self.failures]
        super().__init__(
            f"{len(self.failures)} pair(s) failed to score:\n" + "\n".join(lines)
        )


class ConfigError(InfoLMError, ValueError):
    """Invalid run configuration; the message names the file/field at fault."""
