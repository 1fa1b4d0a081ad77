"""Distribution providers: deterministic mock, file-backed store, remote client.

Every provider owns tokenization for the texts it serves and returns, for
each content-token position of a text, the model's vocabulary distribution
for that position masked.  Token ids are opaque to the rest of the
package; compatibility is checked through the descriptor's
tokenizer_fingerprint.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import httpx
import numpy as np

from .distributions import MaskedPrediction, temperature_softmax
from .errors import (
    BackendUnavailable,
    DomainError,
    EmptyInputError,
    FormatError,
    ProtocolError,
    TokenizationError,
    VocabMismatch,
)

__all__ = [
    "BackendDescriptor",
    "TokenizedText",
    "DistributionProvider",
    "MockModel",
    "mock_model",
    "DistributionStore",
    "load_distribution_store",
    "export_store",
    "RemoteClient",
    "remote_client",
    "check_descriptor",
]

#: Sidecar float32 transport drift tolerated before a distribution is rejected.
SUM_DRIFT_TOLERANCE = 1e-3


@dataclass(frozen=True)
class BackendDescriptor:
    """Identity of the model/tokenizer/temperature behind a provider."""

    vocab_size: int
    model_id: str
    tokenizer_fingerprint: str
    temperature: float

    def __post_init__(self):
        if self.vocab_size < 2:
            raise DomainError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if not self.temperature > 0:
            raise DomainError(f"temperature must be > 0, got {self.temperature!r}")


@dataclass(frozen=True)
class TokenizedText:
    """A text as the backend tokenizer sees it."""

    text_id: str
    token_ids: tuple[int, ...]
    token_strings: tuple[str, ...]

    def __post_init__(self):
        if len(self.token_ids) == 0:
            raise EmptyInputError(f"text {self.text_id!r} has no tokens")
        if len(self.token_ids) != len(self.token_strings):
            raise TokenizationError(
                f"text {self.text_id!r}: {len(self.token_ids)} ids vs "
                f"{len(self.token_strings)} strings"
            )

    def __len__(self) -> int:
        return len(self.token_ids)

    def truncated(self, limit: int) -> "TokenizedText":
        return TokenizedText(
            self.text_id, self.token_ids[:limit], self.token_strings[:limit]
        )


def check_descriptor(actual: BackendDescriptor, expected: BackendDescriptor) -> None:
    """Raise VocabMismatch when two descriptors cannot serve the same run."""
    problems = []
    if actual.vocab_size != expected.vocab_size:
        problems.append(f"vocab_size {actual.vocab_size} != {expected.vocab_size}")
    if expected.tokenizer_fingerprint and (
        actual.tokenizer_fingerprint != expected.tokenizer_fingerprint
    ):
        problems.append(
            f"tokenizer {actual.tokenizer_fingerprint!r} != "
            f"{expected.tokenizer_fingerprint!r}"
        )
    if expected.model_id and actual.model_id != expected.model_id:
        problems.append(f"model {actual.model_id!r} != {expected.model_id!r}")
    if not math.isclose(actual.temperature, expected.temperature, rel_tol=1e-9):
        problems.append(
            f"temperature {actual.temperature!r} != {expected.temperature!r}"
        )
    if problems:
        raise VocabMismatch("; ".join(problems))


class DistributionProvider(ABC):
    """Uniform contract for obtaining masked-position distributions.

    Providers are immutable after construction (or synchronize internally)
    and safe to share across scoring workers.
    """

    #: Maximum token positions a text may have, or None for unbounded.
    context_window: int | None = None

    @property
    @abstractmethod
    def descriptor(self) -> BackendDescriptor: ...

    @abstractmethod
    def tokenize(self, text_id: str, text: str) -> TokenizedText: ...

    @abstractmethod
    def predict_masked(self, text: TokenizedText) -> list[MaskedPrediction]:
        """One prediction per token position, in position order."""

    def prefetch(self, items: Sequence[tuple[str, str]]) -> None:
        """Warm any caches for (text_id, text) pairs; no-op by default."""

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _stable_hash(*parts) -> int:
    """Platform- and run-stable 64-bit hash of the given parts."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


class MockModel(DistributionProvider):
    """Deterministic stand-in for a masked language model.

    Tokenizes on whitespace (token id = stable hash of the word modulo the
    vocabulary).  The prediction for a masked position is a peaked softmax:
    the peak token is a stable hash of (seed, position, surrounding tokens)
    and carries mass (1 - smoothing) at temperature 1; the remaining mass
    spreads uniformly.  Identical token sequences always produce identical
    outputs.
    """

    def __init__(
        self,
        seed: int,
        vocab_size: int,
        smoothing: float,
        temperature: float = 1.0,
        context_window: int | None = None,
        neighborhood: int = 2,
    ):
        if vocab_size < 2:
            raise DomainError(f"vocab_size must be >= 2, got {vocab_size}")
        if not 0.0 < smoothing < 1.0:
            raise DomainError(f"smoothing must lie in (0, 1), got {smoothing!r}")
        if neighborhood < 1:
            raise DomainError("neighborhood must be >= 1")
        self._seed = seed
        self._vocab_size = vocab_size
        self._smoothing = smoothing
        self._neighborhood = neighborhood
        # Calibrated so the peak token holds (1 - smoothing) mass at T = 1.
        self._peak_logit = math.log((1.0 - smoothing) * (vocab_size - 1) / smoothing)
        self.context_window = context_window
        self._descriptor = BackendDescriptor(
            vocab_size=vocab_size,
            model_id=f"mock-{seed}-v{vocab_size}-s{smoothing:g}",
            tokenizer_fingerprint=f"mock-ws-{vocab_size}",
            temperature=temperature,
        )

    @property
    def descriptor(self) -> BackendDescriptor:
        return self._descriptor

    def tokenize(self, text_id: str, text: str) -> TokenizedText:
        words = text.split()
        if not words:
            raise EmptyInputError(f"text {text_id!r} has no tokens")
        ids = tuple(_stable_hash("tok", w) % self._vocab_size for w in words)
        return TokenizedText(text_id, ids, tuple(words))

    def predict_masked(self, text: TokenizedText) -> list[MaskedPrediction]:
        ids = text.token_ids
        if any(t >= self._vocab_size for t in ids):
            raise VocabMismatch(
                f"text {text.text_id!r} has token ids outside vocab "
                f"{self._vocab_size}"
            )
        temperature = self._descriptor.temperature
        out = []
        for k in range(len(ids)):
            lo = max(0, k - self._neighborhood)
            context = ids[lo:k] + ids[k + 1 : k + 1 + self._neighborhood]
            peak = _stable_hash("peak", self._seed, k, context) % self._vocab_size
            logits = np.zeros(self._vocab_size)
            logits[peak] = self._peak_logit
            out.append(MaskedPrediction(k, temperature_softmax(logits, temperature)))
        return out


def mock_model(
    seed: int, vocab_size: int, smoothing: float, **kwargs
) -> MockModel:
    """Construct the deterministic mock provider."""
    return MockModel(seed, vocab_size, smoothing, **kwargs)


def _densify(
    vocab_size: int, token_ids: np.ndarray, probs: np.ndarray, residual: float
) -> np.ndarray:
    dense = np.zeros(vocab_size)
    dense[token_ids] = probs
    unlisted = vocab_size - token_ids.shape[0]
    if unlisted > 0 and residual > 0:
        fill = residual / unlisted
        mask = np.ones(vocab_size, dtype=bool)
        mask[token_ids] = False
        dense[mask] = fill
    return dense / dense.sum()


def _validate_sparse(
    vocab_size: int, top, residual, locus: str
) -> tuple[np.ndarray, np.ndarray, float]:
    try:
        ids = np.array([int(t) for t, _ in top], dtype=int)
        probs = np.array([float(p) for _, p in top], dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{locus}: malformed top entries: {exc}") from exc
    if ids.size == 0:
        raise FormatError(f"{locus}: empty top list")
    if np.unique(ids).size != ids.size:
        raise FormatError(f"{locus}: duplicate token ids in top list")
    if np.any(ids < 0) or np.any(ids >= vocab_size):
        raise FormatError(f"{locus}: token id outside vocabulary {vocab_size}")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise FormatError(f"{locus}: negative or non-finite probability")
    residual = float(residual)
    if residual < -1e-9 or not math.isfinite(residual):
        raise FormatError(f"{locus}: negative or non-finite residual")
    residual = max(residual, 0.0)
    total = float(probs.sum()) + residual
    if abs(total - 1.0) > SUM_DRIFT_TOLERANCE:
        raise FormatError(
            f"{locus}: top + residual sums to {total!r}, outside "
            f"1 +- {SUM_DRIFT_TOLERANCE}"
        )
    return ids, probs, residual


class DistributionStore(DistributionProvider):
    """Read-only provider over precomputed distributions in a store file."""

    def __init__(
        self,
        descriptor: BackendDescriptor,
        top_k: int,
        texts: dict[str, tuple[int, ...]],
        records: dict[str, dict[int, tuple[np.ndarray, np.ndarray, float]]],
        source: str = "<memory>",
    ):
        self._descriptor = descriptor
        self.top_k = top_k
        self._texts = texts
        self._records = records
        self._source = source

    @property
    def descriptor(self) -> BackendDescriptor:
        return self._descriptor

    @classmethod
    def load(cls, path) -> "DistributionStore":
        path = Path(path)
        if not path.exists():
            raise BackendUnavailable(f"distribution store not found: {path}")
        descriptor = None
        top_k = None
        texts: dict[str, tuple[int, ...]] = {}
        records: dict[str, dict[int, tuple[np.ndarray, np.ndarray, float]]] = {}
        with path.open(encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                locus = f"{path}:{lineno}"
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"{locus}: invalid JSON: {exc}") from exc
                if descriptor is None:
                    try:
                        descriptor = BackendDescriptor(
                            vocab_size=int(record["vocab_size"]),
                            model_id=str(record["model_id"]),
                            tokenizer_fingerprint=str(record["tokenizer_fingerprint"]),
                            temperature=float(record["temperature"]),
                        )
                        top_k = int(record["top_k"])
                    except (KeyError, TypeError, ValueError, DomainError) as exc:
                        raise FormatError(f"{locus}: bad header: {exc}") from exc
                    continue
                try:
                    text_id = str(record["text_id"])
                    position = int(record["position"])
                    top = record["top"]
                    residual = record["residual"]
                except (KeyError, TypeError, ValueError) as exc:
                    raise FormatError(f"{locus}: bad record: {exc}") from exc
                if "token_ids" in record:
                    ids = tuple(int(t) for t in record["token_ids"])
                    previous = texts.get(text_id)
                    if previous is not None and previous != ids:
                        raise FormatError(
                            f"{locus}: conflicting token_ids for text {text_id!r}"
                        )
                    texts[text_id] = ids
                elif text_id not in texts:
                    raise FormatError(
                        f"{locus}: first record for text {text_id!r} lacks token_ids"
                    )
                sparse = _validate_sparse(
                    descriptor.vocab_size, top, residual, locus
                )
                records.setdefault(text_id, {})[position] = sparse
        if descriptor is None:
            raise FormatError(f"{path}: store file has no header record")
        return cls(descriptor, top_k, texts, records, source=str(path))

    def text_ids(self) -> tuple[str, ...]:
        return tuple(self._texts)

    def tokenize(self, text_id: str, text: str) -> TokenizedText:
        ids = self._texts.get(text_id)
        if ids is None:
            raise BackendUnavailable(
                f"store {self._source} has no distributions for text {text_id!r}"
            )
        return TokenizedText(text_id, ids, tuple(f"<{t}>" for t in ids))

    def predict_masked(self, text: TokenizedText) -> list[MaskedPrediction]:
        stored = self._texts.get(text.text_id)
        if stored is None:
            raise BackendUnavailable(
                f"store {self._source} has no distributions for text "
                f"{text.text_id!r}"
            )
        if stored[: len(text.token_ids)] != tuple(text.token_ids):
            raise TokenizationError(
                f"text {text.text_id!r}: stored tokenization disagrees with request"
            )
        positions = self._records.get(text.text_id, {})
        out = []
        for k in range(len(text.token_ids)):
            if k not in positions:
                raise BackendUnavailable(
                    f"store {self._source}: text {text.text_id!r} lacks "
                    f"position {k}"
                )
            ids, probs, residual = positions[k]
            dense = _densify(self._descriptor.vocab_size, ids, probs, residual)
            out.append(MaskedPrediction(k, dense))
        return out


def load_distribution_store(path) -> DistributionStore:
    """Load a line-delimited distribution store file as a provider."""
    return DistributionStore.load(path)


def export_store(
    provider: DistributionProvider,
    items: Sequence[tuple[str, str]],
    path,
    top_k: int = 256,
) -> None:
    """Capture a provider's distributions for (text_id, text) pairs.

    Each distribution is truncated to its top_k entries (ties broken by
    token id) with the tail recorded as an explicit residual mass.
    """
    if top_k < 1:
        raise DomainError("top_k must be >= 1")
    descriptor = provider.descriptor
    provider.prefetch(items)
    lines = [
        json.dumps(
            {
                "vocab_size": descriptor.vocab_size,
                "model_id": descriptor.model_id,
                "tokenizer_fingerprint": descriptor.tokenizer_fingerprint,
                "temperature": descriptor.temperature,
                "top_k": top_k,
            },
            sort_keys=True,
        )
    ]
    for text_id, text in items:
        tokenized = provider.tokenize(text_id, text)
        predictions = provider.predict_masked(tokenized)
        for index, prediction in enumerate(predictions):
            dense = prediction.distribution
            order = np.lexsort((np.arange(dense.shape[0]), -dense))[:top_k]
            kept = float(dense[order].sum())
            record = {
                "text_id": text_id,
                "position": prediction.position,
                "top": [[int(t), float(dense[t])] for t in order],
                "residual": max(0.0, 1.0 - kept),
            }
            if index == 0:
                record["token_ids"] = list(tokenized.token_ids)
            lines.append(json.dumps(record, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class RemoteClient(DistributionProvider):
    """HTTP client for a masked-LM sidecar speaking the wire protocol.

    Texts are fetched in batches of `batch_size`; up to `max_in_flight`
    batch requests run concurrently.  Transient failures (connection
    errors, 5xx) are retried up to `retries` times with exponential
    backoff.  Every returned distribution is validated and renormalized
    before use; responses are cached by text_id.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        batch_size: int = 8,
        *,
        temperature: float = 1.0,
        top_k: int = 256,
        max_in_flight: int = 4,
        retries: int = 3,
        backoff: float = 0.5,
        transport: httpx.BaseTransport | None = None,
    ):
        if not str(endpoint).startswith(("http://", "https://")):
            raise DomainError(f"endpoint must be an http(s) URL, got {endpoint!r}")
        if batch_size < 1:
            raise DomainError("batch_size must be >= 1")
        if max_in_flight < 1:
            raise DomainError("max_in_flight must be >= 1")
        if not temperature > 0:
            raise DomainError("temperature must be > 0")
        self._endpoint = str(endpoint).rstrip("/")
        self._batch_size = batch_size
        self._temperature = temperature
        self._top_k = top_k
        self._max_in_flight = max_in_flight
        self._retries = retries
        self._backoff = backoff
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._descriptor: BackendDescriptor | None = None
        self._cache: dict[str, tuple[TokenizedText, tuple[MaskedPrediction, ...]]] = {}

    def close(self) -> None:
        self._client.close()

    def _request(self, method: str, path: str, **kwargs) -> httpx.Response:
        url = self._endpoint + path
        last_error: Exception | None = None
        for attempt in range(self._retries + 1):
            if attempt:
                time.sleep(self._backoff * (2 ** (attempt - 1)))
            try:
                response = self._client.request(method, url, **kwargs)
            except httpx.TransportError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = ProtocolError(
                    f"{method} {path} -> {response.status_code}"
                )
                continue
            if response.status_code >= 400:
                raise ProtocolError(
                    f"{method} {path} -> {response.status_code}: "
                    f"{response.text[:200]}"
                )
            return response
        raise BackendUnavailable(
            f"{method} {url} failed after {self._retries + 1} attempts: {last_error}"
        )

    @property
    def descriptor(self) -> BackendDescriptor:
        if self._descriptor is None:
            response = self._request("GET", "/v1/model_info")
            try:
                info = response.json()
                self._descriptor = BackendDescriptor(
                    vocab_size=int(info["vocab_size"]),
                    model_id=str(info["model_id"]),
                    tokenizer_fingerprint=str(info["tokenizer_fingerprint"]),
                    temperature=self._temperature,
                )
            except (KeyError, TypeError, ValueError, DomainError) as exc:
                raise ProtocolError(f"malformed model_info response: {exc}") from exc
        return self._descriptor

    def _parse_text(self, text_id: str, record) -> tuple[
        TokenizedText, tuple[MaskedPrediction, ...]
    ]:
        vocab_size = self.descriptor.vocab_size
        try:
            token_ids = tuple(int(t) for t in record["token_ids"])
            token_strings = tuple(str(s) for s in record["token_strings"])
            positions = record["positions"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"text {text_id!r}: malformed record: {exc}") from exc
        tokenized = TokenizedText(text_id, token_ids, token_strings)
        if len(positions) != len(token_ids):
            raise ProtocolError(
                f"text {text_id!r}: {len(positions)} positions for "
                f"{len(token_ids)} tokens"
            )
        predictions = []
        for k, entry in enumerate(positions):
            locus = f"text {text_id!r} position {k}"
            try:
                position = int(entry["position"])
                top = entry["top"]
                residual = entry["residual"]
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"{locus}: malformed entry: {exc}") from exc
            if position != k:
                raise ProtocolError(f"{locus}: out-of-order position {position}")
            try:
                ids, probs, residual = _validate_sparse(
                    vocab_size, top, residual, locus
                )
            except FormatError as exc:
                raise ProtocolError(str(exc)) from exc
            dense = _densify(vocab_size, ids, probs, residual)
            predictions.append(MaskedPrediction(k, dense))
        return tokenized, tuple(predictions)

    def _fetch_batch(self, batch: Sequence[tuple[str, str]]) -> None:
        response = self._request(
            "POST",
            "/v1/masked_distributions",
            json={
                "texts": [text for _, text in batch],
                "temperature": self._temperature,
                "top_k": self._top_k,
            },
        )
        try:
            results = response.json()["results"]
        except (KeyError, ValueError) as exc:
            raise ProtocolError(f"malformed batch response: {exc}") from exc
        if len(results) != len(batch):
            raise ProtocolError(
                f"sent {len(batch)} texts, got {len(results)} results"
            )
        for (text_id, _), record in zip(batch, results):
            self._cache[text_id] = self._parse_text(text_id, record)

    def prefetch(self, items: Sequence[tuple[str, str]]) -> None:
        seen = set()
        missing = []
        for text_id, text in items:
            if text_id not in self._cache and text_id not in seen:
                seen.add(text_id)
                missing.append((text_id, text))
        if not missing:
            return
        self.descriptor  # resolve model_info before issuing batches
        batches = [
            missing[i : i + self._batch_size]
            for i in range(0, len(missing), self._batch_size)
        ]
        if len(batches) == 1 or self._max_in_flight == 1:
            for batch in batches:
                self._fetch_batch(batch)
            return
        with ThreadPoolExecutor(max_workers=self._max_in_flight) as pool:
            for future in [pool.submit(self._fetch_batch, b) for b in batches]:
                future.result()

    def tokenize(self, text_id: str, text: str) -> TokenizedText:
        if text_id not in self._cache:
            self.prefetch([(text_id, text)])
        return self._cache[text_id][0]

    def predict_masked(self, text: TokenizedText) -> list[MaskedPrediction]:
        cached = self._cache.get(text.text_id)
        if cached is None:
            raise BackendUnavailable(
                f"text {text.text_id!r} was not prefetched; call tokenize/prefetch "
                "with the raw text first"
            )
        return list(cached[1])


def remote_client(endpoint: str, timeout: float = 30.0, batch_size: int = 8, **kwargs) -> RemoteClient:
    """Construct the sidecar-backed provider."""
    return RemoteClient(endpoint, timeout, batch_size, **kwargs)
