"""Masked-LM wrapper: tokenize, mask each position, forward, top-k."""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass

import numpy as np
import torch
from transformers import AutoModelForMaskedLM, AutoTokenizer


@dataclass(frozen=True)
class SidecarConfig:
    """Service configuration; `model` is a hub id or local directory."""

    model: str
    device: str = "cpu"
    top_k: int = 256
    max_batch: int = 32
    max_seq_len: int = 128
    host: str = "127.0.0.1"
    port: int = 8091

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        if self.max_seq_len < 3:  # room for [CLS], one token, [SEP]
            raise ValueError("max_seq_len must be >= 3")


class TextTooLong(Exception):
    """A text exceeds the configured sequence length after tokenization."""

    def __init__(self, index: int, tokens: int, limit: int):
        self.index = index
        self.tokens = tokens
        self.limit = limit
        super().__init__(
            f"text {index} has {tokens} tokens, limit is {limit}"
        )


def _round8(value: float) -> float:
    """Transport numbers are decimal text with 8 significant digits."""
    return float(f"{value:.8g}")


class MaskedLanguageModel:
    """Loads the model once; forward passes are serialized by a lock."""

    def __init__(self, config: SidecarConfig):
        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.model)
        self.model = AutoModelForMaskedLM.from_pretrained(config.model)
        self.model.to(config.device)
        self.model.eval()  # no dropout: responses must be deterministic
        if self.tokenizer.mask_token_id is None:
            raise ValueError(f"{config.model} has no mask token")
        self._lock = threading.Lock()
        if config.max_seq_len > self.tokenizer.model_max_length:
            raise ValueError(
                f"max_seq_len {config.max_seq_len} exceeds the model context "
                f"window {self.tokenizer.model_max_length}"
            )
        vocab = sorted(self.tokenizer.get_vocab().items(), key=lambda kv: kv[1])
        digest = hashlib.sha256(
            "\n".join(f"{token}\t{index}" for token, index in vocab).encode("utf-8")
        )
        self.tokenizer_fingerprint = digest.hexdigest()[:16]

    @property
    def vocab_size(self) -> int:
        return len(self.tokenizer)

    def model_info(self) -> dict:
        return {
            "model_id": self.config.model,
            "vocab_size": self.vocab_size,
            "tokenizer_fingerprint": self.tokenizer_fingerprint,
        }

    def masked_distributions(
        self, text: str, temperature: float, top_k: int, index: int = 0
    ) -> dict:
        """One top-k distribution per content-token position of `text`.

        Position j is predicted from the sequence with that single token
        replaced by the mask token; class/separator tokens are never
        masked, and position indices count content tokens only.
        """
        encoded = self.tokenizer(text, return_tensors="pt")
        input_ids = encoded.input_ids[0]
        if input_ids.shape[0] > self.config.max_seq_len:
            raise TextTooLong(index, int(input_ids.shape[0]), self.config.max_seq_len)
        special = self.tokenizer.get_special_tokens_mask(
            input_ids.tolist(), already_has_special_tokens=True
        )
        content = [i for i, flag in enumerate(special) if not flag]
        if not content:
            raise TextTooLong(index, 0, self.config.max_seq_len)

        rows = input_ids.unsqueeze(0).repeat(len(content), 1)
        for row, sequence_index in enumerate(content):
            rows[row, sequence_index] = self.tokenizer.mask_token_id
        attention = torch.ones_like(rows)

        top_k = min(top_k, self.vocab_size)
        positions = []
        with self._lock, torch.no_grad():
            for start in range(0, len(content), self.config.max_batch):
                chunk = slice(start, start + self.config.max_batch)
                logits = self.model(
                    input_ids=rows[chunk].to(self.config.device),
                    attention_mask=attention[chunk].to(self.config.device),
                ).logits
                for row, sequence_index in enumerate(content[chunk]):
                    scaled = logits[row, sequence_index].double() / temperature
                    probs = torch.softmax(scaled, dim=-1).cpu().numpy()
                    # descending probability, ties broken by token id
                    order = np.lexsort((np.arange(probs.shape[0]), -probs))[:top_k]
                    top = [[int(t), _round8(float(probs[t]))] for t in order]
                    kept = sum(p for _, p in top)
                    positions.append(
                        {
                            "position": start + row,
                            "top": top,
                            "residual": _round8(max(0.0, 1.0 - kept)),
                        }
                    )
        return {
            "token_ids": [int(input_ids[i]) for i in content],
            "token_strings": [
                self.tokenizer.convert_ids_to_tokens(int(input_ids[i]))
                for i in content
            ],
            "positions": positions,
        }
