import json
from pathlib import Path

import numpy as np
import pytest

from infolm import CandidateRecord, DatasetEntry, EvalDataset, MockModel

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def mock16():
    return MockModel(seed=42, vocab_size=16, smoothing=0.1)


def random_distribution(rng, dim):
    return rng.dirichlet(np.ones(dim))


def make_planted_dataset(n_texts=20, length=20, n_systems=9, seed=7):
    """References plus candidates corrupted at 0..n_systems-1 positions.

    Planted quality decreases linearly with the number of corruptions,
    recorded under the criterion name "quality".
    """
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(200)]
    entries = []
    for i in range(n_texts):
        tokens = [words[w] for w in rng.integers(0, len(words), size=length)]
        candidates = []
        for s in range(n_systems):
            corrupted = list(tokens)
            positions = rng.choice(length, size=s, replace=False) if s else []
            for pos in positions:
                corrupted[pos] = f"junk{rng.integers(0, 10**6)}"
            candidates.append(
                CandidateRecord(
                    system_id=f"sys{s}",
                    text=" ".join(corrupted),
                    human_scores={"quality": 1.0 - s / (n_systems - 1.0)},
                )
            )
        entries.append(
            DatasetEntry(
                text_id=f"t{i}", reference=" ".join(tokens),
                candidates=tuple(candidates),
            )
        )
    return EvalDataset(entries=tuple(entries))


def write_disjoint_store(path, text_ids=("d1", "d1@s1"), vocab_size=10):
    """Store whose two texts have aggregated supports on disjoint vocab halves."""
    half = vocab_size // 2
    lines = [
        json.dumps(
            {
                "vocab_size": vocab_size,
                "model_id": "disjoint-fixture",
                "tokenizer_fingerprint": "fixture",
                "temperature": 1.0,
                "top_k": half,
            }
        )
    ]
    for index, text_id in enumerate(text_ids):
        tokens = [0, 1] if index == 0 else [2, 3]
        support = list(range(half)) if index == 0 else list(range(half, vocab_size))
        for position in range(len(tokens)):
            record = {
                "text_id": text_id,
                "position": position,
                "top": [[t, 1.0 / len(support)] for t in support],
                "residual": 0.0,
            }
            if position == 0:
                record["token_ids"] = tokens
            lines.append(json.dumps(record))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
