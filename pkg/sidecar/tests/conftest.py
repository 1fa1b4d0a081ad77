import pytest
import torch
from fastapi.testclient import TestClient
from transformers import BertConfig, BertForMaskedLM, BertTokenizerFast

from infolm_sidecar import SidecarConfig, create_app


def build_tiny_model(directory, vocab_extra=30, seed=1234):
    """Seeded tiny BERT + WordPiece vocab saved to `directory`."""
    directory.mkdir(parents=True, exist_ok=True)
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + [
        f"tok{i:02d}" for i in range(vocab_extra)
    ]
    vocab_file = directory / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    tokenizer = BertTokenizerFast(str(vocab_file))
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(seed)
    model = BertForMaskedLM(config)
    model.save_pretrained(directory)
    tokenizer.save_pretrained(directory)
    return directory


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory):
    return build_tiny_model(tmp_path_factory.mktemp("tiny-mlm"))


@pytest.fixture(scope="session")
def sidecar_config(model_dir):
    return SidecarConfig(
        model=str(model_dir), top_k=16, max_batch=8, max_seq_len=32
    )


@pytest.fixture(scope="session")
def app(sidecar_config):
    return create_app(sidecar_config)


@pytest.fixture(scope="session")
def client(app):
    with TestClient(app) as test_client:
        yield test_client
