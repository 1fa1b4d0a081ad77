import json

import httpx
import numpy as np
import pytest

from infolm import (
    BackendDescriptor,
    BackendUnavailable,
    DomainError,
    EmptyInputError,
    FormatError,
    MockModel,
    ProtocolError,
    RemoteClient,
    TokenizationError,
    TokenizedText,
    VocabMismatch,
    check_descriptor,
    export_store,
    load_distribution_store,
)

from .conftest import write_disjoint_store


class TestDescriptor:
    def test_validation(self):
        with pytest.raises(DomainError):
            BackendDescriptor(1, "m", "fp", 1.0)
        with pytest.raises(DomainError):
            BackendDescriptor(8, "m", "fp", 0.0)

    def test_check_descriptor(self):
        a = BackendDescriptor(16, "m", "fp", 1.0)
        check_descriptor(a, BackendDescriptor(16, "m", "fp", 1.0))
        with pytest.raises(VocabMismatch):
            check_descriptor(a, BackendDescriptor(16, "m", "fp", 2.0))
        with pytest.raises(VocabMismatch):
            check_descriptor(a, BackendDescriptor(32, "m", "fp", 1.0))


class TestTokenizedText:
    def test_invariants(self):
        with pytest.raises(EmptyInputError):
            TokenizedText("x", (), ())
        with pytest.raises(TokenizationError):
            TokenizedText("x", (1, 2), ("a",))

    def test_truncated(self):
        text = TokenizedText("x", (1, 2, 3), ("a", "b", "c"))
        assert text.truncated(2).token_ids == (1, 2)


class TestMockModel:
    def test_contract_one_prediction_per_token(self, mock16):
        text = mock16.tokenize("t", "one two three four")
        preds = mock16.predict_masked(text)
        assert [p.position for p in preds] == [0, 1, 2, 3]
        for pred in preds:
            d = pred.distribution
            assert d.shape == (16,) and np.all(d >= 0)
            assert d.sum() == pytest.approx(1.0, abs=1e-9)

    def test_deterministic(self, mock16):
        text = mock16.tokenize("t", "the cat sat")
        first = mock16.predict_masked(text)
        second = mock16.predict_masked(text)
        for a, b in zip(first, second):
            assert np.array_equal(a.distribution, b.distribution)

    def test_identical_tokens_identical_outputs(self, mock16):
        a = mock16.tokenize("a", "same words here")
        b = mock16.tokenize("b", "same words here")
        for pa, pb in zip(mock16.predict_masked(a), mock16.predict_masked(b)):
            assert np.array_equal(pa.distribution, pb.distribution)

    def test_peak_mass_matches_smoothing(self):
        model = MockModel(seed=1, vocab_size=10, smoothing=0.3)
        text = model.tokenize("t", "a b c")
        for pred in model.predict_masked(text):
            assert pred.distribution.max() == pytest.approx(0.7, abs=1e-9)

    def test_degenerate_smoothing_is_near_uniform(self):
        vocab = 16
        model = MockModel(seed=1, vocab_size=vocab, smoothing=1 - 1 / vocab)
        text = model.tokenize("t", "a b")
        for pred in model.predict_masked(text):
            assert pred.distribution == pytest.approx([1 / vocab] * vocab, abs=1e-9)

    def test_invalid_smoothing(self):
        with pytest.raises(DomainError):
            MockModel(seed=0, vocab_size=8, smoothing=0.0)
        with pytest.raises(DomainError):
            MockModel(seed=0, vocab_size=8, smoothing=1.0)

    def test_empty_text(self, mock16):
        with pytest.raises(EmptyInputError):
            mock16.tokenize("t", "   ")

    def test_seed_changes_predictions(self):
        a = MockModel(seed=1, vocab_size=16, smoothing=0.1)
        b = MockModel(seed=2, vocab_size=16, smoothing=0.1)
        text = a.tokenize("t", "same words here")
        pa = a.predict_masked(text)
        pb = b.predict_masked(text)
        assert any(
            not np.array_equal(x.distribution, y.distribution)
            for x, y in zip(pa, pb)
        )


class TestDistributionStore:
    def test_export_roundtrip(self, tmp_path, mock16):
        items = [("a", "the cat sat"), ("b", "dogs bark at night")]
        path = tmp_path / "store.jsonl"
        export_store(mock16, items, path, top_k=16)
        store = load_distribution_store(path)
        assert store.descriptor == mock16.descriptor
        for text_id, text in items:
            live = mock16.predict_masked(mock16.tokenize(text_id, text))
            replay = store.predict_masked(store.tokenize(text_id, text))
            for lp, rp in zip(live, replay):
                assert lp.distribution == pytest.approx(rp.distribution, abs=1e-9)

    def test_truncated_export_spreads_residual(self, tmp_path, mock16):
        items = [("a", "the cat sat")]
        path = tmp_path / "store.jsonl"
        export_store(mock16, items, path, top_k=4)
        store = load_distribution_store(path)
        replay = store.predict_masked(store.tokenize("a", "the cat sat"))
        for pred in replay:
            assert pred.distribution.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(pred.distribution > 0)

    def test_residual_spread_arithmetic(self, tmp_path):
        lines = [
            json.dumps(
                {
                    "vocab_size": 10,
                    "model_id": "m",
                    "tokenizer_fingerprint": "fp",
                    "temperature": 1.0,
                    "top_k": 2,
                }
            ),
            json.dumps(
                {
                    "text_id": "x",
                    "position": 0,
                    "token_ids": [3],
                    "top": [[3, 0.9], [7, 0.05]],
                    "residual": 0.05,
                }
            ),
        ]
        path = tmp_path / "store.jsonl"
        path.write_text("\n".join(lines) + "\n")
        store = load_distribution_store(path)
        dense = store.predict_masked(store.tokenize("x", ""))[0].distribution
        assert dense[3] == pytest.approx(0.9)
        assert dense[7] == pytest.approx(0.05)
        unlisted = [i for i in range(10) if i not in (3, 7)]
        assert dense[unlisted] == pytest.approx([0.00625] * 8)

    def test_unknown_text(self, tmp_path):
        path = write_disjoint_store(tmp_path / "store.jsonl")
        store = load_distribution_store(path)
        with pytest.raises(BackendUnavailable):
            store.tokenize("nope", "whatever")

    def test_missing_file(self, tmp_path):
        with pytest.raises(BackendUnavailable):
            load_distribution_store(tmp_path / "absent.jsonl")

    def test_empty_store_unavailable_for_any_text(self, tmp_path):
        path = tmp_path / "store.jsonl"
        path.write_text(
            json.dumps(
                {
                    "vocab_size": 8,
                    "model_id": "m",
                    "tokenizer_fingerprint": "fp",
                    "temperature": 1.0,
                    "top_k": 4,
                }
            )
            + "\n"
        )
        store = load_distribution_store(path)
        with pytest.raises(BackendUnavailable):
            store.tokenize("any", "text")

    def test_bad_header_locus(self, tmp_path):
        path = tmp_path / "store.jsonl"
        path.write_text('{"vocab_size": 10}\n')
        with pytest.raises(FormatError, match="store.jsonl:1"):
            load_distribution_store(path)

    def test_bad_record_locus(self, tmp_path):
        lines = [
            json.dumps(
                {
                    "vocab_size": 4,
                    "model_id": "m",
                    "tokenizer_fingerprint": "fp",
                    "temperature": 1.0,
                    "top_k": 1,
                }
            ),
            json.dumps(
                {
                    "text_id": "x",
                    "position": 0,
                    "token_ids": [0],
                    "top": [[0, 2.5]],
                    "residual": 0.0,
                }
            ),
        ]
        path = tmp_path / "store.jsonl"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError, match="store.jsonl:2"):
            load_distribution_store(path)

    def test_tokenization_disagreement(self, tmp_path):
        path = write_disjoint_store(tmp_path / "store.jsonl")
        store = load_distribution_store(path)
        wrong = TokenizedText("d1", (9, 9), ("a", "b"))
        with pytest.raises(TokenizationError):
            store.predict_masked(wrong)


def fake_sidecar(vocab_size=8, sums=1.0, negative=False, counter=None):
    """MockTransport handler emulating the sidecar wire protocol."""

    def handler(request: httpx.Request) -> httpx.Response:
        if counter is not None:
            counter.append(request.url.path)
        if request.url.path == "/v1/model_info":
            return httpx.Response(
                200,
                json={
                    "model_id": "fake",
                    "vocab_size": vocab_size,
                    "tokenizer_fingerprint": "fake-fp",
                },
            )
        body = json.loads(request.content)
        results = []
        for text in body["texts"]:
            words = text.split()
            positions = []
            for k in range(len(words)):
                head = sums - 0.1 if not negative else sums + 0.1
                top = [[k % vocab_size, head], [(k + 1) % vocab_size, 0.1]]
                if negative:
                    top[1][1] = -0.1
                positions.append({"position": k, "top": top, "residual": 0.0})
            results.append(
                {
                    "token_ids": list(range(len(words))),
                    "token_strings": words,
                    "positions": positions,
                }
            )
        return httpx.Response(200, json={"results": results})

    return handler


class TestRemoteClient:
    def client(self, handler, **kwargs):
        kwargs.setdefault("backoff", 0.0)
        return RemoteClient(
            "http://sidecar.test",
            transport=httpx.MockTransport(handler),
            **kwargs,
        )

    def test_descriptor_from_model_info(self):
        client = self.client(fake_sidecar())
        assert client.descriptor.vocab_size == 8
        assert client.descriptor.model_id == "fake"

    def test_drifted_sum_renormalized(self):
        client = self.client(fake_sidecar(sums=0.9997))
        preds = client.predict_masked(client.tokenize("t", "a b"))
        for pred in preds:
            assert pred.distribution.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(pred.distribution >= 0)

    def test_excessive_drift_rejected(self):
        client = self.client(fake_sidecar(sums=0.99))
        with pytest.raises(ProtocolError):
            client.tokenize("t", "a b")

    def test_negative_probability_rejected(self):
        client = self.client(fake_sidecar(negative=True))
        with pytest.raises(ProtocolError):
            client.tokenize("t", "a b")

    def test_batching_arithmetic(self):
        calls = []
        client = self.client(
            fake_sidecar(counter=calls), batch_size=2, max_in_flight=1
        )
        items = [(f"t{i}", f"word{i} tail") for i in range(5)]
        client.prefetch(items)
        posts = [path for path in calls if path == "/v1/masked_distributions"]
        assert len(posts) == 3

    def test_prefetch_deduplicates(self):
        calls = []
        client = self.client(fake_sidecar(counter=calls), batch_size=10)
        client.prefetch([("a", "x y"), ("a", "x y"), ("b", "z w")])
        client.prefetch([("a", "x y")])
        posts = [path for path in calls if path == "/v1/masked_distributions"]
        assert len(posts) == 1

    def test_retries_then_unavailable(self):
        attempts = []

        def failing(request: httpx.Request) -> httpx.Response:
            attempts.append(1)
            return httpx.Response(503)

        client = self.client(failing, retries=3)
        with pytest.raises(BackendUnavailable):
            client.tokenize("t", "a")
        assert len(attempts) == 4  # initial call + 3 retries

    def test_transient_then_success(self):
        state = {"calls": 0}

        def flaky(request: httpx.Request) -> httpx.Response:
            state["calls"] += 1
            if state["calls"] == 1:
                raise httpx.ConnectError("boom", request=request)
            return fake_sidecar()(request)

        client = self.client(flaky, retries=2)
        assert client.descriptor.vocab_size == 8

    def test_predict_without_prefetch(self):
        client = self.client(fake_sidecar())
        with pytest.raises(BackendUnavailable):
            client.predict_masked(TokenizedText("ghost", (0,), ("x",)))

    def test_bad_endpoint(self):
        with pytest.raises(DomainError):
            RemoteClient("not-a-url")

    def test_remote_export_matches_live(self, tmp_path):
        client = self.client(fake_sidecar())
        items = [("a", "the cat sat"), ("b", "dogs bark")]
        path = tmp_path / "captured.jsonl"
        export_store(client, items, path, top_k=8)
        store = load_distribution_store(path)
        for text_id, text in items:
            live = client.predict_masked(client.tokenize(text_id, text))
            replay = store.predict_masked(store.tokenize(text_id, text))
            for lp, rp in zip(live, replay):
                assert lp.distribution == pytest.approx(rp.distribution, abs=1e-9)
