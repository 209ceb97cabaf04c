import math
import random

import pytest

from selassess.errors import (
    DimensionMismatch,
    DuplicateRecordId,
    EmptyStore,
)
from selassess.rag_store import (
    EmbeddingRecord,
    HashingEmbedder,
    SourceKind,
    VectorStore,
    cosine,
    embed_texts,
)


def _record(rid: str, vector, kind=SourceKind.TRANSCRIPT_CHUNK,
            text="") -> EmbeddingRecord:
    return EmbeddingRecord(rid, kind, rid, text or rid, tuple(vector))


class TestHashingEmbedder:
    def test_deterministic(self):
        emb = HashingEmbedder()
        assert emb.embed(["praise"]) == emb.embed(["praise"])

    def test_unit_norm(self):
        emb = HashingEmbedder()
        for text in ["praise", "the tutor praised effort", "a b c d e"]:
            vec = emb.embed([text])[0]
            assert math.isclose(math.sqrt(sum(x * x for x in vec)), 1.0,
                                abs_tol=1e-9)

    def test_empty_text_is_zero_vector(self):
        vec = HashingEmbedder().embed([""])[0]
        assert all(x == 0.0 for x in vec)

    def test_tokenization_case_and_punct_insensitive(self):
        emb = HashingEmbedder()
        assert emb.embed(["Praise, effort!"]) == emb.embed(["praise effort"])

    def test_dimension(self):
        emb = HashingEmbedder(dimension=64)
        assert len(emb.embed(["x"])[0]) == 64

    def test_batch_length(self):
        vectors = embed_texts(["a", "b", "c"], HashingEmbedder())
        assert len(vectors) == 3


class TestCosine:
    def test_identical_unit_vectors(self):
        assert cosine([1, 0], [1, 0]) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine([1, 0], [0, 1]) == pytest.approx(0.0)

    def test_hand_computed(self):
        assert cosine([1, 1], [1, 0]) == pytest.approx(1 / math.sqrt(2),
                                                       abs=1e-4)

    def test_zero_norm_defined_as_zero(self):
        assert cosine([0, 0], [1, 2]) == 0.0

    def test_symmetric(self):
        a, b = [1.0, 2.0, -3.0], [0.5, -1.0, 2.0]
        assert cosine(a, b) == pytest.approx(cosine(b, a))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cosine([1, 0], [1, 0, 0])

    def test_bounded(self):
        rng = random.Random(7)
        for _ in range(50):
            a = [rng.uniform(-5, 5) for _ in range(8)]
            b = [rng.uniform(-5, 5) for _ in range(8)]
            assert abs(cosine(a, b)) <= 1 + 1e-9


class TestIndex:
    def test_counting(self):
        store = VectorStore(2)
        store.index([_record(f"r{i}", [1.0, float(i)]) for i in range(3)])
        assert len(store) == 3

    def test_duplicate_record_id(self):
        store = VectorStore(2)
        store.index([_record("r0", [1.0, 0.0])])
        with pytest.raises(DuplicateRecordId):
            store.index([_record("r0", [0.0, 1.0])])

    def test_mixed_dimensions(self):
        store = VectorStore(2)
        with pytest.raises(DimensionMismatch):
            store.index([_record("a", [1.0, 0.0]), _record("b", [1.0, 0.0, 0.0])])

    def test_lookup_by_id(self):
        store = VectorStore(2)
        store.index([_record("r0", [1.0, 0.0], text="hello")])
        assert store.get("r0").text == "hello"


class TestRetrieve:
    def _store_from_texts(self, texts, emb):
        vectors = embed_texts(texts, emb)
        store = VectorStore(emb.dimension, emb.embedder_id)
        store.index([_record(f"r{i:03d}", v, text=t)
                     for i, (t, v) in enumerate(zip(texts, vectors))])
        return store

    def test_self_retrieval_rank_1(self):
        emb = HashingEmbedder()
        texts = ["the tutor praised effort", "the student solved fractions",
                 "negative self talk response"]
        store = self._store_from_texts(texts, emb)
        hits = store.retrieve(texts[1], k=1, embedder=emb)
        assert hits[0].record_id == "r001"
        assert hits[0].score == pytest.approx(1.0, abs=1e-9)

    def test_k_larger_than_store(self):
        emb = HashingEmbedder()
        store = self._store_from_texts(["a one", "b two", "c three"], emb)
        hits = store.retrieve("a one", k=10, embedder=emb)
        assert len(hits) == 3
        assert all(hits[i].score >= hits[i + 1].score
                   for i in range(len(hits) - 1))

    def test_filter_by_kind(self):
        emb = HashingEmbedder()
        vectors = embed_texts(["chunk text", "principle text"], emb)
        store = VectorStore(emb.dimension)
        store.index([
            _record("c", vectors[0], SourceKind.TRANSCRIPT_CHUNK, "chunk text"),
            _record("p", vectors[1], SourceKind.PRINCIPLE_TEXT, "principle text"),
        ])
        hits = store.retrieve("text", k=5, embedder=emb,
                              filter_kind=SourceKind.PRINCIPLE_TEXT)
        assert [h.record_id for h in hits] == ["p"]

    def test_empty_store(self):
        emb = HashingEmbedder()
        store = VectorStore(emb.dimension)
        with pytest.raises(EmptyStore):
            store.retrieve("q", k=1, embedder=emb)

    def test_deterministic(self):
        emb = HashingEmbedder()
        store = self._store_from_texts([f"text number {i}" for i in range(20)],
                                       emb)
        first = store.retrieve("number five", k=5, embedder=emb)
        second = store.retrieve("number five", k=5, embedder=emb)
        assert first == second


def brute_force_top_k(store_vectors, query_vec, k):
    """Independent oracle: pure-python cosine over every record, sorted by
    (-score, record_id)."""
    def dot(a, b):
        return sum(x * y for x, y in zip(a, b))

    def norm(a):
        return math.sqrt(sum(x * x for x in a))

    hits = []
    for rid, vec in store_vectors.items():
        na, nb = norm(query_vec), norm(vec)
        score = 0.0 if na == 0 or nb == 0 else dot(query_vec, vec) / (na * nb)
        hits.append((rid, score))
    hits.sort(key=lambda h: (-h[1], h[0]))
    return hits[:k]


class TestRetrievalOracle:
    def test_matches_brute_force_scan(self):
        rng = random.Random(42)
        for case in range(100):
            d = rng.choice([4, 8, 16, 64, 512])
            n = rng.randint(1, 80) if case % 10 else rng.randint(500, 1000)
            k = rng.randint(1, 20)
            vectors = {
                f"r{i:04d}": tuple(rng.uniform(-1, 1) for _ in range(d))
                for i in range(n)
            }

            class FixedEmbedder:
                dimension = d
                embedder_id = "fixed"

                def __init__(self, vec):
                    self.vec = vec

                def embed(self, texts):
                    return [list(self.vec) for _ in texts]

            query = tuple(rng.uniform(-1, 1) for _ in range(d))
            store = VectorStore(d)
            store.index([_record(rid, vec) for rid, vec in vectors.items()])
            hits = store.retrieve("q", k=k, embedder=FixedEmbedder(query))
            expected = brute_force_top_k(vectors, query, k)
            assert [h.record_id for h in hits] == [rid for rid, _ in expected]
            for hit, (_, score) in zip(hits, expected):
                assert hit.score == pytest.approx(score, abs=1e-9)


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        emb = HashingEmbedder(dimension=16)
        vectors = embed_texts(["alpha", "beta"], emb)
        store = VectorStore(16, emb.embedder_id)
        store.index([_record("a", vectors[0], text="alpha"),
                     _record("b", vectors[1], SourceKind.PRINCIPLE_TEXT,
                             "beta")])
        path = tmp_path / "store.json"
        store.save(path)
        loaded = VectorStore.load(path)
        assert len(loaded) == 2
        assert loaded.dimension == 16
        assert loaded.get("a") == store.get("a")
        assert loaded.get("b").source_kind is SourceKind.PRINCIPLE_TEXT
