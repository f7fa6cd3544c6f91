import itertools

import numpy as np
import pytest

import openreid


def _store(n=20, d=8, seed=0):
    rng = np.random.default_rng(seed)
    vecs = rng.normal(size=(n, d)).astype(np.float32)
    meta = [{"image_id": f"img{i}", "identity": f"id{i % 4}", "source": "s", "confidence": 0.5} for i in range(n)]
    return openreid.EmbeddingStore(vecs, meta)


def test_normalize():
    out = openreid.normalize(np.array([3.0, 4.0]))
    assert out == pytest.approx([0.6, 0.8])
    with pytest.raises(ValueError):
        openreid.normalize(np.zeros(3))


def test_store_round_trip(tmp_path):
    store = _store()
    assert len(store) == 20 and store.dimension == 8
    assert np.allclose(np.linalg.norm(store.matrix, axis=1), 1.0, atol=1e-6)
    path = tmp_path / "s.cfe"
    store.save(path)
    assert (tmp_path / "s.meta.jsonl").exists()
    loaded = openreid.load_store(path)
    assert loaded == store
    assert loaded.metadata[3]["identity"] == "id3"
    assert loaded.metadata[3]["track_id"] is None


def test_store_errors(tmp_path):
    with pytest.raises(OSError):
        openreid.load_store(tmp_path / "missing.cfe")
    (tmp_path / "bad.cfe").write_bytes(b"XXXX" + bytes(20))
    (tmp_path / "bad.meta.jsonl").write_text("")
    with pytest.raises(openreid.IoError):
        openreid.load_store(tmp_path / "bad.cfe")


def test_search_matches_numpy():
    store = _store(n=300, d=16, seed=1)
    index = openreid.GalleryIndex.from_store(store)
    rng = np.random.default_rng(2)
    m = store.matrix.astype(np.float64)
    for _ in range(20):
        q = openreid.normalize(rng.normal(size=16))
        sims = m @ q.astype(np.float64)
        want = sorted(range(len(sims)), key=lambda i: (-sims[i], i))[:7]
        got = [row for row, _, _ in index.search_topk(q, 7)]
        assert got == want
        identity, score = index.classify(q, 5)
        assert identity.startswith("id") and 0.0 <= score <= 1.0


def test_iou_and_assignment():
    assert openreid.iou((0, 0, 2, 2), (1, 1, 2, 2)) == pytest.approx(1 / 7)
    cost = np.array([[4, 1, 3], [2, 0, 5], [3, 2, 2]], dtype=float)
    a = openreid.solve_assignment(cost)
    best = min(sum(cost[i, p[i]] for i in range(3)) for p in itertools.permutations(range(3)))
    assert sum(cost[i, a[i]] for i in range(3)) == best == 5


def test_tracker_dip():
    dets = openreid.synth.confidence_dip()
    out = openreid.run_tracker(dets)
    assert len(out) == 10 and len({d["track_id"] for d in out}) == 1
    cfg = openreid.TrackerConfig()
    cfg.tau_low = cfg.tau_high
    assert len(openreid.run_tracker(dets, cfg)) == 8


def test_filter_corpus():
    rng = np.random.default_rng(3)
    records = [{"image_id": f"r{i:05d}", "video_id": "panaf/v", "confidence": float(c)}
               for i, c in enumerate(rng.random(30000))]
    kept = openreid.filter_corpus(records, 0.2, 0.5, seed=1)
    assert len(kept) == 3000
    cutoff = sorted((r["confidence"] for r in records), reverse=True)[5999]
    assert min(r["confidence"] for r in kept) >= cutoff


def test_benchmark_arithmetic():
    bossou = openreid.synth.bossou9_like()
    split = openreid.build_reid_split(bossou)
    assert (len(split["gallery"]), len(split["queries"])) == (3150, 630)
    ver = openreid.evaluate_verification(bossou, negative_sets=2)
    assert (ver["images"], ver["positives"]) == (378, 7749)

    pet = openreid.synth.petface_like()
    split = openreid.build_reid_split(pet, mode="portrait")
    assert (len(split["gallery"]), len(split["queries"])) == (2477, 376)
    assert openreid.evaluate_verification(pet, mode="portrait", negative_sets=1)["positives"] == 15205


def test_reid_protocol_and_auc():
    store = openreid.synth.bossou9_like(seed=4)
    report = openreid.run_reid_protocol(store, repetitions=2, seed=1)
    assert report["chosen_k"] in report["k_values"]
    assert 0.0 <= report["accuracy"]["mean"] <= 1.0
    split = openreid.build_reid_split(store, seed=7)
    acc = openreid.eval_reid(store, split["gallery"], split["queries"], [1, 5])
    assert len(acc) == 2

    assert openreid.roc_auc([0.9, 0.8], [0.1]) == 1.0
    assert openreid.roc_auc([0.5, 0.5], [0.5]) == 0.5
    with pytest.raises(ValueError):
        openreid.roc_auc([], [0.1])
