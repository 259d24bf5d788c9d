import csv
import math

import numpy as np
import pytest

from salreid.annotate import (
    AnnotationStore,
    PartMask,
    part_saliency_score,
    sample_gallery,
)
from salreid.config import AnnotationConfig


def mask(h=4, w=4):
    m = np.zeros((h, w), dtype=bool)
    m[1:3, 1:3] = True
    return m


@pytest.fixture
def pool():
    return [f"g{i:03d}" for i in range(40)]


@pytest.fixture
def store(tmp_path, pool):
    parts = [
        PartMask(image_id="q0", part_id="bag", mask=mask()),
        PartMask(image_id="q0", part_id="hat", mask=mask()),
        PartMask(image_id="q1", part_id="coat", mask=mask()),
    ]
    targets = {"q0": "g005", "q1": "g011"}
    return AnnotationStore(
        parts,
        targets,
        pool,
        AnnotationConfig(),
        seed=42,
        log_path=tmp_path / "events.jsonl",
    )


def test_part_mask_validation():
    with pytest.raises(ValueError):
        PartMask(image_id="q", part_id="x", mask=np.zeros((3, 3), dtype=bool))
    with pytest.raises(ValueError):
        PartMask(image_id="q", part_id="x", mask=np.ones(4, dtype=bool))


def test_sample_gallery_contains_target(pool):
    sample = sample_gallery(pool, "g007", seed=1, session_id=3)
    assert len(sample) == 32
    assert "g007" in sample
    assert len(set(sample)) == 32


def test_sample_gallery_deterministic(pool):
    a = sample_gallery(pool, "g007", seed=1, session_id=3)
    b = sample_gallery(pool, "g007", seed=1, session_id=3)
    c = sample_gallery(pool, "g007", seed=1, session_id=4)
    assert a == b
    assert a != c


def test_sample_gallery_target_included_every_session(pool):
    hits = []
    for sid in range(1000):
        sample = sample_gallery(pool, "g000", seed=9, session_id=sid)
        assert "g000" in sample
        hits.append(sample.index("g000"))
    # the target position should wander, not sit at a fixed slot
    assert len(set(hits)) > 20


def test_sample_gallery_validation(pool):
    with pytest.raises(ValueError, match="target missing"):
        sample_gallery(pool, "nope", seed=0, session_id=1)
    with pytest.raises(ValueError, match="at least"):
        sample_gallery(pool[:10], "g003", seed=0, session_id=1)


def test_part_saliency_score_single_count():
    cfg = AnnotationConfig(sigma_avg=4.0, sigma_std=2.0)
    # one labeler, one trial: mean 1, std 0 -> exp(-1/16)
    assert part_saliency_score([1], cfg) == pytest.approx(math.exp(-1.0 / 16.0))
    # one labeler, two trials: exp(-4/16)
    assert part_saliency_score([2], cfg) == pytest.approx(math.exp(-0.25))


def test_part_saliency_score_counts_1_3():
    cfg = AnnotationConfig(sigma_avg=4.0, sigma_std=2.0)
    # mean 2, population std 1 -> exp(-4/16) exp(-1/4) = exp(-1/2)
    assert part_saliency_score([1, 3], cfg) == pytest.approx(math.exp(-0.5))


def test_part_saliency_score_monotone_in_mean():
    cfg = AnnotationConfig()
    scores = [part_saliency_score([n], cfg) for n in range(1, 8)]
    assert all(a > b for a, b in zip(scores, scores[1:]))


def test_part_saliency_score_penalizes_spread():
    cfg = AnnotationConfig()
    tight = part_saliency_score([2, 2], cfg)
    spread = part_saliency_score([1, 3], cfg)  # same mean, higher std
    assert tight > spread


def test_part_saliency_score_empty():
    with pytest.raises(ValueError):
        part_saliency_score([], AnnotationConfig())


def test_create_session_assigns_ids(store):
    s1 = store.create_session("ann", "q0", "bag")
    s2 = store.create_session("bob", "q0", "hat")
    assert (s1.session_id, s2.session_id) == (1, 2)
    assert s1.target == "g005"
    assert len(s1.sample) == 32 and "g005" in s1.sample


def test_create_session_unknown_part(store):
    with pytest.raises(KeyError):
        store.create_session("ann", "q0", "shoes")
    with pytest.raises(KeyError):
        store.create_session("ann", "qX", "bag")


def test_trial_flow_wrong_then_correct(store):
    s = store.create_session("ann", "q0", "bag")
    wrong = next(g for g in s.sample if g != s.target)
    correct, n = store.record_trial(s.session_id, wrong)
    assert (correct, n) == (False, 1)
    assert not store.session(s.session_id).closed
    correct, n = store.record_trial(s.session_id, s.target)
    assert (correct, n) == (True, 2)
    assert store.session(s.session_id).closed
    assert store.session(s.session_id).wrong == [wrong]


def test_record_trial_rejects_closed_and_foreign(store):
    s = store.create_session("ann", "q0", "bag")
    store.record_trial(s.session_id, s.target)
    with pytest.raises(ValueError, match="closed"):
        store.record_trial(s.session_id, s.target)
    s2 = store.create_session("ann", "q0", "hat")
    with pytest.raises(ValueError, match="not in this session"):
        store.record_trial(s2.session_id, "not-an-image")


def test_record_trial_unknown_session(store):
    with pytest.raises(KeyError):
        store.record_trial(99, "g001")


def test_part_score_aggregates_closed_sessions(store):
    # labeler 1 closes in 1 trial; labeler 2 closes in 3
    s1 = store.create_session("ann", "q0", "bag")
    store.record_trial(s1.session_id, s1.target)
    s2 = store.create_session("bob", "q0", "bag")
    wrongs = [g for g in s2.sample if g != s2.target]
    store.record_trial(s2.session_id, wrongs[0])
    store.record_trial(s2.session_id, wrongs[1])
    store.record_trial(s2.session_id, s2.target)
    # an open session must not count
    store.create_session("cam", "q0", "bag")
    score, n = store.part_score("q0", "bag")
    assert n == 2
    assert score == pytest.approx(math.exp(-0.5))
    assert store.closed_counts("q0", "bag") == [1, 3]


def test_export_csv_respects_min_labelers(tmp_path, pool):
    parts = [
        PartMask(image_id="q0", part_id="bag", mask=mask()),
        PartMask(image_id="q0", part_id="hat", mask=mask()),
    ]
    cfg = AnnotationConfig(min_labelers=2)
    store = AnnotationStore(parts, {"q0": "g001"}, pool, cfg, seed=1)
    for labeler in ("ann", "bob"):
        s = store.create_session(labeler, "q0", "bag")
        store.record_trial(s.session_id, s.target)
    s = store.create_session("ann", "q0", "hat")  # only one labeler
    store.record_trial(s.session_id, s.target)

    path = tmp_path / "scores.csv"
    store.export_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["image", "part", "score", "labelers"]
    assert len(rows) == 2  # hat filtered out
    assert rows[1][:2] == ["q0", "bag"]
    assert float(rows[1][2]) == pytest.approx(math.exp(-1.0 / 16.0))
    assert rows[1][3] == "2"


def test_replay_restores_state(tmp_path, pool):
    parts = [PartMask(image_id="q0", part_id="bag", mask=mask())]
    log = tmp_path / "events.jsonl"
    store = AnnotationStore(parts, {"q0": "g003"}, pool, AnnotationConfig(), seed=5, log_path=log)
    s = store.create_session("ann", "q0", "bag")
    wrong = next(g for g in s.sample if g != s.target)
    store.record_trial(s.session_id, wrong)
    store.record_trial(s.session_id, s.target)
    open_s = store.create_session("bob", "q0", "bag")

    revived = AnnotationStore(
        parts, {"q0": "g003"}, pool, AnnotationConfig(), seed=5, log_path=log
    )
    got = revived.session(s.session_id)
    assert got.closed and got.trials == [wrong, s.target]
    assert got.sample == s.sample  # same (seed, session id) -> same gallery
    assert not revived.session(open_s.session_id).closed
    # new ids continue after the replayed ones
    fresh = revived.create_session("cam", "q0", "bag")
    assert fresh.session_id == open_s.session_id + 1


def test_replay_appends_once(tmp_path, pool):
    parts = [PartMask(image_id="q0", part_id="bag", mask=mask())]
    log = tmp_path / "events.jsonl"
    store = AnnotationStore(parts, {"q0": "g003"}, pool, AnnotationConfig(), log_path=log)
    s = store.create_session("ann", "q0", "bag")
    store.record_trial(s.session_id, s.target)
    lines_before = log.read_text().strip().splitlines()

    AnnotationStore(parts, {"q0": "g003"}, pool, AnnotationConfig(), log_path=log)
    lines_after = log.read_text().strip().splitlines()
    assert lines_before == lines_after  # replay must not re-log events


def test_store_without_log_keeps_no_file(tmp_path, pool):
    parts = [PartMask(image_id="q0", part_id="bag", mask=mask())]
    store = AnnotationStore(parts, {"q0": "g001"}, pool, AnnotationConfig())
    s = store.create_session("ann", "q0", "bag")
    store.record_trial(s.session_id, s.target)
    assert list(tmp_path.iterdir()) == []
