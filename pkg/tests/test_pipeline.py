import numpy as np
import pytest

from salreid.calibrate import calibrated_config, knn_score_median, matched_distance_median
from salreid.config import PipelineConfig, TrialConfig
from salreid.pipeline import (
    component_scores,
    evaluate_components,
    feature_table,
    grids_from_items,
    parallel_map,
    relevance_mask,
    saliency_maps,
    train_rank_model,
)
from salreid.saliency import SaliencyMap
from salreid.salmatch import RankModel
from salreid.synthetic import (
    cue_color,
    cue_origin,
    generate_synthetic_items,
    person_image,
    write_synthetic_dataset,
)
from salreid.stores import read_manifest
from tests.conftest import random_grid


def flat_sal(rows, cols, prob=0.5):
    return SaliencyMap(
        rows=rows,
        cols=cols,
        scores=np.ones((rows, cols)),
        probs=np.full((rows, cols), prob),
    )


def test_parallel_map_preserves_order():
    items = list(range(20))
    assert parallel_map(lambda x: x * x, items, jobs=1) == [x * x for x in items]
    assert parallel_map(lambda x: x * x, items, jobs=4) == [x * x for x in items]


def test_cue_assignment_unique():
    seen = set()
    for identity in range(60):
        key = (cue_color(identity), cue_origin(identity))
        assert key not in seen
        seen.add(key)


def test_person_image_deterministic_given_rng():
    a = person_image(7, np.random.default_rng(5))
    b = person_image(7, np.random.default_rng(5))
    assert np.array_equal(a, b)
    assert a.shape == (64, 32, 3) and a.dtype == np.uint8


def test_person_image_jitter_moves_cue():
    plain = person_image(3, np.random.default_rng(0), noise_sigma=0.0)
    moved = person_image(3, np.random.default_rng(0), dy=6, dx=2, noise_sigma=0.0)
    assert not np.array_equal(plain, moved)


def test_generate_synthetic_items_layout():
    items = generate_synthetic_items(n_identities=6, seed=1, images_per_view=2)
    assert len(items) == 6 * 2 * 2
    cams = {(ident, cam) for _, cam, ident in items}
    assert len(cams) == 12
    items_again = generate_synthetic_items(n_identities=6, seed=1, images_per_view=2)
    for (im1, c1, i1), (im2, c2, i2) in zip(items, items_again):
        assert np.array_equal(im1, im2) and (c1, i1) == (c2, i2)


def test_generate_synthetic_items_rejects_too_many():
    with pytest.raises(ValueError):
        generate_synthetic_items(n_identities=61)


def test_write_synthetic_dataset(tmp_path):
    manifest = write_synthetic_dataset(tmp_path, n_identities=3, seed=0)
    entries = read_manifest(manifest)
    assert len(entries) == 6
    assert {e.camera for e in entries} == {"A", "B"}
    for e in entries:
        assert (tmp_path / "images").exists()
        assert e.path.endswith(".png")


def test_grids_from_items_shapes():
    cfg = PipelineConfig()
    items = generate_synthetic_items(n_identities=2, seed=0)
    grids = grids_from_items(items, cfg)
    assert len(grids) == 4
    assert grids[0].descriptors.shape == (14, 6, 672)
    assert grids[0].camera == "A" and grids[1].camera == "B"


def test_relevance_mask(rng):
    probes = [random_grid(rng, 2, 2, identity=f"p{i}") for i in range(3)]
    gallery = [random_grid(rng, 2, 2, identity=f"p{i % 2}") for i in range(4)]
    mask = relevance_mask(probes, gallery)
    assert mask.shape == (3, 4)
    assert mask[0].tolist() == [True, False, True, False]
    assert mask[2].tolist() == [False, False, False, False]


def test_feature_table_shape(rng, pipeline_cfg):
    probes = [random_grid(rng, 3, 2, dim=4, identity=f"p{i}") for i in range(2)]
    gallery = [random_grid(rng, 3, 2, dim=4, identity=f"p{i}") for i in range(3)]
    pmaps = [flat_sal(3, 2) for _ in probes]
    gmaps = [flat_sal(3, 2) for _ in gallery]
    phi = feature_table(probes, pmaps, gallery, gmaps, pipeline_cfg)
    assert phi.shape == (2, 3, 8 * 6)
    threaded = feature_table(probes, pmaps, gallery, gmaps, pipeline_cfg, jobs=3)
    assert np.allclose(phi, threaded)


def test_component_scores_match_single_method(rng, pipeline_cfg):
    probe = random_grid(rng, 3, 2, dim=4, identity="p0")
    gallery = [random_grid(rng, 3, 2, dim=4, identity=f"p{i}") for i in range(3)]
    pmap = flat_sal(3, 2)
    gmaps = [flat_sal(3, 2) for _ in gallery]
    model = RankModel(rows=3, cols=2, w=rng.normal(size=48))
    combined = component_scores(
        probe, pmap, gallery, gmaps, model, pipeline_cfg,
        methods=["densefeats", "patmatch", "sdc", "salmatch"],
    )
    for method in combined:
        alone = component_scores(
            probe, pmap, gallery, gmaps, model, pipeline_cfg, methods=[method]
        )
        assert np.allclose(combined[method], alone[method])
    with pytest.raises(ValueError):
        component_scores(probe, pmap, gallery, gmaps, model, pipeline_cfg, ["bogus"])


def test_saliency_maps_threaded_same(rng, pipeline_cfg):
    grids = [random_grid(rng, 4, 3, dim=6) for _ in range(3)]
    refs = [random_grid(rng, 4, 3, dim=6) for _ in range(6)]
    seq = saliency_maps(grids, refs, pipeline_cfg, jobs=1)
    par = saliency_maps(grids, refs, pipeline_cfg, jobs=3)
    for a, b in zip(seq, par):
        assert np.array_equal(a.scores, b.scores)


def test_train_rank_model_learns_toy(rng, pipeline_cfg):
    # identical grids across cameras: self-similarity separates cleanly
    probes = [random_grid(rng, 2, 2, dim=4, camera="A", identity=f"p{i}") for i in range(4)]
    gallery = [
        type(g)(rows=2, cols=2, descriptors=g.descriptors.copy(), camera="B", identity=g.identity)
        for g in probes
    ]
    pmaps = [flat_sal(2, 2) for _ in probes]
    gmaps = [flat_sal(2, 2) for _ in gallery]
    result = train_rank_model(probes, pmaps, gallery, gmaps, pipeline_cfg)
    assert result.converged
    scores = component_scores(
        probes[0], pmaps[0], gallery, gmaps, result.model, pipeline_cfg, ["salmatch"]
    )["salmatch"]
    assert int(np.argmax(scores)) == 0


def test_evaluate_components_tiny_run():
    cfg = PipelineConfig()
    items = generate_synthetic_items(n_identities=8, seed=2)
    grids = grids_from_items(items, cfg)
    cfg = calibrated_config(grids, cfg)
    trial_cfg = TrialConfig(trials=2, seed=5, split_fraction=0.5)
    results = evaluate_components(
        grids, cfg, methods=["patmatch"], trial_cfg=trial_cfg
    )
    res = results["patmatch"]
    assert res.trial_curves.shape == (2, 4)
    assert res.mean_curve[-1] == pytest.approx(1.0)
    assert np.all(np.diff(res.mean_curve) >= -1e-12)


def test_calibration_medians_positive():
    cfg = PipelineConfig()
    items = generate_synthetic_items(n_identities=6, seed=3)
    grids = grids_from_items(items, cfg)
    sigma = matched_distance_median(grids, cfg)
    sigma0 = knn_score_median(grids, cfg)
    assert sigma > 0 and sigma0 > 0
    calibrated = calibrated_config(grids, cfg)
    assert calibrated.kernel.sigma == pytest.approx(sigma)
    assert calibrated.saliency.sigma0 == pytest.approx(sigma0)
    # original config untouched
    assert cfg.kernel.sigma != calibrated.kernel.sigma
