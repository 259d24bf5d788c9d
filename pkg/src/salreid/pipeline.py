"""End-to-end orchestration shared by the CLI and the experiments.

A component evaluation runs the split protocol once while deriving all
requested scorers from the same per-pair correspondences, instead of
re-extracting everything per method. Saliency maps use the opposite
camera's training images as the reference population.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

from .config import PipelineConfig, TrialConfig
from .features import PatchGrid, extract_grid
from .matching import dense_correspondence, sim_densefeats, sim_patmatch
from .protocol import ProtocolResult, cmc, correct_match_rank, split_trial
from .ranklearn import TrainSet, train
from .saliency import SaliencyMap, saliency_map
from .salmatch import RankModel, pair_feature_map, sim_salmatch, sim_sdc

COMPONENT_METHODS = ("densefeats", "patmatch", "sdc", "salmatch")


def parallel_map(fn: Callable, items: Iterable, jobs: int = 1) -> list:
    """Order-preserving map, threaded when jobs > 1."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def grids_from_items(
    items: Sequence[tuple[np.ndarray, str, str]],
    cfg: PipelineConfig,
    jobs: int = 1,
) -> list[PatchGrid]:
    def _one(indexed):
        i, (image, camera, identity) = indexed
        return extract_grid(
            image, cfg.grid, camera=camera, identity=identity, image_id=str(i)
        )

    return parallel_map(_one, enumerate(items), jobs)


def saliency_maps(
    grids: Sequence[PatchGrid],
    refs: Sequence[PatchGrid],
    cfg: PipelineConfig,
    jobs: int = 1,
) -> list[SaliencyMap]:
    return parallel_map(
        lambda g: saliency_map(g, refs, cfg.saliency, cfg.grid), grids, jobs
    )


def feature_table(
    probes: Sequence[PatchGrid],
    probe_maps: Sequence[SaliencyMap],
    gallery: Sequence[PatchGrid],
    gallery_maps: Sequence[SaliencyMap],
    cfg: PipelineConfig,
    jobs: int = 1,
) -> np.ndarray:
    """(U, G, 8MN) pair feature maps for training or scoring."""

    def _row(u: int) -> np.ndarray:
        rows = []
        for v, grid_b in enumerate(gallery):
            corr = dense_correspondence(probes[u], grid_b, cfg.grid, cfg.kernel)
            rows.append(pair_feature_map(corr, probe_maps[u], gallery_maps[v]))
        return np.stack(rows)

    return np.stack(parallel_map(_row, range(len(probes)), jobs))


def relevance_mask(
    probes: Sequence[PatchGrid], gallery: Sequence[PatchGrid]
) -> np.ndarray:
    return np.array(
        [[g.identity == p.identity for g in gallery] for p in probes], dtype=bool
    )


def train_rank_model(
    probes: Sequence[PatchGrid],
    probe_maps: Sequence[SaliencyMap],
    gallery: Sequence[PatchGrid],
    gallery_maps: Sequence[SaliencyMap],
    cfg: PipelineConfig,
    jobs: int = 1,
):
    phi = feature_table(probes, probe_maps, gallery, gallery_maps, cfg, jobs)
    ts = TrainSet(phi=phi, relevant=relevance_mask(probes, gallery))
    return train(ts, cfg.train, rows=probes[0].rows, cols=probes[0].cols)


def component_scores(
    probe: PatchGrid,
    probe_map: SaliencyMap | None,
    gallery: Sequence[PatchGrid],
    gallery_maps: Sequence[SaliencyMap] | None,
    model: RankModel | None,
    cfg: PipelineConfig,
    methods: Sequence[str],
) -> dict[str, np.ndarray]:
    """All requested scorers from one correspondence pass per pair."""
    need_corr = any(m != "densefeats" for m in methods)
    out = {m: np.empty(len(gallery)) for m in methods}
    for v, grid_b in enumerate(gallery):
        corr = (
            dense_correspondence(probe, grid_b, cfg.grid, cfg.kernel)
            if need_corr
            else None
        )
        for m in methods:
            if m == "densefeats":
                out[m][v] = sim_densefeats(probe, grid_b, cfg.kernel)
            elif m == "patmatch":
                out[m][v] = sim_patmatch(corr)
            elif m == "sdc":
                out[m][v] = sim_sdc(
                    corr, probe_map, gallery_maps[v], cfg.match.alpha_sdc
                )
            elif m in ("salmatch", "esalmatch"):
                fm = pair_feature_map(corr, probe_map, gallery_maps[v])
                out[m][v] = sim_salmatch(model, fm)
            else:
                raise ValueError(f"unknown scoring method: {m!r}")
    return out


def _one_per_identity(grids: Sequence[PatchGrid]) -> list[PatchGrid]:
    seen: set = set()
    kept = []
    for g in grids:
        if g.identity not in seen:
            seen.add(g.identity)
            kept.append(g)
    return kept


def evaluate_components(
    grids: Sequence[PatchGrid],
    cfg: PipelineConfig,
    methods: Sequence[str] = COMPONENT_METHODS,
    trial_cfg: TrialConfig | None = None,
    jobs: int = 1,
) -> dict[str, ProtocolResult]:
    """Protocol CMC per scorer over shared trial artifacts."""
    trial_cfg = trial_cfg or cfg.trial
    identities = sorted({g.identity for g in grids})
    needs_sal = any(m not in ("densefeats", "patmatch") for m in methods)
    needs_model = any(m in ("salmatch", "esalmatch") for m in methods)

    curves: dict[str, list] = {m: [] for m in methods}
    all_ranks: dict[str, list] = {m: [] for m in methods}
    gallery_size = None

    for t in range(trial_cfg.trials):
        train_ids, test_ids = split_trial(identities, trial_cfg, t)
        test_set = set(test_ids)

        def side(camera: str, test: bool) -> list[PatchGrid]:
            picked = [
                g
                for g in grids
                if g.camera == camera and (g.identity in test_set) == test
            ]
            return _one_per_identity(picked) if trial_cfg.single_shot else picked

        train_a, train_b = side("A", False), side("B", False)
        probes, gallery = side("A", True), side("B", True)
        if not probes or not gallery:
            raise ValueError("empty probe or gallery side after split")
        if gallery_size is None:
            gallery_size = len(gallery)
        elif len(gallery) != gallery_size:
            raise ValueError("gallery size varies across trials")

        probe_maps = gallery_maps = None
        model = None
        if needs_sal:
            probe_maps = saliency_maps(probes, train_b, cfg, jobs)
            gallery_maps = saliency_maps(gallery, train_a, cfg, jobs)
        if needs_model:
            train_a_maps = saliency_maps(train_a, train_b, cfg, jobs)
            train_b_maps = saliency_maps(train_b, train_a, cfg, jobs)
            result = train_rank_model(
                train_a, train_a_maps, train_b, train_b_maps, cfg, jobs
            )
            model = result.model

        gallery_ids = [g.identity for g in gallery]
        ranks: dict[str, list] = {m: [] for m in methods}

        def _probe_ranks(u: int) -> dict[str, int]:
            scores = component_scores(
                probes[u],
                probe_maps[u] if probe_maps else None,
                gallery,
                gallery_maps,
                model,
                cfg,
                methods,
            )
            return {
                m: correct_match_rank(scores[m], gallery_ids, probes[u].identity)
                for m in methods
            }

        for per_probe in parallel_map(_probe_ranks, range(len(probes)), jobs):
            for m in methods:
                ranks[m].append(per_probe[m])
        for m in methods:
            curves[m].append(cmc(ranks[m], gallery_size))
            all_ranks[m].append(tuple(ranks[m]))

    results = {}
    for m in methods:
        stacked = np.stack(curves[m])
        results[m] = ProtocolResult(
            mean_curve=stacked.mean(axis=0),
            trial_curves=stacked,
            trial_ranks=tuple(all_ranks[m]),
            gallery_size=int(gallery_size),
        )
    return results
