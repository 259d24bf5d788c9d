"""Data-dependent bandwidth calibration.

The Gaussian patch-similarity bandwidth and the saliency-probability
bandwidth both live on the scale of descriptor distances, which depends
on the corpus. Calibration measures that scale on a sample: sigma as
the median matched-patch distance over same-identity cross-camera
pairs, sigma0 as the median KNN saliency score with the opposite
camera as the reference population. Results are cached in the config.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

import numpy as np

from .config import PipelineConfig
from .features import PatchGrid
from .matching import match_indices, match_to_refs
from .saliency import choose_k


def _sides(grids: Sequence[PatchGrid]) -> tuple[list[PatchGrid], list[PatchGrid]]:
    side_a = [g for g in grids if g.camera == "A"]
    side_b = [g for g in grids if g.camera == "B"]
    if not side_a or not side_b:
        raise ValueError("calibration needs images from both cameras")
    return side_a, side_b


def matched_distance_median(
    grids: Sequence[PatchGrid], cfg: PipelineConfig
) -> float:
    """Median distance of constrained matches over same-identity pairs."""
    side_a, side_b = _sides(grids)
    collected = []
    for a in side_a:
        for b in side_b:
            if a.identity == b.identity:
                _, distances = match_indices(a, b, cfg.grid.adjacency_relax)
                collected.append(distances)
    if not collected:
        raise ValueError("no same-identity cross-camera pairs to calibrate on")
    return float(np.median(np.concatenate(collected)))


def knn_score_median(grids: Sequence[PatchGrid], cfg: PipelineConfig) -> float:
    """Median KNN saliency score of camera-A patches against camera B."""
    side_a, side_b = _sides(grids)
    k = choose_k(cfg.saliency.alpha_k, len(side_b))
    scores = []
    for a in side_a:
        _, distances = match_to_refs(a, side_b, cfg.grid)
        scores.append(np.partition(distances, k - 1, axis=1)[:, k - 1])
    return float(np.median(np.concatenate(scores)))


def calibrated_config(
    grids: Sequence[PatchGrid], cfg: PipelineConfig
) -> PipelineConfig:
    """Config with both bandwidths measured on the given sample."""
    sigma = matched_distance_median(grids, cfg)
    sigma0 = knn_score_median(grids, cfg)
    return replace(
        cfg,
        kernel=replace(cfg.kernel, sigma=sigma),
        saliency=replace(cfg.saliency, sigma0=sigma0),
    )
