"""Saliency-aware matching scores.

Three scorers over a dense correspondence between two patch grids:

- sim_sdc: patch similarities weighted by both images' raw saliency
  scores, with a penalty on score disagreement.
- sim_salmatch: learned linear score w . Phi over an 8-dim per-patch
  feature map built from the Gaussian similarity and the two salient
  probabilities.
- sim_esalmatch: weighted sum of external similarity measures and the
  SalMatch score.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import GridConfig, KernelConfig, MatchConfig
from .features import PatchGrid
from .matching import Correspondence, dense_correspondence
from .saliency import SaliencyMap

PHI_DIM = 8


@dataclass(frozen=True)
class RankModel:
    rows: int
    cols: int
    w: np.ndarray  # (8 * rows * cols,) float64

    def __post_init__(self) -> None:
        if self.w.shape != (PHI_DIM * self.rows * self.cols,):
            raise ValueError(
                f"weight length {self.w.shape} does not match "
                f"{self.rows}x{self.cols} grid"
            )

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "RankModel":
        return cls(rows=rows, cols=cols, w=np.zeros(PHI_DIM * rows * cols))


def _check_dims(corr: Correspondence, sal_a: SaliencyMap, sal_b: SaliencyMap) -> None:
    if (sal_a.rows, sal_a.cols) != corr.shape_a:
        raise ValueError("probe saliency map does not match correspondence")
    if (sal_b.rows, sal_b.cols) != corr.shape_b:
        raise ValueError("gallery saliency map does not match correspondence")


def sim_sdc(
    corr: Correspondence,
    sal_a: SaliencyMap,
    sal_b: SaliencyMap,
    alpha_sdc: float = 1.0,
) -> float:
    """Bi-directionally saliency-weighted similarity, raw scores."""
    if alpha_sdc <= 0:
        raise ValueError("alpha_sdc must be positive")
    _check_dims(corr, sal_a, sal_b)
    score_a = sal_a.flat_scores
    score_b = sal_b.flat_scores[corr.matched]
    num = score_a * corr.similarities * score_b
    return float(np.sum(num / (alpha_sdc + np.abs(score_a - score_b))))


def match_costs(prob_a, prob_b) -> np.ndarray:
    """Joint saliency-agreement probabilities, a distribution over 4 cases."""
    pa = np.asarray(prob_a, dtype=np.float64)
    pb = np.asarray(prob_b, dtype=np.float64)
    return np.stack(
        [pa * pb, pa * (1.0 - pb), (1.0 - pa) * pb, (1.0 - pa) * (1.0 - pb)],
        axis=-1,
    )


def patch_phi(s, prob_a, prob_b) -> np.ndarray:
    """8-dim per-patch feature: [s*c_1..s*c_4, c_1..c_4]."""
    c = match_costs(prob_a, prob_b)
    s = np.asarray(s, dtype=np.float64)[..., None]
    return np.concatenate([s * c, c], axis=-1)


def pair_feature_map(
    corr: Correspondence, sal_a: SaliencyMap, sal_b: SaliencyMap
) -> np.ndarray:
    """Phi in R^{8MN}: per-patch phi in row-major probe patch order."""
    _check_dims(corr, sal_a, sal_b)
    prob_a = sal_a.flat_probs
    prob_b = sal_b.flat_probs[corr.matched]
    return patch_phi(corr.similarities, prob_a, prob_b).reshape(-1)


def sim_salmatch(model: RankModel, feature_map: np.ndarray) -> float:
    if model.w.shape != feature_map.shape:
        raise ValueError("feature map length does not match model")
    return float(model.w @ feature_map)


def sim_esalmatch(
    external: Sequence[tuple[float, float]],
    mu_sal: float,
    salmatch_value: float,
    flip_sign: bool = False,
) -> float:
    """Fuse external (weight, similarity) pairs with the SalMatch score.

    External similarities are assumed pre-normalized per measure. The
    SalMatch term adds by default; ``flip_sign`` subtracts it instead.
    """
    if mu_sal <= 0 or any(mu <= 0 for mu, _ in external):
        raise ValueError("fusion weights must be positive")
    total = sum(mu * sim for mu, sim in external)
    sal_term = mu_sal * salmatch_value
    return float(total - sal_term if flip_sign else total + sal_term)


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Scale to [0,1]; constant input maps to all zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi <= lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def rank_gallery(
    model: RankModel,
    probe: PatchGrid,
    probe_sal: SaliencyMap,
    gallery: Sequence[tuple[PatchGrid, SaliencyMap]],
    grid_cfg: GridConfig,
    kernel_cfg: KernelConfig,
) -> np.ndarray:
    """Gallery indices ordered by descending SalMatch score.

    Ties keep ascending gallery index (stable sort on negated scores).
    """
    if (probe.rows, probe.cols) != (model.rows, model.cols):
        raise ValueError("probe grid does not match model shape")
    scores = np.empty(len(gallery))
    for j, (grid, sal) in enumerate(gallery):
        corr = dense_correspondence(probe, grid, grid_cfg, kernel_cfg)
        fm = pair_feature_map(corr, probe_sal, sal)
        scores[j] = sim_salmatch(model, fm)
    return np.argsort(-scores, kind="stable")


def score_pair(
    model: RankModel,
    grid_a: PatchGrid,
    sal_a: SaliencyMap,
    grid_b: PatchGrid,
    sal_b: SaliencyMap,
    grid_cfg: GridConfig,
    kernel_cfg: KernelConfig,
    match_cfg: MatchConfig,
    method: str = "salmatch",
) -> float:
    """One probe-gallery similarity under any of the scorer methods."""
    from .matching import sim_densefeats, sim_patmatch

    if method == "densefeats":
        return sim_densefeats(grid_a, grid_b, kernel_cfg)
    corr = dense_correspondence(grid_a, grid_b, grid_cfg, kernel_cfg)
    if method == "patmatch":
        return sim_patmatch(corr)
    if method == "sdc":
        return sim_sdc(corr, sal_a, sal_b, match_cfg.alpha_sdc)
    if method in ("salmatch", "esalmatch"):
        return sim_salmatch(model, pair_feature_map(corr, sal_a, sal_b))
    raise ValueError(f"unknown scoring method: {method!r}")
