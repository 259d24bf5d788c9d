"""Unsupervised patch saliency from nearest-neighbor statistics.

A patch is salient when it is far from most of a reference population:
its per-reference nearest neighbors are gathered under the adjacency
constraint and the saliency score is either the k-th smallest NN
distance (knn) or the distance to the densest mode of the NN set
(ocsvm). Scores map to probabilities through 1 - exp(-score^2/sigma0^2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import GridConfig, SaliencyConfig
from .features import PatchGrid
from .matching import NNEntry, match_to_refs
from .ocsvm import ocsvm_score


@dataclass(frozen=True)
class SaliencyMap:
    rows: int
    cols: int
    scores: np.ndarray  # (M, N) float64, >= 0
    probs: np.ndarray  # (M, N) float64 in [0, 1)

    def __post_init__(self) -> None:
        expect = (self.rows, self.cols)
        if self.scores.shape != expect or self.probs.shape != expect:
            raise ValueError("saliency map shape mismatch")

    @property
    def flat_scores(self) -> np.ndarray:
        return self.scores.reshape(-1)

    @property
    def flat_probs(self) -> np.ndarray:
        return self.probs.reshape(-1)


def choose_k(alpha_k: float, n_refs: int) -> int:
    """Order statistic index: round(alpha_k * N_r), at least 1."""
    if n_refs < 1:
        raise ValueError("need at least one reference")
    return max(1, round(alpha_k * n_refs))


def knn_score(nns: Sequence[NNEntry], alpha_k: float) -> float:
    """k-th smallest NN distance; high when the patch is rare."""
    distances = np.array([entry.distance for entry in nns], dtype=np.float64)
    k = choose_k(alpha_k, len(distances))
    return float(np.partition(distances, k - 1)[k - 1])


def salient_probability(score, sigma0: float):
    """1 - exp(-score^2 / sigma0^2); 0 iff score is 0.

    Scalar in, scalar out; arrays broadcast elementwise.
    """
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    score = np.asarray(score, dtype=np.float64)
    prob = -np.expm1(-(score**2) / sigma0**2)
    return float(prob) if prob.ndim == 0 else prob


def saliency_map(
    grid: PatchGrid,
    refs: Sequence[PatchGrid],
    cfg: SaliencyConfig,
    grid_cfg: GridConfig,
) -> SaliencyMap:
    """Score every patch of ``grid`` against the reference population."""
    if len(refs) < 1:
        raise ValueError("need at least one reference grid")
    indices, distances = match_to_refs(grid, refs, grid_cfg)

    if cfg.method == "knn":
        k = choose_k(cfg.alpha_k, len(refs))
        scores = np.partition(distances, k - 1, axis=1)[:, k - 1]
    elif cfg.method == "ocsvm":
        flat = grid.flat.astype(np.float64)
        ref_flats = [r.flat.astype(np.float64) for r in refs]
        scores = np.empty(len(flat))
        for p in range(len(flat)):
            descs = np.stack(
                [ref_flats[v][indices[p, v]] for v in range(len(refs))]
            )
            scores[p] = ocsvm_score(
                flat[p],
                descs,
                nu=cfg.nu,
                rbf_sigma=cfg.rbf_sigma,
                tol=cfg.ocsvm_tol,
                max_iter=cfg.ocsvm_max_iter,
            )
    else:
        raise ValueError(f"unknown saliency method: {cfg.method!r}")

    scores = scores.reshape(grid.rows, grid.cols)
    probs = salient_probability(scores, cfg.sigma0)
    return SaliencyMap(rows=grid.rows, cols=grid.cols, scores=scores, probs=probs)
