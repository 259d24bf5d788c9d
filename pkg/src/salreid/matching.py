"""Adjacency-constrained dense patch correspondence and saliency-free scorers.

Every patch of a probe grid is matched to its nearest neighbor inside a
vertical band of the gallery grid (rows within +-l of its own row, all
columns). Matching is directional (A -> B) and exact: grids are small, so
no approximate indexing is used. Distances are computed in float64 from
the float32 descriptor store; image-level scores accumulate in float64.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .config import GridConfig, KernelConfig
from .features import PatchGrid


@dataclass(frozen=True)
class Correspondence:
    """Per-patch match of grid A into grid B (one entry per A patch, row-major)."""

    shape_a: tuple[int, int]
    shape_b: tuple[int, int]
    matched: np.ndarray  # (P,) int64 linear indices into B
    distances: np.ndarray  # (P,) float64
    similarities: np.ndarray  # (P,) float64 in (0, 1]

    def __post_init__(self) -> None:
        expected = self.shape_a[0] * self.shape_a[1]
        if not (len(self.matched) == len(self.distances) == len(self.similarities) == expected):
            raise ValueError("correspondence arrays must have one entry per A patch")

    def __len__(self) -> int:
        return len(self.matched)


def patch_similarity(x: np.ndarray, y: np.ndarray, cfg: KernelConfig) -> float:
    """Gaussian similarity exp(-d^2 / 2 sigma^2) between two descriptors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"descriptor length mismatch: {x.shape} vs {y.shape}")
    d2 = float(np.sum((x - y) ** 2))
    return float(np.exp(-d2 / (2.0 * cfg.sigma**2)))


def similarity_from_distance(distance: np.ndarray | float, sigma: float) -> np.ndarray | float:
    return np.exp(-np.square(distance) / (2.0 * sigma**2))


def _row_band(m: int, rows_b: int, relax: int) -> tuple[int, int]:
    lo, hi = max(0, m - relax), min(m + relax, rows_b - 1)
    if lo > hi:
        raise ValueError(
            f"probe row {m} has no candidates in a {rows_b}-row grid (relax={relax})"
        )
    return lo, hi


def search_set(m: int, grid_b: PatchGrid, relax: int) -> list[int]:
    """Linear indices of grid B inside the adjacency band of probe row ``m``."""
    if not 0 <= m:
        raise ValueError(f"row index {m} out of range")
    lo, hi = _row_band(m, grid_b.rows, relax)
    return [
        i * grid_b.cols + j
        for i in range(lo, hi + 1)
        for j in range(grid_b.cols)
    ]


def best_match(
    x: np.ndarray, m: int, grid_b: PatchGrid, cfg: GridConfig
) -> tuple[int, float]:
    """Nearest neighbor of descriptor ``x`` (from probe row ``m``) in B's band.

    Ties resolve to the smallest row-major linear index.
    """
    lo, hi = _row_band(m, grid_b.rows, cfg.adjacency_relax)
    block = grid_b.descriptors[lo : hi + 1].reshape(-1, grid_b.dim).astype(np.float64)
    dists = cdist(np.asarray(x, dtype=np.float64)[None, :], block)[0]
    local = int(np.argmin(dists))
    return lo * grid_b.cols + local, float(dists[local])


def dense_correspondence(
    grid_a: PatchGrid,
    grid_b: PatchGrid,
    cfg: GridConfig,
    kernel: KernelConfig,
) -> Correspondence:
    """Match every patch of A to its band-constrained nearest neighbor in B."""
    matched, distances = match_indices(grid_a, grid_b, cfg.adjacency_relax)
    sims = similarity_from_distance(distances, kernel.sigma)
    return Correspondence(
        shape_a=(grid_a.rows, grid_a.cols),
        shape_b=(grid_b.rows, grid_b.cols),
        matched=matched,
        distances=distances,
        similarities=sims,
    )


def match_indices(
    grid_a: PatchGrid, grid_b: PatchGrid, relax: int
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized band-constrained nearest-neighbor search, one row at a time.

    All patches of an A row share a search band, so the row's distance
    matrix is computed in one cdist call.
    """
    feats_b = grid_b.flat.astype(np.float64)
    matched = np.empty(grid_a.rows * grid_a.cols, dtype=np.int64)
    distances = np.empty(grid_a.rows * grid_a.cols, dtype=np.float64)
    for m in range(grid_a.rows):
        lo, hi = _row_band(m, grid_b.rows, relax)
        block = feats_b[lo * grid_b.cols : (hi + 1) * grid_b.cols]
        row_feats = grid_a.descriptors[m].astype(np.float64)
        dist = cdist(row_feats, block)
        local = np.argmin(dist, axis=1)
        start = m * grid_a.cols
        matched[start : start + grid_a.cols] = lo * grid_b.cols + local
        distances[start : start + grid_a.cols] = dist[np.arange(grid_a.cols), local]
    return matched, distances


def sim_densefeats(
    grid_a: PatchGrid, grid_b: PatchGrid, kernel: KernelConfig
) -> float:
    """Similarity of two grids by aligned (position-to-position) patches."""
    if (grid_a.rows, grid_a.cols) != (grid_b.rows, grid_b.cols):
        raise ValueError(
            f"grid dims differ: {(grid_a.rows, grid_a.cols)} vs {(grid_b.rows, grid_b.cols)}"
        )
    diff = grid_a.flat.astype(np.float64) - grid_b.flat.astype(np.float64)
    d = np.sqrt(np.sum(diff * diff, axis=1))
    return float(np.sum(similarity_from_distance(d, kernel.sigma)))


def sim_patmatch(corr: Correspondence) -> float:
    """Similarity of two grids by summed matched-patch similarities."""
    return float(np.sum(corr.similarities))


@dataclass(frozen=True)
class NNEntry:
    ref_id: int
    index: int
    distance: float


def nn_set(
    x: np.ndarray, m: int, refs: Sequence[PatchGrid], cfg: GridConfig
) -> list[NNEntry]:
    """One band-constrained nearest neighbor per reference grid."""
    if not refs:
        raise ValueError("reference set must be nonempty")
    out = []
    for ref_id, ref in enumerate(refs):
        index, distance = best_match(x, m, ref, cfg)
        out.append(NNEntry(ref_id=ref_id, index=index, distance=distance))
    return out


def match_to_refs(
    grid: PatchGrid, refs: Sequence[PatchGrid], cfg: GridConfig
) -> tuple[np.ndarray, np.ndarray]:
    """NN sets for every patch of ``grid`` against every reference grid.

    Returns (indices, distances), each (P, N_r): column v holds the match
    of each patch into refs[v].
    """
    if not refs:
        raise ValueError("reference set must be nonempty")
    num = grid.rows * grid.cols
    indices = np.empty((num, len(refs)), dtype=np.int64)
    distances = np.empty((num, len(refs)), dtype=np.float64)
    for v, ref in enumerate(refs):
        idx, dist = match_indices(grid, ref, cfg.adjacency_relax)
        indices[:, v] = idx
        distances[:, v] = dist
    return indices, distances


def write_correspondence_csv(corr: Correspondence, path: str | Path) -> None:
    """Debug dump of a correspondence as CSV."""
    cols_a = corr.shape_a[1]
    cols_b = corr.shape_b[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["p_i_row", "p_i_col", "p'_i_row", "p'_i_col", "distance", "similarity"]
        )
        for i in range(len(corr)):
            writer.writerow(
                [
                    i // cols_a,
                    i % cols_a,
                    int(corr.matched[i]) // cols_b,
                    int(corr.matched[i]) % cols_b,
                    repr(float(corr.distances[i])),
                    repr(float(corr.similarities[i])),
                ]
            )
