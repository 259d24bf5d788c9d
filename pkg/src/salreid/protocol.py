"""Evaluation protocol: repeated even identity splits and CMC curves.

Each trial partitions the identity set, trains (or configures) a scorer
on one half, and ranks camera-B gallery images for every camera-A probe
of the held-out half. Matching rates accumulate into a CMC curve per
trial; the protocol reports the pointwise mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .config import TrialConfig


@dataclass(frozen=True)
class DataItem:
    identity: str
    camera: str  # "A" or "B"
    payload: object = None


@dataclass(frozen=True)
class ProtocolResult:
    mean_curve: np.ndarray  # (G,)
    trial_curves: np.ndarray  # (T, G)
    trial_ranks: tuple  # per trial, tuple of correct-match ranks
    gallery_size: int

    def rank_k(self, k: int) -> float:
        return float(self.mean_curve[k - 1])


ScoreFn = Callable[[DataItem, Sequence[DataItem]], np.ndarray]
ScorerFactory = Callable[[Sequence[DataItem], int], ScoreFn]


def split_trial(
    identities: Sequence[str], cfg: TrialConfig, trial_index: int
) -> tuple[list[str], list[str]]:
    """Disjoint, exhaustive identity partition, fixed by (seed, trial)."""
    ids = sorted(set(identities))
    if len(ids) < 2:
        raise ValueError("need at least two identities to split")
    n_train = int(round(cfg.split_fraction * len(ids)))
    n_train = min(max(n_train, 1), len(ids) - 1)
    rng = np.random.default_rng([cfg.seed, trial_index])
    order = rng.permutation(len(ids))
    train = sorted(ids[i] for i in order[:n_train])
    test = sorted(ids[i] for i in order[n_train:])
    return train, test


def cmc(ranks: Sequence[int], gallery_size: int) -> np.ndarray:
    """curve[k-1] = fraction of probes whose correct match has rank <= k."""
    ranks = np.asarray(ranks, dtype=np.int64)
    if len(ranks) == 0:
        raise ValueError("need at least one rank")
    if np.any(ranks < 1) or np.any(ranks > gallery_size):
        raise ValueError("rank outside [1, gallery size]")
    counts = np.bincount(ranks, minlength=gallery_size + 1)[1:]
    return np.cumsum(counts) / len(ranks)


def correct_match_rank(
    scores: np.ndarray, gallery_ids: Sequence[str], identity: str
) -> int:
    """Best (smallest) rank of the probe identity; ties keep gallery order."""
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    hits = [pos for pos, j in enumerate(order) if gallery_ids[j] == identity]
    if not hits:
        raise ValueError(f"identity {identity!r} absent from gallery")
    return hits[0] + 1


def _one_per_identity(items: Sequence[DataItem]) -> list[DataItem]:
    seen: set[str] = set()
    kept = []
    for item in items:
        if item.identity not in seen:
            seen.add(item.identity)
            kept.append(item)
    return kept


def run_protocol(
    dataset: Sequence[DataItem],
    scorer_factory: ScorerFactory,
    cfg: TrialConfig,
) -> ProtocolResult:
    """Mean CMC over cfg.trials random splits; camera A probes camera B."""
    identities = sorted({d.identity for d in dataset})
    trial_curves = []
    trial_ranks = []
    gallery_size = None

    for t in range(cfg.trials):
        train_ids, test_ids = split_trial(identities, cfg, t)
        test_set = set(test_ids)
        train_items = [d for d in dataset if d.identity not in test_set]
        probes = [d for d in dataset if d.identity in test_set and d.camera == "A"]
        gallery = [d for d in dataset if d.identity in test_set and d.camera == "B"]
        if cfg.single_shot:
            probes = _one_per_identity(probes)
            gallery = _one_per_identity(gallery)
        if not probes or not gallery:
            raise ValueError("empty probe or gallery side after split")
        if gallery_size is None:
            gallery_size = len(gallery)
        elif len(gallery) != gallery_size:
            raise ValueError("gallery size varies across trials")

        score_fn = scorer_factory(train_items, t)
        gallery_ids = [g.identity for g in gallery]
        ranks = []
        for probe in probes:
            scores = np.asarray(score_fn(probe, gallery), dtype=np.float64)
            if scores.shape != (len(gallery),):
                raise ValueError("scorer returned wrong number of scores")
            ranks.append(correct_match_rank(scores, gallery_ids, probe.identity))
        trial_curves.append(cmc(ranks, gallery_size))
        trial_ranks.append(tuple(ranks))

    curves = np.stack(trial_curves)
    return ProtocolResult(
        mean_curve=curves.mean(axis=0),
        trial_curves=curves,
        trial_ranks=tuple(trial_ranks),
        gallery_size=int(gallery_size),
    )


def pearson_corr(values_a: Sequence[float], values_b: Sequence[float]) -> float:
    a = np.asarray(values_a, dtype=np.float64)
    b = np.asarray(values_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("need two equal-length vectors of at least 2 values")
    da = a - a.mean()
    db = b - b.mean()
    denom = float(np.sqrt(np.sum(da**2) * np.sum(db**2)))
    if denom == 0:
        raise ValueError("zero variance input")
    return float(np.dot(da, db) / denom)


def write_cmc_csv(path, result: ProtocolResult) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        trials = len(result.trial_curves)
        writer.writerow(["rank", "mean"] + [f"trial_{t}" for t in range(trials)])
        for k in range(result.gallery_size):
            row = [k + 1, repr(float(result.mean_curve[k]))]
            row += [repr(float(c[k])) for c in result.trial_curves]
            writer.writerow(row)
