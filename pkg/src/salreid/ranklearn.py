"""Structural RankSVM with AUC loss over partial orders.

For each probe u the gallery splits into relevant images S+ (same
identity) and irrelevant S-. A partial order y assigns +1/-1 to every
(v in S+, v' in S-) pair; the correct order is all +1. Training finds w
minimizing 1/2 ||w||^2 + C sum_u xi_u subject to margin-rescaled
constraints over partial orders, grown by a cutting-plane loop whose
separation oracle decomposes over pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import TrainConfig
from .salmatch import RankModel


@dataclass(frozen=True)
class TrainSet:
    phi: np.ndarray  # (U, G, D) float64 pair feature maps
    relevant: np.ndarray  # (U, G) bool, True where gallery matches probe

    def __post_init__(self) -> None:
        if self.phi.ndim != 3:
            raise ValueError("phi table must be (probes, gallery, dim)")
        if self.relevant.shape != self.phi.shape[:2]:
            raise ValueError("relevance mask does not match phi table")
        per_probe = self.relevant.sum(axis=1)
        if np.any(per_probe < 1) or np.any(per_probe >= self.relevant.shape[1]):
            raise ValueError(
                "every probe needs at least one relevant and one "
                "irrelevant gallery image"
            )

    @property
    def n_probes(self) -> int:
        return self.phi.shape[0]

    @property
    def dim(self) -> int:
        return self.phi.shape[2]

    def split(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        mask = self.relevant[u]
        return np.flatnonzero(mask), np.flatnonzero(~mask)


@dataclass(frozen=True)
class Constraint:
    probe: int
    delta: float  # AUC loss of the violating order
    dpsi: np.ndarray  # Psi(correct) - Psi(violating), (D,)


@dataclass
class TrainResult:
    model: RankModel
    converged: bool
    iterations: int
    final_violation: float
    history: list[dict] = field(default_factory=list)


def partial_order_feature(ts: TrainSet, u: int, y: np.ndarray) -> np.ndarray:
    """Sum of y_{v,v'} (Phi(u,v) - Phi(u,v')) over pairs, normalized."""
    rel, irr = ts.split(u)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (len(rel), len(irr)):
        raise ValueError("partial order shape does not match S+ x S-")
    pos = y.sum(axis=1) @ ts.phi[u, rel]
    neg = y.sum(axis=0) @ ts.phi[u, irr]
    return (pos - neg) / (len(rel) * len(irr))


def auc_loss(y_hat: np.ndarray) -> float:
    """Fraction of swapped pairs vs the all-+1 correct order."""
    y_hat = np.asarray(y_hat, dtype=np.float64)
    return float(np.sum(1.0 - y_hat) / (2.0 * y_hat.size))


def most_violated(ts: TrainSet, u: int, w: np.ndarray) -> np.ndarray:
    """Order maximizing loss + w . Psi; decomposes per pair.

    A pair flips to -1 exactly when w . (Phi(u,v) - Phi(u,v')) < 1/2;
    a tie at 1/2 stays +1.
    """
    rel, irr = ts.split(u)
    scores = ts.phi[u] @ w
    margins = scores[rel][:, None] - scores[irr][None, :]
    return np.where(margins < 0.5, -1.0, 1.0)


def _violation_terms(ts: TrainSet, u: int, w: np.ndarray) -> tuple[float, np.ndarray]:
    """(loss, dpsi) of the most violated order for probe u at w."""
    y_hat = most_violated(ts, u, w)
    rel, irr = ts.split(u)
    flipped = y_hat < 0
    scale = 2.0 / (len(rel) * len(irr))
    dpsi = scale * (
        flipped.sum(axis=1) @ ts.phi[u, rel] - flipped.sum(axis=0) @ ts.phi[u, irr]
    )
    return auc_loss(y_hat), dpsi


def evaluate_objective(w: np.ndarray, xi: np.ndarray, c: float) -> float:
    """Primal value 1/2 ||w||^2 + C sum xi."""
    xi = np.asarray(xi, dtype=np.float64)
    if np.any(xi < 0):
        raise ValueError("slacks must be nonnegative")
    return float(0.5 * np.dot(w, w) + c * np.sum(xi))


def _solve_qp(
    constraints: Sequence[Constraint],
    lam: np.ndarray,
    n_probes: int,
    dim: int,
    c: float,
    tol: float,
    max_sweeps: int = 100_000,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dual coordinate ascent over the working set.

    Dual variables lam >= 0 with sum over each probe's constraints <= C;
    w = sum lam_c dpsi_c. Deterministic round-robin sweeps.
    """
    n = len(constraints)
    deltas = np.array([con.delta for con in constraints])
    dpsis = np.stack([con.dpsi for con in constraints]) if n else np.zeros((0, dim))
    probes = np.array([con.probe for con in constraints], dtype=np.int64)
    norms = np.einsum("ij,ij->i", dpsis, dpsis)

    w = lam @ dpsis if n else np.zeros(dim)
    probe_sum = np.bincount(probes, weights=lam, minlength=n_probes)

    for _ in range(max_sweeps):
        biggest = 0.0
        for i in range(n):
            grad = deltas[i] - dpsis[i] @ w
            cap = c - (probe_sum[probes[i]] - lam[i])
            if norms[i] > 1e-14:
                target = lam[i] + grad / norms[i]
            else:
                # w-independent constraint: dual is linear in lam_i
                target = cap if grad > 0 else 0.0
            new = min(max(target, 0.0), cap)
            step = new - lam[i]
            if step != 0.0:
                w += step * dpsis[i]
                probe_sum[probes[i]] += step
                lam[i] = new
                biggest = max(biggest, abs(step))
        if biggest <= tol:
            break

    slack = np.zeros(n_probes)
    for i in range(n):
        slack[probes[i]] = max(slack[probes[i]], deltas[i] - dpsis[i] @ w)
    return w, np.maximum(slack, 0.0), lam


def train(ts: TrainSet, cfg: TrainConfig, rows: int, cols: int) -> TrainResult:
    """Cutting-plane outer loop; grows one constraint per violated probe.

    The logged primal uses the exact per-probe slack at the current w
    (from the separation oracle), not the working-set relaxation.
    """
    dim = ts.dim
    w = np.zeros(dim)
    xi = np.zeros(ts.n_probes)
    constraints: list[Constraint] = []
    lam = np.zeros(0)
    history: list[dict] = []
    converged = False
    max_violation = 0.0
    iteration = 0

    for iteration in range(1, cfg.max_iters + 1):
        max_violation = 0.0
        added = 0
        true_slack = 0.0
        for u in range(ts.n_probes):
            delta, dpsi = _violation_terms(ts, u, w)
            slack_u = max(delta - dpsi @ w, 0.0)
            true_slack += slack_u
            violation = slack_u - xi[u]
            max_violation = max(max_violation, violation)
            if violation > cfg.epsilon:
                constraints.append(Constraint(probe=u, delta=delta, dpsi=dpsi))
                added += 1
        history.append(
            {
                "iteration": iteration,
                "constraints": len(constraints),
                "max_violation": max_violation,
                "primal_objective": 0.5 * float(w @ w) + cfg.C * true_slack,
            }
        )
        if added == 0:
            converged = True
            break
        lam = np.concatenate([lam, np.zeros(added)])
        w, xi, lam = _solve_qp(
            constraints, lam, ts.n_probes, dim, cfg.C, cfg.qp_tol
        )

    model = RankModel(rows=rows, cols=cols, w=w)
    return TrainResult(
        model=model,
        converged=converged,
        iterations=iteration,
        final_violation=max_violation,
        history=history,
    )


def ranking_auc_loss(ts: TrainSet, u: int, w: np.ndarray) -> float:
    """AUC loss of the ranking induced by w; ties count as swapped."""
    rel, irr = ts.split(u)
    scores = ts.phi[u] @ w
    correct = scores[rel][:, None] > scores[irr][None, :]
    return float(1.0 - np.mean(correct))


def write_training_log(path, history: Sequence[dict]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iteration", "constraints", "max_violation", "primal_objective"]
        )
        for row in history:
            writer.writerow(
                [
                    row["iteration"],
                    row["constraints"],
                    repr(row["max_violation"]),
                    repr(row["primal_objective"]),
                ]
            )
