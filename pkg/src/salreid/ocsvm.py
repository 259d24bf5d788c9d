"""Kernel One-Class SVM (minimal enclosing hypersphere) via SMO.

Dual problem over weights a_i on the training points:

    min_a  a' K a - sum_i a_i K_ii
    s.t.   sum_i a_i = 1,  0 <= a_i <= 1 / (nu * l)

solved by maximal-violating-pair coordinate updates. With an RBF kernel
the linear term is constant, but the solver keeps the general form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist


@dataclass(frozen=True)
class OcsvmModel:
    points: np.ndarray  # (l, D) float64 training descriptors
    alpha: np.ndarray  # (l,) float64 dual weights
    radius2: float
    rbf_sigma: float
    box: float  # upper bound 1 / (nu * l)
    center_norm2: float  # a' K a, cached for the decision function

    @property
    def support_mask(self) -> np.ndarray:
        return self.alpha > 1e-9 * self.box


def rbf_kernel(x: np.ndarray, y: np.ndarray, sigma: float) -> np.ndarray:
    d2 = cdist(np.atleast_2d(x), np.atleast_2d(y), metric="sqeuclidean")
    return np.exp(-d2 / (2.0 * sigma**2))


def median_pairwise_distance(points: np.ndarray) -> float:
    """Data-dependent RBF bandwidth heuristic; 1.0 for degenerate sets."""
    points = np.atleast_2d(points)
    if len(points) < 2:
        return 1.0
    med = float(np.median(pdist(points)))
    return med if med > 0 else 1.0


def _smo(kernel: np.ndarray, box: float, tol: float, max_iter: int) -> np.ndarray:
    n = len(kernel)
    alpha = np.full(n, 1.0 / n)
    q = 2.0 * kernel
    grad = q @ alpha - np.diag(kernel)

    def violating_pair() -> tuple[int, int, float]:
        can_up = alpha < box - 1e-12
        can_down = alpha > 1e-12
        if not can_up.any() or not can_down.any():
            return -1, -1, 0.0  # fully pinned: the only feasible point
        neg_grad = -grad
        i = int(np.argmax(np.where(can_up, neg_grad, -np.inf)))
        j = int(np.argmin(np.where(can_down, neg_grad, np.inf)))
        return i, j, float(grad[j] - grad[i])

    for _ in range(max_iter):
        i, j, violation = violating_pair()
        if violation <= tol:
            return alpha

        curvature = max(q[i, i] + q[j, j] - 2.0 * q[i, j], 1e-12)
        step = min(violation / curvature, box - alpha[i], alpha[j])
        alpha[i] += step
        alpha[j] -= step
        grad += step * (q[:, i] - q[:, j])

    # final check after the last update
    _, _, violation = violating_pair()
    if violation <= tol:
        return alpha
    raise RuntimeError(
        f"SMO did not converge in {max_iter} iterations "
        f"(violation {violation:.3e} > {tol:.1e})"
    )


def ocsvm_train(
    points: np.ndarray,
    nu: float,
    rbf_sigma: float,
    tol: float = 1e-6,
    max_iter: int = 10_000,
) -> OcsvmModel:
    """Fit the hypersphere to ``points`` (rows are descriptors).

    Requires nu * l >= 1 so the box constraint is active; the squared
    radius is set from support points strictly inside the box (their
    hypersphere distance is the radius at optimality), falling back to
    the mean over all support points if every weight sits on a bound.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    l_train = len(pts)
    if l_train < 1:
        raise ValueError("need at least one training point")
    if nu * l_train < 1.0 - 1e-12:
        raise ValueError(
            f"infeasible nu: nu * l = {nu * l_train:.4g} < 1 for l = {l_train}"
        )
    if rbf_sigma <= 0:
        raise ValueError("rbf_sigma must be positive")

    box = 1.0 / (nu * l_train)
    kernel = rbf_kernel(pts, pts, rbf_sigma)
    if l_train == 1:
        alpha = np.array([1.0])
    else:
        alpha = _smo(kernel, box, tol, max_iter)

    k_alpha = kernel @ alpha
    center_norm2 = float(alpha @ k_alpha)
    dist2 = np.diag(kernel) - 2.0 * k_alpha + center_norm2

    margin = 1e-8 * box
    interior = (alpha > margin) & (alpha < box - margin)
    if np.any(interior):
        radius2 = float(np.mean(dist2[interior]))
    else:
        support = alpha > margin
        radius2 = float(np.mean(dist2[support]))
    return OcsvmModel(
        points=pts,
        alpha=alpha,
        radius2=max(radius2, 0.0),
        rbf_sigma=rbf_sigma,
        box=box,
        center_norm2=center_norm2,
    )


def ocsvm_decision(model: OcsvmModel, x: np.ndarray) -> float:
    """f(x) = R^2 - ||Phi(x) - c||^2; positive inside the hypersphere."""
    return float(ocsvm_decision_many(model, np.atleast_2d(x))[0])


def ocsvm_decision_many(model: OcsvmModel, xs: np.ndarray) -> np.ndarray:
    k_x = rbf_kernel(np.atleast_2d(xs), model.points, model.rbf_sigma)
    dist2 = 1.0 - 2.0 * (k_x @ model.alpha) + model.center_norm2
    return model.radius2 - dist2


def ocsvm_score(
    x: np.ndarray,
    nn_descriptors: np.ndarray,
    nu: float,
    rbf_sigma: float = 0.0,
    tol: float = 1e-6,
    max_iter: int = 10_000,
) -> float:
    """Saliency score of a patch from its per-reference NN descriptors.

    Trains the hypersphere on the NN set (rows ordered by reference id),
    picks the NN with the highest decision value (the densest mode), and
    returns the Euclidean distance from ``x`` to it. Ties take the first
    row, i.e. the smallest reference id. ``rbf_sigma=0`` selects the
    median pairwise distance of the NN set; nu is raised to 1/l when the
    set is too small for the configured value.
    """
    descs = np.atleast_2d(np.asarray(nn_descriptors, dtype=np.float64))
    if len(descs) < 1:
        raise ValueError("NN set must be nonempty")
    sigma = rbf_sigma if rbf_sigma > 0 else median_pairwise_distance(descs)
    nu_eff = max(nu, 1.0 / len(descs))
    model = ocsvm_train(descs, nu_eff, sigma, tol=tol, max_iter=max_iter)
    decisions = ocsvm_decision_many(model, descs)
    best = int(np.argmax(decisions))
    return float(np.linalg.norm(np.asarray(x, dtype=np.float64) - descs[best]))


def dual_objective(kernel: np.ndarray, alpha: np.ndarray) -> float:
    """a' K a - sum_i a_i K_ii (the quantity SMO minimizes)."""
    return float(alpha @ kernel @ alpha - alpha @ np.diag(kernel))
