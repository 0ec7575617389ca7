"""Importance-weighting baselines and the oracle estimator.

KMM solves its box- and mean-constrained quadratic program by projected
gradient descent with backtracking. KLIEP fits a non-negative Gaussian
kernel mixture centred on target points by the EM fixed-point update,
which keeps the source-mean constraint exact and never decreases the
target log-likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .estimators import fsum_mean


@dataclass
class WeightVector:
    weights: np.ndarray
    method: str
    diagnostics: dict = field(default_factory=dict)


def oracle_estimate(target_labels) -> float:
    """Mean of the true target labels."""
    target_labels = np.asarray(target_labels, dtype=float).reshape(-1)
    if target_labels.size == 0:
        raise ValueError("oracle needs at least one target label")
    return fsum_mean(target_labels)


def weighted_estimate(source_label, weights) -> float:
    """``(1/n) sum_i w_i * label_i``."""
    if isinstance(weights, WeightVector):
        weights = weights.weights
    source_label = np.asarray(source_label, dtype=float).reshape(-1)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if source_label.shape != weights.shape:
        raise ValueError(f"{len(source_label)} labels but {len(weights)} weights")
    return fsum_mean(weights * source_label)


def median_bandwidth(*samples: np.ndarray, max_points: int = 2000, seed: int = 0) -> float:
    """Median pairwise distance of the pooled sample."""
    pooled = np.vstack([np.asarray(s, dtype=float).reshape(len(s), -1) for s in samples])
    if len(pooled) > max_points:
        rng = np.random.default_rng(seed)
        pooled = pooled[rng.choice(len(pooled), max_points, replace=False)]
    if len(pooled) < 2:
        return 1.0
    med = float(np.median(pdist(pooled)))
    return med if med > 0 else 1.0


def gaussian_kernel(a: np.ndarray, b: np.ndarray, bandwidth: float) -> np.ndarray:
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth!r}")
    K = np.exp(-cdist(a, b, "sqeuclidean") / (2.0 * bandwidth**2))
    if not np.all(np.isfinite(K)):
        raise FloatingPointError("non-finite kernel entries")
    return K


def _rows(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"expected a non-empty (n, d) array, got shape {x.shape}")
    return x


def _project_box_mean(v: np.ndarray, B: float, lo: float, hi: float) -> np.ndarray:
    """Euclidean projection onto ``{0 <= b <= B, lo <= mean(b) <= hi}``."""
    b = np.clip(v, 0.0, B)
    mean = b.mean()
    if lo <= mean <= hi:
        return b
    target = hi if mean > hi else lo
    # mean(clip(v - t)) is non-increasing in t; bisect for the shift.
    a, c = v.min() - B - 1.0, v.max() + 1.0
    for _ in range(200):
        t = 0.5 * (a + c)
        if np.clip(v - t, 0.0, B).mean() > target:
            a = t
        else:
            c = t
    return np.clip(v - 0.5 * (a + c), 0.0, B)


def kmm_weights(
    source_x,
    target_x,
    bandwidth: float | str = "auto",
    B: float = 1000.0,
    eps: float | None = None,
    max_iter: int = 2000,
    tol: float = 1e-8,
) -> WeightVector:
    """Kernel mean matching weights.

    Minimises ``|| (1/n) sum_i b_i phi(X_i) - (1/m) sum_j phi(X*_j) ||^2``
    in the Gaussian RKHS over ``0 <= b_i <= B`` and ``|mean(b) - 1| <= eps``,
    with ``eps`` defaulting to ``(sqrt(n) - 1) / sqrt(n)``.
    """
    Xs, Xt = _rows(source_x), _rows(target_x)
    n, m = len(Xs), len(Xt)
    if bandwidth == "auto":
        bandwidth = median_bandwidth(Xs, Xt)
    if eps is None:
        eps = (np.sqrt(n) - 1.0) / np.sqrt(n)
    Kss = gaussian_kernel(Xs, Xs, bandwidth)
    kappa = gaussian_kernel(Xs, Xt, bandwidth).sum(axis=1)
    const = gaussian_kernel(Xt, Xt, bandwidth).sum() / m**2

    def objective(b):
        return float(b @ (Kss @ b) / n**2 - 2.0 * (b @ kappa) / (n * m) + const)

    lo, hi = 1.0 - eps, 1.0 + eps
    beta = _project_box_mean(np.ones(n), B, lo, hi)
    obj = objective(beta)
    history = [obj]
    # 1 / Lipschitz constant of the gradient
    step = n**2 / (2.0 * max(np.linalg.eigvalsh(Kss)[-1], 1e-12))
    it = 0
    for it in range(1, max_iter + 1):
        grad = 2.0 * (Kss @ beta) / n**2 - 2.0 * kappa / (n * m)
        t = step
        while True:
            cand = _project_box_mean(beta - t * grad, B, lo, hi)
            cand_obj = objective(cand)
            if cand_obj <= obj or t < 1e-12 * step:
                break
            t *= 0.5
        if cand_obj > obj:
            break
        change = obj - cand_obj
        beta, obj = cand, cand_obj
        history.append(obj)
        if change <= tol * max(1.0, abs(obj)):
            break
    return WeightVector(
        weights=beta,
        method="kmm",
        diagnostics={
            "objective": obj,
            "iterations": it,
            "bandwidth": float(bandwidth),
            "B": B,
            "eps": float(eps),
            "mean_residual": float(abs(beta.mean() - 1.0)),
            "history": history,
        },
    )


def kliep_weights(
    source_x,
    target_x,
    centers: int = 100,
    bandwidth: float | str = "auto",
    max_iter: int = 2000,
    tol: float = 1e-8,
    seed: int = 0,
) -> WeightVector:
    """KLIEP importance weights ``w(X_i) = sum_c alpha_c K(X_i, c)``.

    Maximises the mean target log-weight subject to ``mean_i w(X_i) = 1``
    and ``alpha >= 0``. ``centers`` target points are picked by a seeded
    subsample.
    """
    Xs, Xt = _rows(source_x), _rows(target_x)
    m = len(Xt)
    centers = min(int(centers), m)
    if centers < 1:
        raise ValueError("need at least one kernel centre")
    if bandwidth == "auto":
        bandwidth = median_bandwidth(Xs, Xt)
    rng = np.random.default_rng(seed)
    C = Xt[np.sort(rng.choice(m, centers, replace=False))]
    At = gaussian_kernel(Xt, C, bandwidth)
    b = gaussian_kernel(Xs, C, bandwidth).mean(axis=0)
    if np.any(At.sum(axis=1) <= 0) or np.any(b <= 0):
        raise FloatingPointError("kernel rows vanish; bandwidth is too small for the data")

    # Mixture weights beta_c = alpha_c * b_c sum to one; components At / b.
    Phi = At / b
    beta = np.full(centers, 1.0 / centers)
    mix = Phi @ beta
    loglik = float(np.mean(np.log(mix)))
    history = [loglik]
    it = 0
    for it in range(1, max_iter + 1):
        beta = beta * (Phi / mix[:, None]).mean(axis=0)
        beta /= beta.sum()
        mix = Phi @ beta
        new = float(np.mean(np.log(mix)))
        history.append(new)
        done = abs(new - loglik) <= tol
        loglik = new
        if done:
            break
    alpha = beta / b
    weights = gaussian_kernel(Xs, C, bandwidth) @ alpha
    return WeightVector(
        weights=weights,
        method="kliep",
        diagnostics={
            "objective": loglik,
            "iterations": it,
            "bandwidth": float(bandwidth),
            "alpha": alpha,
            "mean_residual": float(abs(weights.mean() - 1.0)),
            "history": history,
        },
    )
