"""Nearest-neighbour matching and local polynomial estimators.

The final estimate of ``E[h(X*, Y*)]`` is the target average of a
pointwise estimate ``h_L(z)``: an order-``L`` least-squares polynomial fit
on the ``k`` nearest source points, evaluated at ``z``. Queries whose
``(k+1)``-th neighbour lies farther than the censor radius ``r0`` return 0.
``L = 0`` is plain k-NN matching.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Optional

import numpy as np

from .basis import MultiIndexBasis, build_basis, design_from_offsets, kstar
from .neighbors import NORMS, NeighborIndex, PointSet

LabelFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ConfigError(ValueError):
    """Estimator configuration that cannot produce a well-posed fit."""


class BelowTheoryThresholdWarning(UserWarning):
    """``k`` is below the ``(2D + 1) K*`` neighbour count used by the rates."""


@dataclass(frozen=True)
class EstimatorConfig:
    """Parameters shared by all nearest-neighbour estimators.

    ``k=None`` resolves to ``2 * kstar(d, L)`` once the dimension is known.
    ``label_mode="sampling"`` replaces each neighbour label by ``h(z, Y_i)``.
    ``scale`` selects the monomial scaling: ``"radius"`` divides offsets by
    the query's NN radius, ``"unit"`` leaves them raw. Predictions do not
    depend on it; conditioning does.
    """

    k: Optional[int] = None
    L: int = 0
    r0: float = 1.0
    norm: str = "euclidean"
    label_mode: Literal["matching", "sampling"] = "matching"
    cond_threshold: float = 1e-10
    scale: Literal["radius", "unit"] = "radius"

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 0:
            raise ConfigError(f"L must be a non-negative integer, got {self.L!r}")
        if self.k is not None and (int(self.k) != self.k or self.k < 1):
            raise ConfigError(f"k must be a positive integer, got {self.k!r}")
        if not self.r0 > 0:
            raise ConfigError(f"r0 must be positive, got {self.r0!r}")
        if self.norm not in NORMS:
            raise ConfigError(f"unknown norm {self.norm!r}")
        if self.label_mode not in ("matching", "sampling"):
            raise ConfigError(f"unknown label mode {self.label_mode!r}")
        if not self.cond_threshold > 0:
            raise ConfigError("cond_threshold must be positive")
        if self.scale not in ("radius", "unit"):
            raise ConfigError(f"unknown scale {self.scale!r}")

    def resolve(self, d: int) -> "EstimatorConfig":
        """Fill in the default ``k`` and validate it against dimension ``d``."""
        k = self.k if self.k is not None else 2 * kstar(d, self.L)
        if self.L >= 1:
            basis = build_basis(d, self.L)
            if k < basis.kstar:
                raise ConfigError(
                    f"k={k} is below kstar={basis.kstar} for d={d}, L={self.L}"
                )
            if k < basis.recommended_k():
                warnings.warn(
                    f"k={k} is below (2D+1)K*={basis.recommended_k()} for d={d}, L={self.L}",
                    BelowTheoryThresholdWarning,
                    stacklevel=3,
                )
        return replace(self, k=int(k))


@dataclass
class Dataset:
    """Labelled source sample and unlabelled target sample.

    ``source_label`` holds ``h(X_i, Y_i)``; ``source_y`` and ``h`` are only
    needed for the sampling variant, where ``h(z, y)`` is evaluated with
    ``z`` of shape (m, 1, d) and ``y`` of shape (m, k) and must broadcast.
    """

    source_x: np.ndarray
    source_label: np.ndarray
    target_x: np.ndarray
    source_y: Optional[np.ndarray] = None
    h: Optional[LabelFn] = None

    def __post_init__(self):
        self.source_x = _as_rows(self.source_x)
        self.target_x = _as_rows(self.target_x)
        self.source_label = np.asarray(self.source_label, dtype=float).reshape(-1)
        if self.source_x.shape[1] != self.target_x.shape[1]:
            raise ValueError(
                f"source has dimension {self.source_x.shape[1]}, "
                f"target has dimension {self.target_x.shape[1]}"
            )
        if self.source_label.shape[0] != self.n:
            raise ValueError("source_label length must equal the number of source rows")
        if self.source_y is not None:
            self.source_y = np.asarray(self.source_y, dtype=float).reshape(-1)
            if self.source_y.shape[0] != self.n:
                raise ValueError("source_y length must equal the number of source rows")
        for name in ("source_x", "target_x", "source_label", "source_y"):
            arr = getattr(self, name)
            if arr is not None and not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")

    @property
    def n(self) -> int:
        return self.source_x.shape[0]

    @property
    def m(self) -> int:
        return self.target_x.shape[0]

    @property
    def d(self) -> int:
        return self.source_x.shape[1]


@dataclass
class EstimateReport:
    value: float
    censored_fraction: float
    fallback_count: int
    per_source_weights: Optional[np.ndarray] = field(default=None, repr=False)
    k: Optional[int] = None


@dataclass
class AtePanel:
    x: np.ndarray
    w: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = _as_rows(self.x)
        self.w = np.asarray(self.w).reshape(-1)
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if not (len(self.w) == len(self.y) == self.x.shape[0]):
            raise ValueError("x, w and y must have the same number of rows")
        if not np.all((self.w == 0) | (self.w == 1)):
            raise ValueError("treatment flags must be 0 or 1")
        self.w = self.w.astype(np.int64)
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError("panel contains non-finite values")

    def flipped(self) -> "AtePanel":
        return AtePanel(self.x, 1 - self.w, self.y)


@dataclass
class AteReport:
    mu_hat: float
    censored_treated: float
    censored_control: float
    fallback_count: int
    empty_arm: bool

    def __float__(self) -> float:
        return self.mu_hat


def _as_rows(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError(f"expected a 2-d array of points, got shape {x.shape}")
    return x


def fsum_mean(values: np.ndarray) -> float:
    """Correctly rounded mean; independent of summation order."""
    values = np.asarray(values, dtype=float).reshape(-1)
    return math.fsum(values.tolist()) / len(values)


# ---------------------------------------------------------------------------
# pointwise fits
# ---------------------------------------------------------------------------

def _local_fit(
    offsets: np.ndarray,
    labels: np.ndarray,
    scale: np.ndarray,
    basis: MultiIndexBasis,
    cond_threshold: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Constant term of the least-squares fit for a batch of queries.

    offsets has shape (q, k, d), labels (q, k), scale (q,). Returns the
    predictions and a boolean mask of queries that needed a lower order.
    """
    q = offsets.shape[0]
    pred = np.empty(q)
    lowered = np.zeros(q, dtype=bool)
    u = offsets / scale[:, None, None]
    pending = np.arange(q)
    order = basis.L
    while pending.size:
        ncols = kstar(basis.d, order)
        A = design_from_offsets(u[pending], basis.indices[:ncols])
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
        # reciprocal condition number of M = A^T A
        with np.errstate(divide="ignore", invalid="ignore"):
            rcond = (s[:, -1] / s[:, 0]) ** 2
        ok = rcond >= cond_threshold
        if order == 0:
            ok[:] = True
        if np.any(ok):
            Uy = np.einsum("qkj,qk->qj", U[ok], labels[pending[ok]])
            pred[pending[ok]] = np.einsum("qj,qj->q", Vt[ok][:, :, 0], Uy / s[ok])
        lowered[pending[~ok]] = True
        pending = pending[~ok]
        order -= 1
    return pred, lowered


def _neighbour_labels(
    data: Dataset, Z: np.ndarray, idx: np.ndarray, mode: str
) -> np.ndarray:
    if mode == "matching":
        return data.source_label[idx]
    if data.h is None or data.source_y is None:
        raise ConfigError("sampling mode needs both source_y and an h(z, y) callback")
    out = np.asarray(data.h(Z[:, None, :], data.source_y[idx]), dtype=float)
    return np.broadcast_to(out, idx.shape)


def _predict(
    data: Dataset,
    index: NeighborIndex,
    Z: np.ndarray,
    cfg: EstimatorConfig,
    basis: Optional[MultiIndexBasis] = None,
) -> tuple[np.ndarray, np.ndarray, int, np.ndarray]:
    """Pointwise estimates at the rows of ``Z``.

    Returns (predictions, censored mask, fallback count, neighbour indices).
    """
    k = cfg.k
    idx, radius = index.query_many(Z, k)
    censored = ~(radius <= cfg.r0) | ~np.isfinite(radius)
    pred = np.zeros(Z.shape[0])
    live = np.flatnonzero(~censored)
    fallbacks = 0
    if live.size == 0:
        return pred, censored, fallbacks, idx
    nb = idx[live]
    labels = _neighbour_labels(data, Z[live], nb, cfg.label_mode)
    if cfg.L == 0 and basis is None:
        pred[live] = labels.mean(axis=1)
        return pred, censored, fallbacks, idx
    basis = basis if basis is not None else build_basis(data.d, cfg.L)
    offsets = data.source_x[nb] - Z[live][:, None, :]
    if cfg.scale == "radius":
        scale = radius[live].copy()
        scale[~(scale > 0)] = 1.0
    else:
        scale = np.ones(live.size)
    vals, lowered = _local_fit(offsets, labels, scale, basis, cfg.cond_threshold)
    pred[live] = vals
    return pred, censored, int(lowered.sum()), idx


def _ensure_index(data: Dataset, cfg: EstimatorConfig, index: Optional[NeighborIndex]):
    if index is None:
        return NeighborIndex(PointSet(data.source_x, cfg.norm))
    if index.d != data.d or index.points.norm != cfg.norm:
        raise ValueError("index dimension or norm does not match the dataset/config")
    return index


def pointwise_matching(data: Dataset, index: NeighborIndex, z, cfg: EstimatorConfig) -> float:
    """Mean of the ``k`` neighbour labels at ``z``, or 0 when censored."""
    cfg = cfg.resolve(data.d) if cfg.k is None else cfg
    z = np.asarray(z, dtype=float).reshape(1, -1)
    if z.shape[1] != data.d:
        raise ValueError(f"query has dimension {z.shape[1]}, data has dimension {data.d}")
    pred, *_ = _predict(data, index, z, replace(cfg, L=0))
    return float(pred[0])


def pointwise_polynomial(
    data: Dataset,
    index: NeighborIndex,
    z,
    cfg: EstimatorConfig,
    basis: Optional[MultiIndexBasis] = None,
) -> float:
    """Constant term of the order-``L`` local fit at ``z``, or 0 when censored."""
    cfg = cfg.resolve(data.d)
    basis = basis if basis is not None else build_basis(data.d, cfg.L)
    if basis.d != data.d or basis.L != cfg.L:
        raise ConfigError("basis does not match the data dimension or configured order")
    z = np.asarray(z, dtype=float).reshape(1, -1)
    if z.shape[1] != data.d:
        raise ValueError(f"query has dimension {z.shape[1]}, data has dimension {data.d}")
    pred, *_ = _predict(data, index, z, cfg, basis)
    return float(pred[0])


def predict_many(
    data: Dataset,
    Z,
    cfg: EstimatorConfig,
    index: Optional[NeighborIndex] = None,
) -> np.ndarray:
    """Pointwise estimates at many query points at once."""
    cfg = cfg.resolve(data.d)
    index = _ensure_index(data, cfg, index)
    Z = _as_rows(Z)
    basis = build_basis(data.d, cfg.L) if cfg.L >= 1 else None
    return _predict(data, index, Z, cfg, basis)[0]


def estimate_expectation(
    data: Dataset,
    cfg: EstimatorConfig,
    index: Optional[NeighborIndex] = None,
    return_weights: bool = False,
) -> EstimateReport:
    """Target average of the pointwise estimator.

    With ``L = 0`` in matching mode, ``return_weights=True`` also returns
    per-source weights ``w`` with ``sum(w * source_label) == value``.
    """
    cfg = cfg.resolve(data.d)
    index = _ensure_index(data, cfg, index)
    basis = build_basis(data.d, cfg.L) if cfg.L >= 1 else None
    pred, censored, fallbacks, idx = _predict(data, index, data.target_x, cfg, basis)
    report = EstimateReport(
        value=fsum_mean(pred),
        censored_fraction=float(censored.mean()),
        fallback_count=fallbacks,
        k=cfg.k,
    )
    if return_weights:
        if cfg.L != 0 or cfg.label_mode != "matching":
            raise ConfigError("weights are only available for L=0 in matching mode")
        live = idx[~censored]
        counts = np.bincount(live.reshape(-1), minlength=data.n)
        report.per_source_weights = counts / (cfg.k * data.m)
    return report


# ---------------------------------------------------------------------------
# average treatment effect
# ---------------------------------------------------------------------------

def _counterfactual(
    panel: AtePanel, arm: int, queries: np.ndarray, cfg: EstimatorConfig, basis
) -> tuple[np.ndarray, np.ndarray, int]:
    mask = panel.w == arm
    if not np.any(mask):
        return np.zeros(len(queries)), np.ones(len(queries), dtype=bool), 0
    arm_data = Dataset(panel.x[mask], panel.y[mask], panel.x[:1])
    index = NeighborIndex(PointSet(arm_data.source_x, cfg.norm))
    pred, censored, fallbacks, _ = _predict(arm_data, index, queries, cfg, basis)
    return pred, censored, fallbacks


def estimate_ate(panel: AtePanel, cfg: EstimatorConfig) -> AteReport:
    """Average treatment effect with nearest-neighbour imputed counterfactuals.

    Each unit's missing outcome is the order-``L`` fit on its ``k`` nearest
    neighbours in the opposite arm, or 0 when that arm's ``(k+1)``-th
    neighbour is beyond ``r0`` or does not exist.
    """
    cfg = replace(cfg.resolve(panel.x.shape[1]), label_mode="matching")
    basis = build_basis(panel.x.shape[1], cfg.L) if cfg.L >= 1 else None
    imputed = np.zeros(len(panel.y))
    censored = np.zeros(len(panel.y), dtype=bool)
    fallbacks = 0
    for arm in (0, 1):
        units = panel.w == arm
        if not np.any(units):
            continue
        pred, cens, fb = _counterfactual(panel, 1 - arm, panel.x[units], cfg, basis)
        imputed[units] = pred
        censored[units] = cens
        fallbacks += fb
    terms = (2 * panel.w - 1) * (panel.y - imputed)
    treated = panel.w == 1
    return AteReport(
        mu_hat=fsum_mean(terms),
        censored_treated=float(censored[treated].mean()) if treated.any() else 0.0,
        censored_control=float(censored[~treated].mean()) if (~treated).any() else 0.0,
        fallback_count=fallbacks,
        empty_arm=bool(treated.all() or (~treated).all()),
    )
