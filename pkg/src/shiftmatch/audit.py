"""Transferability checks between a source law P and a target law Q.

The closed-form checkers evaluate the strict inequality systems that
decide whether a parametric (P, Q) pair admits the given integrability
exponents (residual, covariance, bias). The Monte Carlo routine estimates
the two importance-moment integrals ``int f_Q^2 / f_P`` and
``int f_Q / sqrt(f_P)`` and flags estimates that look heavy-tailed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .synthdata import stream

# Chunked sampling keeps results independent of how the work is split.
MC_CHUNK = 65536
GAUSSIAN_EIG_RTOL = 1e-12


@dataclass
class Inequality:
    name: str
    lhs: float
    rhs: float
    slack: float


@dataclass
class TransferVerdict:
    satisfied: bool
    margin: float
    inequalities: list = field(default_factory=list)
    extra: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "margin": self.margin,
            "inequalities": [vars(i) for i in self.inequalities],
            "extra": [vars(i) for i in self.extra],
        }


def _verdict(ineqs: list, extra: list | None = None, tol: float = 0.0) -> TransferVerdict:
    margin = min(i.slack for i in ineqs)
    return TransferVerdict(
        satisfied=all(i.slack > tol for i in ineqs),
        margin=float(margin),
        inequalities=ineqs,
        extra=extra or [],
    )


def _gt(name: str, lhs: float, rhs: float) -> Inequality:
    return Inequality(name, float(lhs), float(rhs), float(lhs - rhs))


def _spd(a, name: str) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1] or not np.allclose(a, a.T):
        raise ValueError(f"{name} must be a symmetric square matrix")
    if np.linalg.eigvalsh(a)[0] <= 0:
        raise ValueError(f"{name} must be positive definite")
    return a


def check_gaussian(sigma_p, sigma_q, g_res=1.0, g_cov=1.0, g_bias=0.5) -> TransferVerdict:
    """Gaussian pair: ``2 S_Q^-1 > max(g_res, g_cov) S_P^-1`` and ``S_Q^-1 > g_bias S_P^-1``.

    Each matrix inequality is strict positive definiteness of the
    difference; its slack is the smallest eigenvalue, and it counts as
    positive only above ``1e-12`` times the largest eigenvalue involved.
    """
    sp = _spd(sigma_p, "sigma_p")
    sq = _spd(sigma_q, "sigma_q")
    if sp.shape != sq.shape:
        raise ValueError("covariance matrices must have the same shape")
    prec_p, prec_q = np.linalg.inv(sp), np.linalg.inv(sq)
    g = max(g_res, g_cov)
    tests = [
        ("2*inv(S_Q) - max(g_res,g_cov)*inv(S_P) > 0", 2.0 * prec_q, g * prec_p),
        ("inv(S_Q) - g_bias*inv(S_P) > 0", prec_q, g_bias * prec_p),
    ]
    ineqs = []
    for name, a, b in tests:
        diff = a - b
        lam = float(np.linalg.eigvalsh(0.5 * (diff + diff.T))[0])
        scale = max(np.abs(np.linalg.eigvalsh(a)).max(), np.abs(np.linalg.eigvalsh(b)).max())
        if abs(lam) <= GAUSSIAN_EIG_RTOL * scale:
            lam = 0.0
        ineqs.append(Inequality(name, lam, 0.0, lam))
    return _verdict(ineqs)


def check_gamma(
    mu_p, s_p, mu_q, s_q, g_res=1.0, g_cov=1.0, g_bias=0.5, fast_rate: bool = False
) -> TransferVerdict:
    """Gamma pair with rates ``mu`` and shapes ``s``.

    ``fast_rate=True`` adds ``2 s_Q > s_P + 1`` to the verdict; otherwise it
    is reported in ``extra`` only.
    """
    if not (mu_p > 0 and mu_q > 0):
        raise ValueError("rates must be positive")
    if not (s_p >= 1 and s_q >= 1):
        raise ValueError("shapes must be at least 1")
    g = max(g_res, g_cov)
    ineqs = [
        _gt("2*mu_Q > max(g_res,g_cov)*mu_P", 2 * mu_q, g * mu_p),
        _gt("mu_Q > g_bias*mu_P", mu_q, g_bias * mu_p),
        _gt("2*s_Q > max(g_res,g_cov)*s_P", 2 * s_q, g * s_p),
        _gt("s_Q > g_bias*s_P", s_q, g_bias * s_p),
    ]
    fast = _gt("2*s_Q > s_P + 1", 2 * s_q, s_p + 1)
    if fast_rate:
        return _verdict(ineqs + [fast])
    return _verdict(ineqs, extra=[fast])


def check_pareto(mu_p, mu_q, M=0.0, g_res=1.0, g_cov=1.0, g_bias=0.5) -> TransferVerdict:
    """Pareto pair with a regression function growing like ``z**M``."""
    if not (mu_p > 0 and mu_q > 0):
        raise ValueError("Pareto indices must be positive")
    if M < 0:
        raise ValueError("growth exponent M must be non-negative")
    ineqs = [
        _gt("mu_Q > 2M", mu_q, 2 * M),
        _gt("2*mu_Q + 1 > g_cov*(mu_P + 1)", 2 * mu_q + 1, g_cov * (mu_p + 1)),
        _gt("2*mu_Q + 1 > 2M + g_res*(mu_P + 1)", 2 * mu_q + 1, 2 * M + g_res * (mu_p + 1)),
        # doubled so the critical case reads 2*mu_Q > 2M + mu_P + 1
        _gt("2*mu_Q > 2M + 2*g_bias*(mu_P + 1)", 2 * mu_q, 2 * M + 2 * g_bias * (mu_p + 1)),
    ]
    return _verdict(ineqs)


def check_boundary_uniform(s, d, mu_p, mu_q, gamma=1.0) -> TransferVerdict:
    """Power densities on the cusp domain ``{z_i <= z_1**s, i >= 2}`` in ``[0, 1]^d``."""
    if s < 1:
        raise ValueError("cusp exponent s must be at least 1")
    if int(d) != d or d < 1:
        raise ValueError("d must be a positive integer")
    floor = -s * (d - 1)
    if not (mu_p > floor and mu_q > floor):
        raise ValueError(f"density exponents must exceed -s(d-1) = {floor}")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    lhs = 2 * mu_q + ((2 - gamma) * s - 1 + gamma) * (d - 1)
    rhs = gamma * mu_p - 1
    return _verdict([_gt("2*mu_Q + ((2-g)s - 1 + g)(d-1) > g*mu_P - 1", lhs, rhs)])


# ---------------------------------------------------------------------------
# importance-moment integrals
# ---------------------------------------------------------------------------

@dataclass
class IntegralEstimate:
    value: float
    std_err: float
    diverging: bool
    n_samples: int
    top_share: float = 0.0
    half_gap: float = 0.0

    def to_dict(self) -> dict:
        return dict(vars(self))


def tail_diagnostics(terms: np.ndarray) -> tuple[float, float, bool]:
    """Share of the top 1% of summands and the half-vs-full gap in std errors.

    The estimate is flagged when the top 1% carries more than half of the
    total, or when the first-half mean sits more than 5 standard errors
    away from the full mean.
    """
    terms = np.asarray(terms, dtype=float)
    n = terms.size
    top = max(1, n // 100)
    total = terms.sum()
    top_share = float(np.partition(terms, n - top)[n - top:].sum() / total) if total > 0 else 0.0
    se = terms.std(ddof=1) / np.sqrt(n)
    half = terms[: n // 2].mean()
    gap = float(abs(half - terms.mean()) / se) if se > 0 else 0.0
    return top_share, gap, bool(top_share > 0.5 or gap > 5.0)


def _summarize(terms: np.ndarray) -> IntegralEstimate:
    top_share, gap, diverging = tail_diagnostics(terms)
    return IntegralEstimate(
        value=float(terms.mean()),
        std_err=float(terms.std(ddof=1) / np.sqrt(terms.size)),
        diverging=diverging,
        n_samples=int(terms.size),
        top_share=top_share,
        half_gap=gap,
    )


def estimate_importance_integrals(q_sampler, q_density, p_density, n_samples: int, seed: int = 0):
    """Monte Carlo estimates of ``int f_Q^2/f_P`` and ``int f_Q/sqrt(f_P)``.

    Both are expectations under Q: of ``f_Q/f_P`` and of ``1/sqrt(f_P)``.
    ``q_sampler(size, rng)`` draws from Q; draws come in fixed-size chunks
    with one derived stream per chunk.
    """
    if n_samples < 1000:
        raise ValueError("use at least 1000 samples")
    parts = []
    for c, start in enumerate(range(0, n_samples, MC_CHUNK)):
        size = min(MC_CHUNK, n_samples - start)
        parts.append(np.asarray(q_sampler(size, stream(seed, 5, c)), dtype=float))
    z = np.concatenate(parts)
    fq = np.asarray(q_density(z), dtype=float)
    fp = np.asarray(p_density(z), dtype=float)
    if np.any(fp <= 0) or np.any(fq <= 0):
        raise ValueError("densities must be positive at every draw from Q")
    return _summarize(fq / fp), _summarize(1.0 / np.sqrt(fp))


def estimate_family_integrals(p_family, q_family, n_samples: int, seed: int = 0):
    """:func:`estimate_importance_integrals` for two univariate families."""
    return estimate_importance_integrals(
        q_family.sample, q_family.pdf, p_family.pdf, n_samples, seed
    )
