"""Multi-index sets and centred local monomials for order-L polynomial fits."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb

import numpy as np


@dataclass(frozen=True)
class MultiIndexBasis:
    """All d-variate multi-indices of total degree at most ``L``.

    Indices are ordered by total degree, then lexicographically by the
    exponent tuple. The zero tuple therefore sits at position 0, and the
    first ``kstar(d, L')`` rows form the basis of any lower order ``L'``.

    Attributes
    ----------
    d : int
        Ambient dimension.
    L : int
        Polynomial order.
    indices : ndarray of shape (kstar, d)
        Exponent tuples, one per row.
    kstar : int
        Number of monomials, ``binomial(d + L, d)``.
    dconst : int
        ``sum_{i=1..L} i * binomial(d + i - 1, i)``.
    """

    d: int
    L: int
    indices: np.ndarray
    kstar: int
    dconst: int

    @property
    def degrees(self) -> np.ndarray:
        return self.indices.sum(axis=1)

    def truncated(self, L: int) -> "MultiIndexBasis":
        """Basis of order ``L`` sharing the leading rows of this one."""
        if not 0 <= L <= self.L:
            raise ValueError(f"cannot truncate order {self.L} basis to order {L}")
        return build_basis(self.d, L)

    def recommended_k(self) -> int:
        """Neighbour count ``(2D + 1) K*`` used by the theoretical rates."""
        return (2 * self.dconst + 1) * self.kstar


def kstar(d: int, L: int) -> int:
    return comb(d + L, d)


def dconst(d: int, L: int) -> int:
    return sum(i * comb(d + i - 1, i) for i in range(1, L + 1))


def _degree_block(d: int, deg: int) -> list[tuple[int, ...]]:
    # Each multiset of `deg` coordinates is one monomial of degree `deg`.
    block = []
    for combo in combinations_with_replacement(range(d), deg):
        alpha = [0] * d
        for j in combo:
            alpha[j] += 1
        block.append(tuple(alpha))
    block.sort()
    return block


def build_basis(d: int, L: int) -> MultiIndexBasis:
    """Build the multi-index basis of order ``L`` in dimension ``d``."""
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    if int(L) != L or L < 0:
        raise ValueError(f"order must be a non-negative integer, got {L!r}")
    d, L = int(d), int(L)
    rows: list[tuple[int, ...]] = []
    for deg in range(L + 1):
        rows.extend(_degree_block(d, deg))
    indices = np.array(rows, dtype=np.int64).reshape(len(rows), d)
    return MultiIndexBasis(d=d, L=L, indices=indices, kstar=kstar(d, L), dconst=dconst(d, L))


def eval_monomials(basis: MultiIndexBasis, z, T, scale: float = 1.0) -> np.ndarray:
    """Evaluate ``prod_j ((T_j - z_j) / scale) ** alpha_j`` for every alpha.

    ``T`` may be a single point of shape (d,) or a batch of shape (..., d);
    the result has shape (..., kstar). ``z`` broadcasts against ``T`` and
    ``scale`` against the leading batch axes.
    """
    z = np.asarray(z, dtype=float)
    T = np.asarray(T, dtype=float)
    if T.shape[-1:] != (basis.d,) or z.shape[-1:] != (basis.d,):
        raise ValueError(
            f"points must have trailing dimension {basis.d}, got {z.shape} and {T.shape}"
        )
    scale = np.asarray(scale, dtype=float)
    if np.any(scale <= 0) or not np.all(np.isfinite(scale)):
        raise ValueError("scale must be positive and finite")
    u = (T - z) / scale[..., None]
    return design_from_offsets(u, basis.indices)


def design_from_offsets(u: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Monomial columns for pre-scaled offsets ``u`` of shape (..., d)."""
    out_shape = u.shape[:-1] + (indices.shape[0],)
    L = int(indices.sum(axis=1).max()) if indices.size else 0
    if L == 0:
        return np.ones(out_shape)
    # powers[..., j, p] = u_j ** p, built by repeated multiplication
    powers = np.empty(u.shape + (L + 1,))
    powers[..., 0] = 1.0
    for p in range(1, L + 1):
        powers[..., p] = powers[..., p - 1] * u
    out = np.ones(out_shape)
    for j in range(indices.shape[1]):
        out *= powers[..., j, indices[:, j]]
    return out
