"""Coordinate tensor formulas evaluated on batches of sample points.

Every array here carries a leading sample axis.  Christoffel arrays use the
layout ``G[..., k, i, j] = Gamma^k_ij`` and derivative axes are appended at
the end, so ``dG[..., k, i, j, a] = d_a Gamma^k_ij``.

Curvature follows ``R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z -
nabla_[X,Y] Z`` with ``R(d_i, d_j) d_k = R[..., l, i, j, k] d_l`` and the
Ricci tensor is ``rho[j, k] = R[i, i, j, k]``.  On a surface this gives
``R(d1, d2) d1 = rho_21 d1 - rho_11 d2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement, permutations

import numpy as np

from .expr import Expr, diff, evaluate_batch, simplify


def derivative_tower(e: Expr, dim: int, order: int) -> dict[tuple[int, ...], Expr]:
    """All partials of ``e`` up to ``order``, keyed by sorted index tuples."""
    tower = {(): e}
    for r in range(1, order + 1):
        for idx in combinations_with_replacement(range(dim), r):
            tower[idx] = simplify(diff(tower[idx[:-1]], idx[-1]))
    return tower


def expression_jet(exprs, points: np.ndarray, order: int) -> list[np.ndarray]:
    """Values and partial derivatives of an array of expressions.

    ``exprs`` is an object array (or nested sequence) of :class:`Expr` with
    shape ``S``.  Returns ``[T, dT, ..., d^order T]`` where ``d^r T`` has
    shape ``(m,) + S + (dim,) * r`` and ``dim`` is the point dimension.
    """
    arr = np.empty(np.shape(exprs), dtype=object)
    arr[...] = exprs if isinstance(exprs, np.ndarray) else _nested(exprs, arr.shape)
    pts = np.asarray(points, dtype=np.float64)
    m, dim = pts.shape
    shape = arr.shape
    out = [np.zeros((m,) + shape + (dim,) * r) for r in range(order + 1)]
    cache: dict = {}
    for pos in np.ndindex(*shape):
        tower = derivative_tower(arr[pos], dim, order)
        for idx, expr in tower.items():
            values = evaluate_batch(expr, pts, cache=cache)
            r = len(idx)
            for perm in _permutations(idx):
                out[r][(slice(None),) + pos + perm] = values
    return out


def _nested(seq, shape):
    arr = np.empty(shape, dtype=object)
    for pos in np.ndindex(*shape):
        item = seq
        for p in pos:
            item = item[p]
        arr[pos] = item
    return arr


def _permutations(idx: tuple[int, ...]) -> set[tuple[int, ...]]:
    return set(permutations(idx)) if len(idx) > 1 else {idx}


def curvature(G: np.ndarray, dG: np.ndarray) -> np.ndarray:
    """``R[..., l, i, j, k]``; antisymmetric in ``(i, j)`` bit for bit."""
    t1 = np.einsum("...ljki->...lijk", dG)
    gg = np.einsum("...lim,...mjk->...lijk", G, G)
    return (t1 - np.swapaxes(t1, -3, -2)) + (gg - np.swapaxes(gg, -3, -2))


def curvature_derivative(G: np.ndarray, dG: np.ndarray, d2G: np.ndarray) -> np.ndarray:
    """``dR[..., l, i, j, k, a] = d_a R^l_ijk``."""
    t1 = np.einsum("...ljkia->...lijka", d2G)
    dgg = (np.einsum("...lima,...mjk->...lijka", dG, G)
           + np.einsum("...lim,...mjka->...lijka", G, dG))
    return (t1 - np.swapaxes(t1, -4, -3)) + (dgg - np.swapaxes(dgg, -4, -3))


def covariant_curvature(G: np.ndarray, R: np.ndarray, dR: np.ndarray) -> np.ndarray:
    """``nR[..., a, l, i, j, k] = (nabla_a R)^l_ijk``."""
    return (np.einsum("...lijka->...alijk", dR)
            + np.einsum("...lap,...pijk->...alijk", G, R)
            - np.einsum("...pai,...lpjk->...alijk", G, R)
            - np.einsum("...paj,...lipk->...alijk", G, R)
            - np.einsum("...pak,...lijp->...alijk", G, R))


def ricci(R: np.ndarray) -> np.ndarray:
    return np.einsum("...iijk->...jk", R)


def ricci_derivative(dR: np.ndarray) -> np.ndarray:
    """``drho[..., j, k, a] = d_a rho_jk``."""
    return np.einsum("...iijka->...jka", dR)


def covariant_ricci(G: np.ndarray, rho: np.ndarray, drho: np.ndarray) -> np.ndarray:
    """``nrho[..., a, j, k] = (nabla_a rho)_jk``."""
    return (np.einsum("...jka->...ajk", drho)
            - np.einsum("...paj,...pk->...ajk", G, rho)
            - np.einsum("...pak,...jp->...ajk", G, rho))


def szabo(nR: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Matrix of ``Y -> (nabla_X R)(Y, X)X`` for ``X = alpha``.

    Column ``m`` holds the components of the image of ``d_m``, so the matrix
    acts on coordinate vectors by ordinary multiplication.
    """
    return np.einsum("...almjk,...a,...j,...k->...lm", nR, alpha, alpha, alpha)


@dataclass
class CurvatureJet:
    """Everything curvature-related at a batch of points."""

    G: np.ndarray
    dG: np.ndarray
    R: np.ndarray
    dR: np.ndarray
    nR: np.ndarray

    @classmethod
    def from_christoffel_jet(cls, G, dG, d2G) -> "CurvatureJet":
        R = curvature(G, dG)
        dR = curvature_derivative(G, dG, d2G)
        return cls(G=G, dG=dG, R=R, dR=dR, nR=covariant_curvature(G, R, dR))

    @property
    def rho(self) -> np.ndarray:
        return ricci(self.R)

    @property
    def drho(self) -> np.ndarray:
        return ricci_derivative(self.dR)

    @property
    def nrho(self) -> np.ndarray:
        return covariant_ricci(self.G, self.rho, self.drho)
