"""Deformed Riemannian extension of an affine connection.

On the cotangent chart ``(u_1..u_n, u_1'..u_n')`` the metric has the block form

    [[B, I],
     [I, 0]]     with  B_ij = phi_ij(u) - 2 sum_k u_k' Gamma^k_ij,

and ``phi = 0`` gives the classical Riemannian extension.  The fiber
coordinates ``u_k'`` are the components of the covector and sit after the
base coordinates (for surfaces: ``u3 = u_1'``, ``u4 = u_2'``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .affine import AffineConnection
from .expr import ONE, ZERO, Expr, Var, diff, evaluate_batch, neg, parse, simplify, variables


@dataclass(frozen=True, eq=False)
class SymmetricBilinearSpec:
    """Symmetric (0,2) tensor on the base; only ``i <= j`` entries are stored."""

    dim: int
    entries: Mapping[tuple[int, int], Expr]

    def __post_init__(self):
        clean = {}
        for (i, j), e in self.entries.items():
            if not (0 <= i <= j < self.dim):
                raise ValueError(f"phi entry {(i + 1, j + 1)} must satisfy 1 <= i <= j <= {self.dim}")
            if any(v >= self.dim for v in variables(e)):
                raise ValueError("phi entries may only depend on base coordinates")
            clean[(i, j)] = simplify(e)
        object.__setattr__(self, "entries", clean)

    @classmethod
    def zero(cls, dim: int = 2) -> "SymmetricBilinearSpec":
        return cls(dim, {})

    @classmethod
    def from_strings(cls, entries: Mapping[tuple[int, int], str],
                     coordinates: Sequence[str]) -> "SymmetricBilinearSpec":
        return cls(len(coordinates), {k: parse(v, coordinates) for k, v in entries.items()})

    def component(self, i: int, j: int) -> Expr:
        return self.entries.get((min(i, j), max(i, j)), ZERO)


@dataclass(frozen=True, eq=False)
class ExtensionMetric:
    base: AffineConnection
    phi: SymmetricBilinearSpec
    coordinates: tuple[str, ...]
    entries: tuple  # entries[a][b], 2n x 2n
    inverse: tuple  # exact inverse [[0, I], [I, -B]]

    @property
    def dim(self) -> int:
        return 2 * self.base.dim

    @property
    def n(self) -> int:
        return self.base.dim

    def block(self, i: int, j: int) -> Expr:
        return self.entries[i][j]

    def matrix_at(self, p) -> np.ndarray:
        return self.matrices(np.asarray(p, dtype=np.float64).reshape(1, -1))[0]

    def matrices(self, points) -> np.ndarray:
        return _evaluate_table(self.entries, points)

    def guard_expressions(self) -> list[Expr]:
        return [e for row in self.entries for e in row if e not in (ZERO, ONE)]


def _evaluate_table(table, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    size = len(table)
    out = np.empty((len(pts), size, size))
    cache: dict = {}
    for a in range(size):
        for b in range(size):
            out[:, a, b] = evaluate_batch(table[a][b], pts, cache=cache)
    return out


def fiber_coordinate_names(base: Sequence[str]) -> tuple[str, ...]:
    """``u1, u2`` -> ``u3, u4``; otherwise ``<name>_star``."""
    n = len(base)
    if all(name == f"u{i + 1}" for i, name in enumerate(base)):
        return tuple(f"u{n + i + 1}" for i in range(n))
    return tuple(f"{name}_star" for name in base)


def deformed_extension(c: AffineConnection, phi: SymmetricBilinearSpec | None = None,
                       fiber_names: Sequence[str] | None = None) -> ExtensionMetric:
    """Build ``g = g_nabla + pi^* phi`` as a table of expressions."""
    n = c.dim
    phi = phi if phi is not None else SymmetricBilinearSpec.zero(n)
    if phi.dim != n:
        raise ValueError("phi and the connection live on charts of different dimension")
    fibers = tuple(fiber_names) if fiber_names else fiber_coordinate_names(c.coordinates)
    if len(fibers) != n or set(fibers) & set(c.coordinates):
        raise ValueError("need n fiber coordinate names distinct from the base names")
    fiber_vars = [Var(n + k, fibers[k]) for k in range(n)]

    B = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            e = phi.component(i, j)
            for k in range(n):
                e = e - 2.0 * fiber_vars[k] * c.gamma(k, i, j)
            B[i][j] = B[j][i] = simplify(e)

    size = 2 * n
    g = [[ZERO] * size for _ in range(size)]
    inv = [[ZERO] * size for _ in range(size)]
    for i in range(n):
        for j in range(n):
            g[i][j] = B[i][j]
            inv[n + i][n + j] = simplify(neg(B[i][j]))
        g[i][n + i] = g[n + i][i] = ONE
        inv[i][n + i] = inv[n + i][i] = ONE
    return ExtensionMetric(base=c, phi=phi, coordinates=tuple(c.coordinates) + fibers,
                           entries=tuple(map(tuple, g)), inverse=tuple(map(tuple, inv)))


def inverse_metric_at(m: ExtensionMetric, p) -> np.ndarray:
    """Exact inverse ``[[0, I], [I, -B(p)]]``."""
    return _evaluate_table(m.inverse, np.asarray(p, dtype=np.float64).reshape(1, -1))[0]


def signature_at(m: ExtensionMetric, p) -> tuple[int, int]:
    eig = np.linalg.eigvalsh(m.matrix_at(p))
    return int(np.sum(eig > 0)), int(np.sum(eig < 0))


# ---------------------------------------------------------------- displayed symbols

CHRISTOFFEL_FAMILIES = ("base", "fiber_base", "base_fiber", "fiber", "zero")


def displayed_christoffels(c: AffineConnection, phi: SymmetricBilinearSpec | None = None,
                       ) -> dict[str, dict[tuple[int, int, int], Expr]]:
    """Closed-form Levi-Civita symbols of the extension, read literally from
    the published listing, grouped by index family.

    Keys are ``(upper, lower1, lower2)`` on the 4-chart, fiber indices
    offset by ``n``.  These are a cross-check only: the ``fiber`` family as
    printed carries no fiber coordinate on its curvature-type sum, and the
    ``base_fiber`` entry ``-Gamma^j_ij`` does not mention the upper index.
    Everything not listed is expected to vanish (family ``zero``).
    """
    if c.dim != 2:
        raise ValueError("the displayed symbols are for surfaces")
    n = 2
    phi = phi if phi is not None else SymmetricBilinearSpec.zero(n)
    g = c.gamma
    fam: dict[str, dict[tuple[int, int, int], Expr]] = {f: {} for f in CHRISTOFFEL_FAMILIES}
    R = range(n)
    for k in R:
        for i in R:
            for j in R:
                fam["base"][(k, i, j)] = g(k, i, j)
                fam["fiber_base"][(n + k, n + i, j)] = simplify(neg(g(i, j, k)))
                fam["base_fiber"][(n + k, i, n + j)] = simplify(neg(g(j, i, j)))
                e: Expr = ZERO
                for r in R:
                    e = e + diff(g(r, i, j), k) - diff(g(r, j, k), i) - diff(g(r, i, k), j)
                    for l in R:
                        e = e + 2.0 * g(r, k, l) * g(l, i, j)
                e = e + 0.5 * (diff(phi.component(j, k), i) + diff(phi.component(i, k), j)
                               - diff(phi.component(i, j), k))
                for l in R:
                    e = e - phi.component(k, l) * g(l, i, j)
                fam["fiber"][(n + k, i, j)] = simplify(e)
    listed = {key for f in CHRISTOFFEL_FAMILIES[:-1] for key in fam[f]}
    for a in range(2 * n):
        for b in range(2 * n):
            for cc in range(2 * n):
                if (a, b, cc) not in listed:
                    fam["zero"][(a, b, cc)] = ZERO
    return fam
