"""Torsion-free affine connections on a coordinate chart.

Indices are 0-based in code: ``gamma(k, i, j)`` is the Christoffel symbol
``Gamma^{k+1}_{i+1, j+1}`` of ``nabla_{d_i} d_j = Gamma^k_ij d_k``.
The classification routines (Szabó, cyclic parallel Ricci, skew Ricci,
recurrence) are for surfaces; curvature and the Szabó operator itself work
in any dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import tensors
from .expr import ZERO, DomainError, Expr, diff, neg, parse, simplify, variables
from .smallnum import (SampleDomain, Verdict, fd_partial, sample_points,
                       scaled_coefficients, unit_directions)

DEFAULT_COORDINATES = ("u1", "u2")


@dataclass(frozen=True)
class TensorValues:
    """Components of a tensor at one point.

    ``variance`` lists ``"up"``/``"down"`` per index, in the order of the
    axes of ``values``.
    """

    variance: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != len(self.variance):
            raise ValueError("one variance entry per index is required")
        if values.ndim and len(set(values.shape)) != 1:
            raise ValueError("all indices must range over the same dimension")
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[0] if self.values.ndim else 0

    @property
    def rank(self) -> tuple[int, int]:
        return self.variance.count("up"), self.variance.count("down")

    def antisymmetry_residual(self, a: int, b: int) -> float:
        return float(np.max(np.abs(self.values + np.swapaxes(self.values, a, b))))


@dataclass(frozen=True, eq=False)
class AffineConnection:
    dim: int
    symbols: tuple  # symbols[k][i][j]
    coordinates: tuple[str, ...] = DEFAULT_COORDINATES

    def __post_init__(self):
        n = self.dim
        if len(self.coordinates) != n:
            raise ValueError("one coordinate name per dimension is required")
        if (len(self.symbols) != n or any(len(row) != n for row in self.symbols)
                or any(len(col) != n for row in self.symbols for col in row)):
            raise ValueError(f"Christoffel array must be {n}x{n}x{n}")
        for k in range(n):
            for i in range(n):
                for j in range(i + 1, n):
                    if self.symbols[k][i][j] != self.symbols[k][j][i]:
                        raise ValueError(
                            f"torsion: Gamma^{k + 1}_{i + 1}{j + 1} differs from "
                            f"Gamma^{k + 1}_{j + 1}{i + 1}")

    @classmethod
    def from_components(cls, dim: int, components: Mapping[tuple[int, int, int], Expr],
                        coordinates: Sequence[str] | None = None) -> "AffineConnection":
        """Build from a sparse ``{(k, i, j): expr}`` map; omitted symbols are 0.

        Giving only one of ``(k, i, j)`` and ``(k, j, i)`` fills in the other.
        """
        table = [[[ZERO] * dim for _ in range(dim)] for _ in range(dim)]
        seen: dict[tuple[int, int, int], Expr] = {}
        for (k, i, j), e in components.items():
            if not all(0 <= x < dim for x in (k, i, j)):
                raise IndexError(f"index {(k, i, j)} out of range for dimension {dim}")
            key = (k, min(i, j), max(i, j))
            e = simplify(e)
            if key in seen and seen[key] != e:
                raise ValueError(f"conflicting values for Gamma^{k + 1}_{i + 1}{j + 1}")
            seen[key] = e
            table[k][i][j] = table[k][j][i] = e
        coords = tuple(coordinates) if coordinates else _default_coordinates(dim)
        return cls(dim, tuple(tuple(tuple(r) for r in m) for m in table), coords)

    @classmethod
    def from_strings(cls, components: Mapping[tuple[int, int, int], str],
                     coordinates: Sequence[str] = DEFAULT_COORDINATES) -> "AffineConnection":
        exprs = {key: parse(text, coordinates) for key, text in components.items()}
        return cls.from_components(len(coordinates), exprs, coordinates)

    @classmethod
    def flat(cls, dim: int = 2) -> "AffineConnection":
        return cls.from_components(dim, {})

    def gamma(self, k: int, i: int, j: int) -> Expr:
        return self.symbols[k][i][j]

    def nonzero(self) -> dict[tuple[int, int, int], Expr]:
        return {(k, i, j): self.symbols[k][i][j]
                for k in range(self.dim) for i in range(self.dim) for j in range(i, self.dim)
                if self.symbols[k][i][j] != ZERO}

    def christoffel_jet(self, points, order: int = 2) -> list[np.ndarray]:
        return tensors.expression_jet(self.symbols, points, order)

    def guard_expressions(self, order: int = 2) -> list[Expr]:
        out = []
        for e in self.nonzero().values():
            out.extend(tensors.derivative_tower(e, self.dim, order).values())
        return out

    def curvature_jet(self, points) -> tensors.CurvatureJet:
        G, dG, d2G = self.christoffel_jet(points, 2)
        return tensors.CurvatureJet.from_christoffel_jet(G, dG, d2G)


def _default_coordinates(dim: int) -> tuple[str, ...]:
    return tuple(f"u{i + 1}" for i in range(dim))


def _point(c: AffineConnection, p) -> np.ndarray:
    pts = np.asarray(p, dtype=np.float64).reshape(1, -1)
    if pts.shape[1] != c.dim:
        raise ValueError(f"point has {pts.shape[1]} coordinates, chart has {c.dim}")
    return pts


def _points(c: AffineConnection, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[1] != c.dim:
        raise ValueError(f"points have {pts.shape[1]} coordinates, chart has {c.dim}")
    return pts


def wong_connection(phi: Expr, coordinates: Sequence[str] = DEFAULT_COORDINATES) -> AffineConnection:
    """Surface connection with ``Gamma^1_11 = -d_1 phi`` and ``Gamma^2_22 = d_2 phi`` only."""
    return AffineConnection.from_components(2, {
        (0, 0, 0): simplify(neg(diff(phi, 0))),
        (1, 1, 1): simplify(diff(phi, 1)),
    }, coordinates)


def family_connection(f1: Expr, f2: Expr,
                      coordinates: Sequence[str] = DEFAULT_COORDINATES) -> AffineConnection:
    """``nabla_{d1} d1 = f1 d2``, ``nabla_{d1} d2 = f2 d2`` with f1, f2 functions of u1."""
    if 1 in variables(f1) | variables(f2):
        raise ValueError("f1 and f2 must depend on u1 only")
    return AffineConnection.from_components(2, {(1, 0, 0): f1, (1, 0, 1): f2}, coordinates)


def family_invariant(f2: Expr) -> Expr:
    """``b = d_1 f2 + f2^2``; the family is Szabó when this is constant."""
    return simplify(diff(f2, 0) + f2 * f2)


# ------------------------------------------------------------ point operations

def curvature_at(c: AffineConnection, p) -> TensorValues:
    """``R[l, i, j, k]``: the ``d_l`` component of ``R(d_i, d_j) d_k``."""
    jet = c.curvature_jet(_point(c, p))
    return TensorValues(("up", "down", "down", "down"), jet.R[0])


def ricci_at(c: AffineConnection, p) -> TensorValues:
    G, dG = c.christoffel_jet(_point(c, p), 1)
    return TensorValues(("down", "down"), tensors.ricci(tensors.curvature(G, dG))[0])


def nabla_curvature_at(c: AffineConnection, p) -> TensorValues:
    """``nR[a, l, i, j, k] = (nabla_a R)^l_ijk``, derivative index first."""
    jet = c.curvature_jet(_point(c, p))
    return TensorValues(("down", "up", "down", "down", "down"), jet.nR[0])


def nabla_ricci_at(c: AffineConnection, p) -> TensorValues:
    jet = c.curvature_jet(_point(c, p))
    return TensorValues(("down", "down", "down"), jet.nrho[0])


def szabo_operator(c: AffineConnection, p, x) -> np.ndarray:
    """Coordinate matrix of ``Y -> (nabla_X R)(Y, X)X`` (column m = image of d_m)."""
    x = np.asarray(x, dtype=np.float64)
    if not np.any(x):
        raise ValueError("the Szabó operator needs a nonzero direction")
    jet = c.curvature_jet(_point(c, p))
    return tensors.szabo(jet.nR, x[None, :])[0]


def szabo_batch(c: AffineConnection, points, directions) -> np.ndarray:
    jet = c.curvature_jet(_points(c, points))
    return tensors.szabo(jet.nR, np.asarray(directions, dtype=np.float64))


def surface_szabo_coefficients(G: np.ndarray, rho: np.ndarray, drho: np.ndarray,
                               alpha: np.ndarray) -> dict[str, np.ndarray]:
    """The cubic polynomials A, B, C, D of the surface Szabó matrix.

    Inputs are batched: ``G[m, k, i, j]``, ``rho[m, j, k]``,
    ``drho[m, j, k, a]`` and ``alpha[m, i]``.  The listing is row oriented:
    A and D are diagonal entries, B is the d_2 component of ``S d_1`` and C
    the d_1 component of ``S d_2``.  The ``alpha1^3`` bracket of C includes
    the term ``Gamma^2_11 rho_22``, which keeps it mirror-symmetric with the
    ``alpha1^2 alpha2`` bracket of A.
    """
    def g(k, i, j):
        return G[:, k - 1, i - 1, j - 1]

    def r(j, k):
        return rho[:, j - 1, k - 1]

    def d(a, j, k):
        return drho[:, j - 1, k - 1, a - 1]

    a1, a2 = alpha[:, 0], alpha[:, 1]
    s = r(1, 2) + r(2, 1)
    A = (a1 ** 2 * a2 * (d(1, 2, 1) - (g(1, 1, 1) + g(2, 1, 2)) * r(2, 1)
                         - g(1, 1, 2) * r(1, 1) - g(2, 1, 1) * r(2, 2))
         + a1 * a2 ** 2 * (d(2, 2, 1) + d(1, 2, 2) - (g(1, 1, 2) + g(2, 2, 2)) * r(2, 1)
                           - s * g(1, 1, 2) - g(1, 2, 2) * r(1, 1) - 3 * g(2, 1, 2) * r(2, 2))
         + a2 ** 3 * (d(2, 2, 2) - 2 * g(2, 2, 2) * r(2, 2) - s * g(1, 2, 2)))
    B = (a1 ** 2 * a2 * (-d(1, 1, 1) + 2 * g(1, 1, 1) * r(1, 1) + s * g(2, 1, 1))
         + a1 * a2 ** 2 * (-d(2, 1, 1) - d(1, 1, 2) + 3 * g(1, 1, 2) * r(1, 1)
                           + g(2, 1, 1) * r(2, 2) + s * g(2, 1, 2)
                           + (g(1, 1, 1) + g(2, 1, 2)) * r(1, 2))
         + a2 ** 3 * (-d(2, 1, 2) + g(1, 2, 2) * r(1, 1) + g(2, 1, 2) * r(2, 2)
                      + (g(1, 1, 2) + g(2, 2, 2)) * r(1, 2)))
    C = (a1 ** 3 * (-d(1, 2, 1) + (g(1, 1, 1) + g(2, 1, 2)) * r(2, 1) + g(1, 1, 2) * r(1, 1)
                    + g(2, 1, 1) * r(2, 2))
         + a1 ** 2 * a2 * (-d(2, 2, 1) - d(1, 2, 2) + (g(1, 1, 2) + g(2, 2, 2)) * r(2, 1)
                           + g(1, 2, 2) * r(1, 1) + 3 * g(2, 1, 2) * r(2, 2) + s * g(1, 1, 2))
         + a1 * a2 ** 2 * (-d(2, 2, 2) + 2 * g(2, 2, 2) * r(2, 2) + s * g(1, 2, 2)))
    D = (a1 ** 3 * (d(1, 1, 1) - 2 * g(1, 1, 1) * r(1, 1) - s * g(2, 1, 1))
         + a1 ** 2 * a2 * (d(2, 1, 1) + d(1, 1, 2) - 3 * g(1, 1, 2) * r(1, 1)
                           - g(2, 1, 1) * r(2, 2) - (g(1, 1, 1) + g(2, 1, 2)) * r(1, 2)
                           - s * g(2, 1, 2))
         + a1 * a2 ** 2 * (d(2, 1, 2) - g(1, 2, 2) * r(1, 1) - g(2, 1, 2) * r(2, 2)
                           - (g(1, 1, 2) + g(2, 2, 2)) * r(1, 2)))
    return {"A": A, "B": B, "C": C, "D": D}


def _require_surface(c: AffineConnection):
    if c.dim != 2:
        raise ValueError("this operation is defined for surfaces (dimension 2)")


def szabo_surface_closed_form_batch(c: AffineConnection, points, directions) -> np.ndarray:
    _require_surface(c)
    pts = _points(c, points)
    jet = c.curvature_jet(pts)
    coeffs = surface_szabo_coefficients(jet.G, jet.rho, jet.drho,
                                        np.asarray(directions, dtype=np.float64))
    # A..D are listed by rows (row m = image of d_m); transpose to columns.
    return np.stack([np.stack([coeffs["A"], coeffs["C"]], -1),
                     np.stack([coeffs["B"], coeffs["D"]], -1)], -2)


def szabo_surface_closed_form(c: AffineConnection, p, alpha) -> np.ndarray:
    """Surface Szabó matrix from the cubic closed form, same orientation as
    :func:`szabo_operator`."""
    alpha = np.asarray(alpha, dtype=np.float64).reshape(1, 2)
    return szabo_surface_closed_form_batch(c, _point(c, p), alpha)[0]


# ------------------------------------------------------------ sampled verdicts

def _sample(c: AffineConnection, d: SampleDomain) -> np.ndarray:
    if d.dim != c.dim:
        raise ValueError(f"sample box has {d.dim} axes, chart has {c.dim}")
    return sample_points(d, guard=c.guard_expressions())


def is_affine_szabo(c: AffineConnection, d: SampleDomain) -> Verdict:
    """Sampled test that the Szabó characteristic polynomial is ``lambda^n``.

    One unit direction is drawn per sample point; the residual is the
    largest scaled characteristic-polynomial coefficient.
    """
    pts = _sample(c, d)
    dirs = unit_directions(d.rng(1), len(pts), c.dim)
    mats = szabo_batch(c, pts, dirs)
    scaled = scaled_coefficients(mats).max(axis=-1)
    worst = int(np.argmax(scaled))
    residual = float(scaled[worst])
    return Verdict(
        name="affine_szabo", outcome=residual <= d.tol, residual=residual,
        samples=len(pts), tol=d.tol, seed=d.seed,
        worst_sample={"point": pts[worst], "direction": dirs[worst],
                      "trace": float(np.trace(mats[worst])),
                      "det": float(np.linalg.det(mats[worst]))})


@dataclass
class RicciSymmetry:
    kind: str  # "skew", "symmetric", "mixed" or "zero"
    nonzero: bool
    skew_residual: float
    symmetric_residual: float
    min_magnitude: float
    samples: int

    def to_dict(self) -> dict:
        return {"kind": self.kind, "nonzero": self.nonzero,
                "skew_residual": self.skew_residual,
                "symmetric_residual": self.symmetric_residual,
                "min_magnitude": self.min_magnitude, "samples": self.samples}


def classify_ricci_values(rho: np.ndarray, tol: float) -> RicciSymmetry:
    """Symmetry type of a batch of 2x2 Ricci matrices ``rho[m, j, k]``."""
    mag = np.abs(rho).max(axis=(-2, -1))
    scale = np.maximum(1.0, mag)
    skew = np.maximum.reduce([np.abs(rho[:, 0, 0]), np.abs(rho[:, 1, 1]),
                              np.abs(rho[:, 0, 1] + rho[:, 1, 0])]) / scale
    sym = np.abs(rho[:, 0, 1] - rho[:, 1, 0]) / scale
    is_skew = bool(np.all(skew <= tol))
    is_sym = bool(np.all(sym <= tol))
    kind = {(True, True): "zero", (True, False): "skew",
            (False, True): "symmetric", (False, False): "mixed"}[(is_skew, is_sym)]
    return RicciSymmetry(kind=kind, nonzero=bool(np.all(mag >= tol)),
                         skew_residual=float(skew.max()), symmetric_residual=float(sym.max()),
                         min_magnitude=float(mag.min()), samples=len(rho))


def ricci_symmetry_classify(c: AffineConnection, d: SampleDomain) -> RicciSymmetry:
    """Skew / symmetric / mixed / zero Ricci tensor over the sample, plus
    whether it is nonzero at every sample.  A Ricci tensor that is both skew
    and symmetric within tolerance is reported as ``"zero"``."""
    _require_surface(c)
    pts = _sample(c, d)
    G, dG = c.christoffel_jet(pts, 1)
    return classify_ricci_values(tensors.ricci(tensors.curvature(G, dG)), d.tol)


def cyclic_ricci_sums(nrho: np.ndarray) -> np.ndarray:
    """``(nabla_i rho)_jk + (nabla_j rho)_ki + (nabla_k rho)_ij`` for all triples."""
    return (nrho + np.einsum("...jki->...ijk", nrho) + np.einsum("...kij->...ijk", nrho))


def is_cyclic_parallel(c: AffineConnection, d: SampleDomain) -> Verdict:
    _require_surface(c)
    pts = _sample(c, d)
    nrho = c.curvature_jet(pts).nrho
    scale = np.maximum(1.0, np.abs(nrho).max(axis=(1, 2, 3)))
    res = np.abs(cyclic_ricci_sums(nrho)).max(axis=(1, 2, 3)) / scale
    worst = int(np.argmax(res))
    residual = float(res[worst])
    return Verdict(name="cyclic_parallel", outcome=residual <= d.tol, residual=residual,
                   samples=len(pts), tol=d.tol, seed=d.seed,
                   worst_sample={"point": pts[worst]})


# ------------------------------------------------------------ recurrence

@dataclass
class RecurrenceResult:
    """Recurrence covector of the Ricci tensor over a sample.

    ``status`` is ``"recurrent"``, ``"not-recurrent"``, ``"zero-nabla-rho"``
    (the Ricci tensor is parallel, so the covector is taken to be 0) or
    ``"degenerate"`` (Ricci vanishes at every sample).
    """

    status: str
    points: np.ndarray
    alphas: np.ndarray  # NaN rows at skipped samples
    residual: float
    skipped: list[int] = field(default_factory=list)
    tol: float = 0.0

    @property
    def recurrent(self) -> bool:
        return self.status in ("recurrent", "zero-nabla-rho")


def recurrence_from_values(rho: np.ndarray, nrho: np.ndarray, tol: float):
    """Least-squares ``alpha_i`` with ``(nabla_i rho)_jk ~ alpha_i rho_jk``.

    Returns ``(alphas, residuals, skipped_mask, parallel_mask)``; residuals
    are scaled by ``max(1, max |nabla rho|)``.
    """
    mag = np.abs(rho).max(axis=(-2, -1))
    skipped = mag < tol
    denom = np.where(skipped, 1.0, np.einsum("...jk,...jk->...", rho, rho))
    alphas = np.einsum("...ajk,...jk->...a", nrho, rho) / denom[..., None]
    alphas[skipped] = np.nan
    scale = np.maximum(1.0, np.abs(nrho).max(axis=(-3, -2, -1)))
    fit = np.einsum("...a,...jk->...ajk", np.nan_to_num(alphas), rho)
    residuals = np.abs(nrho - fit).max(axis=(-3, -2, -1)) / scale
    residuals[skipped] = 0.0
    parallel = np.abs(nrho).max(axis=(-3, -2, -1)) / scale <= tol
    return alphas, residuals, skipped, parallel


def recurrence_covector(c: AffineConnection, d: SampleDomain) -> RecurrenceResult:
    _require_surface(c)
    pts = _sample(c, d)
    jet = c.curvature_jet(pts)
    alphas, residuals, skipped, parallel = recurrence_from_values(jet.rho, jet.nrho, d.tol)
    skipped_idx = [int(i) for i in np.flatnonzero(skipped)]
    active = ~skipped
    residual = float(residuals.max())
    if not active.any():
        status = "degenerate"
    elif np.all(parallel[active]):
        status = "zero-nabla-rho"
        alphas[active] = 0.0
    elif residual > d.tol:
        status = "not-recurrent"
    else:
        status = "recurrent"
    return RecurrenceResult(status=status, points=pts, alphas=alphas, residual=residual,
                            skipped=skipped_idx, tol=d.tol)


def recurrence_alpha_at(c: AffineConnection, p, tol: float = 1e-8) -> np.ndarray:
    jet = c.curvature_jet(_point(c, p))
    alphas, _, skipped, _ = recurrence_from_values(jet.rho, jet.nrho, tol)
    if skipped[0]:
        raise DomainError(None, np.ravel(p))
    return alphas[0]


@dataclass
class Closedness:
    curls: np.ndarray
    max_abs_curl: float
    min_abs_curl: float
    not_gradient: bool
    samples_used: int


def covector_curl(alpha: Callable[[np.ndarray], np.ndarray], points) -> np.ndarray:
    """Finite-difference ``d_1 alpha_2 - d_2 alpha_1`` at each point."""
    out = []
    for p in np.atleast_2d(points):
        d1a2 = fd_partial(lambda q: alpha(q)[1], p, 0)
        d2a1 = fd_partial(lambda q: alpha(q)[0], p, 1)
        out.append(d1a2 - d2a1)
    return np.array(out)


def closedness_from_curls(curls: np.ndarray, tol: float) -> Closedness:
    mags = np.abs(curls)
    return Closedness(curls=curls, max_abs_curl=float(mags.max()),
                      min_abs_curl=float(mags.min()),
                      not_gradient=bool(np.all(mags >= 10 * tol)), samples_used=len(curls))


def covector_closedness(c: AffineConnection, d: SampleDomain,
                        recurrence: RecurrenceResult | None = None) -> Closedness:
    """Curl of the recurrence covector at the recurrence samples.

    Only samples with ``|alpha| >= tol`` take part; a parallel Ricci tensor
    (alpha = 0) leaves nothing to test and raises ``ValueError``.
    """
    rec = recurrence if recurrence is not None else recurrence_covector(c, d)
    if not rec.recurrent:
        raise ValueError(f"Ricci tensor is not recurrent (status {rec.status})")
    norms = np.linalg.norm(np.nan_to_num(rec.alphas), axis=1)
    use = norms >= d.tol
    if not use.any():
        raise ValueError("recurrence covector vanishes at every sample")
    curls = covector_curl(lambda q: recurrence_alpha_at(c, q, d.tol), rec.points[use])
    return closedness_from_curls(curls, d.tol)
