"""Levi-Civita geometry of an extension metric on the cotangent chart.

The Christoffel symbols come from symbolic derivatives of the metric
entries and of the exact inverse, combined numerically at each sample by
the Leibniz rule.  The Szabó operator needs the symbols to second order,
i.e. third derivatives of the metric entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensors
from .affine import TensorValues, szabo_operator
from .expr import evaluate_batch
from .extension import ExtensionMetric, displayed_christoffels
from .smallnum import (SampleDomain, Verdict, char_poly, poly_multiply, sample_points,
                       scaled_coefficients, unit_directions)

LIFTS_PER_CAUSAL_TYPE = 8


@dataclass
class MetricJet:
    g: list[np.ndarray]       # g, dg, d2g, d3g; dg[..., a, b, c] = d_c g_ab
    ginv: list[np.ndarray]    # ginv, dginv, d2ginv
    gamma: list[np.ndarray]   # Gamma, dGamma, d2Gamma in the tensors layout

    def curvature(self) -> tensors.CurvatureJet:
        return tensors.CurvatureJet.from_christoffel_jet(*self.gamma)


def metric_jet(m: ExtensionMetric, points, order: int = 2) -> MetricJet:
    """Levi-Civita symbols and their derivatives up to ``order`` (at most 2)."""
    pts = _points(m, points)
    g = tensors.expression_jet(m.entries, pts, order + 1)
    ginv = tensors.expression_jet(m.inverse, pts, order)

    def K(r):
        # K_r[..., d, a, b, *e] = d_e^r (d_a g_db + d_b g_da - d_d g_ab)
        dg = g[r + 1]
        rest = tuple(range(4, dg.ndim))
        return (np.transpose(dg, (0, 1, 3, 2) + rest) + dg
                - np.transpose(dg, (0, 3, 1, 2) + rest))

    Ks = [K(r) for r in range(order + 1)]
    gam = [0.5 * np.einsum("...cd,...dab->...cab", ginv[0], Ks[0])]
    if order >= 1:
        gam.append(0.5 * (np.einsum("...cde,...dab->...cabe", ginv[1], Ks[0])
                          + np.einsum("...cd,...dabe->...cabe", ginv[0], Ks[1])))
    if order >= 2:
        gam.append(0.5 * (np.einsum("...cdef,...dab->...cabef", ginv[2], Ks[0])
                          + np.einsum("...cde,...dabf->...cabef", ginv[1], Ks[1])
                          + np.einsum("...cdf,...dabe->...cabef", ginv[1], Ks[1])
                          + np.einsum("...cd,...dabef->...cabef", ginv[0], Ks[2])))
    return MetricJet(g=g, ginv=ginv, gamma=gam)


def _points(m: ExtensionMetric, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[1] != m.dim:
        raise ValueError(f"points have {pts.shape[1]} coordinates, the extension has {m.dim}")
    return pts


def levi_civita_at(m: ExtensionMetric, p) -> np.ndarray:
    """``Gamma[c, a, b]`` of the Levi-Civita connection at ``p``."""
    return metric_jet(m, p, order=0).gamma[0][0]


def compatibility_residuals(m: ExtensionMetric, points) -> np.ndarray:
    """Per-sample ``max |nabla_a g_bc|`` scaled by ``max(1, max |d g|)``."""
    jet = metric_jet(m, points, order=0)
    g, dg = jet.g[0], jet.g[1]
    G = jet.gamma[0]
    nabla_g = (np.einsum("...bca->...abc", dg)
               - np.einsum("...dab,...dc->...abc", G, g)
               - np.einsum("...dac,...bd->...abc", G, g))
    scale = np.maximum(1.0, np.abs(dg).max(axis=(1, 2, 3)))
    return np.abs(nabla_g).max(axis=(1, 2, 3)) / scale


def metric_curvature_at(m: ExtensionMetric, p) -> TensorValues:
    jet = metric_jet(m, p, order=1)
    R = tensors.curvature(jet.gamma[0], jet.gamma[1])
    return TensorValues(("up", "down", "down", "down"), R[0])


def lowered_curvature(m: ExtensionMetric, points) -> np.ndarray:
    """``R[..., a, b, c, d] = g(R(d_a, d_b) d_c, d_d)``."""
    jet = metric_jet(m, points, order=1)
    R = tensors.curvature(jet.gamma[0], jet.gamma[1])
    return np.einsum("...lijk,...ld->...ijkd", R, jet.g[0])


def curvature_identity_residuals(m: ExtensionMetric, points) -> dict[str, float]:
    """Antisymmetry, first Bianchi and pair symmetry of the curvature, plus
    the relations between the extension curvature and the base curvature.

    The base relations are read with ``R^h_kji`` meaning ``R[h, k, j, i]``:
    the base block equals the base curvature, ``R~^{h'}_{k j i'} =
    -R^i_{kjh}`` and ``R~^{h'}_{k' j i} = R^k_{hij}``.
    """
    pts = _points(m, points)
    jet = metric_jet(m, pts, order=1)
    R = tensors.curvature(jet.gamma[0], jet.gamma[1])
    low = np.einsum("...lijk,...ld->...ijkd", R, jet.g[0])
    scale = max(1.0, float(np.abs(R).max()))
    n = m.n
    base_pts = pts[:, :n]
    Gb, dGb = m.base.christoffel_jet(base_pts, 1)
    Rb = tensors.curvature(Gb, dGb)
    b, f = slice(0, n), slice(n, 2 * n)
    mixed1 = R[:, f, b, b, f] + np.einsum("...ikjh->...hkji", Rb)
    mixed2 = R[:, f, f, b, b] - np.einsum("...khij->...hkji", Rb)
    lscale = max(1.0, float(np.abs(low).max()))
    return {
        "antisymmetry": float(np.abs(R + np.swapaxes(R, 2, 3)).max()) / scale,
        "bianchi": float(np.abs(R + np.einsum("...lijk->...ljki", R)
                                + np.einsum("...lijk->...lkij", R)).max()) / scale,
        "pair_symmetry": float(np.abs(low - np.einsum("...abcd->...cdab", low)).max()) / lscale,
        "base_block": float(np.abs(R[:, b, b, b, b] - Rb).max()) / scale,
        "mixed_fiber_last": float(np.abs(mixed1).max()) / scale,
        "mixed_fiber_first": float(np.abs(mixed2).max()) / scale,
    }


def metric_szabo_batch(m: ExtensionMetric, points, vectors) -> np.ndarray:
    jet = metric_jet(m, points, order=2).curvature()
    return tensors.szabo(jet.nR, np.asarray(vectors, dtype=np.float64))


# ---------------------------------------------------------------- lifted vectors

@dataclass(frozen=True)
class LiftedVector:
    """``X~ = sum alpha_i d_i + sum xi_i d_i'`` with its squared length at a point."""

    base: np.ndarray
    fiber: np.ndarray
    norm: float

    @property
    def components(self) -> np.ndarray:
        return np.concatenate([self.base, self.fiber])

    @property
    def causal(self) -> str:
        for value, tag in ((1.0, "spacelike-unit"), (-1.0, "timelike-unit"), (0.0, "null")):
            if abs(self.norm - value) <= 1e-12 * max(1.0, abs(self.norm)):
                return tag
        return "other"


def metric_szabo_operator(m: ExtensionMetric, p, x) -> np.ndarray:
    """Coordinate matrix of ``Y -> (nabla_X R)(Y, X)X`` on the 4-chart."""
    vec = x.components if isinstance(x, LiftedVector) else np.asarray(x, dtype=np.float64)
    if not np.any(vec):
        raise ValueError("the Szabó operator needs a nonzero vector")
    return metric_szabo_batch(m, _points(m, p), vec[None, :])[0]


def _lift(B: np.ndarray, x: np.ndarray, target: np.ndarray) -> np.ndarray:
    # g(X~, X~) = B(x, x) + 2 <xi, x>; minimal-norm xi along x
    bxx = np.einsum("...ij,...i,...j->...", B, x, x)
    xx = np.einsum("...i,...i->...", x, x)
    return ((target - bxx) / (2.0 * xx))[..., None] * x


def unit_lift(m: ExtensionMetric, p, x_base, target: float = 1.0) -> LiftedVector:
    """Lift a base direction to a unit vector ``g(X~, X~) = target``.

    The normalization is affine-linear in the fiber part; the minimal-norm
    solution is returned.
    """
    if target not in (1, -1):
        raise ValueError("target must be +1 or -1")
    x = np.asarray(x_base, dtype=np.float64)
    if x.shape != (m.n,):
        raise ValueError(f"base direction must have {m.n} components")
    if not np.any(x):
        raise ValueError("fiber-only vectors are null; a unit lift needs a nonzero base part")
    gm = m.matrix_at(p)
    xi = _lift(gm[:m.n, :m.n], x, np.float64(target))
    full = np.concatenate([x, xi])
    return LiftedVector(base=x, fiber=xi, norm=float(full @ gm @ full))


def sample_unit_lifts(m: ExtensionMetric, gmats: np.ndarray, rng: np.random.Generator,
                      per_type: int = LIFTS_PER_CAUSAL_TYPE) -> np.ndarray:
    """``per_type`` spacelike then ``per_type`` timelike unit vectors per point.

    Base parts are uniform unit directions; each fiber part is the
    minimal-norm lift plus a random multiple of the base direction rotated
    by 90 degrees, which leaves the length unchanged.
    """
    n = m.n
    count = len(gmats)
    k = 2 * per_type
    base = unit_directions(rng, count * k, n).reshape(count, k, n)
    target = np.concatenate([np.ones(per_type), -np.ones(per_type)])
    B = np.broadcast_to(gmats[:, None, :n, :n], (count, k, n, n))
    xi = _lift(B, base, target[None, :])
    if n == 2:
        perp = np.stack([-base[..., 1], base[..., 0]], axis=-1)
        xi = xi + rng.standard_normal((count, k, 1)) * perp
    return np.concatenate([base, xi], axis=-1)


# ---------------------------------------------------------------- verdicts

def is_metric_szabo_nilpotent(m: ExtensionMetric, d: SampleDomain,
                              per_type: int = LIFTS_PER_CAUSAL_TYPE) -> Verdict:
    """Sampled nilpotency of the Szabó operator on unit spacelike and timelike vectors."""
    if d.dim != m.dim:
        raise ValueError(f"sample box has {d.dim} axes, the extension has {m.dim}")
    pts = sample_points(d, guard=m.guard_expressions())
    jet = metric_jet(m, pts, order=2)
    curv = jet.curvature()
    vecs = sample_unit_lifts(m, jet.g[0], d.rng(1), per_type)
    mats = tensors.szabo(curv.nR[:, None], vecs)
    scaled = scaled_coefficients(mats).max(axis=-1)
    flat = int(np.argmax(scaled))
    i, j = divmod(flat, vecs.shape[1])
    residual = float(scaled[i, j])
    kernel = np.abs(np.einsum("...lm,...m->...l", mats, vecs)).max(axis=-1)
    kscale = np.maximum(1.0, np.abs(mats).max(axis=(-2, -1)) * np.abs(vecs).max(axis=-1))
    return Verdict(
        name="metric_szabo_nilpotent", outcome=residual <= d.tol, residual=residual,
        samples=int(scaled.size), tol=d.tol, seed=d.seed,
        worst_sample={"point": pts[i], "vector": vecs[i, j],
                      "trace": float(np.trace(mats[i, j])),
                      "kernel_residual": float((kernel / kscale).max())})


@dataclass
class BlockCheck:
    """Residuals of the block form ``[[S, 0], [*, S^t]]`` of the metric Szabó matrix."""

    upper_left: float
    upper_right: float
    lower_right: float
    product_identity: float
    on_zero_section: bool

    def to_dict(self) -> dict:
        return {"upper_left": self.upper_left, "upper_right": self.upper_right,
                "lower_right": self.lower_right, "product_identity": self.product_identity,
                "on_zero_section": self.on_zero_section}

    @property
    def max_residual(self) -> float:
        return max(self.upper_left, self.upper_right, self.lower_right, self.product_identity)


def block_structure_check(m: ExtensionMetric, p, x) -> BlockCheck:
    """Compare the 4x4 Szabó matrix with the base Szabó matrix of ``X = pi_* X~``.

    Blocks are taken in the column convention of :func:`szabo_operator`.
    Points off the zero section are accepted; ``on_zero_section`` records
    which case was measured.
    """
    p = np.asarray(p, dtype=np.float64)
    vec = x.components if isinstance(x, LiftedVector) else np.asarray(x, dtype=np.float64)
    n = m.n
    if not np.any(vec[:n]):
        raise ValueError("the lifted vector needs a nonzero base part")
    big = metric_szabo_operator(m, p, vec)
    small = szabo_operator(m.base, p[:n], vec[:n])
    scale = max(1.0, float(np.abs(big).max()))
    expected = poly_multiply(char_poly(small), char_poly(small.T))
    return BlockCheck(
        upper_left=float(np.abs(big[:n, :n] - small).max()) / scale,
        upper_right=float(np.abs(big[:n, n:]).max()) / scale,
        lower_right=float(np.abs(big[n:, n:] - small.T).max()) / scale,
        product_identity=float(np.abs(char_poly(big) - expected).max()) / scale ** 4,
        on_zero_section=bool(np.all(p[n:] == 0)),
    )


def christoffel_cross_check(m: ExtensionMetric, points) -> dict[str, float]:
    """Largest deviation of each displayed Christoffel family from the
    metric-derived symbols over ``points``."""
    pts = _points(m, points)
    truth = metric_jet(m, pts, order=0).gamma[0]
    out = {}
    cache: dict = {}
    for family, entries in displayed_christoffels(m.base, m.phi).items():
        worst = 0.0
        for (c, a, b), e in entries.items():
            vals = evaluate_batch(e, pts, cache=cache)
            worst = max(worst, float(np.abs(vals - truth[:, c, a, b]).max()))
        out[family] = worst
    return out
