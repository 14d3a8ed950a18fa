"""Small dense matrix numerics and seeded sampling.

Matrices here are at most 4x4, and most functions accept a leading batch
axis so a whole sample of matrices can be processed in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .expr import DomainError, Expr, evaluate_batch

DEFAULT_TOL = 1e-8
DEFAULT_SAMPLES = 200
DEFAULT_SEED = 0xC0FFEE


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    if a.shape[-1] not in (2, 3, 4):
        raise ValueError("matrix size must be 2, 3 or 4")
    return a


def char_poly(m) -> np.ndarray:
    """Coefficients ``(c1, ..., cn)`` of ``det(lambda*I - m) = lambda^n + c1 lambda^(n-1) + ... + cn``.

    General sizes use the Faddeev-LeVerrier recursion.  For 2x2 matrices the
    recursion reduces to ``(-trace, det)`` and that closed form is returned
    directly so the result is exactly ``(-(a+d), a*d - b*c)``.
    Works on a single matrix or on a stack with shape ``(..., n, n)``.
    """
    a = as_matrix(m)
    n = a.shape[-1]
    if n == 2:
        tr = a[..., 0, 0] + a[..., 1, 1]
        det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
        return np.stack([-tr, det], axis=-1)
    eye = np.broadcast_to(np.eye(n), a.shape)
    coeffs = []
    mk = np.zeros_like(a)
    c_prev = np.ones(a.shape[:-2])
    for k in range(1, n + 1):
        mk = a @ mk + c_prev[..., None, None] * eye
        ck = -np.trace(a @ mk, axis1=-2, axis2=-1) / k
        coeffs.append(ck)
        c_prev = ck
    return np.stack(coeffs, axis=-1)


def scaled_coefficients(m) -> np.ndarray:
    """``|c_k| / max(1, ||m||_F)^k``, the scale-aware size of each coefficient."""
    a = as_matrix(m)
    coeffs = char_poly(a)
    n = a.shape[-1]
    scale = np.maximum(1.0, np.linalg.norm(a, axis=(-2, -1)))
    powers = scale[..., None] ** np.arange(1, n + 1)
    return np.abs(coeffs) / powers


def is_nilpotent(m, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    """Nilpotency test on characteristic-polynomial coefficients.

    True iff every ``|c_k| <= tol * max(1, ||m||_F)^k``.  Returns the verdict
    and the largest scaled coefficient (over the whole batch, if batched).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    residual = float(np.max(scaled_coefficients(m)))
    return residual <= tol, residual


def poly_multiply(p, q) -> np.ndarray:
    """Product of two monic polynomials given as coefficient tails ``(c1..cn)``."""
    full = np.convolve(np.concatenate([[1.0], p]), np.concatenate([[1.0], q]))
    return full[1:]


def cayley_hamilton_residual(m) -> float:
    a = as_matrix(m)
    n = a.shape[-1]
    coeffs = char_poly(a)
    acc = np.eye(n)
    for c in coeffs:
        acc = a @ acc + c * np.eye(n)
    return float(np.linalg.norm(acc))


# ------------------------------------------------------------ finite differences

def _step(x: float, order: int) -> float:
    base = 1e-3 if order == 1 else 5e-3
    return base * max(1.0, abs(x))


def fd_partial(f: Callable[[np.ndarray], float], p: Sequence[float], i: int,
               order: int = 1, h: float | None = None) -> float:
    """Central-difference partial derivative of ``f`` along axis ``i``.

    One Richardson step combines step sizes ``h`` and ``h/2``, cancelling
    the ``h^2`` error term; the result is accurate to ``O(h^4)``.  ``order``
    is 1 or 2 (pure second derivative); mixed partials come from nesting
    calls.  Non-finite evaluations raise :class:`DomainError`.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    p = np.asarray(p, dtype=np.float64)
    if h is None:
        h = _step(p[i], order)

    def at(offset: float) -> float:
        q = p.copy()
        q[i] += offset
        value = float(f(q))
        if not np.isfinite(value):
            raise DomainError(None, q)
        return value

    def central(step: float) -> float:
        if order == 1:
            return (at(step) - at(-step)) / (2 * step)
        return (at(step) - 2 * at(0.0) + at(-step)) / step ** 2

    coarse = central(h)
    fine = central(h / 2)
    return (4 * fine - coarse) / 3


# ------------------------------------------------------------ sampling

@dataclass(frozen=True)
class SampleDomain:
    """Axis-aligned box, sample count, seed and relative tolerance."""

    box: tuple[tuple[float, float], ...]
    count: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        object.__setattr__(self, "box", box)
        if not box:
            raise ValueError("box must have at least one axis")
        for lo, hi in box:
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                raise ValueError(f"empty or invalid interval [{lo}, {hi}]")
        if self.count < 1:
            raise ValueError("sample count must be at least 1")
        if not (0 <= self.seed < 2 ** 64):
            raise ValueError("seed must fit in 64 bits")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")

    @property
    def dim(self) -> int:
        return len(self.box)

    @classmethod
    def cube(cls, dim: int, lo: float = -1.0, hi: float = 1.0, **kw) -> "SampleDomain":
        return cls(box=((lo, hi),) * dim, **kw)

    def with_box(self, box) -> "SampleDomain":
        return SampleDomain(box=tuple(box), count=self.count, seed=self.seed, tol=self.tol)

    def rng(self, stream: int = 0) -> np.random.Generator:
        # PCG64 seeded from (seed, stream) so independent draws never overlap
        return np.random.Generator(np.random.PCG64([self.seed, stream]))


GUARD_RADIUS = 1e-6


class SamplingError(DomainError):
    """The guard expressions are non-finite on (almost) the whole box."""

    def __init__(self, box):
        self.subtree = None
        self.point = ()
        self.box = tuple(tuple(axis) for axis in box)
        ArithmeticError.__init__(
            self, f"could not draw enough admissible points in box {list(self.box)}; "
                  "the expressions are undefined on most of it")


def sample_points(d: SampleDomain, guard: Sequence[Expr] = (),
                  stream: int = 0, max_rounds: int = 100) -> np.ndarray:
    """Deterministic uniform points in ``d.box``, shape ``(d.count, d.dim)``.

    Points at which any ``guard`` expression is non-finite, or becomes
    non-finite within ``GUARD_RADIUS`` along any axis, are rejected and
    redrawn from the same stream.
    """
    rng = d.rng(stream)
    lo = np.array([a for a, _ in d.box])
    hi = np.array([b for _, b in d.box])
    kept: list[np.ndarray] = []
    total = 0
    for _ in range(max_rounds):
        need = d.count - total
        cand = lo + (hi - lo) * rng.random((max(need, 1), d.dim))
        if guard:
            cand = cand[_guard_mask(cand, guard)]
        kept.append(cand[:need])
        total += len(kept[-1])
        if total >= d.count:
            return np.concatenate(kept)
    raise SamplingError(d.box)


def _guard_mask(points: np.ndarray, guard: Sequence[Expr]) -> np.ndarray:
    ok = np.ones(len(points), dtype=bool)
    probes = [points]
    for axis in range(points.shape[1]):
        for sign in (1.0, -1.0):
            q = points.copy()
            q[:, axis] += sign * GUARD_RADIUS
            probes.append(q)
    for q in probes:
        cache: dict = {}
        for e in guard:
            ok &= np.isfinite(evaluate_batch(e, q, check=False, cache=cache))
    return ok


def unit_directions(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Uniform directions on the Euclidean unit sphere in ``dim`` coordinates."""
    v = rng.standard_normal((count, dim))
    norms = np.linalg.norm(v, axis=1)
    while np.any(norms == 0):  # pragma: no cover - measure zero
        bad = norms == 0
        v[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(v, axis=1)
    return v / norms[:, None]


# ------------------------------------------------------------ verdicts

@dataclass
class Verdict:
    """Outcome of a sampled check together with the evidence behind it."""

    name: str
    outcome: bool
    residual: float
    samples: int
    tol: float
    seed: int
    worst_sample: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.outcome and not self.residual <= self.tol:
            raise ValueError("a passing verdict must have residual <= tol")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "outcome": bool(self.outcome),
            "residual": float(self.residual),
            "samples": int(self.samples),
            "tol": float(self.tol),
            "seed": int(self.seed),
            "worst_sample": {k: _plain(v) for k, v in self.worst_sample.items()},
            "notes": list(self.notes),
        }


def _plain(value):
    if isinstance(value, np.ndarray):
        return [float(x) for x in value.ravel()]
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    return value
