"""Independent reference computations for the tests.

Everything here uses plain loops and finite differences of the Christoffel
symbols, never the symbolic jets or the einsum kernels of the package.
"""

import itertools

import numpy as np

from szabo_forge.expr import evaluate
from szabo_forge.smallnum import fd_partial


def christoffel(c, p):
    n = c.dim
    G = np.zeros((n, n, n))
    for k, i, j in itertools.product(range(n), repeat=3):
        G[k, i, j] = evaluate(c.gamma(k, i, j), p)
    return G


def christoffel_derivative(c, p):
    n = c.dim
    dG = np.zeros((n, n, n, n))  # dG[k, i, j, a] = d_a Gamma^k_ij
    for k, i, j, a in itertools.product(range(n), repeat=4):
        e = c.gamma(k, i, j)
        dG[k, i, j, a] = fd_partial(lambda q: evaluate(e, q), p, a)
    return dG


def curvature(c, p):
    """R[l, i, j, k]: R(d_i, d_j) d_k = R[l, i, j, k] d_l."""
    n = c.dim
    G, dG = christoffel(c, p), christoffel_derivative(c, p)
    R = np.zeros((n,) * 4)
    for l, i, j, k in itertools.product(range(n), repeat=4):
        v = dG[l, j, k, i] - dG[l, i, k, j]
        for m in range(n):
            v += G[l, i, m] * G[m, j, k] - G[l, j, m] * G[m, i, k]
        R[l, i, j, k] = v
    return R


def ricci(c, p):
    R = curvature(c, p)
    n = c.dim
    return np.array([[sum(R[i, i, j, k] for i in range(n)) for k in range(n)]
                     for j in range(n)])


def nabla_curvature(c, p):
    """nR[a, l, i, j, k] = (nabla_a R)^l_ijk; d_a R by differencing :func:`curvature`."""
    n = c.dim
    G, R = christoffel(c, p), curvature(c, p)
    dR = np.zeros((n,) * 5)
    for a in range(n):
        for idx in itertools.product(range(n), repeat=4):
            dR[a][idx] = fd_partial(lambda q: curvature(c, q)[idx], p, a, h=1e-3)
    out = dR.copy()
    for a, l, i, j, k in itertools.product(range(n), repeat=5):
        for m in range(n):
            out[a, l, i, j, k] += (G[l, a, m] * R[m, i, j, k] - G[m, a, i] * R[l, m, j, k]
                                   - G[m, a, j] * R[l, i, m, k] - G[m, a, k] * R[l, i, j, m])
    return out


def szabo(c, p, x):
    """Matrix of Y -> (nabla_X R)(Y, X) X; column m is the image of d_m."""
    nR = nabla_curvature(c, p)
    n = c.dim
    S = np.zeros((n, n))
    for l, m in itertools.product(range(n), repeat=2):
        S[l, m] = sum(x[a] * x[j] * x[k] * nR[a, l, m, j, k]
                      for a, j, k in itertools.product(range(n), repeat=3))
    return S


def scaled_error(actual, expected):
    actual, expected = np.asarray(actual), np.asarray(expected)
    return float(np.abs(actual - expected).max() / max(1.0, np.abs(expected).max()))
