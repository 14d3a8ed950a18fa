import numpy as np

from conftest import gallery, p, random_points
from szabo_forge import tensors
from szabo_forge.expr import evaluate


def test_derivative_tower_keys_are_sorted_multi_indices():
    tower = tensors.derivative_tower(p("u1^3*u2"), 2, 2)
    assert set(tower) == {(), (0,), (1,), (0, 0), (0, 1), (1, 1)}
    assert evaluate(tower[(0, 1)], (2.0, 5.0)) == 12.0


def test_expression_jet_shapes_and_symmetry():
    exprs = [[p("u1*u2^2"), p("sin(u1)")], [p("1"), p("u2^3")]]
    pts = random_points(((-1, 1), (-1, 1)), 6)
    T, dT, d2T = tensors.expression_jet(exprs, pts, 2)
    assert T.shape == (6, 2, 2) and dT.shape == (6, 2, 2, 2) and d2T.shape == (6, 2, 2, 2, 2)
    np.testing.assert_array_equal(d2T, np.swapaxes(d2T, -1, -2))
    np.testing.assert_allclose(dT[:, 0, 0, 1], 2 * pts[:, 0] * pts[:, 1])


def test_curvature_antisymmetry_is_exact():
    c, box = gallery()["negative"]
    G, dG = c.christoffel_jet(random_points(box, 10), 1)
    R = tensors.curvature(G, dG)
    assert np.array_equal(R, -np.swapaxes(R, 2, 3))


def test_szabo_kernel_contains_direction():
    c, box = gallery()["wong_u1sq_u2"]
    pts = random_points(box, 10)
    jet = c.curvature_jet(pts)
    x = np.random.default_rng(0).normal(size=(10, 2))
    S = tensors.szabo(jet.nR, x)
    np.testing.assert_allclose(np.einsum("mlk,mk->ml", S, x), 0.0, atol=1e-12)
