import numpy as np
import pytest

from conftest import gallery, p, random_points
from szabo_forge.affine import family_connection
from szabo_forge.expr import ZERO, Var, diff, evaluate, evaluate_batch, parse
from szabo_forge.extension import (CHRISTOFFEL_FAMILIES, SymmetricBilinearSpec, deformed_extension,
                                   fiber_coordinate_names, inverse_metric_at, displayed_christoffels,
                                   signature_at)

U4 = ("u1", "u2", "u3", "u4")
PHI = {(0, 0): "u1^2 + u2", (0, 1): "u1*u2", (1, 1): "3 - u2^3"}
BOX4 = ((-1.0, 1.0),) * 4


def family_extension():
    c = family_connection(p("sin(u1)"), p("1"))
    phi = SymmetricBilinearSpec.from_strings(PHI, ("u1", "u2"))
    return c, phi, deformed_extension(c, phi)


def test_fiber_names():
    assert fiber_coordinate_names(("u1", "u2")) == ("u3", "u4")
    assert fiber_coordinate_names(("x", "y")) == ("x_star", "y_star")


def test_family_entries_match_closed_form():
    _, _, m = family_extension()
    expected = {
        (0, 0): parse("u1^2 + u2 - 2*u4*sin(u1)", U4),
        (0, 1): parse("u1*u2 - 2*u4*1", U4),
        (1, 1): parse("3 - u2^3", U4),
    }
    pts = random_points(BOX4, 25)
    for (i, j), e in expected.items():
        ours = evaluate_batch(m.block(i, j), pts)
        assert np.abs(ours - evaluate_batch(e, pts)).max() <= 1e-13
        assert np.abs(evaluate_batch(m.block(j, i), pts) - ours).max() == 0.0
    for a in range(4):
        for b in range(4):
            if a >= 2 and b >= 2:
                assert m.block(a, b) == ZERO
            if {a, b} in ({0, 2}, {1, 3}):
                assert evaluate(m.block(a, b), (0.1, 0.2, 0.3, 0.4)) == 1.0


@pytest.mark.parametrize("name", sorted(gallery()))
def test_signature_and_inverse(name):
    c, box = gallery()[name]
    m = deformed_extension(c)
    for q in random_points(tuple(box) + ((-1, 1), (-1, 1)), 25):
        assert signature_at(m, q) == (2, 2)
        err = np.abs(m.matrix_at(q) @ inverse_metric_at(m, q) - np.eye(4)).max()
        assert err <= 1e-13


def test_metric_is_linear_in_fiber():
    _, _, m = family_extension()
    pts = random_points(BOX4, 10)
    for row in m.entries:
        for e in row:
            for a in (2, 3):
                for b in (2, 3):
                    assert np.all(evaluate_batch(diff(diff(e, a), b), pts) == 0.0)


def test_phi_shift_changes_only_base_block():
    c, phi, m = family_extension()
    m0 = deformed_extension(c)
    pts = random_points(BOX4, 10)
    diff_ = m.matrices(pts) - m0.matrices(pts)
    assert np.all(diff_[:, 2:, :] == 0) and np.all(diff_[:, :, 2:] == 0)
    np.testing.assert_allclose(diff_[:, 0, 1],
                               evaluate_batch(phi.component(1, 0), pts), atol=1e-15)


def test_phi_validation():
    with pytest.raises(ValueError):
        SymmetricBilinearSpec(2, {(1, 0): p("u1")})
    with pytest.raises(ValueError):
        SymmetricBilinearSpec(2, {(0, 0): Var(3, "u4")})
    with pytest.raises(ValueError):
        deformed_extension(gallery()["flat"][0], fiber_names=("u1", "u5"))


def test_displayed_families_cover_every_index():
    c, phi, _ = family_extension()
    fam = displayed_christoffels(c, phi)
    assert tuple(fam) == CHRISTOFFEL_FAMILIES
    keys = [k for f in fam.values() for k in f]
    assert len(keys) == len(set(keys)) == 64
