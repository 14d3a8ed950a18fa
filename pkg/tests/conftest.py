import numpy as np
import pytest

from szabo_forge.affine import AffineConnection, family_connection, wong_connection
from szabo_forge.expr import parse
from szabo_forge.smallnum import SampleDomain

U = ("u1", "u2")


def p(text):
    return parse(text, U)


def gallery():
    """The five reference surface connections with their sampling boxes."""
    unit = ((-1.0, 1.0), (-1.0, 1.0))
    return {
        "flat": (AffineConnection.flat(), unit),
        "wong_u1u2": (wong_connection(p("u1*u2")), unit),
        # d2 d1 phi = 2 u1 must stay away from 0 for the Ricci tensor to be nonzero
        "wong_u1sq_u2": (wong_connection(p("u1^2*u2")), ((0.5, 1.5), (-1.0, 1.0))),
        "family_sin": (family_connection(p("sin(u1)"), p("1")), unit),
        "negative": (AffineConnection.from_strings({(0, 0, 0): "u2"}), unit),
    }


EXPECTED_SZABO = {"flat": True, "wong_u1u2": True, "wong_u1sq_u2": True,
                  "family_sin": True, "negative": False}


@pytest.fixture(params=sorted(gallery()))
def gallery_case(request):
    c, box = gallery()[request.param]
    return request.param, c, box


def domain(box, count=200, seed=0xC0FFEE, tol=1e-8):
    return SampleDomain(box=box, count=count, seed=seed, tol=tol)


def random_points(box, count, seed=7):
    rng = np.random.default_rng(seed)
    lo = np.array([a for a, _ in box])
    hi = np.array([b for _, b in box])
    return lo + (hi - lo) * rng.random((count, len(box)))
