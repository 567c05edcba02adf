"""Shared fixtures and the randomized field corpus.

The term tables below produce globally smooth fields on each chart, which
matters for the integral tests: every scalar term extends smoothly across
coordinate seams and poles, and every nonperiodic vector component carries a
factor vanishing at the axis ends, so integrals of div(xi) and of lap(f) are
genuine surface-term zeros rather than numerically small values.
"""

import numpy as np
import pytest
from hypothesis import settings

from solitonlab.geometry import scalar_field, vector_field

settings.register_profile("solitonlab", database=None, max_examples=25, deadline=None)
settings.load_profile("solitonlab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


SCALAR_TERMS = {
    "sphere2": ("cos(th)", "cos(th)^2", "sin(th)*cos(ph)", "sin(th)*sin(ph)"),
    "warped": ("cos(th)", "cos(th)^2", "sin(th)*cos(ph)", "sin(th)*sin(ph)"),
    "sphere3": (
        "cos(2*eta)",
        "cos(eta)*cos(x1)",
        "sin(eta)*sin(x2)",
        "cos(eta)*sin(x1)*sin(eta)*cos(x2)",
    ),
    "torus2": ("sin(x)", "cos(y)", "sin(x)*cos(y)", "cos(2*x)"),
    "torus3": ("sin(x)", "cos(y)*sin(z)", "cos(x)*cos(z)", "sin(2*y)"),
    "s2xs1": ("cos(th)", "sin(th)*cos(ph)", "cos(ps)", "cos(th)*sin(ps)"),
}

# Per-component term tables; nonperiodic components stay in the class whose
# divergence the quadrature rules integrate exactly.
VECTOR_TERMS = {
    "sphere2": (
        ("sin(th)", "sin(th)*cos(th)", "sin(th)*cos(ph)", "sin(th)*sin(ph)"),
        SCALAR_TERMS["sphere2"],
    ),
    "warped": (
        ("sin(th)", "sin(th)*cos(th)", "sin(th)*cos(ph)", "sin(th)*sin(ph)"),
        SCALAR_TERMS["warped"],
    ),
    "sphere3": (
        (
            "sin(2*eta)",
            "sin(2*eta)*cos(2*eta)",
            "sin(2*eta)*cos(x1)",
            "sin(2*eta)*sin(x2)",
        ),
        SCALAR_TERMS["sphere3"],
        SCALAR_TERMS["sphere3"],
    ),
    "torus2": (SCALAR_TERMS["torus2"], SCALAR_TERMS["torus2"]),
    "torus3": (
        SCALAR_TERMS["torus3"],
        SCALAR_TERMS["torus3"],
        SCALAR_TERMS["torus3"],
    ),
    "s2xs1": (
        ("sin(th)", "sin(th)*cos(th)", "sin(th)*cos(ps)", "sin(th)*sin(ph)"),
        SCALAR_TERMS["s2xs1"],
        SCALAR_TERMS["s2xs1"],
    ),
}


def lin(rng, terms):
    coeffs = rng.uniform(-0.6, 0.6, len(terms) + 1)
    parts = [f"{float(coeffs[0]):.3f}"]
    parts += [f"{float(c):.3f}*{t}" for c, t in zip(coeffs[1:], terms)]
    return " + ".join(parts)


def random_scalar(ch, rng):
    return scalar_field(ch, lin(rng, SCALAR_TERMS[ch.name]))


def random_vector(ch, rng):
    return vector_field(
        ch, tuple(lin(rng, terms) for terms in VECTOR_TERMS[ch.name])
    )
