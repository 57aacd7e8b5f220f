import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msk.errors import AsymmetricMatrix, BadRatios, DimensionMismatch, NegativeEntry, SingularMatrix
from msk.model import (
    Definiteness,
    ModelParams,
    SpeciesStructure,
    bipartite,
    classify_definiteness,
    matrix_abs_V,
    quad_form_P,
    quad_form_Q,
    realized_structure,
    sk,
    species_sizes,
    two_species_pd,
)


@pytest.mark.parametrize("lam,d2,err", [
    ([0.5, 0.5], [[1, 2], [1, 1]], AsymmetricMatrix),
    ([0.5, 0.5], [[1, -1], [-1, 1]], NegativeEntry),
    ([0.5, 0.5], [[1, 1], [1, 1]], SingularMatrix),
    ([0.6, 0.6], [[1, 0], [0, 1]], BadRatios),
    ([1.0, 0.0], [[1, 0], [0, 1]], BadRatios),
    ([0.5, 0.5], [[1.0]], DimensionMismatch),
])
def test_validation_rejects(lam, d2, err):
    with pytest.raises(err):
        SpeciesStructure(lam, d2)


def test_arrays_are_immutable():
    s = two_species_pd()
    with pytest.raises(ValueError):
        s.delta2[0, 0] = 3.0


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(-1.0, 0.0)
    with pytest.raises(ValueError):
        ModelParams(1.0, float("nan"))


def test_roundtrip_dict():
    s = two_species_pd()
    t = SpeciesStructure.from_dict(s.to_dict())
    assert np.array_equal(s.lam, t.lam) and np.array_equal(s.delta2, t.delta2)
    with pytest.raises(DimensionMismatch):
        SpeciesStructure.from_dict({**s.to_dict(), "m": 3})


def test_definiteness():
    assert classify_definiteness(sk()).tag is Definiteness.POSITIVE_DEFINITE
    assert classify_definiteness(two_species_pd()).alpha == 1
    c = classify_definiteness(bipartite())
    assert c.tag is Definiteness.INDEFINITE and c.alpha == 2


def test_bipartite_forms_by_hand():
    b = bipartite()
    x = np.array([1.0, 0.0])
    # Lambda D Lambda = [[0, 1/4], [1/4, 0]]
    assert quad_form_Q(b, x) == 0.0
    assert quad_form_Q(b, [1.0, 1.0]) == pytest.approx(0.5)
    # |Lambda^1/2 D Lambda^1/2| = (1/2) I, so P(x) = (1/2) * (1/2) * |x|^2
    assert np.allclose(matrix_abs_V(b), 0.5 * np.eye(2))
    assert quad_form_P(b, x) == pytest.approx(0.25)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_P_dominates_Q(x):
    s = two_species_pd()
    assert quad_form_P(s, x) >= abs(quad_form_Q(s, x)) - 1e-12
    b = bipartite()
    assert quad_form_P(b, x) >= abs(quad_form_Q(b, x)) - 1e-12


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=5), st.integers(1, 40))
def test_species_sizes_sum(w, N):
    lam = np.array(w) / sum(w)
    sizes = species_sizes(lam, N)
    assert sizes.sum() == N and np.all(sizes >= 0)
    assert np.all(np.abs(sizes - lam * N) < 1)


def test_realized_structure():
    r = realized_structure(two_species_pd(), 15)
    assert np.allclose(r.lam, [9 / 15, 6 / 15])
