import math

import numpy as np
import pytest

from msk.errors import NotPositiveDefinite
from msk.model import ModelParams, SpeciesStructure, bipartite, sk, two_species_pd
from msk.rs_solver import solve
from msk.spectral_phase import (
    Region,
    beta_0,
    beta_at,
    beta_c,
    classify_phase,
    concentration_bound,
    hv_matrix,
    perron_direction,
    rho_gamma,
    rsb_certificate,
    spectral_abscissa,
    spectral_radius,
)


def test_beta_c_by_hand():
    assert beta_c(sk()) == pytest.approx(1.0)
    assert beta_c(bipartite()) == pytest.approx(math.sqrt(2))
    # Delta^2 Lambda = [[0.9, 0.4], [0.6, 0.4]] has top eigenvalue 1.2
    assert beta_c(two_species_pd()) == pytest.approx(1 / math.sqrt(1.2), rel=1e-14)
    assert beta_0(sk()) == pytest.approx(0.5)
    assert beta_0(bipartite()) == pytest.approx(math.sqrt(2) / math.sqrt(8))


def test_spectral_helpers():
    A = np.array([[-1.0, 5.0], [0.0, -2.0]])
    assert spectral_radius(A) == pytest.approx(2.0)
    assert spectral_abscissa(A) == pytest.approx(-1.0)


def test_sk_at_line():
    # the scalar AT line: beta^2 E sech^4 = 1
    sol = solve(sk(), ModelParams(1.2, 0.3))
    assert beta_at(sk(), sol) == pytest.approx(1 / math.sqrt(sol.gamma[0]))
    assert rho_gamma(sk(), sol.gamma) == pytest.approx(sol.gamma[0])


def test_beta_at_equals_beta_c_at_zero_field(reference):
    sol = solve(reference, ModelParams(0.3, 0.0))
    assert beta_at(reference, sol) == pytest.approx(beta_c(reference), rel=1e-12)


def test_perron_direction_quadratic_form():
    s = two_species_pd()
    sol = solve(s, ModelParams(1.3, 0.3))
    x, rho = perron_direction(s, sol.gamma)
    assert np.all(x > 0)
    assert rho == pytest.approx(rho_gamma(s, sol.gamma), rel=1e-12)
    cert = rsb_certificate(s, sol, 1.3)
    assert cert.quadratic_form == pytest.approx(rho * (1.3 ** 2 * rho - 1), rel=1e-10)
    assert cert.certified == (1.3 ** 2 * rho > 1)
    H = hv_matrix(s, sol, 1.3)
    assert np.allclose(H, H.T)


def test_hv_requires_pd():
    sol = solve(bipartite(), ModelParams(1.0, 0.3))
    with pytest.raises(NotPositiveDefinite):
        hv_matrix(bipartite(), sol, 1.0)


def test_concentration_bound():
    s = sk()
    # m = 1: V = 1, bound = (1 - 2 eta - 4 beta^2)^(-1/2)
    assert concentration_bound(s, ModelParams(0.2, 0.1), 0.1) == pytest.approx((1 - 0.2 - 0.16) ** -0.5)
    assert concentration_bound(s, ModelParams(0.5, 0.1), 0.1) == math.inf


def test_classify_regions():
    s = two_species_pd()
    assert classify_phase(s, ModelParams(0.1, 0.5)).region is Region.PROVED_RS_THM1
    assert classify_phase(s, ModelParams(0.8, 0.0)).region is Region.PROVED_RS_ZERO_FIELD
    assert classify_phase(s, ModelParams(2.5, 0.3)).region is Region.RSB_CERTIFIED
    b = classify_phase(bipartite(), ModelParams(3.0, 0.05))
    assert b.region is Region.INDEFINITE_CONJECTURAL_RSB and b.conjectural
    d = classify_phase(s, ModelParams(0.6, 0.5)).as_dict()
    assert d["region"] == "BelowATUnproven" and set(d) >= {"beta_c", "beta_at", "notes"}


def test_rsb_region_monotone_in_beta():
    s = two_species_pd()
    flags = [classify_phase(s, ModelParams(b, 0.3)).region is Region.RSB_CERTIFIED
             for b in np.linspace(0.3, 2.5, 12)]
    first = flags.index(True)
    assert all(flags[first:]) and not any(flags[:first])


def test_asymmetric_similarity_agrees():
    s = SpeciesStructure([0.2, 0.3, 0.5], [[1.0, 0.3, 0.2], [0.3, 2.0, 0.5], [0.2, 0.5, 0.7]])
    direct = max(abs(np.linalg.eigvals(s.delta2_lam)))
    assert beta_c(s) == pytest.approx(direct ** -0.5, rel=1e-12)
