import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from msk.errors import DimensionTooLarge, NotIndefinite2x2, OnlyZeroFound, ZeroField
from msk.model import ModelParams, SpeciesStructure, bipartite, sk, two_species_pd
from msk.rs_solver import (
    Method,
    find_nonzero_root_h0,
    fixed_point_residual,
    grid_scan_roots,
    jacobian_phi,
    phi,
    solve,
    solve_indefinite_2species,
    solve_newton,
    solve_picard,
)


def scalar_oracle(beta, h):
    def E(q):
        f = lambda x: math.tanh(beta * math.sqrt(q) * x + h) ** 2 * math.exp(-x * x / 2)
        return quad(f, -40, 40, epsabs=1e-15, limit=400)[0] / math.sqrt(2 * math.pi)
    return brentq(lambda q: E(q) - q, 1e-9, 1 - 1e-12, xtol=1e-15)


@pytest.mark.parametrize("beta,h", [(0.5, 0.3), (0.9, 0.1), (1.5, 0.5), (2.0, 1.0)])
def test_sk_matches_scalar_oracle(beta, h):
    sol = solve(sk(), ModelParams(beta, h))
    assert sol.q[0] == pytest.approx(scalar_oracle(beta, h), abs=1e-10)
    assert sol.residual < 1e-12


def test_solution_fields(reference):
    p = ModelParams(0.6, 0.4)
    sol = solve(reference, p)
    assert np.allclose(sol.Qvec, reference.delta2_lam @ sol.q)
    assert np.allclose(sol.gamma, 1 - 2 * sol.q + sol.qhat)
    assert np.allclose(sol.gamma_p, 1 - 4 * sol.q + 3 * sol.qhat)
    assert np.allclose(sol.gamma_pp, 2 * sol.q + sol.q ** 2 - 3 * sol.qhat)
    assert np.all((sol.q >= 0) & (sol.q <= 1))
    assert fixed_point_residual(reference, p, sol.q) < 1e-12


def test_picard_newton_agree():
    s, p = two_species_pd(), ModelParams(0.8, 0.3)
    a, b = solve_picard(s, p), solve_newton(s, p)
    assert np.allclose(a.q, b.q, atol=1e-11)
    assert a.method is Method.PICARD and b.method is Method.NEWTON
    assert b.unique_certified == (0.8 < 1 / math.sqrt(1.2))


def test_jacobian_fd():
    s, p = two_species_pd(), ModelParams(1.1, 0.4)
    q = np.array([0.3, 0.5])
    J = jacobian_phi(s, p, q)
    d = 1e-6
    fd = np.column_stack([(phi(s, p, q + d * e) - phi(s, p, q - d * e)) / (2 * d) for e in np.eye(2)])
    assert np.allclose(J, fd, atol=1e-8)


def test_zero_field_below_beta_c():
    sol = solve(two_species_pd(), ModelParams(0.5, 0.0))
    assert np.all(sol.q == 0) and sol.unique_certified


def test_beta_zero():
    sol = solve(bipartite(), ModelParams(0.0, 0.7))
    assert np.allclose(sol.q, math.tanh(0.7) ** 2)


def test_monotone_indefinite_matches_newton():
    s = SpeciesStructure([0.3, 0.7], [[0.5, 1.2], [1.2, 0.4]])
    for beta, h in [(0.8, 0.2), (1.5, 0.5), (2.5, 0.1)]:
        p = ModelParams(beta, h)
        m = solve_indefinite_2species(s, p)
        assert m.unique_certified and m.residual < 1e-11
        n = solve_newton(s, p, q0=m.q)
        assert np.allclose(m.q, n.q, atol=1e-10)


def test_monotone_rejects():
    with pytest.raises(NotIndefinite2x2):
        solve_indefinite_2species(two_species_pd(), ModelParams(1.0, 0.3))
    with pytest.raises(ZeroField):
        solve_indefinite_2species(bipartite(), ModelParams(1.0, 0.0))


def test_nonzero_root_h0():
    # Delta^2 Lambda has the all-ones vector as Perron vector with eigenvalue 1,
    # so the root is the scalar SK root in both species.
    s = SpeciesStructure([0.5, 0.5], [[1.5, 0.5], [0.5, 1.5]])
    sol = find_nonzero_root_h0(s, 1.5)
    assert np.allclose(sol.q, scalar_oracle(1.5, 0.0), atol=1e-10)
    assert not sol.unique_certified
    with pytest.raises(OnlyZeroFound):
        find_nonzero_root_h0(s, 0.9)


def test_grid_scan():
    roots = grid_scan_roots(bipartite(), ModelParams(1.0, 0.4), 15)
    assert len(roots) == 1
    ref = solve(bipartite(), ModelParams(1.0, 0.4))
    assert np.allclose(roots[0].q, ref.q, atol=1e-9)
    s4 = SpeciesStructure([0.25] * 4, np.eye(4))
    with pytest.raises(DimensionTooLarge):
        grid_scan_roots(s4, ModelParams(1.0, 0.4))


def test_grid_scan_h0_finds_both_roots():
    roots = grid_scan_roots(sk(), ModelParams(1.5, 0.0), 21)
    qs = sorted(float(r.q[0]) for r in roots)
    assert qs[0] == pytest.approx(0.0, abs=1e-9)
    assert qs[-1] == pytest.approx(scalar_oracle(1.5, 0.0), abs=1e-9)
