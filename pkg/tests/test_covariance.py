import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_continuous_lyapunov

from msk.covariance import (
    constant_matrices,
    finite_n_residual,
    lyapunov_integral,
    lyapunov_kron,
    rational_inverse,
    sigma_closed_form,
    sigma_lyapunov,
    solve_lyapunov,
    sym,
)
from msk.errors import NotStable, StabilityViolated
from msk.model import ModelParams, bipartite, sk, two_species_pd
from msk.rs_solver import solve


def stable_matrix(rng, m):
    A = rng.normal(size=(m, m))
    shift = max(np.linalg.eigvals(A).real) + rng.uniform(0.1, 2.0)
    return A - shift * np.eye(m)


def scipy_oracle(A, C):
    # sym(A X) = -C  <=>  A X + X A^T = -2C for symmetric X
    return solve_continuous_lyapunov(A, -2 * C)


@pytest.mark.parametrize("m", [1, 2, 3, 5])
def test_lyapunov_against_scipy(rng, m):
    for _ in range(5):
        A = stable_matrix(rng, m)
        B = rng.normal(size=(m, m))
        C = B @ B.T
        ref = scipy_oracle(A, C)
        assert np.allclose(lyapunov_kron(A, C), ref, atol=1e-9)
        assert np.allclose(lyapunov_integral(A, C), ref, atol=1e-8 * max(1, abs(ref).max()))
        assert np.allclose(solve_lyapunov(A, C), ref, atol=1e-8 * max(1, abs(ref).max()))


def test_lyapunov_unstable():
    with pytest.raises(NotStable):
        solve_lyapunov(np.array([[0.1]]), np.array([[1.0]]))


def test_v_inverse_exact():
    V = constant_matrices().V
    Vi = rational_inverse(V)
    prod = [[sum(int(V[i, k]) * Vi[k][j] for k in range(3)) for j in range(3)] for i in range(3)]
    assert prod == [[int(i == j) for j in range(3)] for i in range(3)]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_sym_properties(seed):
    r = np.random.default_rng(seed)
    M = r.normal(size=(3, 3))
    S = sym(M)
    assert np.allclose(S, S.T) and np.allclose(sym(S), S)


@pytest.mark.parametrize("name,beta,h", [("sk", 0.5, 0.3), ("pd2", 0.5, 0.4), ("bipartite", 0.7, 0.2)])
def test_sigma_solves_limit_equation(name, beta, h):
    s = {"sk": sk, "pd2": two_species_pd, "bipartite": bipartite}[name]()
    sol = solve(s, ModelParams(beta, h))
    cov = sigma_closed_form(s, sol, beta)
    # the limiting equations are linear: N * residual(Sigma / N) must vanish for every N
    for N in (10, 1000):
        res = finite_n_residual(s, sol, beta, *(x / N for x in cov.Sigma), N)
        assert max(abs(r).max() for r in res) * N < 1e-9
    alt = sigma_lyapunov(s, sol, beta)
    for a, b in zip(cov.Sigma, alt.Sigma):
        assert np.allclose(a, b, atol=1e-8)
    for x in cov.Sigma:
        assert np.allclose(x, x.T)


def test_sk_sigma2_scalar():
    beta, h = 0.6, 0.5
    sol = solve(sk(), ModelParams(beta, h))
    cov = sigma_closed_form(sk(), sol, beta)
    g = sol.gamma[0]
    assert cov.Sigma_hat2[0, 0] == pytest.approx(g / (1 - beta ** 2 * g), rel=1e-12)


def test_stability_violation():
    s = sk()
    sol = solve(s, ModelParams(1.5, 0.1))
    with pytest.raises(StabilityViolated) as e:
        sigma_closed_form(s, sol, 1.5)
    assert e.value.condition == "rho_gamma"
