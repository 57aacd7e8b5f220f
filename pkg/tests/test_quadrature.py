import math

import numpy as np
import pytest
from scipy.integrate import quad

from msk.errors import NegativeVariance
from msk.model import ModelParams
from msk.quadrature import (
    convergence_gap,
    gauss_hermite_expect,
    gaussian_expect,
    gh_nodes,
    logcosh,
    moment_bundle,
    tanh2_mean,
    tanh2_mean_batch,
    tanh2_slope,
)


def oracle(g, mu, sigma):
    f = lambda x: g(mu + sigma * x) * math.exp(-x * x / 2) / math.sqrt(2 * math.pi)
    return quad(f, -40, 40, epsabs=1e-15, epsrel=1e-14, limit=400, full_output=1)[0]


def test_gh_exact_for_polynomials():
    x, w = gh_nodes(10)
    # E eta^(2k) = (2k-1)!!
    for k, val in [(0, 1), (1, 1), (2, 3), (3, 15), (4, 105), (9, 34459425)]:
        assert w @ x ** (2 * k) == pytest.approx(val, rel=1e-10)
    assert gauss_hermite_expect(lambda y: y ** 3, 0.5, 2.0, 4) == pytest.approx(0.125 + 3 * 0.5 * 4)


def test_zero_sigma_and_negative():
    assert gauss_hermite_expect(np.tanh, 0.3, 0.0) == pytest.approx(math.tanh(0.3))
    with pytest.raises(NegativeVariance):
        gauss_hermite_expect(np.tanh, 0.0, -1.0)


@pytest.mark.parametrize("mu,sigma", [(0.0, 0.3), (0.4, 1.0), (0.1, 2.5), (1.2, 5.0)])
def test_moments_against_quad(mu, sigma):
    p = ModelParams(1.0, mu)
    b = moment_bundle(p, sigma ** 2)
    assert b.q == pytest.approx(oracle(lambda y: math.tanh(y) ** 2, mu, sigma), abs=1e-12)
    assert b.qhat == pytest.approx(oracle(lambda y: math.tanh(y) ** 4, mu, sigma), abs=1e-12)
    assert b.gamma == pytest.approx(oracle(lambda y: math.cosh(y) ** -4, mu, sigma), abs=1e-12)
    lc = oracle(lambda y: float(logcosh(y)), mu, sigma)
    assert b.logcosh_mean == pytest.approx(lc, abs=1e-11)
    var = oracle(lambda y: float(logcosh(y)) ** 2, mu, sigma) - lc ** 2
    assert b.logcosh_var == pytest.approx(var, abs=1e-10)
    assert convergence_gap(p, sigma ** 2) < 1e-13


def test_gamma_identity():
    # sech^4 = 1 - 2 tanh^2 + tanh^4
    b = moment_bundle(ModelParams(1.3, 0.2), 0.7)
    assert b.gamma == pytest.approx(1 - 2 * b.q + b.qhat, abs=1e-14)


def test_logcosh_stable():
    assert logcosh(np.array([800.0]))[0] == pytest.approx(800 - math.log(2))
    assert logcosh(np.array([-800.0]))[0] == pytest.approx(800 - math.log(2))


def test_slope_is_derivative():
    p = ModelParams(1.4, 0.3)
    Q, d = 0.6, 1e-5
    fd = (tanh2_mean(p, [Q + d])[0] - tanh2_mean(p, [Q - d])[0]) / (2 * d)
    assert p.beta ** 2 * tanh2_slope(p, [Q])[0] == pytest.approx(fd, rel=1e-7)


def test_batch_matches():
    p = ModelParams(1.1, 0.2)
    Qs = np.array([0.0, 0.1, 0.5, 1.0])
    assert np.allclose(tanh2_mean_batch(p, Qs), tanh2_mean(p, Qs), atol=1e-10)


def test_trapezoid_generic():
    assert gaussian_expect(lambda y: np.exp(y), 0.2, 1.5) == pytest.approx(math.exp(0.2 + 1.125), rel=1e-12)
