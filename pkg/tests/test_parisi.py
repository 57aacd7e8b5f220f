import math

import numpy as np
import pytest

from msk.errors import NegativeIncrement, StepTooSmall
from msk.model import ModelParams, bipartite, sk, two_species_pd
from msk.parisi import (
    ParisiSequences,
    evaluate_parisi,
    evaluate_rs_functional,
    onersb_perturbation,
    parisi_value_unchecked,
    rs_gradient,
    rs_value,
)
from msk.rs_solver import solve


def test_sequence_validation():
    with pytest.raises(ValueError):
        ParisiSequences.from_inner([0.7, 0.3], [[0.1], [0.2], [0.3]])
    with pytest.raises(ValueError):
        ParisiSequences.from_inner([0.5], [[0.4], [0.2]])
    seqs = ParisiSequences.from_inner([0.5], [[0.2, 0.1], [0.4, 0.3]])
    assert seqs.k == 1 and seqs.qseq.shape == (4, 2)


def test_beta_zero_value():
    p = ModelParams(0.0, 0.6)
    v = evaluate_parisi(two_species_pd(), p, ParisiSequences.replica_symmetric([0.3, 0.3]))
    assert v == pytest.approx(math.log(2) + math.log(math.cosh(0.6)), abs=1e-14)


def test_annealed_value_zero_field(reference):
    # q = 0, h = 0: log 2 + (beta^2 / 4) 1^T Lambda D Lambda 1
    beta = 0.4
    p = ModelParams(beta, 0.0)
    ann = math.log(2) + 0.25 * beta ** 2 * float(reference.lam @ reference.delta2 @ reference.lam)
    assert evaluate_rs_functional(reference, p, np.zeros(reference.m)) == pytest.approx(ann, abs=1e-13)
    assert rs_value(reference, p).rs_value == pytest.approx(ann, abs=1e-13)


def test_k0_matches_rs_functional(reference):
    p = ModelParams(0.9, 0.4)
    q = solve(reference, p).q
    a = evaluate_parisi(reference, p, ParisiSequences.replica_symmetric(q))
    assert a == pytest.approx(evaluate_rs_functional(reference, p, q), abs=1e-12)


def test_degenerate_levels_collapse():
    s, p = two_species_pd(), ModelParams(0.7, 0.4)
    q = solve(s, p).q
    rs = evaluate_parisi(s, p, ParisiSequences.replica_symmetric(q))
    for z in (0.2, 0.8):
        one = ParisiSequences.from_inner([z], [q, q])
        assert evaluate_parisi(s, p, one) == pytest.approx(rs, abs=1e-12)
    two = ParisiSequences.from_inner([0.3, 0.6], [q, q, q])
    assert evaluate_parisi(s, p, two) == pytest.approx(rs, abs=1e-12)


def test_gh_option_close():
    s, p = sk(), ModelParams(0.8, 0.3)
    seqs = ParisiSequences.from_inner([0.5], [[0.2], [0.5]])
    assert evaluate_parisi(s, p, seqs, 40) == pytest.approx(evaluate_parisi(s, p, seqs), abs=1e-6)


def test_gradient_fd_and_stationarity():
    s, p = two_species_pd(), ModelParams(0.9, 0.3)
    q0 = np.array([0.3, 0.4])
    d = 1e-6
    fd = np.array([(evaluate_rs_functional(s, p, q0 + d * e) - evaluate_rs_functional(s, p, q0 - d * e)) / (2 * d)
                   for e in np.eye(2)])
    assert np.allclose(rs_gradient(s, p, q0), fd, atol=1e-8)
    assert np.allclose(rs_gradient(s, p, solve(s, p).q), 0, atol=1e-12)


def test_negative_increment():
    # valid sequences with nonnegative Delta^2 never decrease Q, so use the unchecked path
    qseq = np.array([[0.0, 0.0], [0.6, 0.5], [0.1, 0.5], [1.0, 1.0]])
    with pytest.raises(NegativeIncrement):
        parisi_value_unchecked(bipartite(), ModelParams(1.0, 0.2), [0.0, 0.5, 1.0], qseq)


def test_clt_params_zero_field():
    s, beta = sk(), 0.5
    c = rs_value(s, ModelParams(beta, 0.0))
    # SK: log det(1 - beta^2) pieces
    assert c.b_zero == pytest.approx(0.5 * (-math.log(1 - beta ** 2) - beta ** 2))
    assert c.cN_coeff[1] == pytest.approx(0.25 * math.log(1 - beta ** 2))
    assert c.b_h == pytest.approx(0.0, abs=1e-15)


def test_onersb_sk_scalar_expansion():
    # V(q + e) = (beta^2 / 4) (beta^2 gamma - 1) e^2 + O(e^3), derived independently by
    # expanding the scalar 1-RSB functional around zeta = 1
    beta, h = 1.3, 0.3
    p = ModelParams(beta, h)
    sol = solve(sk(), p)
    r = onersb_perturbation(sk(), p, sol.q)
    expect = 0.5 * beta ** 2 * (beta ** 2 * sol.gamma[0] - 1)
    assert r.hessV_numeric[0, 0] == pytest.approx(expect, rel=1e-3)
    assert abs(r.V) < 1e-9 and abs(r.gradV[0]) < 1e-6
    with pytest.raises(StepTooSmall):
        onersb_perturbation(sk(), p, sol.q, fd_step=1e-8)
