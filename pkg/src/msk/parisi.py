"""k-RSB Parisi functional, the RS functional, free-energy CLT parameters and the
1-RSB perturbation V(p)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import NegativeIncrement, StepTooSmall
from .model import ModelParams, SpeciesStructure, quad_form_Q
from .quadrature import gaussian_rule, gh_nodes, logcosh, moment_bundle, tanh2_mean

ZETA_ZERO = 1e-8
INC_SLACK = 1e-14
LOG2 = math.log(2.0)


@dataclass(frozen=True, eq=False)
class ParisiSequences:
    """``zeta`` = (zeta_0 = 0, ..., zeta_{k+1} = 1), ``qseq`` of shape (k+3, m) with rows q_0 = 0 ... q_{k+2} = 1."""

    zeta: np.ndarray
    qseq: np.ndarray

    def __post_init__(self):
        z = np.array(self.zeta, dtype=float).reshape(-1)
        q = np.atleast_2d(np.array(self.qseq, dtype=float))
        if z.size < 2 or z[0] != 0 or z[-1] != 1 or np.any(np.diff(z) <= 0):
            raise ValueError("zeta must satisfy 0 = zeta_0 < ... < zeta_{k+1} = 1")
        if q.shape[0] != z.size + 1:
            raise ValueError(f"need k+3 = {z.size + 1} q levels, got {q.shape[0]}")
        if np.any(q[0] != 0) or np.any(q[-1] != 1) or np.any(np.diff(q, axis=0) < 0):
            raise ValueError("q sequences must be nondecreasing from 0 to 1 per species")
        for a in (z, q):
            a.flags.writeable = False
        object.__setattr__(self, "zeta", z)
        object.__setattr__(self, "qseq", q)

    @property
    def k(self) -> int:
        return self.zeta.size - 2

    @classmethod
    def from_inner(cls, zeta_inner, q_inner) -> "ParisiSequences":
        """Build from (zeta_1..zeta_k) and the k+1 interior levels q_1..q_{k+1} (rows)."""
        zi = np.asarray(zeta_inner, dtype=float).reshape(-1)
        qi = np.atleast_2d(np.asarray(q_inner, dtype=float))
        m = qi.shape[1]
        return cls(np.concatenate([[0.0], zi, [1.0]]),
                   np.vstack([np.zeros(m), qi, np.ones(m)]))

    @classmethod
    def replica_symmetric(cls, q) -> "ParisiSequences":
        return cls.from_inner([], [np.asarray(q, dtype=float)])


def _rule(sigma: float, nodes):
    if sigma == 0:
        return np.zeros(1), np.ones(1)
    if nodes is None:
        return gaussian_rule(sigma)
    return gh_nodes(int(nodes))


def _species_top(beta, h, sig, zetas, tail, nodes):
    """X_0 for one species: sig[l] is the std of level l (l = 0..k), zetas[l] its zeta,
    ``tail`` the analytic contribution beta^2 dQ_{k+1} / 2 of the zeta = 1 level."""
    rules = [_rule(sg, nodes) for sg in sig]
    y = np.array(h, dtype=float)
    for sg, (x, _) in zip(sig, rules):
        y = y[..., None] + sg * x
    f = logcosh(y) + tail
    for z, (_, w) in zip(reversed(zetas), reversed(rules)):
        if z < ZETA_ZERO:
            f = f @ w
        else:
            f = logsumexp(z * f, b=w, axis=-1) / z
    return float(f)


def parisi_value_unchecked(s: SpeciesStructure, p: ModelParams, zeta, qseq, nodes=None) -> float:
    """The functional for arbitrary zeta_1..zeta_k (no ordering checks on zeta).

    Only the q increments are validated; used directly for derivatives in zeta.
    """
    zeta = np.asarray(zeta, dtype=float)
    qseq = np.asarray(qseq, dtype=float)
    k = zeta.size - 2
    Qs = qseq @ s.delta2_lam.T  # rows Q^s_l
    Qtot = 0.5 * np.einsum("ls,st,lt->l", qseq, s.lam_delta2_lam, qseq)
    dQs = np.diff(Qs, axis=0)
    if np.any(dQs < -INC_SLACK):
        l, sp = np.argwhere(dQs < -INC_SLACK)[0]
        raise NegativeIncrement(f"Q^s_(l+1) - Q^s_l < 0 at level {l}, species {sp}: {dQs[l, sp]:.3e}")
    dQs = np.maximum(dQs, 0.0)
    b = p.beta
    total = LOG2
    for sp in range(s.m):
        sig = b * np.sqrt(dQs[: k + 1, sp])
        tail = 0.5 * b * b * dQs[k + 1, sp]
        zl = zeta[: k + 1]
        if zeta[k + 1] != 1.0:
            raise ValueError("the last zeta must be 1")
        total += s.lam[sp] * _species_top(b, p.h, sig, zl, tail, nodes)
    total -= 0.5 * b * b * float(np.sum(zeta[1:] * np.diff(Qtot)[1:]))
    return float(total)


def evaluate_parisi(s: SpeciesStructure, p: ModelParams, seqs: ParisiSequences,
                    nodes_per_level: int | None = None) -> float:
    """log 2 + sum_s lambda_s X_0^s - (beta^2 / 2) sum_{l=1}^{k+1} zeta_l (Q_{l+1} - Q_l).

    The zeta = 1 level is integrated in closed form. ``nodes_per_level`` switches the
    per-level rule from the adaptive trapezoid to Gauss-Hermite with that many nodes.
    """
    if seqs.qseq.shape[1] != s.m:
        raise ValueError(f"q sequences have {seqs.qseq.shape[1]} species, model has {s.m}")
    return parisi_value_unchecked(s, p, seqs.zeta, seqs.qseq, nodes_per_level)


def evaluate_rs_functional(s: SpeciesStructure, p: ModelParams, q) -> float:
    q = np.asarray(q, dtype=float)
    Q = s.delta2_lam @ q
    mean = sum(lam * moment_bundle(p, Qs).logcosh_mean for lam, Qs in zip(s.lam, Q))
    one = np.ones(s.m)
    return LOG2 + mean + 0.25 * p.beta ** 2 * quad_form_Q(s, one - q)


def rs_gradient(s: SpeciesStructure, p: ModelParams, q) -> np.ndarray:
    """(beta^2 / 2) lambda_t sum_s Delta^2_st lambda_s [q_s - E tanh^2(...)]."""
    q = np.asarray(q, dtype=float)
    r = q - tanh2_mean(p, s.delta2_lam @ q)
    return 0.5 * p.beta ** 2 * s.lam * (s.delta2.T @ (s.lam * r))


@dataclass(frozen=True)
class CltParams:
    rs_value: float
    b_h: float
    cN_coeff: tuple[float, float] | None = None
    b_zero: float | None = None

    def to_dict(self) -> dict:
        return {
            "rs_value": self.rs_value,
            "b_h": self.b_h,
            "cN_coeff": None if self.cN_coeff is None else list(self.cN_coeff),
            "b_zero": self.b_zero,
        }


def rs_value(s: SpeciesStructure, p: ModelParams, sol=None) -> CltParams:
    """RS value at the fixed point with the CLT variance; h = 0 adds the centring constants."""
    from .rs_solver import solve
    from .spectral_phase import beta_c

    if sol is None:
        sol = solve(s, p)
    q = np.asarray(sol.q)
    val = evaluate_rs_functional(s, p, q)
    var = sum(lam * moment_bundle(p, Qs).logcosh_var for lam, Qs in zip(s.lam, sol.Qvec))
    b_h = float(var - 0.5 * p.beta ** 2 * quad_form_Q(s, q))
    cN = bz = None
    if p.h == 0 and p.beta < beta_c(s):
        M = np.eye(s.m) - p.beta ** 2 * s.delta2_lam
        _, logdet = np.linalg.slogdet(M)
        cN = (LOG2 + 0.25 * p.beta ** 2 * quad_form_Q(s, np.ones(s.m)), 0.25 * logdet)
        bz = 0.5 * (-logdet - p.beta ** 2 * float(np.trace(s.delta2_lam)))
    return CltParams(float(val), b_h, cN, bz)


@dataclass(frozen=True, eq=False)
class OneRsbPerturbation:
    V: float
    gradV: np.ndarray
    hessV_numeric: np.ndarray
    hessV_formula: np.ndarray


def _V(s, p, q_star, pvec, dz):
    """d/dzeta of the 1-RSB functional at zeta = 1 with levels (q_star, pvec).

    Central difference in zeta with one Richardson step; zeta > 1 is fine for the
    unchecked evaluator since the formula is analytic in zeta.
    """
    m = s.m
    qseq = np.vstack([np.zeros(m), q_star, pvec, np.ones(m)])

    def P(z):
        return parisi_value_unchecked(s, p, np.array([0.0, z, 1.0]), qseq)

    d1 = (P(1 + dz) - P(1 - dz)) / (2 * dz)
    d2 = (P(1 + dz / 2) - P(1 - dz / 2)) / dz
    return (4 * d2 - d1) / 3


def onersb_perturbation(s: SpeciesStructure, p: ModelParams, q_star, pvec=None,
                        fd_step: float = 1e-3, zeta_step: float = 1e-3) -> OneRsbPerturbation:
    """V(p), and gradient and Hessian of V at p = q_star from one-sided differences
    (V only exists for p >= q_star), each with a Richardson step."""
    from types import SimpleNamespace

    from .rs_solver import species_field
    from .quadrature import moment_bundle as mb
    from .spectral_phase import hv_matrix

    if fd_step < 1e-6 or zeta_step < 1e-6:
        raise StepTooSmall("finite-difference step below 1e-6 is dominated by rounding")
    q_star = np.asarray(q_star, dtype=float)
    pvec = q_star if pvec is None else np.asarray(pvec, dtype=float)
    if np.any(pvec < q_star):
        raise ValueError("pvec must dominate q_star entrywise")
    Q = species_field(s, q_star)
    gamma = np.array([mb(p, x).gamma for x in Q])
    formula = hv_matrix(s, SimpleNamespace(gamma=gamma), p.beta)

    def V(x):
        return _V(s, p, q_star, x, zeta_step)

    m, eye = s.m, np.eye(s.m)
    V0 = V(q_star)
    hg = fd_step / 10

    def fwd1(i, h):
        return (-3 * V0 + 4 * V(q_star + h * eye[i]) - V(q_star + 2 * h * eye[i])) / (2 * h)

    grad = np.array([(4 * fwd1(i, hg / 2) - fwd1(i, hg)) / 3 for i in range(m)])

    def hess(h):
        H = np.empty((m, m))
        for i in range(m):
            for j in range(i, m):
                if i == j:
                    H[i, i] = (V(q_star + 2 * h * eye[i]) - 2 * V(q_star + h * eye[i]) + V0) / h ** 2
                else:
                    H[i, j] = H[j, i] = (V(q_star + h * (eye[i] + eye[j])) - V(q_star + h * eye[i])
                                         - V(q_star + h * eye[j]) + V0) / h ** 2
        return H

    H = 2 * hess(fd_step / 2) - hess(fd_step)
    return OneRsbPerturbation(V(pvec), grad, 0.5 * (H + H.T), formula)
