"""Replica-symmetric fixed point q_s = E tanh^2(beta eta sqrt((Delta^2 Lambda q)_s) + h)."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DimensionTooLarge,
    InfeasibleIterate,
    MSKError,
    NoConvergence,
    NotIndefinite2x2,
    OnlyZeroFound,
    SingularJacobian,
    ZeroField,
)
from .model import ModelParams, SpeciesStructure, classify_definiteness
from .quadrature import moment_bundle, tanh2_mean, tanh2_mean_batch, tanh2_slope

DEFAULT_TOL = 1e-12
DEDUP_RADIUS = 1e-6
NEG_SLACK = 1e-14


class Method(str, Enum):
    PICARD = "Picard"
    NEWTON = "Newton"
    MONOTONE_2SPECIES = "Monotone2Species"
    GRID_SCAN = "GridScan"


@dataclass(frozen=True, eq=False)
class RsSolution:
    q: np.ndarray
    Qvec: np.ndarray
    qhat: np.ndarray
    gamma: np.ndarray
    gamma_p: np.ndarray
    gamma_pp: np.ndarray
    residual: float
    unique_certified: bool
    method: Method
    beta: float
    h: float
    iterations: int = 0

    def to_dict(self) -> dict:
        out = {}
        for k in ("q", "Qvec", "qhat", "gamma", "gamma_p", "gamma_pp"):
            out[k] = getattr(self, k).tolist()
        out.update(
            residual=self.residual,
            unique_certified=self.unique_certified,
            method=self.method.value,
            beta=self.beta,
            h=self.h,
            iterations=self.iterations,
        )
        return out


def _check_q(s: SpeciesStructure, q) -> np.ndarray:
    q = np.array(q, dtype=float).reshape(-1)
    if q.shape != (s.m,):
        raise ValueError(f"q must have length {s.m}")
    return q


def species_field(s: SpeciesStructure, q) -> np.ndarray:
    """Q^s = (Delta^2 Lambda q)_s; raises on a negative entry beyond round-off."""
    Q = s.delta2_lam @ q
    bad = np.flatnonzero(Q < -NEG_SLACK)
    if bad.size:
        raise InfeasibleIterate(f"negative species field at species {bad[0]}: {Q[bad[0]]:.3e}",
                                species=int(bad[0]))
    return np.maximum(Q, 0.0)


def phi(s: SpeciesStructure, p: ModelParams, q, refine: int = 1) -> np.ndarray:
    return tanh2_mean(p, species_field(s, q), refine)


def fixed_point_residual(s: SpeciesStructure, p: ModelParams, q, refine: int = 1) -> float:
    q = _check_q(s, q)
    return float(np.max(np.abs(q - phi(s, p, q, refine))))


def _below_beta_c(s: SpeciesStructure, beta: float) -> bool:
    from .spectral_phase import beta_c

    return beta < beta_c(s)


def build_solution(s: SpeciesStructure, p: ModelParams, q, method: Method,
                   unique: bool, iterations: int = 0) -> RsSolution:
    q = _check_q(s, q)
    Q = species_field(s, q)
    qhat = np.array([moment_bundle(p, Qs).qhat for Qs in Q])
    resid = float(np.max(np.abs(q - tanh2_mean(p, Q))))
    frozen = []
    for a in (q, Q, qhat, 1 - 2 * q + qhat, 1 - 4 * q + 3 * qhat, 2 * q + q * q - 3 * qhat):
        a = np.array(a, dtype=float)
        a.flags.writeable = False
        frozen.append(a)
    return RsSolution(*frozen, residual=resid, unique_certified=bool(unique), method=method,
                      beta=p.beta, h=p.h, iterations=iterations)


def default_damping(s: SpeciesStructure, p: ModelParams) -> float:
    from .spectral_phase import beta_c

    return 1.0 if p.beta < 0.9 * beta_c(s) else 0.5


def default_start(s: SpeciesStructure, p: ModelParams) -> np.ndarray:
    return np.full(s.m, np.tanh(p.h) ** 2)


def _picard_loop(s, p, q, damping, tol, max_iter):
    for it in range(max_iter + 1):
        f = phi(s, p, q)
        r = float(np.max(np.abs(f - q)))
        if r <= tol:
            return q, it
        if it == max_iter:
            raise NoConvergence(f"Picard: residual {r:.3e} after {max_iter} iterations",
                                iterations=max_iter, residual=r)
        q = (1 - damping) * q + damping * f
    raise AssertionError("unreachable")


def solve_picard(s: SpeciesStructure, p: ModelParams, q0=None, damping: float | None = None,
                 tol: float = DEFAULT_TOL, max_iter: int = 100_000) -> RsSolution:
    """Damped Picard iteration q <- (1 - d) q + d Phi(q)."""
    q = default_start(s, p) if q0 is None else _check_q(s, q0)
    if np.any((q < 0) | (q > 1)):
        raise ValueError("q0 must lie in [0, 1]^m")
    d = default_damping(s, p) if damping is None else float(damping)
    if not 0 < d <= 1:
        raise ValueError(f"damping must be in (0, 1], got {d}")
    q, it = _picard_loop(s, p, q, d, tol, max_iter)
    return build_solution(s, p, q, Method.PICARD, _below_beta_c(s, p.beta), it)


def jacobian_phi(s: SpeciesStructure, p: ModelParams, q) -> np.ndarray:
    """d Phi_s / d q_t = beta^2 a_s (Delta^2 Lambda)_{st}."""
    a = tanh2_slope(p, species_field(s, q))
    return p.beta ** 2 * a[:, None] * s.delta2_lam


def _newton_loop(s, p, q, tol, max_iter, fallback_damping=0.5):
    eye = np.eye(s.m)
    for it in range(max_iter + 1):
        f = phi(s, p, q)
        F = q - f
        r = float(np.max(np.abs(F)))
        if r <= tol:
            return q, it
        if it == max_iter:
            raise NoConvergence(f"Newton: residual {r:.3e} after {max_iter} iterations",
                                iterations=max_iter, residual=r)
        J = eye - jacobian_phi(s, p, q)
        if np.linalg.cond(J) > 1e14:
            raise SingularJacobian(f"Jacobian condition number {np.linalg.cond(J):.3e}")
        step = np.linalg.solve(J, -F)
        trial = q + step
        if np.all((trial >= 0) & (trial <= 1)):
            q = trial
        else:
            q = (1 - fallback_damping) * q + fallback_damping * f
    raise AssertionError("unreachable")


def solve_newton(s: SpeciesStructure, p: ModelParams, q0=None, tol: float = DEFAULT_TOL,
                 max_iter: int = 500) -> RsSolution:
    """Newton on q - Phi(q), with a damped Picard step whenever Newton leaves [0, 1]^m."""
    q = default_start(s, p) if q0 is None else _check_q(s, q0)
    q, it = _newton_loop(s, p, q, tol, max_iter)
    return build_solution(s, p, q, Method.NEWTON, _below_beta_c(s, p.beta), it)


def _expand_root(f, lo, hi, grow=2.0, limit=200):
    """brentq on a decreasing f, widening [lo, hi] until the sign changes."""
    for _ in range(limit):
        if f(lo) > 0:
            break
        lo /= grow
    for _ in range(limit):
        if f(hi) < 0:
            break
        hi *= grow
    return brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def solve_indefinite_2species(s: SpeciesStructure, p: ModelParams,
                              tol: float = DEFAULT_TOL) -> RsSolution:
    """Two-species indefinite case via the monotone reduction in (Q^1, Q^2).

    With (Delta^2 Lambda)^{-1} = [[-a, b], [c, -d]] (a, d >= 0, b, c > 0) the system reads
    Q^2 = Q^1 g_1(Q^1), Q^1 = Q^2 g_2(Q^2), g_1(x) = (phi(x)/x + a)/b, g_2(x) = (phi(x)/x + d)/c.
    Eliminating, Q^2 = h_2^{-1}(h_1(Q^1)) with h_i(x) = x^2 g_i(x) increasing, and
    G(Q^1) = g_1(Q^1) g_2(Q^2) - 1 is strictly decreasing with a single zero.
    """
    if s.m != 2 or classify_definiteness(s).positive_definite:
        raise NotIndefinite2x2("needs m = 2 and an indefinite Delta^2")
    if p.h == 0:
        raise ZeroField("the monotone reduction needs h > 0")
    A = s.delta2_lam
    det = float(np.linalg.det(A))
    if det >= 0:
        raise NotIndefinite2x2("det(Delta^2) must be negative")
    a, b = A[1, 1] / -det, A[0, 1] / -det
    c, d = A[1, 0] / -det, A[0, 0] / -det
    if p.beta == 0:
        return build_solution(s, p, default_start(s, p), Method.MONOTONE_2SPECIES, True)

    def ratio(x):
        return tanh2_mean(p, np.array([x]))[0] / x

    def g1(x):
        return (ratio(x) + a) / b

    def g2(x):
        return (ratio(x) + d) / c

    def Q2_of(Q1):
        target = Q1 * Q1 * g1(Q1)
        return _expand_root(lambda y: target - y * y * g2(y), Q1, Q1)

    def G(Q1):
        return g1(Q1) * g2(Q2_of(Q1)) - 1.0

    Q1 = _expand_root(G, 1.0, 1.0)
    Q = np.array([Q1, Q2_of(Q1)])
    q = np.clip(np.linalg.solve(A, Q), 0.0, 1.0)
    # the inverse map can amplify the root-finding error; polish on the original system
    if fixed_point_residual(s, p, q) > tol:
        q, _ = _newton_loop(s, p, q, tol, 50)
    return build_solution(s, p, q, Method.MONOTONE_2SPECIES, True)


def find_nonzero_root_h0(s: SpeciesStructure, beta: float, tol: float = DEFAULT_TOL) -> RsSolution:
    """A nonzero fixed point at h = 0 above beta_c, by Picard from q0 = 1/2 then a Newton polish."""
    from .spectral_phase import beta_c

    p = ModelParams(beta, 0.0)
    if beta <= beta_c(s):
        raise OnlyZeroFound(f"beta = {beta} <= beta_c: q = 0 is the only root")
    q = np.full(s.m, 0.5)
    try:
        q, it = _picard_loop(s, p, q, 1.0, 1e-7, 20_000)
    except NoConvergence as exc:
        raise OnlyZeroFound(f"Picard from 1/2 did not settle: {exc}") from exc
    if np.max(q) < 1e-6:
        raise OnlyZeroFound("Picard from 1/2 collapsed to q = 0")
    q, it2 = _newton_loop(s, p, q, tol, 100)
    if np.max(q) < 1e-6:
        raise OnlyZeroFound("Newton polish collapsed to q = 0")
    return build_solution(s, p, q, Method.PICARD, False, it + it2)


def grid_scan_roots(s: SpeciesStructure, p: ModelParams, grid_per_axis: int = 21,
                    tol: float = DEFAULT_TOL) -> list[RsSolution]:
    """Every root found by refining local minima (< 0.1) of the residual on a uniform grid."""
    if s.m > 3:
        raise DimensionTooLarge(f"grid scan limited to m <= 3, got m = {s.m}")
    n = int(grid_per_axis)
    axis = np.linspace(0.0, 1.0, n)
    mesh = np.stack(np.meshgrid(*([axis] * s.m), indexing="ij"), axis=-1)
    Q = np.maximum(mesh @ s.delta2_lam.T, 0.0)
    resid = np.max(np.abs(mesh - tanh2_mean_batch(p, Q)), axis=-1)

    padded = np.pad(resid, 1, constant_values=np.inf)
    is_min = np.ones(resid.shape, dtype=bool)
    core = tuple(slice(1, -1) for _ in range(s.m))
    for off in itertools.product((-1, 0, 1), repeat=s.m):
        if not any(off):
            continue
        sl = tuple(slice(1 + o, padded.shape[k] - 1 + o) for k, o in enumerate(off))
        is_min &= padded[core] <= padded[sl]
    starts = mesh[is_min & (resid < 0.1)]

    unique = _below_beta_c(s, p.beta)
    roots: list[np.ndarray] = []
    for q0 in starts:
        try:
            q, _ = _newton_loop(s, p, np.array(q0), tol, 200)
        except MSKError:
            continue
        if all(np.max(np.abs(q - r)) > DEDUP_RADIUS for r in roots):
            roots.append(q)
    roots.sort(key=tuple)
    return [build_solution(s, p, q, Method.GRID_SCAN, unique) for q in roots]


def solve(s: SpeciesStructure, p: ModelParams, method: str = "auto",
          tol: float = DEFAULT_TOL) -> RsSolution:
    """Dispatch: ``picard``, ``newton`` or ``auto``.

    ``auto`` uses the monotone 2-species solver when it applies, the nonzero root
    for h = 0 above beta_c, and Newton from tanh^2(h) otherwise.
    """
    from .spectral_phase import beta_c

    if method == "picard":
        return solve_picard(s, p, tol=tol)
    if method == "newton":
        return solve_newton(s, p, tol=tol)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    if p.beta == 0:
        return solve_picard(s, p, tol=tol)
    if s.m == 2 and p.h > 0 and not classify_definiteness(s).positive_definite:
        return solve_indefinite_2species(s, p, tol)
    if p.h == 0:
        if p.beta > beta_c(s):
            try:
                return find_nonzero_root_h0(s, p.beta, tol)
            except OnlyZeroFound:
                pass
        return build_solution(s, p, np.zeros(s.m), Method.PICARD, p.beta < beta_c(s))
    try:
        return solve_newton(s, p, tol=tol)
    except MSKError:
        return solve_picard(s, p, tol=tol)
