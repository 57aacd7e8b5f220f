"""The theory-versus-simulation battery behind ``msk verify`` and the acceptance tests.

Every check returns a :class:`CriterionResult`; ``quick=True`` shrinks the sample sizes
for a smoke run (the acceptance suite always runs the full sizes).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import covariance as cov
from . import parisi, rs_solver, spectral_phase as sp
from .errors import MSKError, SingularMatrix
from .model import (ModelParams, SpeciesStructure, bipartite, classify_definiteness,
                    realized_structure, sk, two_species_pd)


@dataclass(frozen=True)
class CriterionResult:
    id: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.id:2d} {self.name}: {self.detail}"


def random_structure(rng: np.random.Generator, m: int, kind: str = "any") -> SpeciesStructure:
    """A random valid structure; ``kind`` is ``pd``, ``indefinite`` or ``any``."""
    for _ in range(1000):
        lam = np.array([1.0]) if m == 1 else rng.dirichlet(np.full(m, 2.0))
        if m > 1 and np.any(lam < 0.05):
            continue
        lam = lam / lam.sum()
        A = rng.uniform(0.0, 1.5, (m, m))
        if kind == "pd":
            D = A @ A.T / m + 0.1 * np.eye(m)
        elif kind == "indefinite":
            D = 0.5 * (A + A.T)
            D[np.diag_indices(m)] *= 0.1
        else:
            D = 0.5 * (A + A.T)
        try:
            s = SpeciesStructure(lam, D)
        except SingularMatrix:
            continue
        pd = classify_definiteness(s).positive_definite
        if kind == "pd" and not pd or kind == "indefinite" and pd:
            continue
        return s
    raise RuntimeError(f"could not draw a {kind} structure")


def _timed(fn):
    def wrapper(quick: bool = False) -> CriterionResult:
        t = time.perf_counter()
        res = fn(quick)
        return CriterionResult(res.id, res.name, res.passed, res.detail, time.perf_counter() - t)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def check_exact_algebra(quick: bool = False) -> CriterionResult:
    cm = cov.constant_matrices()
    C = [np.array(x, dtype=object) for x in cm.C]
    comm = all(not np.any(C[a].dot(C[b]) - C[b].dot(C[a])) for a in range(3) for b in range(3))
    V = [[Fraction(int(x)) for x in row] for row in cm.V]
    Vinv = cov.rational_inverse(cm.V)

    def mul(X, Y):
        return [[sum(X[i][k] * Y[k][j] for k in range(3)) for j in range(3)] for i in range(3)]

    sim = all(
        mul(mul(V, [[Fraction(int(x)) for x in row] for row in Ck]), Vinv)
        == [[Fraction(int(x)) for x in row] for row in Tk]
        for Ck, Tk in zip(cm.C, cm.T)
    )
    ident = bool(np.array_equal(cm.C2, np.eye(3, dtype=int)) and np.array_equal(cm.T2, np.eye(3, dtype=int)))
    ok = comm and sim and ident
    return CriterionResult(1, "exact algebra", ok,
                           f"commute={comm} similarity={sim} C2=T2=I:{ident}")


@_timed
def check_beta_c(quick: bool = False) -> CriterionResult:
    b_bip = sp.beta_c(bipartite())
    s = two_species_pd()
    l1, l2 = s.lam
    d11, d12, d22 = s.delta2[0, 0], s.delta2[0, 1], s.delta2[1, 1]
    rho = 0.5 * (l1 * d11 + l2 * d22 + math.sqrt((l1 * d11 - l2 * d22) ** 2 + 4 * l1 * l2 * d12 ** 2))
    b_pd, b_ref = sp.beta_c(s), rho ** -0.5
    b_sk = sp.beta_c(sk())
    e1, e2 = abs(b_bip - math.sqrt(2)), abs(b_pd - b_ref)
    ok = e1 <= 1e-12 and e2 <= 1e-12 and b_sk == 1.0
    return CriterionResult(2, "beta_c golden values", ok,
                           f"|bip - sqrt2|={e1:.1e} |pd - closed form|={e2:.1e} sk={b_sk!r}")


@_timed
def check_at_consistency(quick: bool = False) -> CriterionResult:
    rng = np.random.default_rng(2024)
    worst_h0 = 0.0
    for k in range(20):
        s = random_structure(rng, 1 + k % 4)
        bc = sp.beta_c(s)
        sol = rs_solver.solve(s, ModelParams(0.5 * bc, 0.0))
        worst_h0 = max(worst_h0, abs(sp.beta_at(s, sol) - bc))
    worst_gap = -math.inf
    structs = [two_species_pd()] + [random_structure(rng, m, "pd") for m in (2, 3, 3)]
    for k in range(20):
        s = structs[k % len(structs)]
        bc = sp.beta_c(s)
        p = ModelParams(bc * rng.uniform(0.2, 1.8), rng.uniform(0.1, 1.5))
        sol = rs_solver.solve(s, p)
        a = sp.spectral_abscissa(np.asarray(sol.gamma_p)[:, None] * s.delta2_lam)
        worst_gap = max(worst_gap, a - sp.rho_gamma(s, sol.gamma))
    ok = worst_h0 <= 1e-10 and worst_gap <= 1e-10
    return CriterionResult(3, "AT consistency", ok,
                           f"max|beta_AT(0)-beta_c|={worst_h0:.1e} max(abscissa-rho)={worst_gap:.2e}")


def _fixed_point_battery(rng):
    return [sk(), bipartite(), two_species_pd(), random_structure(rng, 3, "pd"),
            random_structure(rng, 3, "indefinite"), random_structure(rng, 2, "indefinite")]


@_timed
def check_fixed_points(quick: bool = False) -> CriterionResult:
    rng = np.random.default_rng(7)
    battery = _fixed_point_battery(rng)
    spread, n_roots = 0.0, []
    for s in battery:
        bc = sp.beta_c(s)
        for frac, h in ((0.5, 0.0), (0.9, 0.3), (0.7, 0.8)):
            p = ModelParams(frac * bc, h)
            qs = [rs_solver.solve_picard(s, p, q0=rng.uniform(0, 1, s.m)).q
                  for _ in range(25 if not quick else 5)]
            spread = max(spread, float(np.max(np.ptp(np.array(qs), axis=0))))
            n_roots.append(len(rs_solver.grid_scan_roots(s, p, 21)))
    gap = 0.0
    indefinite = [bipartite(), battery[-1], SpeciesStructure([0.3, 0.7], [[0.5, 2.0], [2.0, 0.3]])]
    for s in indefinite:
        for beta, h in ((1.2, 0.4), (1.5, 0.2), (2.5, 0.7)):
            p = ModelParams(beta, h)
            a = rs_solver.solve_indefinite_2species(s, p)
            b = rs_solver.solve_newton(s, p)
            gap = max(gap, float(np.max(np.abs(a.q - b.q))))
    ok = spread <= 1e-8 and all(n == 1 for n in n_roots) and gap <= 1e-9
    return CriterionResult(4, "fixed-point suite", ok,
                           f"multistart spread={spread:.1e} grid roots={sorted(set(n_roots))} "
                           f"monotone-vs-newton={gap:.1e}")


@_timed
def check_lyapunov(quick: bool = False) -> CriterionResult:
    rng = np.random.default_rng(11)
    worst_res = 0.0
    n = 1000 if not quick else 100
    disagreements = 0
    for k in range(n):
        m = 1 + k % 6
        R = rng.normal(size=(m, m))
        A = R - (sp.spectral_abscissa(R) + rng.uniform(0.1, 2.0)) * np.eye(m)
        C = rng.normal(size=(m, m))
        C = C + C.T
        try:
            X = cov.solve_lyapunov(A, C, "both")
        except MSKError:
            disagreements += 1
            continue
        worst_res = max(worst_res, float(np.max(np.abs(cov.sym(A @ X) + C))))
    X = cov.solve_lyapunov(-np.eye(3), np.eye(3))
    ident = float(np.max(np.abs(X - np.eye(3))))
    ok = worst_res <= 1e-10 and disagreements == 0 and ident <= 4 * np.finfo(float).eps
    return CriterionResult(5, "Lyapunov solver", ok,
                           f"{n} instances: max residual={worst_res:.1e} backend disagreements="
                           f"{disagreements} |X(-I,I)-I|={ident:.1e}")


@_timed
def check_sigma(quick: bool = False) -> CriterionResult:
    rng = np.random.default_rng(5)
    line_err = 0.0
    for s in (two_species_pd(), random_structure(rng, 3, "pd"), bipartite(), sk()):
        bc = sp.beta_c(s)
        for frac, h in ((0.3, 0.2), (0.6, 0.5), (0.8, 1.0)):
            p = ModelParams(frac * bc, h)
            sol = rs_solver.solve(s, p)
            oc = cov.sigma_closed_form(s, sol, p.beta)
            S0, S1, S2 = oc.Sigma
            for g, lhs in ((sol.gamma, S0 - 2 * S1 + S2), (sol.gamma_p, 3 * S0 - 4 * S1 + S2)):
                G = np.diag(g)
                rhs = G @ np.linalg.inv(np.eye(s.m) - p.beta ** 2 * s.delta2_lam @ G) @ np.diag(1 / s.lam)
                line_err = max(line_err, float(np.max(np.abs(lhs - rhs))))
    h0_err = 0.0
    for s in (two_species_pd(), bipartite(), random_structure(rng, 3, "any")):
        beta = 0.7 * sp.beta_c(s)
        sol = rs_solver.solve(s, ModelParams(beta, 0.0))
        oc = cov.sigma_closed_form(s, sol, beta)
        ref = np.linalg.inv(np.eye(s.m) - beta ** 2 * s.delta2_lam) @ np.diag(1 / s.lam)
        h0_err = max(h0_err, float(np.max(np.abs(oc.Sigma0))), float(np.max(np.abs(oc.Sigma1))),
                     float(np.max(np.abs(oc.Sigma2 - ref))))
    scalar = 0.0
    for beta in (0.2, 0.5, 0.9):
        oc = cov.sigma_closed_form(sk(), rs_solver.solve(sk(), ModelParams(beta, 0.0)), beta)
        scalar = max(scalar, abs(oc.Sigma2[0, 0] - 1 / (1 - beta ** 2)))
    ok = line_err <= 1e-9 and h0_err <= 1e-9 and scalar <= 1e-12
    return CriterionResult(6, "Sigma closed forms", ok,
                           f"lines={line_err:.1e} h=0 specialisation={h0_err:.1e} SK scalar={scalar:.1e}")


def _k_fit(Ns, r):
    Ns, r = np.asarray(Ns, float), np.asarray(r, float)
    x = Ns ** -1.5
    K = float(x @ r / (x @ x))
    KN = r / x
    return K, KN


@_timed
def check_simulation(quick: bool = False) -> CriterionResult:
    from .simulator import overlap_moments

    Ns = (12, 14, 16, 18) if not quick else (10, 12)
    n = 500 if not quick else 60
    parts, ok = [], True
    for name, s in (("sk", sk()), ("bipartite", bipartite())):
        beta = 0.5 * sp.beta_0(s)
        for h in (0.0, 0.5):
            p = ModelParams(beta, h)
            zmax, res = 0.0, []
            for N in Ns:
                sr = realized_structure(s, N)
                sol = rs_solver.solve(sr, p)
                om = overlap_moments(s, p, sol.q, N, n, seed=1000 + N)
                S2 = cov.sigma_closed_form(sr, sol, beta).Sigma2
                se = N * om.std_err[2]
                z = np.abs(N * om.U2 - S2) / np.where(se > 0, se, np.inf)
                zmax = max(zmax, float(np.max(z)))
                R = cov.finite_n_residual(sr, sol, beta, *om.U, N)
                res.append(max(float(np.max(np.abs(x))) for x in R))
            K, KN = _k_fit(Ns, res)
            stable = bool(np.all((KN >= 0.5 * K) & (KN <= 1.5 * K)))
            good = zmax <= 3 and stable
            ok &= good
            parts.append(f"{name} h={h}: max z={zmax:.2f} K={K:.2e} K_N/K={np.round(KN / K, 2).tolist()}")
    return CriterionResult(7, "simulation vs theory", ok, "; ".join(parts))


@_timed
def check_lln(quick: bool = False) -> CriterionResult:
    from .simulator import free_energies

    Ns = (10, 14, 18)
    n = 800 if not quick else 100
    parts, ok = [], True
    for name, s in (("sk", sk()), ("pd2", two_species_pd())):
        p = ModelParams(0.4, 0.0)
        dev = []
        for N in Ns:
            F = free_energies(s, p, N, n, seed=2000 + N)
            dev.append(abs(F.mean() - parisi.rs_value(realized_structure(s, N), p).rs_value))
        x, y = 1.0 / np.asarray(Ns, float), np.asarray(dev)
        C = float(x @ y / (x @ x))
        r2 = 1 - float(np.sum((y - C * x) ** 2) / np.sum((y - y.mean()) ** 2))
        ok &= r2 >= 0.9
        parts.append(f"{name}: C={C:.4f} R2={r2:.3f}")
    return CriterionResult(8, "free-energy LLN", ok, "; ".join(parts))


@_timed
def check_clt(quick: bool = False) -> CriterionResult:
    from .simulator import clt_experiment

    N, n = (18, 800) if not quick else (12, 200)
    parts, ok = [], True
    for name, s in (("sk", sk()), ("pd2", two_species_pd())):
        r = clt_experiment(s, ModelParams(0.4, 0.5), N, n, seed=3000)
        z = abs(r.var_scaled - r.b_theory) / r.var_scaled_se
        good = z <= 3 and r.ks_distance <= 0.08
        ok &= good
        parts.append(f"{name}: N Var={r.var_scaled:.5f} b={r.b_theory:.5f} z={z:.2f} KS={r.ks_distance:.3f}")
    return CriterionResult(9, "free-energy CLT", ok, "; ".join(parts))


@_timed
def check_concentration(quick: bool = False) -> CriterionResult:
    from .simulator import concentration_experiment

    n = 500 if not quick else 50
    parts, ok = [], True
    for name, s, h in (("sk", sk(), 0.5), ("pd2", two_species_pd(), 0.3), ("bipartite", bipartite(), 0.5)):
        beta = 0.3 * sp.beta_0(s)
        alpha = classify_definiteness(s).alpha
        eta = 0.2 * (sp.beta_c(s) ** 2 - 4 * alpha * beta ** 2) / 2
        r = concentration_experiment(s, ModelParams(beta, h), eta, 14, n, seed=4000)
        good = r.empirical <= r.bound * (1 + 3 * r.std_err)
        ok &= good
        parts.append(f"{name}: {r.empirical:.4f} <= {r.bound:.4f}")
    return CriterionResult(10, "concentration inequality", ok, "; ".join(parts))


@_timed
def check_parisi(quick: bool = False) -> CriterionResult:
    s = two_species_pd()
    p = ModelParams(0.7, 0.4)
    sol = rs_solver.solve(s, p)
    q = sol.q
    red = abs(parisi.evaluate_parisi(s, p, parisi.ParisiSequences.replica_symmetric(q))
              - parisi.evaluate_rs_functional(s, p, q))
    a = parisi.ParisiSequences.from_inner([0.45], [0.5 * q, q])
    b = parisi.ParisiSequences.from_inner([0.3, 0.45], [0.5 * q, 0.5 * q, q])
    ins = abs(parisi.evaluate_parisi(s, p, a) - parisi.evaluate_parisi(s, p, b))
    x = np.array([0.3, 0.6])
    dh = 1e-5
    fd = np.array([(parisi.evaluate_rs_functional(s, p, x + dh * e) - parisi.evaluate_rs_functional(s, p, x - dh * e))
                   / (2 * dh) for e in np.eye(2)])
    grad = float(np.max(np.abs(fd - parisi.rs_gradient(s, p, x))))
    pert = parisi.onersb_perturbation(s, p, q)
    rel = float(np.max(np.abs(pert.hessV_numeric - pert.hessV_formula)) / np.max(np.abs(pert.hessV_formula)))
    gv = float(np.max(np.abs(pert.gradV)))
    ok = red <= 1e-10 and ins <= 1e-10 and grad <= 1e-6 and abs(pert.V) <= 1e-5 and gv <= 1e-5 and rel <= 1e-3
    return CriterionResult(11, "Parisi suite", ok,
                           f"k=0 reduction={red:.1e} insertion={ins:.1e} grad FD={grad:.1e} "
                           f"V(q*)={pert.V:.1e} gradV={gv:.1e} Hessian rel err={rel:.2e}")


@_timed
def check_rsb_certificate(quick: bool = False) -> CriterionResult:
    s = two_species_pd()
    mismatches, worst, n = 0, 0.0, 0
    for h in (0.3, 0.6):
        for beta in np.linspace(0.3, 2.5, 23 if not quick else 8):
            sol = rs_solver.solve(s, ModelParams(beta, h))
            bat = sp.beta_at(s, sol)
            if abs(beta - bat) < 1e-9:
                continue
            cert = sp.rsb_certificate(s, sol, beta)
            n += 1
            mismatches += cert.certified != (beta > bat)
            ident = cert.rho_gamma * (beta ** 2 * cert.rho_gamma - 1)
            worst = max(worst, abs(cert.quadratic_form - ident))
    ok = mismatches == 0 and worst <= 1e-8
    return CriterionResult(12, "RSB certificate", ok,
                           f"{n} points: witness/beta_AT mismatches={mismatches} identity err={worst:.1e}")


CRITERIA = (
    check_exact_algebra,
    check_beta_c,
    check_at_consistency,
    check_fixed_points,
    check_lyapunov,
    check_sigma,
    check_simulation,
    check_lln,
    check_clt,
    check_concentration,
    check_parisi,
    check_rsb_certificate,
)


def run_all(quick: bool = False, only=None) -> list[CriterionResult]:
    out = []
    for k, fn in enumerate(CRITERIA, start=1):
        if only and k not in only:
            continue
        out.append(fn(quick))
    return out
