"""Spectral quantities and phase classification.

beta_c, the AT line, the indefinite-case (conjectural) condition, the Hessian
of the 1-RSB perturbation, the RSB certificate and the overlap concentration
bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import EigenFailure, MSKError, NotPositiveDefinite, ZeroSpectralRadius
from .model import ModelParams, SpeciesStructure, classify_definiteness, matrix_abs_V

SIMILARITY_TOL = 1e-10


def _eigvals(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    try:
        w = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    if not np.all(np.isfinite(w)):
        raise EigenFailure("non-finite eigenvalues")
    return w


def spectral_radius(A) -> float:
    return float(np.max(np.abs(_eigvals(A))))


def spectral_abscissa(A) -> float:
    return float(np.max(_eigvals(A).real))


def _similar_radius(general: np.ndarray, symmetric: np.ndarray) -> float:
    """rho of ``general`` via a general eigensolver, cross-checked on its symmetric similarity."""
    r_gen = spectral_radius(general)
    r_sym = float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (symmetric + symmetric.T)))))
    if abs(r_gen - r_sym) > SIMILARITY_TOL * max(1.0, r_sym):
        raise EigenFailure(f"spectral radii disagree: {r_gen!r} vs {r_sym!r}")
    return r_sym


def rho_delta2_lam(s: SpeciesStructure) -> float:
    return _similar_radius(s.delta2_lam, s.sym_delta2)


def beta_c(s: SpeciesStructure) -> float:
    """rho(Delta^2 Lambda)^{-1/2}."""
    rho = rho_delta2_lam(s)
    if rho == 0:
        raise ZeroSpectralRadius("rho(Delta^2 Lambda) = 0")
    return rho ** -0.5


def beta_0(s: SpeciesStructure) -> float:
    alpha = classify_definiteness(s).alpha
    return beta_c(s) / math.sqrt(4 * alpha)


def rho_gamma(s: SpeciesStructure, gamma) -> float:
    """rho(Gamma Delta^2 Lambda) for a nonnegative diagonal Gamma."""
    gamma = np.asarray(gamma, dtype=float)
    general = gamma[:, None] * s.delta2_lam
    g = np.sqrt(np.clip(gamma, 0.0, None))
    symmetric = g[:, None] * s.sym_delta2 * g[None, :]
    return _similar_radius(general, symmetric)


def beta_at(s: SpeciesStructure, sol) -> float:
    """rho(Gamma Delta^2 Lambda)^{-1/2}; +inf when Gamma vanishes (saturated field)."""
    rho = rho_gamma(s, sol.gamma)
    if rho == 0:
        return math.inf
    return rho ** -0.5


@dataclass(frozen=True)
class IndefiniteCondition:
    rho_gamma: float
    abscissa_gamma_p: float
    exceeds: bool
    conjectural: bool = True


def indefinite_condition(s: SpeciesStructure, sol) -> IndefiniteCondition:
    """beta^2 max{rho(Gamma D L), max Re spec(Gamma' D L)} > 1 -- a conjectured RSB condition."""
    r = rho_gamma(s, sol.gamma)
    a = spectral_abscissa(np.asarray(sol.gamma_p)[:, None] * s.delta2_lam)
    return IndefiniteCondition(r, a, bool(sol.beta ** 2 * max(r, a) > 1.0))


def _require_pd(s: SpeciesStructure) -> None:
    if not classify_definiteness(s).positive_definite:
        raise NotPositiveDefinite("formula only holds for positive-definite Delta^2")


def hv_matrix(s: SpeciesStructure, sol, beta: float) -> np.ndarray:
    """beta^2 Lambda (beta^2 Delta^2 Lambda Gamma Delta^2 - Delta^2) Lambda."""
    _require_pd(s)
    D, L = s.delta2, s.Lam
    G = np.diag(sol.gamma)
    H = beta ** 2 * L @ (beta ** 2 * D @ L @ G @ D - D) @ L
    return 0.5 * (H + H.T)


@dataclass(frozen=True)
class RsbCertificate:
    witness: np.ndarray | None
    quadratic_form: float  # x^T Lambda (beta^2 D L Gamma D - D) Lambda x = rho (beta^2 rho - 1)
    hv_form: float  # x^T HV x = beta^2 * quadratic_form
    rho_gamma: float
    conditional: bool  # True when the fixed point is not certified unique

    @property
    def certified(self) -> bool:
        return self.witness is not None


def perron_direction(s: SpeciesStructure, gamma) -> tuple[np.ndarray, float]:
    """x = Lambda^{-1/2} Gamma^{1/2} u with u the unit Perron vector of
    Gamma^{1/2} Lambda^{1/2} Delta^2 Lambda^{1/2} Gamma^{1/2}; returns (x, rho)."""
    g = np.sqrt(np.asarray(gamma, dtype=float))
    M = g[:, None] * s.sym_delta2 * g[None, :]
    w, U = np.linalg.eigh(0.5 * (M + M.T))
    u = U[:, -1]
    u = np.abs(u)  # Perron vector of a nonnegative matrix, sign fixed
    x = g * u / np.sqrt(s.lam)
    return x, float(w[-1])


def rsb_certificate(s: SpeciesStructure, sol, beta: float) -> RsbCertificate:
    _require_pd(s)
    x, rho = perron_direction(s, sol.gamma)
    HV = hv_matrix(s, sol, beta)
    hv_form = float(x @ HV @ x)
    qf = hv_form / beta ** 2 if beta > 0 else -rho
    witness = x if hv_form > 0 and np.all(x > 0) else None
    return RsbCertificate(witness, qf, hv_form, rho, conditional=not sol.unique_certified)


def concentration_bound(s: SpeciesStructure, p: ModelParams, eta: float) -> float:
    """det(I - (2 eta + 4 alpha beta^2) V)^{-1/2} when 2 eta < beta_c^2 - 4 alpha beta^2, else inf."""
    alpha = classify_definiteness(s).alpha
    bc2 = beta_c(s) ** 2
    if not 2 * eta < bc2 - 4 * alpha * p.beta ** 2:
        return math.inf
    c = 2 * eta + 4 * alpha * p.beta ** 2
    sign, logdet = np.linalg.slogdet(np.eye(s.m) - c * matrix_abs_V(s))
    if sign <= 0:
        return math.inf
    return float(np.exp(-0.5 * logdet))


class Region(str, Enum):
    PROVED_RS_THM1 = "ProvedRS_Thm1"
    PROVED_RS_ZERO_FIELD = "ProvedRS_ZeroField"
    BELOW_AT_UNPROVEN = "BelowATUnproven"
    RSB_CERTIFIED = "RSBCertified"
    INDEFINITE_CONJECTURAL_RSB = "IndefiniteConjecturalRSB"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class PhasePoint:
    beta: float
    h: float
    beta_c: float
    beta_0: float
    beta_at: float | None
    region: Region
    rsb_witness: np.ndarray | None = None
    conjectural: bool = False
    notes: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "beta": self.beta,
            "h": self.h,
            "beta_c": self.beta_c,
            "beta_0": self.beta_0,
            "beta_at": self.beta_at,
            "region": self.region.value,
            "rsb_witness": None if self.rsb_witness is None else self.rsb_witness.tolist(),
            "conjectural": self.conjectural,
            "notes": self.notes,
        }


def classify_phase(s: SpeciesStructure, p: ModelParams) -> PhasePoint:
    """Region of (beta, h), in priority order: RS below beta_0, zero-field RS,
    certified RSB (pd only), conjectural indefinite RSB, below AT, unknown."""
    from .rs_solver import solve

    bc, b0 = beta_c(s), beta_0(s)
    pd = classify_definiteness(s).positive_definite
    base = dict(beta=p.beta, h=p.h, beta_c=bc, beta_0=b0)
    if p.beta < b0:
        sol = solve(s, p)
        return PhasePoint(**base, beta_at=beta_at(s, sol), region=Region.PROVED_RS_THM1)
    if p.h == 0:
        if p.beta < bc:
            return PhasePoint(**base, beta_at=bc, region=Region.PROVED_RS_ZERO_FIELD)
        return PhasePoint(**base, beta_at=bc, region=Region.UNKNOWN,
                          notes={"reason": "h = 0 above beta_c"})
    try:
        sol = solve(s, p)
    except MSKError as exc:
        return PhasePoint(**base, beta_at=None, region=Region.UNKNOWN,
                          notes={"error": type(exc).__name__})
    bat = beta_at(s, sol)
    notes = {"unique_certified": sol.unique_certified}
    if pd:
        cert = rsb_certificate(s, sol, p.beta)
        if cert.certified:
            return PhasePoint(**base, beta_at=bat, region=Region.RSB_CERTIFIED,
                              rsb_witness=cert.witness, notes=notes)
        return PhasePoint(**base, beta_at=bat, region=Region.BELOW_AT_UNPROVEN, notes=notes)
    cond = indefinite_condition(s, sol)
    notes.update(rho_gamma=cond.rho_gamma, abscissa_gamma_p=cond.abscissa_gamma_p)
    if cond.exceeds:
        return PhasePoint(**base, beta_at=bat, region=Region.INDEFINITE_CONJECTURAL_RSB,
                          conjectural=True, notes=notes)
    return PhasePoint(**base, beta_at=bat, region=Region.BELOW_AT_UNPROVEN, notes=notes)
