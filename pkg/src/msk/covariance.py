"""Cavity linear system for the overlap covariance and its Lyapunov solution."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import expm

from .errors import BackendDisagreement, DimensionMismatch, NotStable, StabilityViolated
from .model import SpeciesStructure
from .spectral_phase import spectral_abscissa

AGREE_TOL = 1e-8
COND_LIMIT = 1e12
TRUNC_EPS = 1e-14


def sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


@dataclass(frozen=True, eq=False)
class CavityCoefficients:
    b0: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    theta0: np.ndarray  # diagonal of Theta(i) = beta^-2 B(i) Lambda^-1
    theta1: np.ndarray
    theta2: np.ndarray
    delta2_lam: np.ndarray

    @property
    def b(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.b0, self.b1, self.b2

    @property
    def B(self) -> tuple[np.ndarray, ...]:
        return tuple(np.diag(v) for v in self.b)

    @property
    def Theta(self) -> tuple[np.ndarray, ...]:
        return tuple(np.diag(v) for v in (self.theta0, self.theta1, self.theta2))

    @property
    def Bhat(self) -> tuple[np.ndarray, ...]:
        return tuple(v[:, None] * self.delta2_lam for v in self.b)


def cavity_coefficients(s: SpeciesStructure, sol, beta: float) -> CavityCoefficients:
    q, qh, lam = np.asarray(sol.q), np.asarray(sol.qhat), s.lam
    raw = (qh - q * q, q * (1 - q), 1 - q * q)
    b2 = beta ** 2
    return CavityCoefficients(
        *(b2 * r for r in raw),
        *(r / lam for r in raw),
        delta2_lam=s.delta2_lam,
    )


@dataclass(frozen=True)
class ConstantMatrices:
    C0: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    V: np.ndarray
    T0: np.ndarray
    T1: np.ndarray
    T2: np.ndarray

    @property
    def C(self):
        return self.C0, self.C1, self.C2

    @property
    def T(self):
        return self.T0, self.T1, self.T2


def _int(a) -> np.ndarray:
    a = np.array(a, dtype=np.int64)
    a.flags.writeable = False
    return a


@lru_cache(maxsize=1)
def constant_matrices() -> ConstantMatrices:
    eye = np.eye(3, dtype=np.int64)
    return ConstantMatrices(
        C0=_int([[10, -8, 1], [6, -3, 0], [3, 0, 0]]),
        C1=_int([[-8, 4, 0], [-3, -2, 1], [0, -4, 0]]),
        C2=_int(eye),
        V=_int([[-3, 2, 0], [3, -4, 1], [1, -2, 1]]),
        T0=_int([[3, -3, 0], [0, 3, 0], [0, 0, 1]]),
        T1=_int([[-4, 2, 0], [0, -4, 0], [0, 0, -2]]),
        T2=_int(eye),
    )


def rational_inverse(M) -> list[list[Fraction]]:
    """Exact inverse of a small integer matrix by Gauss-Jordan over the rationals."""
    n = len(M)
    A = [[Fraction(int(x)) for x in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(M)]
    for col in range(n):
        piv = next(r for r in range(col, n) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        pv = A[col][col]
        A[col] = [x / pv for x in A[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
    return [row[n:] for row in A]


def _v_inverse() -> np.ndarray:
    return np.array([[float(x) for x in row] for row in rational_inverse(constant_matrices().V)])


# Lyapunov equation sym(A X) = -C

def _check_stable(A: np.ndarray) -> float:
    a = spectral_abscissa(A)
    if a >= 0:
        raise NotStable(f"spectral abscissa {a:.3e} >= 0")
    return a


def lyapunov_kron(A, C) -> np.ndarray:
    """Solve phi(A) vec(X) = -vec(C) with phi(A) = (A (x) I + I (x) A) / 2."""
    A, C = np.asarray(A, float), np.asarray(C, float)
    m = A.shape[0]
    eye = np.eye(m)
    phi = 0.5 * (np.kron(A, eye) + np.kron(eye, A))
    x = np.linalg.solve(phi, -C.reshape(-1, order="F"))
    return sym(x.reshape(m, m, order="F"))


def lyapunov_integral(A, C, abscissa: float | None = None) -> np.ndarray:
    """X = int_0^inf e^{tA/2} C e^{tA^T/2} dt, truncated where e^{t abscissa / 2} < 1e-14
    and extended by doubling until the next window no longer contributes."""
    A, C = np.asarray(A, float), np.asarray(C, float)
    a = _check_stable(A) if abscissa is None else abscissa

    def f(t):
        E = expm(0.5 * t * A)
        return E @ C @ E.T

    t_star = 2.0 * math.log(1.0 / TRUNC_EPS) / abs(a)
    X, _ = quad_vec(f, 0.0, t_star, epsabs=1e-14, epsrel=1e-12)
    for _ in range(20):
        tail, _ = quad_vec(f, t_star, 2 * t_star, epsabs=1e-14, epsrel=1e-12)
        X = X + tail
        t_star *= 2
        if np.max(np.abs(tail)) <= 1e-12 * max(1.0, np.max(np.abs(X))):
            break
    return sym(X)


def solve_lyapunov(A, C, backend: str = "both") -> np.ndarray:
    """Unique symmetric X with sym(A X) = -C for stable A.

    ``backend`` is ``kron``, ``integral`` or ``both`` (cross-checked, kron returned).
    """
    A, C = np.asarray(A, float), np.asarray(C, float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or C.shape != A.shape:
        raise DimensionMismatch("A and C must be square and of equal shape")
    a = _check_stable(A)
    if backend == "kron":
        return lyapunov_kron(A, C)
    if backend == "integral":
        return lyapunov_integral(A, C, a)
    if backend != "both":
        raise ValueError(f"unknown backend {backend!r}")
    Xk = lyapunov_kron(A, C)
    Xi = lyapunov_integral(A, C, a)
    gap = float(np.max(np.abs(Xk - Xi)))
    if gap > AGREE_TOL * max(1.0, float(np.max(np.abs(Xk)))):
        raise BackendDisagreement(f"Lyapunov backends differ by {gap:.3e}")
    return Xk


class CovarianceSource(str, Enum):
    CLOSED_FORM = "ClosedForm"
    LYAPUNOV_INTEGRAL = "LyapunovIntegral"


@dataclass(frozen=True, eq=False)
class OverlapCovariance:
    Sigma0: np.ndarray
    Sigma1: np.ndarray
    Sigma2: np.ndarray
    Sigma_hat0: np.ndarray
    Sigma_hat1: np.ndarray
    Sigma_hat2: np.ndarray
    source: CovarianceSource
    rho_gamma: float  # beta^2 rho(Gamma Delta^2 Lambda)
    abscissa_gamma_p: float  # beta^2 max Re spec(Gamma' Delta^2 Lambda)

    @property
    def Sigma(self):
        return self.Sigma0, self.Sigma1, self.Sigma2

    @property
    def Sigma_hat(self):
        return self.Sigma_hat0, self.Sigma_hat1, self.Sigma_hat2

    def to_dict(self) -> dict:
        return {
            "Sigma0": self.Sigma0.tolist(),
            "Sigma1": self.Sigma1.tolist(),
            "Sigma2": self.Sigma2.tolist(),
            "Sigma_hat": [x.tolist() for x in self.Sigma_hat],
            "source": self.source.value,
            "stability": {
                "beta2_rho_gamma": self.rho_gamma,
                "beta2_abscissa_gamma_p": self.abscissa_gamma_p,
            },
        }


def stability_margins(s: SpeciesStructure, sol, beta: float) -> tuple[float, float]:
    from .spectral_phase import rho_gamma

    b2 = beta ** 2
    return (b2 * rho_gamma(s, sol.gamma),
            b2 * spectral_abscissa(np.asarray(sol.gamma_p)[:, None] * s.delta2_lam))


def _check_conditions(s, sol, beta) -> tuple[float, float]:
    r, a = stability_margins(s, sol, beta)
    if r >= 1:
        raise StabilityViolated(f"beta^2 rho(Gamma D L) = {r:.6g} >= 1", condition="rho_gamma")
    if a >= 1:
        raise StabilityViolated(f"beta^2 abscissa(Gamma' D L) = {a:.6g} >= 1",
                                condition="abscissa_gamma_p")
    return r, a


def _resolvent_form(s, g: np.ndarray, beta: float, condition: str) -> np.ndarray:
    """g (I - beta^2 D L g)^{-1} Lambda^{-1} for a diagonal g, symmetrised."""
    M = np.eye(s.m) - beta ** 2 * s.delta2_lam * g[None, :]
    if np.linalg.cond(M) > COND_LIMIT:
        raise StabilityViolated(f"resolvent nearly singular ({condition})", condition=condition)
    return sym(g[:, None] * np.linalg.solve(M, np.diag(1.0 / s.lam)))


def _from_hat(hats) -> tuple[np.ndarray, ...]:
    Vinv = _v_inverse()
    return tuple(sum(Vinv[i, l] * hats[l] for l in range(3)) for i in range(3))


def _sigma_hat0(s, sol, beta, S1, backend):
    gp, gpp = np.asarray(sol.gamma_p), np.asarray(sol.gamma_pp)
    DL = s.delta2_lam
    A = -(np.eye(s.m) - beta ** 2 * gp[:, None] * DL)
    C = beta ** 2 * sym(gpp[:, None] * DL @ S1) + np.diag(gpp / s.lam)
    return solve_lyapunov(A, C, backend)


def sigma_closed_form(s: SpeciesStructure, sol, beta: float, backend: str = "both") -> OverlapCovariance:
    """Asymptotic N U(i): closed-form hat blocks 1 and 2, Lyapunov for block 0."""
    r, a = _check_conditions(s, sol, beta)
    g, gp = np.asarray(sol.gamma), np.asarray(sol.gamma_p)
    S2 = _resolvent_form(s, g, beta, "rho_gamma")
    S1 = _resolvent_form(s, gp, beta, "abscissa_gamma_p")
    S0 = _sigma_hat0(s, sol, beta, S1, backend)
    hats = (S0, S1, S2)
    return OverlapCovariance(*_from_hat(hats), *hats, CovarianceSource.CLOSED_FORM, r, a)


def sigma_lyapunov(s: SpeciesStructure, sol, beta: float) -> OverlapCovariance:
    """Same quantities with every hat block from the Lyapunov integral (independent check)."""
    r, a = _check_conditions(s, sol, beta)
    DL, lam = s.delta2_lam, s.lam
    eye = np.eye(s.m)
    out = {}
    for key, g in (("2", sol.gamma), ("1", sol.gamma_p)):
        g = np.asarray(g)
        out[key] = lyapunov_integral(-(eye - beta ** 2 * g[:, None] * DL), np.diag(g / lam))
    S0 = _sigma_hat0(s, sol, beta, out["1"], "integral")
    hats = (S0, out["1"], out["2"])
    return OverlapCovariance(*_from_hat(hats), *hats, CovarianceSource.LYAPUNOV_INTEGRAL, r, a)


def finite_n_residual(s: SpeciesStructure, sol, beta: float, U0, U1, U2, N: int):
    """U(i) - sum_{j,k} C_ij(k) sym(Bhat(k) U(j)) - Theta(i)/N for i = 0, 1, 2."""
    U = [np.asarray(x, float) for x in (U0, U1, U2)]
    if any(x.shape != (s.m, s.m) for x in U):
        raise DimensionMismatch(f"U blocks must be {s.m}x{s.m}")
    cc = cavity_coefficients(s, sol, beta)
    Bhat, Theta = cc.Bhat, cc.Theta
    C = constant_matrices().C
    res = []
    for i in range(3):
        acc = U[i] - Theta[i] / N
        for j in range(3):
            for k in range(3):
                if C[k][i, j]:
                    acc = acc - C[k][i, j] * sym(Bhat[k] @ U[j])
        res.append(acc)
    return tuple(res)
