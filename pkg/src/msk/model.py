"""Static model data: species structure, temperature/field, quadratic forms."""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import (
    AsymmetricMatrix,
    BadRatios,
    DimensionMismatch,
    NegativeEntry,
    SingularMatrix,
)

SUM_TOL = 1e-12
SYM_TOL = 1e-12
SINGULAR_RTOL = 1e-10
DEFINITE_RTOL = 1e-10


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SpeciesStructure:
    """Species ratios ``lam`` (length m) and disorder variances ``delta2`` (m x m).

    Construction validates every invariant; an invalid structure cannot exist.
    """

    lam: np.ndarray
    delta2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lam", _frozen(np.atleast_1d(self.lam)))
        object.__setattr__(self, "delta2", _frozen(np.atleast_2d(self.delta2)))
        validate_structure(self)

    @property
    def m(self) -> int:
        return self.lam.shape[0]

    @cached_property
    def Lam(self) -> np.ndarray:
        return np.diag(self.lam)

    @cached_property
    def delta2_lam(self) -> np.ndarray:
        """Delta^2 Lambda (not symmetric in general)."""
        return self.delta2 * self.lam[None, :]

    @cached_property
    def lam_delta2_lam(self) -> np.ndarray:
        return self.lam[:, None] * self.delta2 * self.lam[None, :]

    @cached_property
    def sym_delta2(self) -> np.ndarray:
        """Lambda^{1/2} Delta^2 Lambda^{1/2}, the symmetric similarity of Delta^2 Lambda."""
        r = np.sqrt(self.lam)
        return r[:, None] * self.delta2 * r[None, :]

    def to_dict(self) -> dict:
        return {"m": self.m, "lambda": self.lam.tolist(), "delta2": self.delta2.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "SpeciesStructure":
        s = cls(d["lambda"], d["delta2"])
        if "m" in d and int(d["m"]) != s.m:
            raise DimensionMismatch(f"m={d['m']} but lambda has {s.m} entries")
        return s

    @classmethod
    def load(cls, path) -> "SpeciesStructure":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def with_ratios(self, lam) -> "SpeciesStructure":
        return SpeciesStructure(lam, self.delta2)

    def __repr__(self):
        return f"SpeciesStructure(lam={self.lam.tolist()}, delta2={self.delta2.tolist()})"


@dataclass(frozen=True)
class ModelParams:
    beta: float
    h: float = 0.0

    def __post_init__(self):
        beta, h = float(self.beta), float(self.h)
        if not np.isfinite(beta) or beta < 0:
            raise ValueError(f"beta must be finite and >= 0, got {self.beta}")
        if not np.isfinite(h) or h < 0:
            raise ValueError(f"h must be finite and >= 0, got {self.h}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "h", h)


class Definiteness(str, Enum):
    POSITIVE_DEFINITE = "PositiveDefinite"
    INDEFINITE = "Indefinite"


@dataclass(frozen=True)
class DefinitenessClass:
    tag: Definiteness
    alpha: int

    @property
    def positive_definite(self) -> bool:
        return self.tag is Definiteness.POSITIVE_DEFINITE


def validate_structure(s: SpeciesStructure) -> None:
    lam, d2 = s.lam, s.delta2
    if lam.ndim != 1 or lam.size == 0:
        raise DimensionMismatch("lambda must be a non-empty vector")
    m = lam.size
    if d2.shape != (m, m):
        raise DimensionMismatch(f"delta2 has shape {d2.shape}, expected ({m}, {m})")
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(d2))):
        raise BadRatios("non-finite entries in model data")
    # m == 1 is the SK reduction with lambda = (1,)
    upper_ok = lam <= 1.0 if m == 1 else lam < 1.0
    if not np.all((lam > 0) & upper_ok):
        raise BadRatios(f"species ratios must lie in (0,1), got {lam.tolist()}")
    if abs(lam.sum() - 1.0) > SUM_TOL:
        raise BadRatios(f"species ratios sum to {lam.sum()!r}, not 1")
    if np.max(np.abs(d2 - d2.T)) > SYM_TOL:
        raise AsymmetricMatrix("delta2 is not symmetric")
    if np.any(d2 < 0):
        raise NegativeEntry("delta2 has negative entries")
    sv = np.linalg.svd(d2, compute_uv=False)
    if sv[0] == 0:
        raise SingularMatrix("delta2 is the zero matrix")
    if sv[-1] <= SINGULAR_RTOL * sv[0]:
        raise SingularMatrix(f"delta2 is singular (smallest singular value {sv[-1]:.3e})")


def classify_definiteness(s: SpeciesStructure) -> DefinitenessClass:
    w = np.linalg.eigvalsh(s.delta2)
    rho = np.max(np.abs(w))
    if np.all(w > DEFINITE_RTOL * rho):
        return DefinitenessClass(Definiteness.POSITIVE_DEFINITE, 1)
    return DefinitenessClass(Definiteness.INDEFINITE, 2)


def _check_vec(s: SpeciesStructure, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (s.m,):
        raise DimensionMismatch(f"expected a length-{s.m} vector, got shape {x.shape}")
    return x


def quad_form_Q(s: SpeciesStructure, x) -> float:
    """x^T Lambda Delta^2 Lambda x."""
    x = _check_vec(s, x)
    return float(x @ s.lam_delta2_lam @ x)


def matrix_abs_V(s: SpeciesStructure) -> np.ndarray:
    """|Lambda^{1/2} Delta^2 Lambda^{1/2}| via the spectral decomposition."""
    w, U = np.linalg.eigh(s.sym_delta2)
    V = (U * np.abs(w)) @ U.T
    return 0.5 * (V + V.T)


def quad_form_P(s: SpeciesStructure, x) -> float:
    """x^T Lambda^{1/2} V Lambda^{1/2} x with V = matrix_abs_V(s); always >= 0."""
    x = _check_vec(s, x)
    y = np.sqrt(s.lam) * x
    return float(y @ matrix_abs_V(s) @ y)


def species_sizes(lam, N: int) -> np.ndarray:
    """Round lam * N to integers summing to N (largest-remainder rule)."""
    lam = np.asarray(lam, dtype=float)
    raw = lam * N
    sizes = np.floor(raw).astype(int)
    short = N - sizes.sum()
    # ties broken by species index
    order = sorted(range(lam.size), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in order[:short]:
        sizes[i] += 1
    return sizes


def realized_structure(s: SpeciesStructure, N: int) -> SpeciesStructure:
    """The structure with the finite-N ratios |I_s|/N actually used by the simulator."""
    sizes = species_sizes(s.lam, N)
    lam = sizes / N
    lam = lam / lam.sum()
    return s.with_ratios(lam)


# Reference structures used across tests, the verify battery and the README.
def sk() -> SpeciesStructure:
    return SpeciesStructure([1.0], [[1.0]])


def bipartite() -> SpeciesStructure:
    return SpeciesStructure([0.5, 0.5], [[0.0, 1.0], [1.0, 0.0]])


def two_species_pd() -> SpeciesStructure:
    """A positive-definite 2-species model with Delta_12^2 = 1,
    Delta_11^2 Delta_22^2 > 1 and lambda_1 Delta_11^2 >= lambda_2 Delta_22^2."""
    return SpeciesStructure([0.6, 0.4], [[1.5, 1.0], [1.0, 1.0]])
