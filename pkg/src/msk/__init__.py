"""Replica-symmetric theory and finite-N simulation of the multi-species SK model."""
from .errors import MSKError
from .model import (
    ModelParams,
    SpeciesStructure,
    bipartite,
    classify_definiteness,
    quad_form_P,
    quad_form_Q,
    sk,
    two_species_pd,
)
from .rs_solver import RsSolution, solve
from .spectral_phase import PhasePoint, beta_0, beta_at, beta_c, classify_phase

__version__ = "0.1.0"

__all__ = [
    "MSKError",
    "ModelParams",
    "PhasePoint",
    "RsSolution",
    "SpeciesStructure",
    "beta_0",
    "beta_at",
    "beta_c",
    "bipartite",
    "classify_definiteness",
    "classify_phase",
    "quad_form_P",
    "quad_form_Q",
    "sk",
    "solve",
    "two_species_pd",
]
