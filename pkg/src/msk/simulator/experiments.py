"""Disorder-averaged estimators checked against the closed-form theory."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..errors import TooLarge
from ..model import ModelParams, SpeciesStructure, matrix_abs_V, realized_structure
from ..parallel import ordered_map as map_samples
from .disorder import sample_disorder, sample_seeds
from .exact import GibbsEstimate, exact_gibbs, gibbs_log_weights
from .mcmc import mcmc_gibbs

MAX_CONCENTRATION_N = 20


def jackknife(samples: np.ndarray, statistic) -> tuple[np.ndarray, np.ndarray]:
    """Full-sample statistic and its leave-one-out jackknife standard error (axis 0)."""
    samples = np.asarray(samples)
    n = samples.shape[0]
    full = np.asarray(statistic(samples))
    loo = np.array([statistic(np.delete(samples, k, axis=0)) for k in range(n)])
    se = np.sqrt((n - 1) / n * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    return full, se


def _mean_jackknife(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # leave-one-out means in closed form; identical to jackknife() for the mean
    n = x.shape[0]
    return x.mean(axis=0), x.std(axis=0, ddof=1) / np.sqrt(n)


def species_block_means(s_sizes: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Average of an N x N array over species blocks I_s x I_t."""
    edges = np.concatenate([[0], np.cumsum(s_sizes)])
    m = s_sizes.size
    out = np.empty((m, m))
    for a in range(m):
        for b in range(m):
            out[a, b] = M[edges[a]:edges[a + 1], edges[b]:edges[b + 1]].mean()
    return out


@dataclass(frozen=True, eq=False)
class OverlapMoments:
    U0: np.ndarray
    U1: np.ndarray
    U2: np.ndarray
    q_used: np.ndarray
    n_disorder: int
    std_err: tuple[np.ndarray, np.ndarray, np.ndarray]
    N: int

    @property
    def U(self):
        return self.U0, self.U1, self.U2

    def to_dict(self) -> dict:
        return {
            "U0": self.U0.tolist(), "U1": self.U1.tolist(), "U2": self.U2.tolist(),
            "std_err": [x.tolist() for x in self.std_err],
            "q_used": self.q_used.tolist(), "n_disorder": self.n_disorder, "N": self.N,
        }


def _sample_moments(g: GibbsEstimate, sizes: np.ndarray) -> np.ndarray:
    """Per-sample block averages A0, A1, A2 and, broadcast over rows, r_t = avg_{i in I_t} <s_i>^2."""
    m1, m2 = g.one_point, g.two_point
    A2 = species_block_means(sizes, m2 * m2)
    A1 = species_block_means(sizes, m2 * np.outer(m1, m1))
    A0 = species_block_means(sizes, np.outer(m1 * m1, m1 * m1))
    edges = np.concatenate([[0], np.cumsum(sizes)])
    r = np.array([np.mean(m1[edges[a]:edges[a + 1]] ** 2) for a in range(sizes.size)])
    return np.stack([A0, A1, A2, np.broadcast_to(r, A0.shape)])


def _gibbs(d, p, method: str, mcmc_kwargs):
    if method == "exact":
        return exact_gibbs(d, p)
    if method == "mcmc":
        return mcmc_gibbs(d, p, seed=int(d.seed) % (2 ** 32), **(mcmc_kwargs or {}))
    raise ValueError(f"unknown method {method!r}")


def overlap_moments(s: SpeciesStructure, p: ModelParams, q, N: int, n_disorder: int, seed: int,
                    method: str = "exact", threads: int | None = None,
                    mcmc_kwargs: dict | None = None) -> OverlapMoments:
    """nu((R - q)(R - q)^T) for the replica pairings (12,34), (12,13), (12,12).

    Two-replica Gibbs averages factor into one-replica correlations:
    <R12^s R12^t> = avg <s_i s_j>^2, <R12^s R13^t> = avg <s_i s_j><s_i><s_j>,
    <R12^s R34^t> = avg <s_i>^2 <s_j>^2, <R12^s> = avg <s_i>^2.
    If ``q`` is None the RS fixed point of the realized structure is used.
    """
    if q is None:
        from ..rs_solver import solve

        q = solve(realized_structure(s, N), p).q
    q = np.asarray(q, dtype=float)
    seeds = sample_seeds(seed, n_disorder)

    def one(sd):
        d = sample_disorder(s, N, int(sd))
        return _sample_moments(_gibbs(d, p, method, mcmc_kwargs), d.species_sizes)

    raw = np.array(map_samples(one, seeds, threads))  # (n, 4, m, m)
    r = raw[:, 3, 0, :]
    centred = []
    for k in range(3):
        X = raw[:, k] - q[:, None] * r[:, None, :] - q[None, :] * r[:, :, None] + np.outer(q, q)
        centred.append(_mean_jackknife(X))
    U = [c[0] for c in centred]
    se = tuple(c[1] for c in centred)
    return OverlapMoments(U[0], U[1], U[2], q, int(n_disorder), se, int(N))


def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform of a length-2^n vector."""
    a = np.array(a, dtype=float)
    n = a.size
    h = 1
    while h < n:
        a = a.reshape(-1, 2, h)
        a = np.stack([a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]], axis=1)
        h *= 2
    return a.reshape(n)


def overlap_distribution(logw: np.ndarray) -> np.ndarray:
    """Law of tau = sigma^1 sigma^2 (as a bit mask) for two independent Gibbs replicas:
    the XOR autocorrelation of the Gibbs weights, via H (H p)^2 / 2^N."""
    w = np.exp(logw - logw.max())
    pr = w / w.sum()
    P = fwht(fwht(pr) ** 2) / pr.size
    return np.maximum(P, 0.0)


def species_overlaps(sizes: np.ndarray) -> np.ndarray:
    """R^s for every mask tau (rows), species in columns."""
    N = int(sizes.sum())
    tau = np.arange(1 << N, dtype=np.uint64)
    edges = np.concatenate([[0], np.cumsum(sizes)])
    cols = []
    for a in range(sizes.size):
        mask = np.uint64(((1 << int(edges[a + 1])) - 1) ^ ((1 << int(edges[a])) - 1))
        flips = np.bitwise_count(tau & mask).astype(float)
        cols.append((sizes[a] - 2 * flips) / sizes[a])
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class ConcentrationResult:
    empirical: float
    std_err: float
    bound: float
    N: int
    n_disorder: int

    def to_dict(self) -> dict:
        return {"empirical": self.empirical, "std_err": self.std_err,
                "bound": self.bound if np.isfinite(self.bound) else "Infinite",
                "N": self.N, "n_disorder": self.n_disorder}


def concentration_experiment(s: SpeciesStructure, p: ModelParams, eta: float, N: int,
                             n_disorder: int, seed: int, q=None,
                             threads: int | None = None) -> ConcentrationResult:
    """nu(exp(eta N P(R12 - q))) from the exact two-replica overlap law per disorder sample."""
    from ..rs_solver import solve
    from ..spectral_phase import concentration_bound

    if N > MAX_CONCENTRATION_N:
        raise TooLarge(f"concentration experiment limited to N <= {MAX_CONCENTRATION_N}")
    sr = realized_structure(s, N)
    q = solve(sr, p).q if q is None else np.asarray(q, dtype=float)
    r = np.sqrt(sr.lam)
    K = r[:, None] * matrix_abs_V(sr) * r[None, :]
    seeds = sample_seeds(seed, n_disorder)
    first = sample_disorder(s, N, int(seeds[0]))
    Rb = species_overlaps(first.species_sizes) - q
    expo = eta * N * np.einsum("ks,st,kt->k", Rb, K, Rb)

    def one(sd):
        d = sample_disorder(s, N, int(sd))
        P = overlap_distribution(gibbs_log_weights(d, p))
        return float(P @ np.exp(expo))

    vals = np.array(map_samples(one, seeds, threads))
    mean, se = _mean_jackknife(vals)
    return ConcentrationResult(float(mean), float(se), concentration_bound(sr, p, eta),
                               int(N), int(n_disorder))


@dataclass(frozen=True)
class CltResult:
    N: int
    n_disorder: int
    mean_FN: float
    mean_FN_se: float
    var_scaled: float
    var_scaled_se: float
    rs_value: float
    b_theory: float
    ks_distance: float
    exploratory: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def free_energies(s: SpeciesStructure, p: ModelParams, N: int, n_disorder: int, seed: int,
                  threads: int | None = None) -> np.ndarray:
    seeds = sample_seeds(seed, n_disorder)

    def one(sd):
        return exact_gibbs(sample_disorder(s, N, int(sd)), p, two_point=False).F_N

    return np.array(map_samples(one, seeds, threads))


def clt_experiment(s: SpeciesStructure, p: ModelParams, N: int, n_disorder: int, seed: int,
                   threads: int | None = None) -> CltResult:
    """Per-sample F_N by enumeration against RS(beta, h) and the CLT variance b(beta, h)."""
    from ..parisi import rs_value
    from ..spectral_phase import beta_0

    sr = realized_structure(s, N)
    clt = rs_value(sr, p)
    F = free_energies(s, p, N, n_disorder, seed, threads)
    mean, mean_se = _mean_jackknife(F)
    var, var_se = jackknife(F, lambda x: N * np.var(x, ddof=1))
    b = clt.b_h
    if b > 0 and np.std(F) > 0:
        z = np.sqrt(N) * (F - clt.rs_value) / np.sqrt(b)
        ks = float(stats.kstest(z, "norm").statistic)
    else:
        ks = 0.0 if np.ptp(F) == 0 else float("nan")
    exploratory = not (p.h > 0 and p.beta < beta_0(s))
    return CltResult(int(N), int(n_disorder), float(mean), float(mean_se), float(var),
                     float(var_se), clt.rs_value, float(b), ks, exploratory)
