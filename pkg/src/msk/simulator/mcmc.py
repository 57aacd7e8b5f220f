"""Metropolis sampling with replica exchange across an inverse-temperature ladder."""
from __future__ import annotations

import numba
import numpy as np
from scipy.integrate import simpson

from ..errors import LadderMisconfigured
from ..model import ModelParams
from .disorder import DisorderSample
from .exact import GibbsEstimate


def integrated_autocorr(x: np.ndarray, c: float = 5.0) -> np.ndarray:
    """tau_int = 1 + 2 sum_t rho(t) along axis 0 with Sokal's self-consistent window."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    y = x - x.mean(axis=0)
    size = 1 << (2 * n - 1).bit_length()
    F = np.fft.rfft(y, n=size, axis=0)
    acov = np.fft.irfft(F * np.conj(F), n=size, axis=0)[:n]
    var0 = acov[0]
    safe = np.where(var0 > 0, var0, 1.0)
    rho = acov / safe
    taus = 2.0 * np.cumsum(rho, axis=0) - 1.0
    window = np.arange(n)[:, None] if taus.ndim > 1 else np.arange(n)
    ok = window >= c * taus
    first = np.where(ok.any(axis=0), ok.argmax(axis=0), n - 1)
    tau = np.take_along_axis(taus, np.atleast_1d(first)[None, ...], axis=0)[0] if taus.ndim > 1 \
        else taus[first]
    return np.where(var0 > 0, np.maximum(tau, 1.0), 1.0)


def _mean_se(series: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean over (chains, time) and an autocorrelation-corrected standard error."""
    n_chains, T = series.shape[:2]
    mean = series.mean(axis=(0, 1))
    var = series.var(axis=(0, 1))
    tau = np.mean([integrated_autocorr(series[c]) for c in range(n_chains)], axis=0)
    return mean, np.sqrt(var * tau / (n_chains * T))


@numba.njit(cache=True, nogil=True)
def _pt_kernel(G, h, ladder, n_chains, burn, sweeps, seed):
    np.random.seed(seed)
    N = G.shape[0]
    L = ladder.size
    spins = np.empty((n_chains, L, N))
    phi = np.zeros((n_chains, L, N))
    H1 = np.zeros((n_chains, L))
    for c in range(n_chains):
        for r in range(L):
            for i in range(N):
                spins[c, r, i] = 1.0 if np.random.random() < 0.5 else -1.0
            for i in range(N):
                acc = 0.0
                for j in range(N):
                    acc += G[i, j] * spins[c, r, j]
                phi[c, r, i] = acc
            e = 0.0
            for i in range(N):
                e += 0.5 * spins[c, r, i] * phi[c, r, i]
            H1[c, r] = e
    rec_sigma = np.empty((n_chains, sweeps, N), dtype=np.int8)
    rec_H1 = np.empty((n_chains, sweeps, L))
    swaps = np.zeros(max(L - 1, 1))
    for t in range(burn + sweeps):
        for c in range(n_chains):
            for r in range(L):
                b = ladder[r]
                for i in range(N):
                    si = spins[c, r, i]
                    dE = -2.0 * si * (b * phi[c, r, i] + h)
                    if dE >= 0.0 or np.random.random() < np.exp(dE):
                        H1[c, r] -= 2.0 * si * phi[c, r, i]
                        for j in range(N):
                            phi[c, r, j] -= 2.0 * si * G[j, i]
                        spins[c, r, i] = -si
            for r in range(L - 1):
                delta = (ladder[r + 1] - ladder[r]) * (H1[c, r] - H1[c, r + 1])
                if delta >= 0.0 or np.random.random() < np.exp(delta):
                    for i in range(N):
                        tmp = spins[c, r, i]
                        spins[c, r, i] = spins[c, r + 1, i]
                        spins[c, r + 1, i] = tmp
                        tmp = phi[c, r, i]
                        phi[c, r, i] = phi[c, r + 1, i]
                        phi[c, r + 1, i] = tmp
                    tmp = H1[c, r]
                    H1[c, r] = H1[c, r + 1]
                    H1[c, r + 1] = tmp
                    if t >= burn:
                        swaps[r] += 1.0
            if t >= burn:
                k = t - burn
                for i in range(N):
                    rec_sigma[c, k, i] = np.int8(spins[c, L - 1, i])
                for r in range(L):
                    rec_H1[c, k, r] = H1[c, r]
    return rec_sigma, rec_H1, swaps / max(sweeps * n_chains, 1)


def default_ladder(beta: float, rungs: int = 16) -> np.ndarray:
    return np.array([0.0]) if beta == 0 else np.linspace(0.0, beta, rungs)


def check_ladder(ladder, beta: float) -> np.ndarray:
    lad = np.asarray(ladder, dtype=float).reshape(-1)
    if lad.size == 0 or lad[0] != 0.0 or not np.isclose(lad[-1], beta, rtol=0, atol=1e-14):
        raise LadderMisconfigured("ladder must start at 0 and end at the target beta")
    if lad.size > 1 and np.any(np.diff(lad) <= 0):
        raise LadderMisconfigured("ladder must be strictly increasing")
    if beta > 0 and lad.size < 2:
        raise LadderMisconfigured("beta > 0 needs at least two rungs for thermodynamic integration")
    lad[-1] = beta
    return lad


def mcmc_gibbs(d: DisorderSample, p: ModelParams, sweeps: int = 20_000, n_replicas: int = 4,
               temperature_ladder=None, burn_in: int | None = None, seed: int = 0) -> GibbsEstimate:
    """Gibbs averages at the top rung; log Z by integrating <H/beta> along the ladder from 0.

    The Metropolis kernel is the standard single-site one; neighbouring rungs try to swap
    configurations after every sweep.
    """
    lad = check_ladder(default_ladder(p.beta) if temperature_ladder is None else temperature_ladder,
                       p.beta)
    burn = sweeps // 5 if burn_in is None else int(burn_in)
    G = np.ascontiguousarray((d.couplings + d.couplings.T) / np.sqrt(d.N))
    rec_sigma, rec_H1, _ = _pt_kernel(G, p.h, lad, int(n_replicas), burn, int(sweeps),
                                      int(seed) % (2 ** 32))
    sig = rec_sigma.astype(float)
    one, one_se = _mean_se(sig)
    iu = np.triu_indices(d.N, 1)
    prods = sig[:, :, iu[0]] * sig[:, :, iu[1]]
    m2, se2 = _mean_se(prods)
    two = np.eye(d.N)
    two_se = np.zeros((d.N, d.N))
    two[iu] = m2
    two[iu[1], iu[0]] = m2
    two_se[iu] = se2
    two_se[iu[1], iu[0]] = se2
    logZ0 = d.N * np.log(2.0 * np.cosh(p.h))
    if lad.size > 1:
        e_mean, e_se = _mean_se(rec_H1)
        logZ = logZ0 + simpson(e_mean, x=lad)
        w = np.gradient(lad) if lad.size > 2 else np.full(2, lad[-1] / 2)
        logZ_se = float(np.sqrt(np.sum((w * e_se) ** 2)))
    else:
        logZ, logZ_se = logZ0, 0.0
    return GibbsEstimate(one, two, float(logZ), float(logZ) / d.N, False, one_se, two_se, logZ_se)
