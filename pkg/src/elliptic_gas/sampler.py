"""Metropolis sampling of the n-particle Gibbs measure

    prod_{j<k} |z_j - z_k|^2 exp(-N sum_j V(z_j)).

Each chain sweeps the particles in order, proposing a Gaussian move for one
particle at a time.  Random numbers come from counter-based Philox streams,
one pair (normals, uniforms) per chain, spawned from a single seed, so a
given configuration always reproduces the same output bit for bit.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from . import geometry as geo
from .params import EnsembleParams

BLOCK_SWEEPS = 4096
RNG_NAME = "numpy.random.Philox (SeedSequence.spawn per chain; separate normal and uniform streams)"


@dataclass(frozen=True)
class SamplerConfig:
    """Settings for :func:`run`.

    ``proposal_scale`` defaults to 0.7 / sqrt(N).  Samples are recorded every
    ``thin`` sweeps after ``burn_in`` sweeps.
    """

    params: EnsembleParams
    seed: int
    sweeps: int
    burn_in: int = 1000
    thin: int = 1
    proposal_scale: float | None = None
    chains: int = 4
    bins: int = 35
    keep_configs: int = 0
    threads: int = 1

    def __post_init__(self):
        if not self.sweeps > self.burn_in >= 0:
            raise ValueError("need sweeps > burn_in >= 0")
        if self.thin < 1 or self.chains < 1 or self.bins < 1:
            raise ValueError("thin, chains and bins must be positive")
        if self.proposal_scale is None:
            object.__setattr__(self, "proposal_scale", 0.7 / math.sqrt(self.params.N))
        if not self.proposal_scale > 0:
            raise ValueError("proposal_scale must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class SampleBatch:
    """Recorded statistics of all chains.

    ``outside_counts`` has shape (chains, samples); ``arclength_bins`` holds
    the number of escaper projections per equal-arclength bin, bin 0 starting
    at theta = 0 and running counter-clockwise.
    """

    outside_counts: np.ndarray
    arclength_bins: np.ndarray
    acceptance_rate: float
    chain_acceptance: np.ndarray
    configs: list = field(default_factory=list)
    warning: str | None = None

    @property
    def mean_outside(self) -> float:
        return float(np.mean(self.outside_counts))


def energy(config, params: EnsembleParams) -> float:
    """sum_j V(z_j) - (2/N) sum_{j<k} log|z_j - z_k|."""
    z = np.asarray(config, dtype=complex)
    v = float(np.sum(np.asarray(geo.potential(z, params))))
    diff = np.abs(z[:, None] - z[None, :])
    iu = np.triu_indices(z.size, 1)
    return v - 2.0 / params.N * float(np.sum(np.log(diff[iu])))


@numba.njit(cache=True, nogil=True)
def _delta(z, i, new, t, N):
    old = z[i]
    dv = (new.real ** 2 + new.imag ** 2 - t * (new.real ** 2 - new.imag ** 2)) - (
        old.real ** 2 + old.imag ** 2 - t * (old.real ** 2 - old.imag ** 2)
    )
    acc = 0.0
    for k in range(z.size):
        if k == i:
            continue
        d_new = abs(z[k] - new)
        if d_new < 1e-14:
            return np.inf
        acc += math.log(abs(z[k] - old)) - math.log(d_new)
    return dv + 2.0 / N * acc


def energy_delta(config, particle_index: int, proposed: complex, params: EnsembleParams) -> float:
    """Energy change from moving one particle; +inf when it would coincide with another."""
    z = np.ascontiguousarray(config, dtype=np.complex128)
    return float(_delta(z, int(particle_index), complex(proposed), params.t, params.N))


@numba.njit(cache=True, nogil=True)
def _sweeps(z, normals, uniforms, scale, t, N):
    # normals: (sweeps, n, 2), uniforms: (sweeps, n); returns accepted moves
    n = z.size
    accepted = 0
    for s in range(uniforms.shape[0]):
        for i in range(n):
            new = z[i] + scale * complex(normals[s, i, 0], normals[s, i, 1])
            d = _delta(z, i, new, t, N)
            if d <= 0.0 or uniforms[s, i] < math.exp(-N * d):
                z[i] = new
                accepted += 1
    return accepted


@numba.njit(cache=True, nogil=True)
def _sweeps_record(z, normals, uniforms, scale, t, N, a2, b2, T, thin, phase, counts, outside, n_out):
    # like _sweeps, recording outside counts and outside positions every thin sweeps
    n = z.size
    accepted = 0
    rec = 0
    for s in range(uniforms.shape[0]):
        for i in range(n):
            new = z[i] + scale * complex(normals[s, i, 0], normals[s, i, 1])
            d = _delta(z, i, new, t, N)
            if d <= 0.0 or uniforms[s, i] < math.exp(-N * d):
                z[i] = new
                accepted += 1
        if (phase + s + 1) % thin == 0:
            c = 0
            for i in range(n):
                if a2 * z[i].real ** 2 + b2 * z[i].imag ** 2 > T:
                    outside[n_out] = z[i]
                    n_out += 1
                    c += 1
            counts[rec] = c
            rec += 1
    return accepted, rec, n_out


def _initial_config(params: EnsembleParams, rng: np.random.Generator) -> np.ndarray:
    # uniform points in the droplet
    n = params.n
    cap, t = geo.capacity(params), params.t
    r = np.sqrt(rng.uniform(0, 1, n))
    a = rng.uniform(0, 2 * np.pi, n)
    return (cap * (1 + t) * r * np.cos(a) + 1j * cap * (1 - t) * r * np.sin(a)).astype(np.complex128)


def _chain(config: SamplerConfig, seq: np.random.SeedSequence, bin_edges_theta: np.ndarray):
    p = config.params
    init_seq, normal_seq, uniform_seq = seq.spawn(3)
    normal_rng = np.random.Generator(np.random.Philox(normal_seq))
    uniform_rng = np.random.Generator(np.random.Philox(uniform_seq))
    z = _initial_config(p, np.random.Generator(np.random.Philox(init_seq)))
    n, t, N, T = p.n, p.t, p.N, p.T
    a2, b2 = (1 - t) / (1 + t), (1 + t) / (1 - t)
    scale = config.proposal_scale
    accepted = 0
    done = 0
    samples = (config.sweeps - config.burn_in) // config.thin
    counts = np.zeros(samples, dtype=np.int64)
    n_rec = 0
    hist = np.zeros(config.bins, dtype=np.int64)
    kept = []
    while done < config.sweeps:
        block = min(BLOCK_SWEEPS, config.sweeps - done)
        normals = normal_rng.standard_normal((block, n, 2))
        uniforms = uniform_rng.random((block, n))
        if done + block <= config.burn_in:
            accepted += _sweeps(z, normals, uniforms, scale, t, N)
        else:
            skip = max(0, config.burn_in - done)
            if skip:
                accepted += _sweeps(z, normals[:skip], uniforms[:skip], scale, t, N)
            phase = done + skip - config.burn_in
            outside = np.empty((block - skip) * n, dtype=np.complex128)
            room = counts[n_rec:]
            acc, rec, n_out = _sweeps_record(
                z, normals[skip:], uniforms[skip:], scale, t, N, a2, b2, T, config.thin, phase, room, outside, 0
            )
            accepted += acc
            n_rec += rec
            if n_out:
                theta, _ = project_to_boundary(outside[:n_out], p)
                hist += np.histogram(np.mod(theta, 2 * np.pi), bins=bin_edges_theta)[0]
            if len(kept) < config.keep_configs:
                kept.append(z.copy())
        done += block
    return counts[:n_rec], hist, accepted / (config.sweeps * n), kept


def run(config: SamplerConfig) -> SampleBatch:
    """Run all chains and collect outside counts and boundary projections."""
    p = config.params
    # equal-arclength bin edges expressed in the boundary angle
    L = geo.perimeter(p)
    edges = np.asarray(geo.theta_at_arclength(np.linspace(0, L, config.bins + 1), p), dtype=float)
    edges[0], edges[-1] = 0.0, 2 * np.pi
    seqs = np.random.SeedSequence(int(config.seed)).spawn(config.chains)
    if config.threads > 1 and config.chains > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(lambda s: _chain(config, s, edges), seqs))
    else:
        results = [_chain(config, s, edges) for s in seqs]
    counts = np.stack([r[0] for r in results])
    hist = np.sum([r[1] for r in results], axis=0)
    rates = np.array([r[2] for r in results])
    configs = [c for r in results for c in r[3]]
    rate = float(np.mean(rates))
    warning = None
    if not 0.2 < rate < 0.7:
        warning = f"acceptance rate {rate:.3f} outside (0.2, 0.7)"
        warnings.warn(warning, RuntimeWarning, stacklevel=2)
    return SampleBatch(counts, hist, rate, rates, configs, warning)


def project_to_boundary(z, params: EnsembleParams, theta_guess=None):
    """Nearest boundary point of exterior points: returns (theta, distance).

    Newton iteration on the orthogonality condition starts from the angle of
    psi(z) (the conformal angle), which lies on the nearest-point side for
    points outside K.
    """
    z = np.asarray(z, dtype=complex)
    if theta_guess is None:
        if params.t == 0.0:
            theta_guess = np.angle(z)
        else:
            theta_guess = np.angle(np.asarray(geo.psi(z, params)))
    theta, x = geo.normal_coordinates(z, params, theta_guess=theta_guess)
    return theta, x


def blocked_standard_error(series, min_blocks: int = 32) -> float:
    """Standard error of the mean of a correlated series by repeated blocking.

    The series is halved by pairwise averaging while at least ``min_blocks``
    blocks remain; the largest naive error over the levels is returned.
    """
    x = np.asarray(series, dtype=float)
    best = 0.0
    while x.size >= min_blocks:
        se = math.sqrt(np.var(x, ddof=1) / x.size) if x.size > 1 else 0.0
        best = max(best, se)
        m = x.size // 2
        x = 0.5 * (x[0 : 2 * m : 2] + x[1 : 2 * m : 2])
    return best


def combined_standard_error(chains) -> float:
    """Standard error of the grand mean of equal-length independent chains."""
    ses = [blocked_standard_error(c) for c in chains]
    return math.sqrt(sum(s * s for s in ses)) / len(ses)


def gelman_rubin(chains) -> float:
    """Potential scale reduction factor R-hat over equal-length chains."""
    x = np.asarray(chains, dtype=float)
    m, n = x.shape
    means = x.mean(axis=1)
    W = x.var(axis=1, ddof=1).mean()
    B = n * means.var(ddof=1)
    var_hat = (n - 1) / n * W + B / n
    return math.sqrt(var_hat / W)


def chi_square(observed, expected) -> tuple[float, int]:
    """Pearson chi-square statistic and degrees of freedom (bins - 1)."""
    obs = np.asarray(observed, dtype=float)
    exp = np.asarray(expected, dtype=float)
    exp = exp * obs.sum() / exp.sum()
    return float(np.sum((obs - exp) ** 2 / exp)), obs.size - 1
