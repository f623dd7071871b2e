import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from elliptic_gas import geometry as geo
from elliptic_gas import sampler as smp
from elliptic_gas.params import EnsembleParams

P05 = EnsembleParams(0.5, 1.0, 8)


# energies

def test_energy_delta_examples():
    z = np.array([0.1 + 0.2j, -0.3j, 0.5])
    assert smp.energy_delta(z, 1, z[1], P05) == 0.0
    p1 = EnsembleParams(0.5, 1.0, 1)
    one = np.array([0.3 + 0.1j])
    want = geo.potential(1 + 1j, p1) - geo.potential(one[0], p1)
    assert smp.energy_delta(one, 0, 1 + 1j, p1) == pytest.approx(want, rel=1e-15)
    assert smp.energy_delta(z, 0, z[2], P05) == math.inf


@given(st.integers(0, 2), st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2 ** 32))
def test_energy_delta_matches_full_energy(i, x, y, seed):
    rng = np.random.default_rng(seed)
    p = EnsembleParams(0.5, 1.0, 3)
    z = rng.normal(size=3) + 1j * rng.normal(size=3)
    new = complex(x, y)
    if np.min(np.abs(np.delete(z, i) - new)) < 1e-3:
        return
    moved = z.copy()
    moved[i] = new
    full = smp.energy(moved, p) - smp.energy(z, p)
    assert abs(smp.energy_delta(z, i, new, p) - full) <= 1e-10 * max(1.0, abs(full))


# chains

def _config(**kw):
    base = dict(params=P05, seed=123, sweeps=3000, burn_in=500, thin=5, chains=2, bins=10)
    base.update(kw)
    return smp.SamplerConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        _config(sweeps=100, burn_in=100)
    with pytest.raises(ValueError):
        _config(thin=0)
    with pytest.raises(ValueError):
        _config(proposal_scale=-1.0)
    with pytest.raises(ValueError):
        _config(seed=-1)
    assert _config().proposal_scale == pytest.approx(0.7 / math.sqrt(P05.N))


def test_runs_are_reproducible():
    a = smp.run(_config())
    b = smp.run(_config())
    assert np.array_equal(a.outside_counts, b.outside_counts)
    assert np.array_equal(a.arclength_bins, b.arclength_bins)
    assert a.acceptance_rate == b.acceptance_rate
    c = smp.run(_config(seed=124))
    assert not np.array_equal(a.outside_counts, c.outside_counts)


def test_results_independent_of_thread_count():
    a = smp.run(_config(threads=1))
    b = smp.run(_config(threads=2))
    assert np.array_equal(a.outside_counts, b.outside_counts)


def test_batch_invariants():
    # configurations are kept once per block of sweeps
    batch = smp.run(_config(keep_configs=2, sweeps=3 * smp.BLOCK_SWEEPS, burn_in=100))
    counts = batch.outside_counts
    assert counts.shape == (2, (3 * smp.BLOCK_SWEEPS - 100) // 5)
    assert counts.min() >= 0 and counts.max() <= P05.n
    assert batch.arclength_bins.sum() == counts.sum()
    assert 0.2 < batch.acceptance_rate < 0.7 and batch.warning is None
    assert len(batch.configs) == 4 and batch.configs[0].shape == (P05.n,)


def test_acceptance_warning():
    with pytest.warns(RuntimeWarning):
        batch = smp.run(_config(proposal_scale=20.0, chains=1))
    assert batch.warning is not None


def test_replaying_the_tape():
    # accept/reject decisions are a pure function of the energy change
    rng = np.random.default_rng(9)
    n, sweeps, scale = 5, 40, 0.3
    p = EnsembleParams(0.5, 1.0, n)
    z0 = (rng.normal(size=n) + 1j * rng.normal(size=n)) * 0.5
    normals = rng.standard_normal((sweeps, n, 2))
    uniforms = rng.random((sweeps, n))
    z_fast = z0.copy()
    acc = smp._sweeps(z_fast, normals, uniforms, scale, p.t, p.N)
    z_ref, acc_ref = z0.copy(), 0
    for s in range(sweeps):
        for i in range(n):
            new = z_ref[i] + scale * complex(*normals[s, i])
            d = smp.energy_delta(z_ref, i, new, p)
            if d <= 0 or uniforms[s, i] < math.exp(-p.N * d):
                z_ref[i] = new
                acc_ref += 1
    assert acc == acc_ref
    assert np.array_equal(z_fast, z_ref)


def test_single_particle_outside_probability():
    # one particle in the Gaussian weight: P(|z| > 1) = e^{-1}
    p = EnsembleParams(0.0, 1.0, 1)
    batch = smp.run(smp.SamplerConfig(p, seed=77, sweeps=200_000, burn_in=1000, chains=2, proposal_scale=1.5))
    se = smp.combined_standard_error(batch.outside_counts)
    assert abs(batch.mean_outside - math.exp(-1)) <= 3 * se


# projections

def test_projection_on_normal_ray():
    f = geo.boundary_frame(0.0, P05)
    theta, d = smp.project_to_boundary(f.z0 + 0.4 * f.normal, P05)
    assert abs(theta) < 1e-12 and d == pytest.approx(0.4, abs=1e-12)


def test_projection_circle_is_argument():
    p = EnsembleParams(0.0, 1.0, 4)
    z = np.array([2 + 1j, -3j, -1.5 - 0.1j])
    theta, d = smp.project_to_boundary(z, p)
    assert np.allclose(theta, np.mod(np.angle(z), 2 * np.pi), atol=1e-12)
    assert np.allclose(d, np.abs(z) - 1, atol=1e-12)


def test_projection_orthogonality_against_scan():
    rng = np.random.default_rng(4)
    for p in (P05, EnsembleParams(0.75, 0.4375, 4)):
        u = rng.uniform(1.01, 2.0, 100) * np.exp(1j * rng.uniform(0, 2 * np.pi, 100))
        z = geo.phi(u, p)
        theta, d = smp.project_to_boundary(z, p)
        e = np.exp(1j * theta)
        g = geo.capacity(p) * (e + p.t / e)
        dg = 1j * geo.capacity(p) * (e - p.t / e)
        resid = ((z - g) * np.conj(dg)).real / np.abs(dg)
        assert np.max(np.abs(resid)) <= 1e-10
        grid = np.linspace(0, 2 * np.pi, 200_000, endpoint=False)
        pts = geo.boundary_point(grid, p)
        for k in range(0, 100, 10):
            best = grid[np.argmin(np.abs(z[k] - pts))]
            assert abs((best - theta[k] + np.pi) % (2 * np.pi) - np.pi) < 1e-4
            # the scan can only overestimate the distance
            scan = np.min(np.abs(z[k] - pts))
            assert -1e-12 <= scan - d[k] <= 1e-8


# statistics helpers

def test_blocked_standard_error():
    rng = np.random.default_rng(0)
    x = rng.normal(size=2 ** 16)
    assert smp.blocked_standard_error(x) == pytest.approx(1 / 256, rel=0.15)
    # AR(1) with rho = 0.9 inflates the variance of the mean by (1+rho)/(1-rho)
    e = rng.normal(size=2 ** 16)
    y = np.empty_like(e)
    y[0] = e[0]
    for i in range(1, y.size):
        y[i] = 0.9 * y[i - 1] + e[i]
    naive = math.sqrt(np.var(y) / y.size)
    assert smp.blocked_standard_error(y) / naive == pytest.approx(math.sqrt(19), rel=0.25)


def test_gelman_rubin():
    rng = np.random.default_rng(1)
    same = rng.normal(size=(4, 5000))
    assert smp.gelman_rubin(same) < 1.01
    shifted = same + np.arange(4)[:, None]
    assert smp.gelman_rubin(shifted) > 1.5


def test_chi_square():
    obs = np.array([10, 20, 30])
    stat, dof = smp.chi_square(obs, np.array([1.0, 2.0, 3.0]))
    assert stat == 0.0 and dof == 2
    stat, _ = smp.chi_square(np.array([12, 8]), np.array([1.0, 1.0]))
    assert stat == pytest.approx(0.8)
