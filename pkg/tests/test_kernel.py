import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elliptic_gas import geometry as geo
from elliptic_gas import kernel as K
from elliptic_gas import quadrature as quad
from elliptic_gas.params import EnsembleParams
from elliptic_gas.validation import cd_sample_points

P05 = EnsembleParams(0.5, 1.0, 32)


# density

def test_density_at_origin_series():
    t = 0.5
    p = EnsembleParams(t, 1.0, 8)
    want = math.sqrt(1 - t * t) / math.pi * sum(
        (t / 2) ** (2 * l) * math.factorial(2 * l) / math.factorial(l) ** 2 for l in range(4)
    )
    assert K.density(0.0, p) == pytest.approx(want, rel=1e-13)


def test_density_bulk_value():
    p = EnsembleParams(0.25, 1.0, 64)
    assert abs(K.density(0.2 + 0.1j, p) - 1 / math.pi) < 1e-6


def test_density_boundary_value():
    p = EnsembleParams(0.5, 1.0, 256)
    f = geo.boundary_frame(0.0, p)
    want = 1 / (2 * math.pi) - f.kappa / (3 * math.sqrt(2 * math.pi ** 3 * p.N))
    assert abs(K.density(geo.phi(1.0, p), p) - want) <= 2 * p.N ** -1.25


def test_density_positive_and_finite_far_out():
    p = EnsembleParams(0.5, 1.0, 64)
    z = np.array([5.0, 10j, 30 + 30j])
    logs = K.log_density(z, p)
    assert np.all(np.isfinite(logs))
    assert np.all(np.diff(logs) < 0)
    assert np.all(K.density(np.array([0.1, 2.0, 2.5]), p) > 0)


def test_density_complement_matches_direct_difference():
    p = EnsembleParams(0.5, 1.0, 8)
    z = np.array([0.1, 0.4 + 0.3j, 1.2])
    direct = 1 / math.pi - K.density(z, p)
    assert np.allclose(K.density_complement(z, p), direct, rtol=1e-9, atol=1e-15)


@given(st.floats(-1.5, 1.5), st.floats(-0.8, 0.8))
@settings(max_examples=25)
def test_density_within_bounds(x, y):
    r = K.density(complex(x, y), P05)
    assert 0 < r <= 1 / math.pi + 1e-15


# kernel

def test_kernel_diagonal_is_density():
    for z in (0.0, 0.3 + 0.2j, 2.0 - 1j):
        assert K.kernel(z, z, P05).complex().real / P05.N == pytest.approx(K.density(z, P05), rel=1e-13)


def test_kernel_hermitian_and_cauchy_schwarz():
    rng = np.random.default_rng(5)
    for _ in range(20):
        z, w = rng.normal(size=2) + 1j * rng.normal(size=2)
        a = K.kernel(z, w, P05).complex()
        b = K.kernel(w, z, P05).complex()
        assert abs(a - np.conj(b)) <= 1e-12 * abs(a)
        assert abs(a) / P05.N <= math.sqrt(K.density(z, P05) * K.density(w, P05)) * (1 + 1e-12)


def test_kernel_near_diagonal_bulk():
    p = EnsembleParams(0.5, 1.0, 128)
    z = 0.1 + 0.05j
    for a in (0.0, 0.7, 2.0):
        w = z + 0.05 * np.exp(1j * a)
        val = math.exp(K.kernel(z, w, p).value.log_mag) / p.N
        assert abs(val * math.exp(p.N * abs(z - w) ** 2 / 2) - 1 / math.pi) < 1e-4


def test_kernel_off_diagonal_decay():
    z = 0.1 + 0.05j
    Ns, logs = [], []
    for n in (32, 64, 128):
        p = EnsembleParams(0.5, 1.0, n)
        logs.append(K.kernel(z, z + 0.8, p).value.log_mag - math.log(p.N))
        Ns.append(p.N)
    c = -np.polyfit(Ns, logs, 1)[0]
    print(f"fitted off-diagonal decay rate c = {c:.4f}")
    assert c > 0.1
    assert all(l <= -0.9 * c * N for l, N in zip(logs, Ns))


def test_kernel_broadcasts():
    z = np.array([0.1, 0.2j, -1.0])
    vals = K.kernel(z, 0.5, P05).complex()
    for i in range(3):
        assert vals[i] == pytest.approx(K.kernel(z[i], 0.5, P05).complex(), rel=1e-14)


def test_reproducing_property():
    for p in (EnsembleParams(0.5, 1.0, 10), EnsembleParams(0.25, 1.0, 12)):
        rule = quad.whole_plane_rule(p)
        for z1, z2 in ((0.3 + 0.1j, -0.2 + 0.4j), (1.1, 1.0 - 0.5j)):
            a = K.kernel(z1, rule.points, p).complex()
            b = K.kernel(rule.points, z2, p).complex()
            want = K.kernel(z1, z2, p).complex()
            assert abs(np.sum(rule.weights * a * b) / want - 1) < 1e-5


def test_prekernel_two_routes():
    for z, w in ((0.3 + 0.2j, 1.1 - 0.4j), (2.0, 1.9 + 0.1j)):
        a = K.prekernel(z, w, P05).value()
        b = K.prekernel_from_kernel(z, w, P05).value()
        assert abs(a - b) <= 1e-12 * abs(a)


# Christoffel-Darboux identity

def test_cd_identity_on_random_pairs():
    worst = 0.0
    for z, w, p in cd_sample_points(100, seed=11):
        assert p.n <= 64
        lhs = K.prekernel_derivative(z, w, p)
        rhs = K.prekernel_cd_rhs(z, w, p)
        worst = max(worst, abs(np.expm1(lhs.log_mag - rhs.log_mag + 1j * (lhs.phase - rhs.phase))))
    assert worst <= 1e-8


def test_density_gradient_matches_finite_differences():
    z = 0.5
    cd = K.density_gradient_cd(z, P05)
    fd = K.density_gradient_fd(z, P05, h=1e-5)
    assert abs(cd - fd) <= 1e-6 * abs(cd)
    for z in (1.8 + 0.3j, 0.3 + 0.4j):
        cd = K.density_gradient_cd(z, P05)
        assert abs(cd - K.density_gradient_fd(z, P05)) <= 1e-6 * abs(cd)


def test_density_gradient_vanishes_at_origin():
    for p in (P05, EnsembleParams(0.25, 2.0, 17)):
        assert K.density_gradient_cd(0.0, p) == 0


def test_density_gradient_deep_bulk_bound():
    # |d rho| <= C N^{5/6} exp(-N Omega) with a modest constant
    p = EnsembleParams(0.5, 1.0, 64)
    g = abs(K.log_density_gradient_cd(0.1, p).value())
    bound = p.N ** (5 / 6) * math.exp(-p.N * geo.omega(0.1, p))
    assert g <= bound


def test_normal_derivative_sign_at_boundary():
    p = EnsembleParams(0.5, 1.0, 64)
    f = geo.boundary_frame(0.4, p)
    assert K.normal_derivative(f.z0, f.normal, p) < 0


# Cauchy transform

def test_cauchy_transform_circle_origin():
    res = K.cauchy_transform(0.0, EnsembleParams(0.0, 1.0, 8))
    assert abs(res.value) < 1e-12
    assert abs(res.normalization - 1) < 1e-7


def test_cauchy_transform_decays_in_n():
    vals = []
    for n in (8, 16, 32, 64):
        res = K.cauchy_transform(0.3 + 0.2j, EnsembleParams(0.5, 1.0, n))
        assert abs(res.normalization - 1) < 1e-7
        vals.append(abs(res.value))
    assert all(a > b for a, b in zip(vals, vals[1:]))
    ratios = np.array(vals[:-1]) / np.array(vals[1:])
    assert np.all(ratios > 2)


def test_cauchy_transform_domain():
    with pytest.raises(ValueError):
        K.cauchy_transform(1.7, P05)
    with pytest.raises(ValueError):
        K.cauchy_transform(3.0, P05)


# planar integrals

@pytest.mark.parametrize(
    "t,T,n,want",
    [(0.5, 1.0, 2, 0.66073), (0.5, 1.0, 16, 1.94876), (0.75, 0.4375, 4, 1.3261)],
)
def test_expected_outside_table_values(t, T, n, want):
    res = K.expected_outside_exact(EnsembleParams(t, T, n))
    assert abs(res.n_out - want) <= 5e-4
    assert res.mismatch <= 1e-4


def test_expected_outside_limit():
    with pytest.raises(ValueError):
        K.expected_outside_exact(EnsembleParams(0.5, 1.0, 513))


@pytest.mark.parametrize("n", [1, 7, 32, 64])
def test_total_mass(n):
    p = EnsembleParams(0.5, 1.0, n)
    assert abs(K.total_mass(p) - n) <= 1e-4 * n


def test_gram_matrices():
    for t, N in ((0.5, 10.0), (0.25, 16.0), (0.0, 4.0)):
        G = K.gram_matrix(12, t, N)
        assert np.max(np.abs(G - np.eye(13))) < 1e-7


def test_corridor_bound_fitted_constant():
    # |1/pi - rho| inside and rho outside at distance N^{-1/4} from the boundary
    def ratios(n):
        p = EnsembleParams(0.5, 1.0, n)
        d = p.N ** -0.25
        bound = p.N ** (5 / 6) * math.exp(-p.N ** 0.5)
        out = []
        for theta in (0.0, 0.9, math.pi / 2):
            f = geo.boundary_frame(theta, p)
            out.append(float(K.density_complement(f.z0 - d * f.normal, p)) / bound)
            out.append(float(K.density(f.z0 + d * f.normal, p)) / bound)
        return max(out)

    C0 = max(ratios(16), ratios(32))
    print(f"fitted corridor constant C0 = {C0:.3e}")
    for n in (64, 128, 256):
        assert ratios(n) <= C0


def test_results_independent_of_thread_count():
    p = EnsembleParams(0.5, 1.0, 16)
    z = np.linspace(-2, 2, 5000) + 0.3j
    a = K.density(z, p, threads=1)
    b = K.density(z, p, threads=3)
    assert np.array_equal(a, b)
    assert K.total_mass(p, threads=1) == K.total_mass(p, threads=2)


def test_density_profile():
    prof = K.density_profile([0.0, 1.0], P05)
    assert prof.rho.shape == (2,) and prof.params is P05
