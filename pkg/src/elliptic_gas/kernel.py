"""Exact finite-n kernel, density, density gradient and planar integrals.

Every sum over degrees runs on the scaled recurrence of
:mod:`elliptic_gas.orthopoly` with the Gaussian factor exp(-N V / 2) folded
into the starting scale, so densities stay accurate for any n and any z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from . import quadrature as quad
from .orthopoly import contour_derivatives, scaled_recurrence
from .params import EnsembleParams
from .special import LogSumAccumulator, ScaledComplex, ScaledSumAccumulator

TAIL_CUTOFF = 45.0


def _half_weight(z, params: EnsembleParams):
    return -0.5 * params.N * np.asarray(geo.potential(z, params))


def log_density(z, params: EnsembleParams):
    """log rho_n(z), with rho_n = (1/N) sum_{j<n} |p_j|^2 exp(-N V)."""
    z = np.asarray(z, dtype=complex)
    acc = LogSumAccumulator(z.shape)
    with np.errstate(divide="ignore"):
        for j, mant, scale in scaled_recurrence(z, params.n - 1, params, _half_weight(z, params)):
            acc.add(2 * (np.log(np.abs(mant)) + scale))
    return geo._out(acc.result() - math.log(params.N))


def density(z, params: EnsembleParams, threads: int | None = None):
    """Averaged one-point density rho_n(z), normalized to total mass T."""
    z = np.asarray(z, dtype=complex)
    if z.ndim == 0:
        return float(np.exp(log_density(z, params)))
    vals = quad.evaluate(lambda pts: np.exp(log_density(pts, params)), z.ravel(), threads)
    return vals.reshape(z.shape)


def log_density_complement(z, params: EnsembleParams, max_extra: int | None = None):
    """log of 1/pi - rho_n(z), summed as (1/N) sum_{j>=n} |p_j|^2 exp(-N V).

    The full series over all degrees equals N/pi at every z, so the tail is
    the exact complement of the density.  It stays accurate where 1/pi - rho
    is far below rounding of 1/pi.  Terms are summed until they are past
    their peak and below e^{-45} of the running total.
    """
    z = np.asarray(z, dtype=complex)
    n = params.n
    max_extra = 20 * n + 400 if max_extra is None else max_extra
    acc = LogSumAccumulator(z.shape)
    prev_term = np.full(z.shape, -np.inf)
    prev_pair = np.full(z.shape, np.inf)
    with np.errstate(divide="ignore"):
        for j, mant, scale in scaled_recurrence(z, n + max_extra, params, _half_weight(z, params)):
            if j < n:
                continue
            term = 2 * (np.log(np.abs(mant)) + scale)
            acc.add(term)
            # consecutive pairs, so that vanishing odd terms (z = 0) do not stop the sum
            pair = np.logaddexp(term, prev_term)
            if j > n + 2 and np.all((pair < acc.result() - TAIL_CUTOFF) & (pair <= prev_pair)):
                break
            prev_term, prev_pair = term, pair
    return geo._out(acc.result() - math.log(params.N))


def density_complement(z, params: EnsembleParams):
    """1/pi - rho_n(z) by the tail sum (see :func:`log_density_complement`)."""
    return geo._out(np.exp(log_density_complement(z, params)))


@dataclass(frozen=True)
class KernelValue:
    """K_n(z, w) stored as a ScaledComplex."""

    value: ScaledComplex
    z: complex | np.ndarray
    w: complex | np.ndarray

    def complex(self):
        return geo._out(np.asarray(self.value.value(), dtype=complex))


def _pair_sum(z, w, params: EnsembleParams, log_wz, log_ww) -> ScaledComplex:
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    shape = np.broadcast(z, w).shape
    acc = ScaledSumAccumulator(shape)
    gen_z = scaled_recurrence(np.broadcast_to(z, shape), params.n - 1, params, np.broadcast_to(log_wz, shape))
    gen_w = scaled_recurrence(np.broadcast_to(w, shape), params.n - 1, params, np.broadcast_to(log_ww, shape))
    for (_, mz, sz), (_, mw, sw) in zip(gen_z, gen_w):
        acc.add(mz * np.conj(mw), sz + sw)
    return acc.result()


def kernel(z, w, params: EnsembleParams) -> KernelValue:
    """K_n(z, w) = sum_{j<n} p_j(z) conj(p_j(w)) exp(-N (V(z) + V(w)) / 2).

    ``z`` and ``w`` broadcast against each other.
    """
    val = _pair_sum(z, w, params, _half_weight(z, params), _half_weight(w, params))
    return KernelValue(val, geo._out(np.asarray(z, dtype=complex)), geo._out(np.asarray(w, dtype=complex)))


def _prekernel_exponent(z, w, params: EnsembleParams):
    t = params.t
    wb = np.conj(w)
    return -params.N * (z * wb - 0.5 * t * z * z - 0.5 * t * wb * wb)


def prekernel(z, w, params: EnsembleParams) -> ScaledComplex:
    """Pre-kernel: analytic in z, anti-analytic in w.

    Equals sum_{j<n} p_j(z) conj(p_j(w)) exp(-N (z conj(w) - t z^2/2 - t conj(w)^2/2)).
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    base = _pair_sum(z, w, params, 0.0, 0.0)
    return base.scale_by(_prekernel_exponent(z, w, params))


def prekernel_from_kernel(z: complex, w: complex, params: EnsembleParams) -> ScaledComplex:
    """Pre-kernel through K_n times exp(N|z-w|^2/2 + i N Im(-z conj w + t z^2/2 + t conj(w)^2/2))."""
    t, N = params.t, params.N
    wb = np.conj(w)
    phase = (-z * wb + 0.5 * t * z * z + 0.5 * t * wb * wb).imag
    return kernel(z, w, params).value.scale_by(0.5 * N * abs(z - w) ** 2 + 1j * N * phase)


def prekernel_cd_rhs(z, w, params: EnsembleParams) -> ScaledComplex:
    """Closed two-term form of (1/N) d/dz of the pre-kernel.

    sqrt(T/(1-t^2)) (t p_n(z) conj(p_{n-1}(w)) - p_{n-1}(z) conj(p_n(w))) exp(-N (z conj w - t z^2/2 - t conj(w)^2/2))
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    zp, zc = _last_two(z, params, 0.0)
    wp, wc = _last_two(w, params, 0.0)
    # both products share the scale sz + sw
    mant = params.t * zc[0] * np.conj(wp[0]) - zp[0] * np.conj(wc[0])
    out = ScaledComplex.from_parts(mant, zc[1] + wc[1])
    coef = math.sqrt(params.T / (1 - params.t ** 2))
    return out.scale_by(math.log(coef) + _prekernel_exponent(z, w, params))


def _last_two(z, params: EnsembleParams, log_weight):
    # mantissas of p_{n-1}, p_n on a common scale
    prev = cur = None
    for j, mant, scale in scaled_recurrence(z, params.n, params, log_weight):
        if j == params.n - 1:
            prev, prev_scale = mant.copy(), scale.copy()
        if j == params.n:
            cur, common = mant.copy(), scale.copy()
    prev = prev * np.exp(prev_scale - common)
    return (prev, common), (cur, common)


def prekernel_derivative(z: complex, w: complex, params: EnsembleParams, points: int = 32) -> ScaledComplex:
    """(1/N) d/dz of the pre-kernel, from the direct sum by contour differentiation.

    Independent of the closed two-term form; the contour radius follows the
    local variation scale 1/(N (|w| + t|z| + 1)).
    """
    radius = 1.0 / (params.N * (abs(w) + params.t * abs(z) + 1.0))
    alpha = 2 * np.pi * np.arange(points) / points
    nodes = z + radius * np.exp(1j * alpha)
    vals = prekernel(nodes, np.full(nodes.shape, w), params)
    ref = np.max(vals.log_mag)
    plain = np.exp(vals.log_mag - ref) * np.exp(1j * np.asarray(vals.phase))
    deriv = np.mean(plain * np.exp(-1j * alpha)) / radius
    return ScaledComplex.from_parts(deriv / params.N, ref)


def density_gradient_cd(z, params: EnsembleParams):
    """d rho_n / dz from the two-term closed form.

    (t p_n conj(p_{n-1}) - p_{n-1} conj(p_n)) sqrt(T) exp(-N V) / sqrt(1 - t^2)
    """
    z = np.asarray(z, dtype=complex)
    scaled = log_density_gradient_cd(z, params)
    return geo._out(np.asarray(scaled.value()))


def log_density_gradient_cd(z, params: EnsembleParams) -> ScaledComplex:
    """:func:`density_gradient_cd` as a ScaledComplex (no underflow)."""
    z = np.asarray(z, dtype=complex)
    (mp, s), (mc, _) = _last_two(z, params, _half_weight(z, params))
    mant = params.t * mc * np.conj(mp) - mp * np.conj(mc)
    coef = math.sqrt(params.T / (1 - params.t ** 2))
    return ScaledComplex.from_parts(mant, 2 * s + math.log(coef))


def density_gradient_fd(z: complex, params: EnsembleParams, h: float = 1e-5) -> complex:
    """d rho / dz = (d/dx - i d/dy) rho / 2 by central differences.

    Inside K the differences are taken of 1/pi - rho from the tail sum,
    since there the gradient can lie far below the rounding level of rho.
    """
    z = complex(z)
    pts = np.array([z + h, z - h, z + 1j * h, z - 1j * h])
    if geo.is_outside(z, params):
        r = np.asarray(density(pts, params, threads=1))
    else:
        r = -np.asarray(density_complement(pts, params))
    dx = (r[0] - r[1]) / (2 * h)
    dy = (r[2] - r[3]) / (2 * h)
    return 0.5 * (dx - 1j * dy)


def normal_derivative(z, normal: complex, params: EnsembleParams):
    """Directional derivative of rho_n along the unit vector ``normal``.

    For real rho, d_v rho = 2 Re(v d rho/dz).
    """
    return geo._out(2 * (normal * np.asarray(density_gradient_cd(z, params))).real)


@dataclass(frozen=True)
class CauchyResult:
    """Cauchy transform value with its normalization self-check."""

    value: complex
    normalization: float
    nodes: int


def cauchy_transform(z: complex, params: EnsembleParams, refine: int = 0, threads: int | None = None) -> CauchyResult:
    """Integral of |p_n(w)|^2 exp(-N V(w)) / (z - w) over the plane.

    Computed on a polar ray rule centred at z, where the area element r dr
    cancels the pole.  ``normalization`` is the same rule applied to the
    integrand without the Cauchy factor and should equal 1.
    """
    z = complex(z)
    frame_dist = _distance_to_boundary(z, params)
    if geo.is_outside(z, params) or frame_dist < 0.1:
        raise ValueError("Cauchy transform needs z inside K at distance >= 0.1 from the boundary")
    rule = quad.ray_rule(z, params, refine=refine)

    def weighted_sq(pts):
        return np.exp(_log_weighted_pn_sq(pts, params))

    f = quad.evaluate(weighted_sq, rule.points, threads)
    value = np.sum(-f * np.conj(rule.directions) * rule.weights)
    norm = float(np.sum(f * rule.radii * rule.weights))
    return CauchyResult(complex(value), norm, len(rule.points))


def _log_weighted_pn_sq(pts, params: EnsembleParams):
    # log(|p_n|^2 exp(-N V)) at each point
    last = None
    with np.errstate(divide="ignore"):
        for j, mant, scale in scaled_recurrence(pts, params.n, params, _half_weight(pts, params)):
            last = (mant, scale)
        return 2 * (np.log(np.abs(last[0])) + last[1])


def _distance_to_boundary(z: complex, params: EnsembleParams) -> float:
    theta, x = geo.normal_coordinates(z, params)
    return abs(float(x))


@dataclass(frozen=True)
class OutsideExact:
    """Expected outside count from both sides of the boundary."""

    n_out: float
    interior_deficit: float
    nodes: int

    @property
    def mismatch(self) -> float:
        return abs(self.n_out - self.interior_deficit)


def expected_outside_exact(params: EnsembleParams, refine: int = 0, threads: int | None = None) -> OutsideExact:
    """N times the integral of rho_n over the exterior of K.

    Also returns N times the integral of 1/pi - rho_n over K, which must
    agree because the total mass is n = N T.
    """
    if params.n > 512:
        raise ValueError("exact outside count is limited to n <= 512")
    inner, outer = quad.droplet_rules(params, refine)
    rho_in = quad.evaluate(lambda p: np.exp(log_density(p, params)), inner.points, threads)
    rho_out = quad.evaluate(lambda p: np.exp(log_density(p, params)), outer.points, threads)
    n_out = params.N * float(np.sum(outer.weights * rho_out))
    deficit = params.N * float(np.sum(inner.weights * (1 / math.pi - rho_in)))
    return OutsideExact(n_out, deficit, len(inner) + len(outer))


def total_mass(params: EnsembleParams, refine: int = 0, threads: int | None = None) -> float:
    """N times the integral of rho_n over the plane (should be n)."""
    rule = quad.whole_plane_rule(params, refine)
    rho = quad.evaluate(lambda p: np.exp(log_density(p, params)), rule.points, threads)
    return params.N * float(np.sum(rule.weights * rho))


def gram_matrix(jmax: int, t: float, N: float, refine: int = 0, threads: int | None = None) -> np.ndarray:
    """Matrix of integrals of p_j conj(p_k) exp(-N V), j, k <= jmax.

    Uses the droplet rule of the ensemble with n = jmax + 1 at the same N,
    whose tail cutoff bounds every entry.
    """
    n = jmax + 1
    params = EnsembleParams(t, n / N, n, N)
    rule = quad.whole_plane_rule(params, refine)
    pts = rule.points
    vals = np.empty((n, pts.size), dtype=complex)
    for j, mant, scale in scaled_recurrence(pts, jmax, params, _half_weight(pts, params)):
        vals[j] = mant * np.exp(scale)
    return (vals * rule.weights) @ vals.conj().T


@dataclass(frozen=True)
class DensityProfile:
    """Density values at a set of points."""

    points: np.ndarray
    rho: np.ndarray
    params: EnsembleParams


def density_profile(points, params: EnsembleParams, threads: int | None = None) -> DensityProfile:
    pts = np.asarray(points, dtype=complex)
    return DensityProfile(pts, np.asarray(density(pts, params, threads)), params)
