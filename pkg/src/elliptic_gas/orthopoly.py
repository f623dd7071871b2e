"""Orthonormal polynomials of the weight exp(-N V) and their large-N expansion.

The polynomials are rescaled Hermite polynomials.  They are evaluated with the
three-term recurrence

    z p_k = r_{k+1} p_{k+1} + t r_k p_{k-1},   r_k = sqrt(k / (N (1 - t^2))),

renormalized at every step so that degrees in the thousands never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import geometry as geo
from .params import EnsembleParams
from .special import ScaledComplex, log_factorial


def log_gamma(j: int, params: EnsembleParams) -> float:
    """log of the leading coefficient gamma_j of p_j."""
    if j < 0:
        raise ValueError("degree must be non-negative")
    N, t = params.N, params.t
    return (
        0.25 * math.log(N)
        + 0.5 * (j + 0.5) * math.log(N * (1 - t * t))
        - 0.5 * math.log(math.pi)
        - 0.5 * log_factorial(j)
    )


def gamma_exact(j: int, params: EnsembleParams) -> float:
    """Leading coefficient gamma_j as a log (alias of :func:`log_gamma`)."""
    return log_gamma(j, params)


def recurrence_coefficient(k: int, params: EnsembleParams) -> float:
    return math.sqrt(k / (params.N * (1 - params.t ** 2)))


def scaled_recurrence(z, jmax: int, params: EnsembleParams, log_weight=0.0) -> Iterator[tuple]:
    """Yield ``(j, mantissa, log_scale)`` with p_j(z) exp(log_weight) = mantissa exp(log_scale).

    Works elementwise on arrays of ``z``; ``log_weight`` broadcasts against
    ``z`` and is typically -N V(z) / 2.  The yielded arrays are reused
    between steps, so consumers must copy what they keep.
    """
    z = np.asarray(z, dtype=complex)
    t = params.t
    scale = np.broadcast_to(np.asarray(log_weight, dtype=float) + log_gamma(0, params), z.shape).copy()
    prev = np.zeros(z.shape, dtype=complex)
    cur = np.ones(z.shape, dtype=complex)
    yield 0, cur, scale
    r_prev = 0.0
    for k in range(jmax):
        r_next = recurrence_coefficient(k + 1, params)
        nxt = (z * cur - t * r_prev * prev) / r_next
        prev, cur = cur, nxt
        r_prev = r_next
        big = np.maximum(np.abs(prev), np.abs(cur))
        big = np.where(big > 0, big, 1.0)
        prev = prev / big
        cur = cur / big
        scale = scale + np.log(big)
        yield k + 1, cur, scale


@dataclass(frozen=True)
class PolySequence:
    """Values p_0(z), ..., p_jmax(z) as ScaledComplex entries."""

    values: list
    z: complex | np.ndarray
    params: EnsembleParams

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, j: int) -> ScaledComplex:
        return self.values[j]

    def log_abs(self) -> np.ndarray:
        """log|p_j(z)| stacked along the first axis."""
        return np.array([v.log_mag for v in self.values])

    def complex_values(self) -> np.ndarray:
        """Plain complex values (may overflow for large degrees)."""
        return np.array([v.value() for v in self.values])


def eval_polys(z, jmax: int, params: EnsembleParams, log_weight=0.0) -> PolySequence:
    """Evaluate p_0..p_jmax at ``z`` (scalar or array) by the scaled recurrence."""
    if jmax < 0:
        raise ValueError("jmax must be non-negative")
    if jmax > params.n + 8:
        raise ValueError(f"jmax={jmax} exceeds n + 8 = {params.n + 8}")
    values = [
        ScaledComplex.from_parts(mant.copy(), scale.copy())
        for _, mant, scale in scaled_recurrence(z, jmax, params, log_weight)
    ]
    return PolySequence(values, z, params)


def eval_pair(z, k: int, params: EnsembleParams, log_weight=0.0) -> tuple[ScaledComplex, ScaledComplex]:
    """(p_{k-1}(z), p_k(z)) with the optional weight folded in; p_{-1} = 0."""
    prev = None
    last = None
    for j, mant, scale in scaled_recurrence(z, k, params, log_weight):
        prev, last = last, (mant.copy(), scale.copy())
    if prev is None:
        zero = ScaledComplex.from_parts(np.zeros_like(last[0]), last[1])
        return zero, ScaledComplex.from_parts(*last)
    return ScaledComplex.from_parts(*prev), ScaledComplex.from_parts(*last)


def contour_derivatives(f, z: complex, radius: float, order: int = 2, points: int = 32) -> list:
    """Derivatives f^(m)(z), m = 0..order, of a holomorphic ``f`` by the
    trapezoidal Cauchy integral on a circle.

    The error is aliasing from Taylor coefficients of degree m + points and
    above, so the result is exact to rounding for polynomials of degree below
    ``points``.  ``f`` is called once with the array of circle nodes.
    """
    alpha = 2 * np.pi * np.arange(points) / points
    nodes = z + radius * np.exp(1j * alpha)
    vals = np.asarray(f(nodes), dtype=complex)
    out = []
    for m in range(order + 1):
        coeff = np.mean(vals * np.exp(-1j * m * alpha)) / radius ** m
        out.append(coeff * math.factorial(m))
    return out


def poly_value(z, k: int, params: EnsembleParams):
    """Plain complex p_k(z); fine whenever the value fits in a double."""
    return eval_pair(z, k, params)[1].value()


def hermite_ode_residual(z: complex, k: int, params: EnsembleParams, radius: float | None = None) -> float:
    """Relative residual of (2t/(N(1-t^2))) p_k'' - 2 z p_k' + 2 k p_k = 0.

    Derivatives come from :func:`contour_derivatives` with more nodes than
    the degree, so they carry no truncation error.  The residual is scaled by
    the sum of the magnitudes of the three terms plus 2 k max |p_k| on the
    contour circle, so that common zeros of all terms do not divide by zero.
    """
    if k == 0:
        return 0.0  # constants solve the equation exactly
    t, N = params.t, params.N
    if radius is None:
        radius = 0.5 / math.sqrt(N)
    points = max(32, k + 8)
    seen = []

    def f(w):
        v = poly_value(w, k, params)
        seen.append(np.max(np.abs(v)))
        return v

    p0, p1, p2 = contour_derivatives(f, z, radius, 2, points)
    a = 2 * t / (N * (1 - t * t))
    terms = (a * p2, -2 * z * p1, 2 * k * p0)
    scale = sum(abs(x) for x in terms) + 2 * k * seen[0]
    return abs(sum(terms)) / scale


# ---------------------------------------------------------------- WKB expansion


@dataclass(frozen=True)
class WkbExpansion:
    """Pieces of the large-N expansion of p_{n+r}(z)."""

    z: complex
    r: int
    g_val: complex
    h_r_val: complex
    y_minus1: complex
    y0: complex
    y1: complex


def _check_wkb_domain(z, params: EnsembleParams) -> None:
    if params.t == 0.0:
        bound = 0.1 * geo.capacity(params)
        if np.any(np.abs(np.asarray(z)) < bound):
            raise ValueError("z too close to the origin for the large-N expansion")
        return
    F0 = geo.foci(params)
    if np.any(np.asarray(geo.distance_to_segment(z, params)) < 0.1 * F0):
        raise ValueError("z too close to the focal segment for the large-N expansion")


def h_r(z, r: int, params: EnsembleParams):
    """Correction h_r(z) of the 1/N term."""
    T = params.T
    if params.t == 0.0:
        return np.zeros_like(np.asarray(z, dtype=complex)) - (1 + 6 * r + 6 * r * r) / (24 * T) + 0j
    z = np.asarray(z, dtype=complex)
    F0 = geo.foci(params)
    s = np.asarray(geo.root_factor(z, params))
    d = z * z - F0 ** 2
    out = (F0 ** 2 * (1 + 2 * r) / (8 * d) - (1 + 6 * r + 6 * r * r) / (24 * s) - 5 * F0 ** 2 / (48 * d * s)) / T
    return geo._out(out)


def y_terms(z, r: int, params: EnsembleParams):
    """(Y_-1, Y_0, Y_1) in the integrated closed forms."""
    z = np.asarray(z, dtype=complex)
    T, ell, cap = params.T, geo.robin(params), geo.capacity(params)
    if params.t == 0.0:
        ym1 = np.log(z) - ell / (2 * T)
        y0 = r * np.log(z) - (r + 0.5) * math.log(cap)
        y1 = np.zeros_like(z) - (1 + 6 * r + 6 * r * r) / (24 * T)
        return geo._out(ym1), geo._out(y0), geo._out(y1)
    F0 = geo.foci(params)
    s = np.asarray(geo.root_factor(z, params))
    ym1 = z ** 2 * (1 - s) ** 2 / (2 * F0 ** 2) - np.log(2 * z * (1 - s) / F0 ** 2) - ell / (2 * T)
    y0 = 0.5 * np.log(0.5 + 0.5 / s) + r * np.log(z / 2 * (1 + s)) - (r + 0.5) * math.log(cap)
    y1 = (
        3 * F0 ** 2 * (2 * s - 1 + 4 * r * (1 + s + r)) - 2 * z ** 2 * (1 + 6 * r * (r + 1))
    ) / (48 * T * s * (z * z - F0 ** 2))
    return geo._out(ym1), geo._out(y0), geo._out(y1)


def wkb(z: complex, r: int, params: EnsembleParams) -> WkbExpansion:
    """All pieces of the expansion of p_{n+r} at a single point."""
    _check_wkb_domain(z, params)
    ym1, y0, y1 = y_terms(z, r, params)
    return WkbExpansion(
        complex(z), int(r), complex(geo.complex_potential(z, params)), complex(h_r(z, r, params)),
        complex(ym1), complex(y0), complex(y1),
    )


def wkb_eval_p(z, r: int, params: EnsembleParams) -> ScaledComplex:
    """Three-term asymptotic value of p_{n+r}(z) as a ScaledComplex.

    (N / 2 pi^3)^{1/4} psi^r sqrt(psi') exp(n g - N ell / 2 + h_r / N)
    """
    _check_wkb_domain(z, params)
    z = np.asarray(z, dtype=complex)
    N, n = params.N, params.n
    psi = np.asarray(geo.psi(z, params))
    dpsi = np.asarray(geo.psi_derivatives(z, params)[0])
    g = np.asarray(geo.complex_potential(z, params))
    log_val = (
        0.25 * math.log(N / (2 * math.pi ** 3))
        + r * np.log(psi)
        + 0.5 * np.log(dpsi)
        + n * g
        - N * geo.robin(params) / 2
        + np.asarray(h_r(z, r, params)) / N
    )
    return ScaledComplex.from_log(log_val)


def h_boundary_relations(frame: geo.BoundaryFrame, params: EnsembleParams, check: bool = True) -> tuple[float, float]:
    """Re(h_0 + h_-1) and Im(h_0 - h_-1) / |psi'| at a boundary point.

    With ``check`` set, asserts they equal -kappa^2/12 + kappa_ss/(24 kappa)
    and kappa_s/(6 kappa) to 1e-10.
    """
    z0 = frame.z0
    h0 = complex(h_r(z0, 0, params))
    hm1 = complex(h_r(z0, -1, params))
    first = (h0 + hm1).real
    second = (h0 - hm1).imag / frame.abs_dpsi
    if check:
        k = frame.kappa
        want1 = -k * k / 12 + frame.d2kappa_ds2 / (24 * k)
        want2 = frame.dkappa_ds / (6 * k)
        tol1 = 1e-10 * max(1.0, abs(want1))
        tol2 = 1e-10 * max(1.0, abs(want2))
        if abs(first - want1) > tol1 or abs(second - want2) > tol2:
            raise AssertionError(
                f"boundary relations violated: ({first}, {second}) vs ({want1}, {want2})"
            )
    return first, second
