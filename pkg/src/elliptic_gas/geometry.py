"""Droplet geometry: conformal maps, Schwarz function, effective potential and
boundary frames of the elliptic droplet

    K = {z : (1-t)/(1+t) (Re z)^2 + (1+t)/(1-t) (Im z)^2 <= T}.

All functions accept scalars or numpy arrays and are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import EnsembleParams

SEGMENT_TOL = 1e-12
LOCALITY_FACTOR = 0.2

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def foci(params: EnsembleParams) -> float:
    """Half focal distance F0; the foci sit at +-F0 on the real axis."""
    t, T = params.t, params.T
    return math.sqrt(4.0 * t * T / (1.0 - t * t))


def capacity(params: EnsembleParams) -> float:
    """Logarithmic capacity of K."""
    return math.sqrt(params.T / (1.0 - params.t ** 2))


def robin(params: EnsembleParams) -> float:
    """Robin constant ell = T (2 log cap - 1)."""
    return params.T * (2.0 * math.log(capacity(params)) - 1.0)


def potential(z, params: EnsembleParams):
    """Confining potential V(z) = |z|^2 - t Re(z^2)."""
    z = np.asarray(z, dtype=complex)
    return _out(np.abs(z) ** 2 - params.t * (z * z).real)


def ellipse_level(z, params: EnsembleParams):
    """Left side of the droplet inequality; K is where this is <= T."""
    z = np.asarray(z, dtype=complex)
    t = params.t
    return _out((1 - t) / (1 + t) * z.real ** 2 + (1 + t) / (1 - t) * z.imag ** 2)


def is_outside(z, params: EnsembleParams):
    return np.asarray(ellipse_level(z, params)) > params.T


def distance_to_segment(z, params: EnsembleParams):
    """Euclidean distance from z to the focal segment [-F0, F0]."""
    z = np.asarray(z, dtype=complex)
    F0 = foci(params)
    x = np.clip(z.real, -F0, F0)
    return _out(np.abs(z - x))


def _check_off_segment(z, params: EnsembleParams) -> None:
    if params.t == 0.0:
        return
    if np.any(np.asarray(distance_to_segment(z, params)) < SEGMENT_TOL):
        raise ValueError("point lies on the focal segment [-F0, F0]; branch is ambiguous")


def root_factor(z, params: EnsembleParams):
    """sqrt(1 - F0^2/z^2), analytic off [-F0, F0] and equal to 1 at infinity.

    Realized as sqrt(z-F0) sqrt(z+F0) / z with principal square roots.
    """
    z = np.asarray(z, dtype=complex)
    if params.t == 0.0:
        return _out(np.ones_like(z))
    F0 = foci(params)
    return _out(np.sqrt(z - F0) * np.sqrt(z + F0) / z)


def _root_product(z, params: EnsembleParams):
    # z * sqrt(1 - F0^2/z^2), finite at z = 0 (value i*F0 there)
    F0 = foci(params)
    return np.sqrt(z - F0) * np.sqrt(z + F0)


def phi(u, params: EnsembleParams):
    """Exterior conformal map from |u| > 1 onto the complement of K."""
    u = np.asarray(u, dtype=complex)
    return _out(capacity(params) * (u + params.t / u))


def phi_derivatives(u, params: EnsembleParams):
    """(phi', phi'', phi''') at u."""
    u = np.asarray(u, dtype=complex)
    c, t = capacity(params), params.t
    return (_out(c * (1 - t / u ** 2)), _out(2 * c * t / u ** 3), _out(-6 * c * t / u ** 4))


def psi(z, params: EnsembleParams):
    """Inverse of phi; maps C minus [-F0, F0] onto |u| > sqrt(t)."""
    _check_off_segment(z, params)
    z = np.asarray(z, dtype=complex)
    s = np.asarray(root_factor(z, params))
    return _out(z * (1 + s) / (2 * capacity(params)))


def psi_derivatives(z, params: EnsembleParams):
    """(psi', psi'', psi''') at z, in closed form."""
    _check_off_segment(z, params)
    z = np.asarray(z, dtype=complex)
    c = capacity(params)
    if params.t == 0.0:
        zero = np.zeros_like(z)
        return (_out(zero + 1 / c), _out(zero), _out(zero))
    F0 = foci(params)
    s = np.asarray(root_factor(z, params))
    d1 = (1 + 1 / s) / (2 * c)
    d2 = -F0 ** 2 / (2 * c * z ** 3 * s ** 3)
    d3 = 3 * F0 ** 2 / (2 * c * z ** 4 * s ** 5)
    return _out(d1), _out(d2), _out(d3)


def schwarz(z, params: EnsembleParams):
    """Schwarz function of the ellipse: analytic, equal to conj(z) on the boundary."""
    _check_off_segment(z, params)
    z = np.asarray(z, dtype=complex)
    if params.t == 0.0:
        if np.any(z == 0):
            raise ValueError("Schwarz function of the circle is singular at 0")
        return _out(params.T / z)
    # z - q = F0^2 / (z + q) removes the cancellation for small t
    q = _root_product(z, params)
    return _out(params.t * z + 2 * params.T / (z + q))


def schwarz_derivatives(z, params: EnsembleParams):
    """(S', S'', S''') at z."""
    _check_off_segment(z, params)
    z = np.asarray(z, dtype=complex)
    T = params.T
    if params.t == 0.0:
        return _out(-T / z ** 2), _out(2 * T / z ** 3), _out(-6 * T / z ** 4)
    q = _root_product(z, params)
    return (_out(params.t - 2 * T / (q * (z + q))), _out(2 * T / q ** 3), _out(-6 * T * z / q ** 5))


def complex_potential(z, params: EnsembleParams):
    """g(z) = log z + log((1+s)/2) + 1/(1+s) - 1/2 with s = sqrt(1-F0^2/z^2).

    The imaginary part carries the branch of log z; only exp(n g) and Re g are
    single valued.
    """
    _check_off_segment(z, params)
    z = np.asarray(z, dtype=complex)
    if params.t == 0.0:
        return _out(np.log(z))
    q = _root_product(z, params)
    return _out(np.log((z + q) / 2) + z / (z + q) - 0.5)


def _real_potential(z, q, params: EnsembleParams):
    # Re g written through z + q, which never vanishes; finite at z = 0
    return np.log(np.abs(z + q) / 2) + (z / (z + q)).real - 0.5


def omega(z, params: EnsembleParams):
    """Effective potential Omega = V - 2T Re g + ell.

    Non-negative, vanishing exactly on the boundary of K.  On the focal
    segment the two one-sided limits are averaged.
    """
    z = np.asarray(z, dtype=complex)
    T, ell = params.T, robin(params)
    V = np.abs(z) ** 2 - params.t * (z * z).real
    if params.t == 0.0:
        with np.errstate(divide="ignore"):
            return _out(V - 2 * T * np.log(np.abs(z)) + ell)
    q = _root_product(z, params)
    re_g = _real_potential(z, q, params)
    on_segment = np.asarray(distance_to_segment(z, params)) < SEGMENT_TOL
    if np.any(on_segment):
        other = _real_potential(z, -q, params)
        re_g = np.where(on_segment, 0.5 * (re_g + other), re_g)
    return _out(V - 2 * T * re_g + ell)


def omega_disk(R, theta, params: EnsembleParams):
    """Omega(phi(R e^{i theta})) in closed form, valid for R >= sqrt(t)."""
    R = np.asarray(R, dtype=float)
    theta = np.asarray(theta, dtype=float)
    t, T = params.t, params.T
    return _out(
        T * (R ** -2 - 1) / (1 - t * t) * (t * t - R * R + (R * R - 1) * t * np.cos(2 * theta))
        - 2 * T * np.log(R)
    )


def boundary_point(theta, params: EnsembleParams):
    """gamma(theta) = phi(e^{i theta})."""
    return phi(np.exp(1j * np.asarray(theta, dtype=float)), params)


def _boundary_speed(theta, params: EnsembleParams):
    # |gamma'(theta)| = |phi'(e^{i theta})|
    theta = np.asarray(theta, dtype=float)
    t = params.t
    return capacity(params) * np.sqrt(1 + t * t - 2 * t * np.cos(2 * theta))


def perimeter(params: EnsembleParams) -> float:
    """Length of the boundary of K by Gauss-Legendre quadrature of |phi'|."""
    return float(arclength(2 * math.pi, params))


def arclength(theta, params: EnsembleParams):
    """Counter-clockwise arclength from theta = 0 to theta (s(0) = 0)."""
    theta = np.asarray(theta, dtype=float)
    panels = 16
    # integrate |phi'| over [0, theta] on 16 equal panels of 32-point Gauss-Legendre
    edges = np.linspace(0.0, 1.0, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    frac = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    th = theta[..., None] * frac
    return _out(theta * np.sum(w * _boundary_speed(th, params), axis=-1))


def theta_at_arclength(s, params: EnsembleParams):
    """Invert :func:`arclength` by Newton iteration."""
    s = np.asarray(s, dtype=float)
    L = perimeter(params)
    theta = 2 * math.pi * s / L
    for _ in range(50):
        step = (np.asarray(arclength(theta, params)) - s) / _boundary_speed(theta, params)
        theta = theta - step
        if np.all(np.abs(step) < 1e-15 * (1 + np.abs(theta))):
            break
    return _out(theta)


@dataclass(frozen=True)
class BoundaryFrame:
    """A boundary point with its local geometry.

    ``normal`` is the outward unit normal, ``tangent = i * normal`` points
    counter-clockwise; curvature derivatives are with respect to arclength.
    """

    theta: float
    z0: complex
    normal: complex
    tangent: complex
    kappa: float
    dkappa_ds: float
    d2kappa_ds2: float
    abs_dpsi: float


def boundary_frame(theta: float, params: EnsembleParams) -> BoundaryFrame:
    """Boundary frame at angle ``theta`` from the closed-form curvature data."""
    theta = float(theta) % (2 * math.pi)
    if theta == 2 * math.pi:  # tiny negative inputs round up
        theta = 0.0
    t, T = params.t, params.T
    D = 1 + t * t - 2 * t * math.cos(2 * theta)
    c = complex(math.cos(theta), math.sin(theta))
    normal = (c - t / c) / math.sqrt(D)
    kappa = (1 - t * t) ** 1.5 / (math.sqrt(T) * D ** 1.5)
    dkappa = -6 * (1 - t * t) ** 2 * t * math.sin(2 * theta) / (T * D ** 3) + 0.0  # no -0.0
    d2kappa = (
        -12 * (1 - t * t) ** 2.5 * t * (2 * t * (math.cos(4 * theta) - 2) + (1 + t * t) * math.cos(2 * theta))
        / (T ** 1.5 * D ** 4.5)
    )
    abs_dpsi = math.sqrt((1 - t * t) / T) / math.sqrt(D)
    z0 = complex(boundary_point(theta, params))
    return BoundaryFrame(theta, z0, normal, 1j * normal, kappa, dkappa, d2kappa, abs_dpsi)


def boundary_identities(frame: BoundaryFrame, params: EnsembleParams) -> dict:
    """Relative residuals of the closed-form identities at a boundary point.

    Each entry compares an expression in the Schwarz function or in psi and
    its derivatives with the curvature data of ``frame``:

    * ``n2_S1``, ``n3_S2``, ``n4_S3``: n^2 S' = -1, n^3 S'' = 2 kappa,
      n^4 S''' = -6 kappa^2 - 2i kappa_s;
    * ``im_psi``: Im(psi psi'' / psi'^2) = -kappa_s / (3 |psi'| kappa);
    * ``re_psi``: Re(n^2 (psi'''/psi' - (psi''/psi')^2))
      = kappa^2 + kappa_s^2/(3 kappa^2) - kappa_ss/(3 kappa) - |psi'| kappa;
    * ``upsilon_minus``, ``upsilon_plus``: sqrt(T)(t conj(n) -+ n)/sqrt(1-t^2)
      times |psi'|/psi equal -1 + i kappa_s/(3 |psi'| kappa) and kappa/|psi'|.
    """
    z0, nv = frame.z0, frame.normal
    k, k1, k2, a = frame.kappa, frame.dkappa_ds, frame.d2kappa_ds2, frame.abs_dpsi
    t, T = params.t, params.T
    s1, s2, s3 = (complex(v) for v in schwarz_derivatives(z0, params))
    p0 = complex(psi(z0, params))
    p1, p2, p3 = (complex(v) for v in psi_derivatives(z0, params))
    ratio = a / p0
    root = math.sqrt(T / (1 - t * t))
    pairs = {
        "n2_S1": (nv ** 2 * s1, -1.0),
        "n3_S2": (nv ** 3 * s2, 2 * k),
        "n4_S3": (nv ** 4 * s3, -6 * k * k - 2j * k1),
        "im_psi": ((p0 * p2 / p1 ** 2).imag, -k1 / (3 * a * k)),
        "re_psi": (
            (nv ** 2 * (p3 / p1 - (p2 / p1) ** 2)).real,
            k * k + k1 * k1 / (3 * k * k) - k2 / (3 * k) - a * k,
        ),
        "upsilon_minus": (root * (t * nv.conjugate() - nv) * ratio, -1 + 1j * k1 / (3 * a * k)),
        "upsilon_plus": (root * (t * nv.conjugate() + nv) * ratio, k / a),
    }
    return {name: abs(lhs - rhs) / max(1.0, abs(rhs)) for name, (lhs, rhs) in pairs.items()}


def normal_coordinates(z, params: EnsembleParams, theta_guess=None, iterations: int = 60):
    """Exact curvilinear coordinates of z relative to the boundary.

    Solves gamma(theta) + x n(theta) = z for (theta, x) by Newton iteration on
    the orthogonality condition Re[(z - gamma) conj(gamma')] = 0.  With no
    guess, the start is the best point of a 512-point theta scan, i.e. the
    nearest boundary point.  Returns (theta, x) with theta in [0, 2 pi).
    """
    z = np.asarray(z, dtype=complex)
    c, t = capacity(params), params.t
    if theta_guess is None:
        grid = np.linspace(0, 2 * np.pi, 512, endpoint=False)
        pts = np.asarray(boundary_point(grid, params))
        dist = np.abs(z[..., None] - pts)
        theta = grid[np.argmin(dist, axis=-1)]
    else:
        theta = np.broadcast_to(np.asarray(theta_guess, dtype=float), z.shape).copy()
    for _ in range(iterations):
        e = np.exp(1j * theta)
        g = c * (e + t / e)
        dg = 1j * c * (e - t / e)
        r = z - g
        f = (r * np.conj(dg)).real
        df = -np.abs(dg) ** 2 - (r * np.conj(g)).real
        step = f / df
        step = np.clip(step, -0.5, 0.5)
        theta = theta - step
        if np.all(np.abs(step) < 1e-15):
            break
    theta = np.mod(theta, 2 * np.pi)
    e = np.exp(1j * theta)
    normal = (e - t / e) / np.abs(e - t / e)
    x = ((z - c * (e + t / e)) * np.conj(normal)).real
    return _out(theta), _out(x)


def jacobian(x, frame: BoundaryFrame):
    """Area Jacobian 1 + kappa x of the normal-coordinate map."""
    return 1 + frame.kappa * np.asarray(x, dtype=float)


def coordinate_change(X, Y, frame: BoundaryFrame, radius: float | None = None):
    """Curvilinear (x, y) from flat (X, Y) by the degree-4 local series.

    ``X`` is the offset along the outward normal at the frame point, ``Y``
    along the tangent; ``x`` is the normal distance to the curve and ``y``
    the arclength from the frame point to the foot of the normal.  Rejects
    inputs with |X| + |Y| beyond ``radius`` (default 0.2 / kappa).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    k, k1, k2 = frame.kappa, frame.dkappa_ds, frame.d2kappa_ds2
    limit = LOCALITY_FACTOR / k if radius is None else radius
    if np.any(np.abs(X) + np.abs(Y) > limit):
        raise ValueError(f"|X| + |Y| exceeds the locality radius {limit:.3g}")
    x = (
        X + k / 2 * Y ** 2 + k1 / 6 * Y ** 3 - k ** 2 / 2 * X * Y ** 2 + k ** 3 / 2 * X ** 2 * Y ** 2
        - k * k1 / 2 * X * Y ** 3 + (k2 / 24 - k ** 3 / 8) * Y ** 4
    )
    y = (
        Y - k * X * Y + k ** 2 * X ** 2 * Y - k1 / 2 * X * Y ** 2 - k ** 2 / 3 * Y ** 3
        - k ** 3 * X ** 3 * Y + 1.5 * k * k1 * X ** 2 * Y ** 2 - 7 * k * k1 / 24 * Y ** 4
        + (k ** 3 - k2 / 6) * X * Y ** 3
    )
    return _out(x), _out(y)


def _out(a):
    a = np.asarray(a)
    return a.item() if a.ndim == 0 else a
