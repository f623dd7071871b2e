"""Closed-form boundary expansions of the density.

Near a boundary point z0 with outward normal n, write
z = z0 + (xi + i eta) n / sqrt(N).  The density expands as

    rho = rho0(xi) + rho1(xi) / sqrt(N) + rho2(xi) / N + ...

with curvature-dependent profiles, plus eta-dependent terms off the normal
line.  All coefficients come from the closed-form boundary frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .params import EnsembleParams
from .special import ellip_E, ellip_K, erfc

_GAUSS_NORM = 1.0 / math.sqrt(2 * math.pi ** 3)
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def psi_profile(xi, eta, frame: geo.BoundaryFrame):
    """The 1/N coefficient Psi(xi, eta) (without the Gaussian factor)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    k, k1, k2 = frame.kappa, frame.dkappa_ds, frame.d2kappa_ds2
    poly = 2 * xi ** 5 - 8 * xi ** 3 + 3 * xi + 36 * xi * eta ** 2 - 12 * xi ** 3 * eta ** 2 + 18 * xi * eta ** 4
    return (
        k * k * poly / 18
        + (k1 * k1 / (9 * k * k) - k2 / (12 * k)) * xi
        + k1 / 3 * (xi ** 2 * eta - eta ** 3 - eta)
    )


@dataclass(frozen=True)
class EdgeExpansion:
    """Profiles of the boundary expansion at one frame."""

    frame: geo.BoundaryFrame
    params: EnsembleParams

    def rho0(self, xi):
        return np.asarray(erfc(math.sqrt(2) * np.asarray(xi, dtype=float))) / (2 * math.pi)

    def rho1(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.frame.kappa / 3 * _GAUSS_NORM * (xi ** 2 - 1) * np.exp(-2 * xi ** 2)

    def rho2(self, xi):
        xi = np.asarray(xi, dtype=float)
        return _GAUSS_NORM * np.exp(-2 * xi ** 2) * psi_profile(xi, 0.0, self.frame)

    def psi(self, xi, eta):
        return psi_profile(xi, eta, self.frame)

    def density(self, xi, eta=0.0, order: int = 2):
        """Expansion truncated after the N^{-order/2} term."""
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        N = self.params.N
        out = self.rho0(xi)
        gauss = _GAUSS_NORM * np.exp(-2 * xi ** 2)
        if order >= 1:
            out = out + gauss * self.frame.kappa / math.sqrt(N) * ((xi ** 2 - 1) / 3 - eta ** 2)
        if order >= 2:
            out = out + gauss * psi_profile(xi, eta, self.frame) / N
        return out


def edge_expansion(theta: float, params: EnsembleParams) -> EdgeExpansion:
    return EdgeExpansion(geo.boundary_frame(theta, params), params)


def edge_density(xi, eta, frame: geo.BoundaryFrame, params: EnsembleParams, order: int = 2):
    """Boundary expansion of rho_n at z0 + (xi + i eta) n / sqrt(N)."""
    return geo._out(EdgeExpansion(frame, params).density(xi, eta, order))


def edge_point(xi, eta, frame: geo.BoundaryFrame, params: EnsembleParams):
    """The point z0 + (xi + i eta) n / sqrt(N)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return geo._out(frame.z0 + (xi + 1j * eta) * frame.normal / math.sqrt(params.N))


def omega_edge_expansion(X, Y, frame: geo.BoundaryFrame):
    """Degree-4 Taylor polynomial of Omega at z0 + (X + i Y) n."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    k, k1 = frame.kappa, frame.dkappa_ds
    return geo._out(
        2 * X ** 2
        - 2 * k / 3 * (X ** 3 - 3 * X * Y ** 2)
        + k * k / 2 * (X ** 4 - 6 * X ** 2 * Y ** 2 + Y ** 4)
        - 2 * k1 / 3 * (X ** 3 * Y - X * Y ** 3)
    )


def exp_omega_expansion(X, Y, frame: geo.BoundaryFrame, N: float):
    """Expanded exp(-N Omega) around the Gaussian exp(-2 N X^2)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    k, k1 = frame.kappa, frame.dkappa_ds
    cubic = X ** 3 - 3 * X * Y ** 2
    return geo._out(
        np.exp(-2 * N * X ** 2)
        * (
            1
            + 2 * k * N / 3 * cubic
            - k * k * N / 2 * (X ** 4 - 6 * X ** 2 * Y ** 2 + Y ** 4)
            + 2 * k1 * N / 3 * (X ** 3 * Y - X * Y ** 3)
            + 2 * k * k * N * N / 9 * cubic ** 2
        )
    )


def dn_rho_expansion(X, frame: geo.BoundaryFrame, params: EnsembleParams):
    """Normal derivative of rho_n at z0 + X n."""
    X = np.asarray(X, dtype=float)
    N = params.N
    k, k1, k2 = frame.kappa, frame.dkappa_ds, frame.d2kappa_ds2
    body = (
        -2
        - k * (4 / 3 * N * X ** 3 - 2 * X)
        - k * k * (4 / 9 * N * N * X ** 6 - 7 / 3 * N * X ** 4 + 2 * X ** 2)
        + (k2 / (3 * k) - 4 * k1 * k1 / (9 * k * k)) * X ** 2
        + (k * k / 6 + k1 * k1 / (9 * k * k) - k2 / (12 * k)) / N
    )
    return geo._out(math.sqrt(N) * _GAUSS_NORM * np.exp(-2 * N * X ** 2) * body)


def dt_rho_expansion(X, Y, frame: geo.BoundaryFrame, params: EnsembleParams):
    """Tangential derivative of rho_n at z0 + (X + i Y) n.

    The constant 1/N term is -kappa_s / (3 N); it follows from the boundary
    relations of h_0, h_-1 and matches the eta-derivative of Psi.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    N = params.N
    k, k1 = frame.kappa, frame.dkappa_ds
    body = (
        -2 * k * Y
        + k * k * (4 * N * X * Y ** 3 - 4 / 3 * N * X ** 3 * Y + 4 * X * Y)
        + k1 * (X ** 2 / 3 - Y ** 2)
        - k1 / (3 * N)
    )
    return geo._out(math.sqrt(N) * _GAUSS_NORM * np.exp(-2 * N * X ** 2) * body)


@dataclass(frozen=True)
class OutsideCount:
    """Asymptotic expected number of particles outside K."""

    leading: float
    correction: float
    k_modulus: float
    perimeter: float

    @property
    def total(self) -> float:
        return self.leading + self.correction


def n_out_asymptotic(params: EnsembleParams) -> OutsideCount:
    """Leading sqrt(n) term and 1/sqrt(n) correction of the outside count."""
    t, n = params.t, params.n
    k = 2 * math.sqrt(t) / (1 + t)
    E, K = ellip_E(k), ellip_K(k)
    pref = math.sqrt(n) / (2 * math.pi) ** 1.5
    leading = pref * 4 * math.sqrt((1 + t) / (1 - t)) * E
    correction = -pref / n * ((1 + t * t) * E + 2 * (1 - t) ** 2 * K) / (9 * (1 - t) ** 1.5 * (1 + t) ** 0.5)
    return OutsideCount(leading, correction, k, geo.perimeter(params))


def escape_correction(frame: geo.BoundaryFrame) -> float:
    """kappa^2/12 - kappa_s^2/(18 kappa^2) + kappa_ss/(24 kappa)."""
    k = frame.kappa
    return k * k / 12 - frame.dkappa_ds ** 2 / (18 * k * k) + frame.d2kappa_ds2 / (24 * k)


def arclength_escape_density(theta, params: EnsembleParams):
    """Expected outside particles per unit boundary length at angle theta."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    N = params.N
    corr = np.array([escape_correction(geo.boundary_frame(th, params)) for th in theta])
    out = math.sqrt(N) / (2 * math.pi) ** 1.5 * (1 - corr / N)
    return out[0] if out.size == 1 else out


def escape_count_by_arclength(params: EnsembleParams, panels: int = 32) -> float:
    """Integral of :func:`arclength_escape_density` over the boundary length."""
    edges = np.linspace(0, 2 * np.pi, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    theta = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    t = params.t
    speed = geo.capacity(params) * np.sqrt(1 + t * t - 2 * t * np.cos(2 * theta))
    return float(np.sum(w * speed * arclength_escape_density(theta, params)))


def arclength_bin_expectation(params: EnsembleParams, bins: int, order: int = 1, per_bin_nodes: int = 8) -> np.ndarray:
    """Expected outside count per equal-arclength bin, bins starting at s = 0."""
    L = geo.perimeter(params)
    x, w = np.polynomial.legendre.leggauss(per_bin_nodes)
    edges = np.linspace(0, L, bins + 1)
    s = (0.5 * (edges[1:] + edges[:-1])[:, None] + 0.5 * (L / bins) * x[None, :]).ravel()
    theta = np.asarray(geo.theta_at_arclength(s, params))
    dens = np.asarray(arclength_escape_density(theta, params))
    if order == 0:
        dens = np.full(s.shape, math.sqrt(params.N) / (2 * math.pi) ** 1.5)
    return (dens.reshape(bins, per_bin_nodes) * w[None, :]).sum(axis=1) * 0.5 * L / bins


def tangential_consistency(eta: float, frame: geo.BoundaryFrame, params: EnsembleParams) -> float:
    """Density at z0 + eta t / sqrt(N) through normal coordinates.

    The point is re-expressed as a foot point zhat on the boundary at
    arclength offset y plus a normal offset x (degree-4 local series); the
    normal-line expansion is then applied at zhat with xi = sqrt(N) x.
    Agrees with edge_density(0, eta) up to o(1/N).
    """
    if abs(eta) > 3:
        raise ValueError("tangential consistency is defined for |eta| <= 3")
    N = params.N
    x, y = geo.coordinate_change(0.0, eta / math.sqrt(N), frame)
    s_hat = float(geo.arclength(frame.theta, params)) + y
    theta_hat = float(geo.theta_at_arclength(s_hat, params))
    frame_hat = geo.boundary_frame(theta_hat, params)
    return float(edge_density(math.sqrt(N) * x, 0.0, frame_hat, params))
