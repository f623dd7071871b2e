"""Planar quadrature rules adapted to the elliptic droplet.

Two families are provided:

* elliptic-polar tensor rules z = phi(R e^{i theta}), with Gauss-Legendre
  panels in R graded toward the boundary R = 1 and the trapezoidal rule in
  theta (exact for the periodic direction);
* ray rules centred at a point z, used for integrands carrying a 1/(z - w)
  factor: in polar coordinates around z the area element r dr cancels the
  pole, so no excision is needed.

Integrands are evaluated in fixed-size chunks, optionally on a thread pool.
Chunk boundaries do not depend on the thread count and the final sum runs
over the full ordered array, so results are bit-identical for any number of
threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .params import EnsembleParams

CHUNK = 4096
TAIL_EXPONENT = 40.0
GL_ORDER = 16


def default_threads() -> int:
    env = os.environ.get("ELLIPTIC_GAS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class PlanarRule:
    """Nodes ``points`` and area weights ``weights`` (dA already included)."""

    points: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return self.points.size


def evaluate(func, points: np.ndarray, threads: int | None = None, dtype=float) -> np.ndarray:
    """Apply a vectorized ``func`` to ``points`` chunk by chunk."""
    points = np.ravel(points)
    out = np.empty(points.shape, dtype=dtype)
    starts = range(0, points.size, CHUNK)

    def work(start):
        stop = min(start + CHUNK, points.size)
        out[start:stop] = func(points[start:stop])

    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or points.size <= CHUNK:
        for s in starts:
            work(s)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))
    return out


def integrate(func, rule: PlanarRule, threads: int | None = None, dtype=float):
    """Sum of weights * func(points) with a deterministic reduction order."""
    vals = evaluate(func, rule.points, threads, dtype)
    return np.sum(rule.weights * vals)


def _gauss_panels(breaks, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    breaks = np.asarray(breaks, dtype=float)
    a, b = breaks[:-1], breaks[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def exterior_radius(params: EnsembleParams, exponent: float = TAIL_EXPONENT) -> float:
    """Smallest R > 1 with N min_theta Omega(phi(R e^{i theta})) >= exponent."""
    theta = np.linspace(0, np.pi, 181)
    target = exponent / params.N

    def low(R):
        return float(np.min(geo.omega_disk(R, theta, params)))

    hi = 1.0 + 1.0 / math.sqrt(params.N)
    while low(hi) < target:
        hi = 1.0 + 2.0 * (hi - 1.0)
    lo = 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if low(mid) < target:
            lo = mid
        else:
            hi = mid
    return hi


def _radial_breaks(lo: float, hi: float, width: float, panels: int) -> np.ndarray:
    # graded toward R = 1 (the droplet boundary), which is an end point of [lo, hi]
    edge = 1.0
    offsets = width * np.array([0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0])
    if hi <= edge:
        pts = [edge - o for o in offsets if edge - o > lo]
    else:
        pts = [edge + o for o in offsets if edge + o < hi]
    breaks = np.unique(np.concatenate([[lo, hi], pts, np.linspace(lo, hi, panels + 1)]))
    return breaks


def elliptic_polar_rule(
    params: EnsembleParams, r_lo: float, r_hi: float, angular: int = 256, panels: int = 8, order: int = GL_ORDER
) -> PlanarRule:
    """Tensor rule on {phi(R e^{i theta}) : r_lo <= R <= r_hi}.

    The area element is |phi'(u)|^2 R dR dtheta.  Radial panels are graded
    toward R = 1 on the scale of the boundary layer width.
    """
    cap, t = geo.capacity(params), params.t
    width = 1.0 / (math.sqrt(params.N) * cap * (1.0 - t))
    R, wR = _gauss_panels(_radial_breaks(r_lo, r_hi, width, panels), order)
    theta = 2 * np.pi * np.arange(angular) / angular
    u = R[:, None] * np.exp(1j * theta[None, :])
    dphi = cap * (1 - t / u ** 2)
    points = cap * (u + t / u)
    weights = (wR * R)[:, None] * np.abs(dphi) ** 2 * (2 * np.pi / angular)
    return PlanarRule(points.ravel(), weights.ravel())


def droplet_rules(params: EnsembleParams, refine: int = 0, angular: int = 256, panels: int = 8) -> tuple[PlanarRule, PlanarRule]:
    """(interior, exterior) elliptic-polar rules for K and its truncated complement.

    The interior runs from R = sqrt(t) (the focal segment) to 1; the exterior
    from 1 to the radius where N Omega exceeds the tail exponent.  Each
    ``refine`` step doubles both the angular and the radial resolution.
    """
    a = angular * 2 ** refine
    p = panels * 2 ** refine
    inner = elliptic_polar_rule(params, math.sqrt(params.t), 1.0, a, p)
    outer = elliptic_polar_rule(params, 1.0, exterior_radius(params), a, p)
    return inner, outer


def whole_plane_rule(params: EnsembleParams, refine: int = 0, angular: int = 256, panels: int = 8) -> PlanarRule:
    inner, outer = droplet_rules(params, refine, angular, panels)
    return PlanarRule(np.concatenate([inner.points, outer.points]), np.concatenate([inner.weights, outer.weights]))


def _ray_hits(z: complex, direction: np.ndarray, a: float, b: float) -> np.ndarray:
    # positive root r of (x0 + r c)^2 / a^2 + (y0 + r s)^2 / b^2 = 1, z inside the ellipse
    c, s = direction.real, direction.imag
    x0, y0 = z.real, z.imag
    A = c * c / a ** 2 + s * s / b ** 2
    B = 2 * (x0 * c / a ** 2 + y0 * s / b ** 2)
    C = x0 * x0 / a ** 2 + y0 * y0 / b ** 2 - 1.0
    return (-B + np.sqrt(B * B - 4 * A * C)) / (2 * A)


@dataclass(frozen=True)
class RayRule:
    """Polar rule around ``center``: nodes w = center + r e^{i alpha}.

    ``weights`` carry dr dalpha only (not the factor r), so a Cauchy kernel
    1/(center - w) times the area element is -e^{-i alpha} * weights.
    """

    center: complex
    points: np.ndarray
    radii: np.ndarray
    directions: np.ndarray
    weights: np.ndarray


def ray_rule(center: complex, params: EnsembleParams, rays: int = 256, refine: int = 0, order: int = GL_ORDER) -> RayRule:
    """Ray rule around an interior point, split where each ray crosses the boundary."""
    center = complex(center)
    if geo.is_outside(center, params):
        raise ValueError("ray rule centre must lie inside the droplet")
    cap, t = geo.capacity(params), params.t
    rays = rays * 2 ** refine
    alpha = 2 * np.pi * np.arange(rays) / rays
    direction = np.exp(1j * alpha)
    r_edge = _ray_hits(center, direction, cap * (1 + t), cap * (1 - t))
    Rx = exterior_radius(params)
    r_far = _ray_hits(center, direction, cap * (Rx + t / Rx), cap * (Rx - t / Rx))
    width = 1.0 / math.sqrt(params.N)
    panels = 6 * 2 ** refine
    pts, rad, dirs, wts = [], [], [], []
    for k in range(rays):
        rb, rf = r_edge[k], r_far[k]
        inner = _radial_breaks_around(0.0, rb, width, panels, at_end=True)
        outer = _radial_breaks_around(rb, rf, width, panels, at_end=False)
        r1, w1 = _gauss_panels(inner, order)
        r2, w2 = _gauss_panels(outer, order)
        r = np.concatenate([r1, r2])
        w = np.concatenate([w1, w2]) * (2 * np.pi / rays)
        rad.append(r)
        wts.append(w)
        dirs.append(np.full(r.shape, direction[k]))
        pts.append(center + r * direction[k])
    return RayRule(center, np.concatenate(pts), np.concatenate(rad), np.concatenate(dirs), np.concatenate(wts))


def _radial_breaks_around(lo: float, hi: float, width: float, panels: int, at_end: bool) -> np.ndarray:
    edge = hi if at_end else lo
    sign = -1.0 if at_end else 1.0
    offsets = width * np.array([0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0])
    pts = [edge + sign * o for o in offsets if lo < edge + sign * o < hi]
    return np.unique(np.concatenate([[lo, hi], pts, np.linspace(lo, hi, panels + 1)]))
