"""Scalar special functions and log-space arithmetic.

Everything here is self-contained: erfc, complete elliptic integrals via the
arithmetic-geometric mean, log-factorials, and the stable accumulators used to
sum terms whose magnitudes span e^{+-1000} and beyond.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

_SQRT_PI = math.sqrt(math.pi)
_ERFC_SPLIT = 1.5
_SERIES_TERMS = 80
_CF_DEPTH = 160


def _erf_series(x: np.ndarray) -> np.ndarray:
    # erf(x) = 2/sqrt(pi) e^{-x^2} sum_k 2^k x^{2k+1} / (2k+1)!!, all terms positive
    term = x.copy()
    total = x.copy()
    x2 = 2.0 * x * x
    for k in range(1, _SERIES_TERMS):
        term = term * x2 / (2 * k + 1)
        total = total + term
    return 2.0 / _SQRT_PI * np.exp(-x * x) * total


def _erfc_cf(x: np.ndarray) -> np.ndarray:
    # erfc(x) = e^{-x^2}/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    tail = np.zeros_like(x)
    for k in range(_CF_DEPTH, 0, -1):
        tail = (k / 2.0) / (x + tail)
    return np.exp(-x * x) / _SQRT_PI / (x + tail)


def erfc(x):
    """Complementary error function for real arguments.

    Uses the positive-term series for ``|x| < 1.5`` and a continued fraction
    beyond, so no cancellation occurs on either side.  Works elementwise on
    arrays and returns a float for scalar input.
    """
    arr = np.asarray(x, dtype=float)
    a = np.abs(arr)
    out = np.empty_like(a)
    small = a < _ERFC_SPLIT
    if np.any(small):
        out[small] = 1.0 - _erf_series(a[small])
    big = ~small
    if np.any(big):
        with np.errstate(over="ignore", under="ignore"):
            out[big] = _erfc_cf(np.minimum(a[big], 1e150))
    out = np.where(arr < 0, 2.0 - out, out)
    if np.ndim(x) == 0:
        return float(out)
    return out


def _agm_sequence(k: float) -> tuple[float, list[float]]:
    a, b = 1.0, math.sqrt((1.0 - k) * (1.0 + k))
    c_terms = [k]
    for _ in range(64):
        if abs(a - b) <= 1e-17 * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        c_terms.append(c)
    return a, c_terms


def ellip_K(k: float) -> float:
    """Complete elliptic integral of the first kind, modulus convention.

    K(k) = int_0^{pi/2} dtheta / sqrt(1 - k^2 sin^2 theta), computed as
    pi / (2 AGM(1, sqrt(1-k^2))).
    """
    k = float(k)
    if not 0.0 <= abs(k) < 1.0:
        raise ValueError(f"ellip_K needs |k| < 1, got {k}")
    a, _ = _agm_sequence(abs(k))
    return math.pi / (2.0 * a)


def ellip_E(k: float) -> float:
    """Complete elliptic integral of the second kind, modulus convention."""
    k = float(k)
    if not 0.0 <= abs(k) <= 1.0:
        raise ValueError(f"ellip_E needs |k| <= 1, got {k}")
    if abs(k) == 1.0:
        return 1.0
    a, c_terms = _agm_sequence(abs(k))
    weighted = math.fsum(2.0 ** (j - 1) * c * c for j, c in enumerate(c_terms))
    return math.pi / (2.0 * a) * (1.0 - weighted)


_EXACT_LOG_FACTORIAL_MAX = 256
_LOG_FACTORIALS = [0.0]
for _j in range(1, _EXACT_LOG_FACTORIAL_MAX + 1):
    _LOG_FACTORIALS.append(math.fsum(math.log(i) for i in range(2, _j + 1)))

# Bernoulli-number coefficients B_{2k} / (2k (2k-1))
_STIRLING = (1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188, -691 / 360360)


def log_factorial(j: int) -> float:
    """log(j!) for a non-negative integer ``j``.

    Exact summation up to 256, Stirling series with six correction terms above
    (truncation error below 1e-20 there).
    """
    j = int(j)
    if j < 0:
        raise ValueError("log_factorial needs j >= 0")
    if j <= _EXACT_LOG_FACTORIAL_MAX:
        return _LOG_FACTORIALS[j]
    x = float(j + 1)
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    power = inv
    for c in _STIRLING:
        series += c * power
        power *= inv2
    return (x - 0.5) * math.log(x) - x + 0.5 * math.log(2 * math.pi) + series


def logsumexp_accumulate(terms: Iterable[float]) -> float:
    """Return log(sum(exp(t) for t in terms)) without overflow.

    The stream is consumed once, rescaling the running sum whenever a new
    maximum appears.  Raises ValueError on an empty stream.
    """
    peak = -math.inf
    total = 0.0
    seen = False
    for t in terms:
        seen = True
        t = float(t)
        if t == -math.inf:
            continue
        if t > peak:
            total = total * math.exp(peak - t) + 1.0
            peak = t
        else:
            total += math.exp(t - peak)
    if not seen:
        raise ValueError("logsumexp_accumulate needs at least one term")
    if peak == -math.inf:
        return -math.inf
    return peak + math.log(total)


class LogSumAccumulator:
    """Elementwise streaming log-sum-exp over arrays of log-weights."""

    def __init__(self, shape):
        self.peak = np.full(shape, -np.inf)
        self.total = np.zeros(shape)

    def add(self, log_terms) -> None:
        log_terms = np.asarray(log_terms, dtype=float)
        raise_peak = log_terms > self.peak
        with np.errstate(invalid="ignore", over="ignore"):
            rescale = np.where(raise_peak, np.exp(self.peak - log_terms), 1.0)
            new_peak = np.where(raise_peak, log_terms, self.peak)
            contrib = np.exp(log_terms - new_peak)
        rescale = np.where(np.isnan(rescale), 0.0, rescale)
        contrib = np.where(np.isnan(contrib), 0.0, contrib)
        self.total = self.total * rescale + contrib
        self.peak = new_peak

    def result(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return self.peak + np.log(self.total)


class ScaledSumAccumulator:
    """Elementwise sum of complex terms given as mantissa * exp(log_scale)."""

    def __init__(self, shape):
        self.scale = np.full(shape, -np.inf)
        self.mantissa = np.zeros(shape, dtype=complex)

    def add(self, mantissa, log_scale) -> None:
        mantissa = np.asarray(mantissa, dtype=complex)
        log_scale = np.broadcast_to(np.asarray(log_scale, dtype=float), self.scale.shape)
        raise_scale = log_scale > self.scale
        with np.errstate(invalid="ignore", over="ignore"):
            old_factor = np.where(raise_scale, np.exp(self.scale - log_scale), 1.0)
            new_scale = np.where(raise_scale, log_scale, self.scale)
            new_factor = np.exp(log_scale - new_scale)
        old_factor = np.where(np.isnan(old_factor), 0.0, old_factor)
        new_factor = np.where(np.isnan(new_factor), 0.0, new_factor)
        self.mantissa = self.mantissa * old_factor + mantissa * new_factor
        self.scale = new_scale

    def result(self) -> "ScaledComplex":
        return ScaledComplex.from_parts(self.mantissa, self.scale)


@dataclass(frozen=True)
class ScaledComplex:
    """A complex number (or array of them) stored as log-magnitude and phase.

    ``value = exp(log_mag) * exp(1j * phase)``.  Exact zeros carry
    ``log_mag = -inf``.
    """

    log_mag: np.ndarray | float
    phase: np.ndarray | float

    @classmethod
    def from_complex(cls, value) -> "ScaledComplex":
        value = np.asarray(value, dtype=complex)
        with np.errstate(divide="ignore"):
            log_mag = np.log(np.abs(value))
        return cls(_squeeze(log_mag), _squeeze(np.angle(value)))

    @classmethod
    def from_parts(cls, mantissa, log_scale) -> "ScaledComplex":
        """Build from ``mantissa * exp(log_scale)`` without forming the product."""
        mantissa = np.asarray(mantissa, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_mag = np.log(np.abs(mantissa)) + log_scale
        log_mag = np.where(np.abs(mantissa) == 0, -np.inf, log_mag)
        return cls(_squeeze(log_mag), _squeeze(np.angle(mantissa)))

    @classmethod
    def from_log(cls, log_value) -> "ScaledComplex":
        """Build from a complex logarithm."""
        log_value = np.asarray(log_value, dtype=complex)
        phase = np.angle(np.exp(1j * log_value.imag))
        return cls(_squeeze(log_value.real), _squeeze(phase))

    def value(self):
        """Reconstruct the ordinary complex value (may overflow)."""
        with np.errstate(over="ignore"):
            out = np.exp(self.log_mag) * np.exp(1j * np.asarray(self.phase))
        return _squeeze(out)

    def __mul__(self, other: "ScaledComplex") -> "ScaledComplex":
        phase = np.angle(np.exp(1j * (np.asarray(self.phase) + other.phase)))
        return ScaledComplex(_squeeze(np.asarray(self.log_mag) + other.log_mag), _squeeze(phase))

    def conj(self) -> "ScaledComplex":
        return ScaledComplex(self.log_mag, _squeeze(-np.asarray(self.phase)))

    def scale_by(self, log_factor) -> "ScaledComplex":
        """Multiply by ``exp(log_factor)``, log_factor possibly complex."""
        log_factor = np.asarray(log_factor, dtype=complex)
        phase = np.angle(np.exp(1j * (np.asarray(self.phase) + log_factor.imag)))
        return ScaledComplex(_squeeze(np.asarray(self.log_mag) + log_factor.real), _squeeze(phase))


def _squeeze(a):
    a = np.asarray(a)
    return a.item() if a.ndim == 0 else a
