"""Numerical acceptance checks.

Each check returns a :class:`CheckResult` with the measured value, the
bound it is held to and the verdict.  ``fast`` runs every deterministic
check at reduced size; ``full`` runs all of them at full size, including the
Monte Carlo checks.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import edge
from . import geometry as geo
from . import kernel as ker
from . import orthopoly as op
from . import sampler
from .params import EnsembleParams

# (t, T, n, expected outside count, asymptotic value with one correction)
TABLE_ROWS = (
    (0.5, 1.0, 2, 0.66073, 0.66226),
    (0.5, 1.0, 4, 0.95741, 0.95822),
    (0.5, 1.0, 8, 1.36998, 1.37043),
    (0.5, 1.0, 16, 1.94876, 1.94890),
    (0.5, 1.0, 32, 2.76381, 2.76382),
    (0.5, 1.0, 64, 3.9141, 3.91404),
    (0.75, 0.4375, 4, 1.3261, 1.33977),
    (0.75, 0.4375, 10, 2.1535, 2.15936),
    (0.75, 0.4375, 32, 3.8944, 3.89639),
    (0.75, 0.4375, 64, 5.5201, 5.52114),
)
FAST_ROWS = (0, 3, 6, 9)
MCMC_SEED = 20240611
HIST_SEED = 64064


@dataclass
class CheckResult:
    """Outcome of one check."""

    name: str
    value: float
    bound: float
    passed: bool
    detail: str = ""
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: value={self.value:.6g} bound={self.bound:.6g} {self.detail}".rstrip()

    def as_record(self) -> dict:
        return {"name": self.name, "value": float(self.value), "bound": float(self.bound), "pass": bool(self.passed)}


def _fit_r2(x, y) -> tuple[float, float]:
    # slope and coefficient of determination of a least-squares line
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(r2)


# ------------------------------------------------------------- outside counts


def check_table_exact(level: str = "full", threads: int | None = None) -> CheckResult:
    """Exact outside count against the tabulated sample means."""
    rows = range(len(TABLE_ROWS)) if level == "full" else FAST_ROWS
    worst = 0.0
    parts = []
    for i in rows:
        t, T, n, want, _ = TABLE_ROWS[i]
        got = ker.expected_outside_exact(EnsembleParams(t, T, n), threads=threads).n_out
        worst = max(worst, abs(got - want))
        parts.append(f"t={t},n={n}:{got:.6f}")
    return CheckResult("table_exact", worst, 5e-4, worst <= 5e-4, " ".join(parts))


def check_table_asymptotic(level: str = "full", threads: int | None = None) -> CheckResult:
    """Outside-count asymptotics against the tabulated five-decimal values."""
    worst = 0.0
    rounded = True
    for t, T, n, _, want in TABLE_ROWS:
        got = edge.n_out_asymptotic(EnsembleParams(t, T, n)).total
        worst = max(worst, abs(got - want))
        rounded &= round(got, 5) == want
    ok = rounded and worst <= 5e-6
    return CheckResult("table_asymptotic", worst, 5e-6, ok, "max |E1 - printed|; every value rounds to the printed digits")


# ------------------------------------------------------------------ edge profile


def edge_sup_error(theta: float, N: int, t: float = 0.5, T: float = 1.0, points: int = 121, threads=None) -> float:
    """sup over xi in [-3, 3] of |rho_n - expansion through 1/N| on the normal line."""
    p = EnsembleParams(t, T, int(round(N * T)), N)
    frame = geo.boundary_frame(theta, p)
    xi = np.linspace(-3, 3, points)
    exact = np.asarray(ker.density(edge.edge_point(xi, 0.0, frame, p), p, threads))
    approx = np.asarray(edge.edge_density(xi, 0.0, frame, p, order=2))
    return float(np.max(np.abs(exact - approx)))


def check_edge_profile(level: str = "full", threads: int | None = None) -> CheckResult:
    """Boundary expansion error bound and its decay under doubling of N."""
    Ns = (256, 512, 1024)
    rate = 2 ** 1.2
    ok = True
    worst_ratio = math.inf
    worst_scaled = 0.0
    parts = []
    for theta in (0.0, math.pi / 4):
        sups = [edge_sup_error(theta, N, threads=threads) for N in Ns]
        ratios = [sups[i] / sups[i + 1] for i in range(len(sups) - 1)]
        scaled = max(s / (5 * N ** -1.25) for s, N in zip(sups, Ns))
        ok &= scaled <= 1 and min(ratios) >= rate
        worst_ratio = min(worst_ratio, min(ratios))
        worst_scaled = max(worst_scaled, scaled)
        parts.append(f"theta={theta:.4f}: sup=" + ",".join(f"{s:.3g}" for s in sups))
    detail = f"min doubling ratio (bound {rate:.3f}); max sup/(5N^-1.25)={worst_scaled:.3g}; " + "; ".join(parts)
    return CheckResult("edge_profile", worst_ratio, rate, ok, detail)


def check_boundary_value(level: str = "full", threads: int | None = None) -> CheckResult:
    """Density on the boundary against 1/(2 pi) - kappa/(3 sqrt(2 pi^3 N))."""
    N = 1024
    p = EnsembleParams(0.5, 1.0, N)
    bound = 3 * N ** -1.25
    worst = 0.0
    for theta in 2 * np.pi * np.arange(8) / 8:
        f = geo.boundary_frame(theta, p)
        want = 1 / (2 * math.pi) - f.kappa / (3 * math.sqrt(2 * math.pi ** 3 * N))
        worst = max(worst, abs(ker.density(f.z0, p) - want))
    return CheckResult("boundary_value", worst, bound, worst <= bound, "8 boundary points, N=1024")


# ------------------------------------------------------------ kernel identities


def cd_sample_points(count: int, seed: int = 7):
    """Random (z, w, n) triples near the boundary zone used by the CD check."""
    rng = np.random.default_rng(seed)
    ns = (8, 16, 32, 64)
    out = []
    for i in range(count):
        n = ns[i % len(ns)]
        p = EnsembleParams(0.5, 1.0, n)
        R = rng.uniform(0.95, 1.4, 2)
        a = rng.uniform(0, 2 * np.pi, 2)
        z, w = (complex(geo.phi(r * np.exp(1j * b), p)) for r, b in zip(R, a))
        out.append((z, w, p))
    return out


def check_cd_identity(level: str = "full", threads: int | None = None) -> CheckResult:
    """Two-term derivative identity of the pre-kernel and the density gradient."""
    count = 100 if level == "full" else 40
    worst_cd = 0.0
    for z, w, p in cd_sample_points(count):
        lhs = ker.prekernel_derivative(z, w, p)
        rhs = ker.prekernel_cd_rhs(z, w, p)
        ref = max(float(lhs.log_mag), float(rhs.log_mag))
        a = np.exp(lhs.log_mag - ref) * np.exp(1j * lhs.phase)
        b = np.exp(rhs.log_mag - ref) * np.exp(1j * rhs.phase)
        worst_cd = max(worst_cd, float(abs(a - b) / abs(b)))
    worst_fd = 0.0
    p = EnsembleParams(0.5, 1.0, 32)
    fd_points = [0.5 + 0j, 0.3 + 0.4j]
    for theta in (0.0, 1.0, 2.5):
        f = geo.boundary_frame(theta, p)
        fd_points += [f.z0 - 0.1 * f.normal, f.z0 + 0.1 * f.normal]
    for z in fd_points:
        cd = complex(ker.density_gradient_cd(z, p))
        fd = ker.density_gradient_fd(z, p)
        worst_fd = max(worst_fd, abs(cd - fd) / abs(cd))
    ok = worst_cd <= 1e-8 and worst_fd <= 1e-6
    detail = f"CD max rel {worst_cd:.3g} (bound 1e-8); FD max rel {worst_fd:.3g} (bound 1e-6); {count} pairs"
    return CheckResult("cd_identity", worst_cd, 1e-8, ok, detail, extra={"fd": worst_fd})


BULK_POINT = 0.3 + 0.2j


def bulk_logs(ns=(8, 16, 32, 64), z: complex = BULK_POINT, t: float = 0.5, T: float = 1.0, threads=None) -> dict:
    """log|1/pi - rho|, log|Cauchy transform| and log|d rho/dz| at a bulk point."""
    out = {"deficit": [], "cauchy": [], "gradient": []}
    for n in ns:
        p = EnsembleParams(t, T, n)
        out["deficit"].append(float(ker.log_density_complement(z, p)))
        out["cauchy"].append(math.log(abs(ker.cauchy_transform(z, p, threads=threads).value)))
        out["gradient"].append(float(ker.log_density_gradient_cd(z, p).log_mag))
    return out


def check_bulk_exponential(level: str = "full", threads: int | None = None) -> CheckResult:
    """Bulk quantities decay log-linearly in n."""
    ns = (8, 16, 32, 64)
    logs = bulk_logs(ns, threads=threads)
    ok = True
    worst = 1.0
    parts = []
    for name, vals in logs.items():
        slope, r2 = _fit_r2(ns, vals)
        decreasing = bool(np.all(np.diff(vals) < 0))
        ok &= decreasing and r2 >= 0.95
        worst = min(worst, r2)
        parts.append(f"{name}: slope={slope:.4g} R2={r2:.5f}")
    return CheckResult("bulk_exponential", worst, 0.95, ok, "; ".join(parts))


# ----------------------------------------------------------------- polynomials


def wkb_points(count: int = 20, t: float = 0.5, T: float = 1.0) -> np.ndarray:
    """Points at distance >= 1 from the focal segment."""
    p = EnsembleParams(t, T, 1)
    F0 = geo.foci(p)
    a = 2 * np.pi * (np.arange(count) + 0.25) / count
    z = (F0 + 1.4) * np.cos(a) + 1.4j * np.sin(a)
    assert np.all(np.asarray(geo.distance_to_segment(z, p)) >= 1.0)
    return z


def wkb_relative_error(z, N: int, t: float = 0.5, T: float = 1.0) -> np.ndarray:
    p = EnsembleParams(t, T, int(round(N * T)), N)
    exact = op.eval_pair(z, p.n, p)[1]
    approx = op.wkb_eval_p(z, 0, p)
    ratio = np.exp(approx.log_mag - exact.log_mag + 1j * (np.asarray(approx.phase) - np.asarray(exact.phase)))
    return np.abs(ratio - 1)


def check_wkb(level: str = "full", threads: int | None = None) -> CheckResult:
    """Three-term expansion error falls by a factor in [3, 5] from N = 64 to 128."""
    z = wkb_points()
    ratio = wkb_relative_error(z, 64) / wkb_relative_error(z, 128)
    lo, hi = float(ratio.min()), float(ratio.max())
    ok = lo >= 3 and hi <= 5
    return CheckResult("wkb", lo, 3.0, ok, f"ratios in [{lo:.4f}, {hi:.4f}] (bounds [3, 5]), 20 points")


# -------------------------------------------------------------------- geometry


_D1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
_D2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])


def _diff(f, x: float, h: float, stencil: np.ndarray, order: int = 1):
    # eighth-order central difference
    offsets = np.arange(-4, 5)
    vals = [f(x + k * h) for k in offsets]
    return sum(c * v for c, v in zip(stencil, vals)) / h ** order


def curvature_fd(theta: float, params: EnsembleParams, h: float = 1e-2) -> tuple[float, float, float]:
    """Curvature data from the parametrization gamma(theta) alone.

    kappa = Im(conj(g') g'') / |g'|^3 with g', g'' by central differences of
    gamma; the arclength derivatives difference the curvature of the
    parametrization (exact g', g'') with d/ds = |g'|^{-1} d/dtheta.
    """
    c, t = geo.capacity(params), params.t

    def gamma(th):
        return complex(geo.boundary_point(th, params))

    def kappa_param(th):
        e = complex(math.cos(th), math.sin(th))
        d1 = 1j * c * (e - t / e)
        d2 = -c * (e + t / e)
        return (np.conj(d1) * d2).imag / abs(d1) ** 3

    def speed(th):
        return c * math.sqrt(1 + t * t - 2 * t * math.cos(2 * th))

    def dkappa(th):
        return _diff(kappa_param, th, h, _D1) / speed(th)

    g1 = _diff(gamma, theta, 1e-3, _D1)
    g2 = _diff(gamma, theta, 1e-3, _D2, 2)
    kappa = (np.conj(g1) * g2).imag / abs(g1) ** 3
    return float(kappa), float(dkappa(theta)), float(_diff(dkappa, theta, h, _D1) / speed(theta))


def check_geometry(level: str = "full", threads: int | None = None) -> CheckResult:
    """Curvature closed forms, quoted values and the boundary identities."""
    p = EnsembleParams(0.5, 1.0, 1)
    worst_fd = 0.0
    for theta in (0.3, math.pi / 7, 1.1, 2.0, 4.0):
        f = geo.boundary_frame(theta, p)
        fd = curvature_fd(theta, p)
        for exact, approx in zip((f.kappa, f.dkappa_ds, f.d2kappa_ds2), fd):
            worst_fd = max(worst_fd, abs(exact - approx) / abs(exact))
    f0 = geo.boundary_frame(0.0, p)
    quoted = abs(f0.kappa - 5.196) < 1e-3 and f0.dkappa_ds == 0 and abs(f0.d2kappa_ds2 + 374.1) < 0.1
    worst_id = 0.0
    for t, T in ((0.5, 1.0), (0.25, 1.0), (0.75, 0.4375)):
        q = EnsembleParams(t, T, 1)
        for theta in 2 * np.pi * np.arange(32) / 32:
            f = geo.boundary_frame(theta, q)
            worst_id = max(worst_id, max(geo.boundary_identities(f, q).values()))
            k = f.kappa
            r1, r2 = op.h_boundary_relations(f, q, check=False)
            worst_id = max(
                worst_id,
                abs(r1 - (-k * k / 12 + f.d2kappa_ds2 / (24 * k))) / max(1, abs(r1)),
                abs(r2 - f.dkappa_ds / (6 * k)) / max(1, abs(r2)),
            )
    ok = worst_fd <= 1e-6 and quoted and worst_id <= 1e-9
    detail = (
        f"FD max rel {worst_fd:.3g} (bound 1e-6); identities max {worst_id:.3g} (bound 1e-9); "
        f"theta=0: kappa={f0.kappa:.4f}, kappa_s={f0.dkappa_ds:.3g}, kappa_ss={f0.d2kappa_ds2:.2f}"
    )
    return CheckResult("geometry", worst_fd, 1e-6, ok, detail, extra={"identities": worst_id})


def omega_residual_slopes(thetas=(0.0, math.pi / 5, math.pi / 3), t: float = 0.5, T: float = 1.0) -> list:
    """Log-log slopes of |Omega - degree-4 polynomial| under (X, Y) -> h (X, Y)."""
    p = EnsembleParams(t, T, 1)
    hs = 0.04 * 2.0 ** -np.arange(4)
    slopes = []
    for theta in thetas:
        f = geo.boundary_frame(theta, p)
        for a, b in ((1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -0.5)):
            res = []
            for h in hs:
                X, Y = a * h, b * h
                exact = geo.omega(f.z0 + (X + 1j * Y) * f.normal, p)
                res.append(abs(exact - edge.omega_edge_expansion(X, Y, f)))
            slopes.append(_fit_r2(np.log(hs), np.log(res))[0])
    return slopes


def check_omega_taylor(level: str = "full", threads: int | None = None) -> CheckResult:
    slopes = omega_residual_slopes()
    lo = min(slopes)
    return CheckResult("omega_taylor", lo, 4.7, lo >= 4.7, f"{len(slopes)} directions, slopes {lo:.3f}..{max(slopes):.3f}")


# ------------------------------------------------------------------ Monte Carlo


def check_mcmc_mean(level: str = "full", threads: int | None = None) -> CheckResult:
    """Sampler mean outside count at n = 2 against the exact value."""
    p = EnsembleParams(0.5, 1.0, 2)
    sweeps = 1_000_000 if level == "full" else 100_000
    cfg = sampler.SamplerConfig(p, seed=MCMC_SEED, sweeps=sweeps, burn_in=1000, chains=4, threads=threads or 1)
    batch = sampler.run(cfg)
    exact = ker.expected_outside_exact(p).n_out
    se = sampler.combined_standard_error(batch.outside_counts)
    rhat = sampler.gelman_rubin(batch.outside_counts)
    z = abs(batch.mean_outside - exact) / se
    ok = z <= 3 and rhat < 1.05
    detail = f"mean={batch.mean_outside:.6f} exact={exact:.6f} se={se:.3g} Rhat={rhat:.6f}; value in standard errors"
    return CheckResult("mcmc_mean", z, 3.0, ok, detail, extra={"rhat": rhat, "mean": batch.mean_outside, "se": se})


def check_arclength_histogram(level: str = "full", threads: int | None = None) -> CheckResult:
    """Chi-square of the escaper projection histogram against the escape density."""
    p = EnsembleParams(0.5, 1.0, 64)
    bins = 35
    cfg = sampler.SamplerConfig(p, seed=HIST_SEED, sweeps=401_000, burn_in=1000, thin=10, chains=1, bins=bins)
    batch = sampler.run(cfg)
    expected = edge.arclength_bin_expectation(p, bins)
    chi2, dof = sampler.chi_square(batch.arclength_bins, expected)
    escapers = int(batch.arclength_bins.sum())
    ok = chi2 / dof <= 2 and escapers >= 100_000
    detail = f"chi2={chi2:.2f} dof={dof} escapers={escapers} (need >= 1e5)"
    return CheckResult("arclength_histogram", chi2 / dof, 2.0, ok, detail)


# --------------------------------------------------------------- normalization


def check_normalization(level: str = "full", threads: int | None = None) -> CheckResult:
    """Total mass n and orthonormality of p_0..p_12."""
    worst_mass = 0.0
    for t, T, n in ((0.5, 1.0, 2), (0.5, 1.0, 16), (0.5, 1.0, 64), (0.75, 0.4375, 32), (0.0, 1.0, 8)):
        p = EnsembleParams(t, T, n)
        worst_mass = max(worst_mass, abs(ker.total_mass(p, threads=threads) - n) / n)
    worst_gram = 0.0
    for t, N in ((0.5, 10.0), (0.25, 16.0)):
        G = ker.gram_matrix(12, t, N, threads=threads)
        worst_gram = max(worst_gram, float(np.max(np.abs(G - np.eye(13)))))
    ok = worst_mass <= 1e-4 and worst_gram <= 1e-7
    detail = f"mass rel {worst_mass:.3g} (bound 1e-4); Gram max {worst_gram:.3g} (bound 1e-7)"
    return CheckResult("normalization", worst_mass, 1e-4, ok, detail, extra={"gram": worst_gram})


# ------------------------------------------------------- additional edge checks


def derivative_gaps(N: float, theta: float = math.pi / 6, t: float = 0.5, T: float = 1.0, points: int = 41):
    """Relative sup gaps of the normal and tangential derivative expansions.

    The exact side is the two-term gradient formula on |X| <= 2/sqrt(N)
    (normal line) and on the segment Y = X (tangential expansion).
    """
    p = EnsembleParams(t, T, int(round(N * T)), N)
    f = geo.boundary_frame(theta, p)
    X = np.linspace(-2, 2, points) / math.sqrt(N)
    grad = np.asarray(ker.density_gradient_cd(f.z0 + X * f.normal, p))
    exact_n = 2 * (f.normal * grad).real
    approx_n = np.asarray(edge.dn_rho_expansion(X, f, p))
    Y = X
    grad_t = np.asarray(ker.density_gradient_cd(f.z0 + (X + 1j * Y) * f.normal, p))
    exact_t = 2 * (f.tangent * grad_t).real
    approx_t = np.asarray(edge.dt_rho_expansion(X, Y, f, p))
    gap_n = float(np.max(np.abs(exact_n - approx_n)) / np.max(np.abs(exact_n)))
    gap_t = float(np.max(np.abs(exact_t - approx_t)) / np.max(np.abs(exact_t)))
    return gap_n, gap_t


def check_edge_derivatives(level: str = "full", threads: int | None = None) -> CheckResult:
    """Normal and tangential derivative expansions against the exact gradient."""
    g400 = derivative_gaps(400.0)
    g1600 = derivative_gaps(1600.0)
    worst = max(g1600)
    ratios = [a / b for a, b in zip(g400, g1600)]
    ok = worst <= 0.01 and min(ratios) >= 2.8
    detail = (
        f"gaps N=400 (n {g400[0]:.3g}, t {g400[1]:.3g}), N=1600 (n {g1600[0]:.3g}, t {g1600[1]:.3g}); "
        f"min ratio {min(ratios):.3g} (bound 2.8)"
    )
    return CheckResult("edge_derivatives", worst, 0.01, ok, detail)


SWEEP_T = (0.0, 0.25, 0.5, 0.75)


def check_doubling_sweep(level: str = "full", threads: int | None = None) -> CheckResult:
    """Doubling decay of the boundary expansion error across t."""
    rate = 2 ** 1.2
    worst = math.inf
    parts = []
    for t in SWEEP_T:
        sups = [edge_sup_error(0.0, N, t=t, threads=threads) for N in (256, 512, 1024)]
        r = min(sups[0] / sups[1], sups[1] / sups[2])
        worst = min(worst, r)
        parts.append(f"t={t}:{r:.3f}")
    return CheckResult("doubling_sweep", worst, rate, worst >= rate, " ".join(parts))


ACCEPTANCE = (
    (1, check_table_exact),
    (2, check_table_asymptotic),
    (3, check_edge_profile),
    (4, check_boundary_value),
    (5, check_cd_identity),
    (6, check_bulk_exponential),
    (7, check_wkb),
    (8, check_geometry),
    (9, check_omega_taylor),
    (10, check_mcmc_mean),
    (11, check_arclength_histogram),
    (12, check_normalization),
)
EXTRA = (check_edge_derivatives, check_doubling_sweep)
FULL_ONLY = {check_arclength_histogram, check_mcmc_mean, check_doubling_sweep}


def run_check(func, level: str = "full", threads: int | None = None) -> CheckResult:
    start = time.perf_counter()
    try:
        res = func(level, threads)
    except Exception as exc:  # a crashing check is a failing check
        res = CheckResult(func.__name__.removeprefix("check_"), math.nan, math.nan, False, f"error: {exc!r}")
    res.seconds = time.perf_counter() - start
    return res


def run_all(level: str = "fast", threads: int | None = None, report=None) -> list:
    """Run every check for ``level``; ``report`` is called with each result."""
    if level not in ("fast", "full"):
        raise ValueError("level must be 'fast' or 'full'")
    funcs = [f for _, f in ACCEPTANCE] + list(EXTRA)
    if level == "fast":
        funcs = [f for f in funcs if f not in FULL_ONLY]
    results = []
    for f in funcs:
        res = run_check(f, level, threads)
        results.append(res)
        if report is not None:
            report(res)
    return results
