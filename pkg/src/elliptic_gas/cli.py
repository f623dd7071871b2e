"""Command line interface.

Grid data are written as CSV (header row, 17 significant digits, LF line
endings); scalar results as JSON.  Every file written with ``--out`` gets a
sidecar ``<out>.manifest.json`` recording the command, parameters, seed,
tool version, wall time and tolerance report.  Data files contain no
timing information, so reruns with the same inputs are byte-identical.

Exit codes: 0 success, 1 failed check, 2 usage error.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import time
from importlib import resources

import numpy as np

from . import __version__
from . import edge
from . import geometry as geo
from . import kernel as ker
from . import sampler
from . import validation
from .params import EnsembleParams

SCHEMA_VERSION = "1.0"
THREADS_ENV = "ELLIPTIC_GAS_THREADS"


class UsageError(Exception):
    """Invalid arguments detected after parsing (exit code 2)."""


# ----------------------------------------------------------------------- output


def load_schema() -> dict:
    text = resources.files("elliptic_gas").joinpath("schemas/output.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_json(doc: dict) -> None:
    """Raise jsonschema.ValidationError if ``doc`` does not match the output schema."""
    import jsonschema

    jsonschema.validate(doc, load_schema(), cls=jsonschema.Draft202012Validator)


def format_float(x) -> str:
    return format(float(x), ".17g")


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else format_float(v) for v in row) + "\n")
    return buf.getvalue()


def json_text(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


class Run:
    """Collects the manifest of one command invocation."""

    def __init__(self, command: str, params: EnsembleParams | None, seed=None, options=None, rng=None):
        self.command = command
        self.params = params
        self.seed = seed
        self.options = options or {}
        self.rng = rng
        self.report = []
        self.start = time.perf_counter()

    def add_check(self, name: str, value: float, bound: float, passed: bool) -> None:
        self.report.append({"name": name, "value": _finite(value), "bound": _finite(bound), "pass": bool(passed)})

    def manifest(self, wall_time: bool = True, data_file=None) -> dict:
        out = {
            "command": self.command,
            "params": self.params.as_dict() if self.params is not None else None,
            "seed": self.seed,
            "tool_version": __version__,
            "tolerance_report": self.report,
            "schema_version": SCHEMA_VERSION,
            "rng": self.rng,
            "options": self.options,
        }
        if data_file is not None:
            out["data_file"] = data_file
        if wall_time:
            out["wall_time"] = round(time.perf_counter() - self.start, 6)
        return out

    def emit_csv(self, out: str | None, header, rows) -> None:
        text = csv_text(header, rows)
        if out is None:
            sys.stdout.write(text)
            return
        _write(out, text)
        self._sidecar(out)

    def emit_json(self, out: str | None, result: dict) -> None:
        doc = dict(result)
        doc["kind"] = "result"
        # the embedded manifest omits wall time so the data file is reproducible
        doc["manifest"] = self.manifest(wall_time=out is None)
        validate_json(doc)
        text = json_text(doc)
        if out is None:
            sys.stdout.write(text)
            return
        _write(out, text)
        self._sidecar(out)

    def _sidecar(self, out: str) -> None:
        doc = {"kind": "manifest", "manifest": self.manifest(data_file=os.path.basename(out))}
        validate_json(doc)
        _write(out + ".manifest.json", json_text(doc))


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else None


# ---------------------------------------------------------------------- helpers


def resolve_threads(arg: int | None) -> int:
    """Thread count: the environment variable wins, then --threads, then all cores."""
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        if value < 1:
            raise UsageError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        return value
    if arg is not None:
        if arg < 1:
            raise UsageError("--threads must be at least 1")
        return arg
    return os.cpu_count() or 1


def make_params(args) -> EnsembleParams:
    try:
        return EnsembleParams(args.t, args.T, args.n, args.N)
    except ValueError as exc:
        raise UsageError(f"invalid parameters: {exc}") from None


def parse_complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}")


def _positive(name: str, value, minimum=1):
    if value < minimum:
        raise UsageError(f"{name} must be at least {minimum}, got {value}")


def _options(args, *names) -> dict:
    return {k: getattr(args, k.replace("-", "_")) for k in names}


# --------------------------------------------------------------------- commands


EDGE_ORDERS = ("exact", "order0", "order1", "order2")


def cmd_edge_profile(args) -> int:
    p = make_params(args)
    _positive("--steps", args.steps)
    if not args.xi_max >= args.xi_min:
        raise UsageError("--xi-max must not be below --xi-min")
    include = args.include or list(EDGE_ORDERS)
    frame = geo.boundary_frame(args.theta, p)
    xi = np.linspace(args.xi_min, args.xi_max, args.steps) if args.steps > 1 else np.array([args.xi_min])
    cols = {"xi": xi}
    threads = resolve_threads(args.threads)
    if "exact" in include:
        cols["rho_exact"] = np.asarray(ker.density(edge.edge_point(xi, 0.0, frame, p), p, threads)).reshape(xi.shape)
    names = {"order0": "rho_erfc", "order1": "rho_order1", "order2": "rho_order2"}
    for k, order in (("order0", 0), ("order1", 1), ("order2", 2)):
        if k in include:
            cols[names[k]] = np.asarray(edge.edge_density(xi, 0.0, frame, p, order=order)).reshape(xi.shape)
    if "rho_exact" in cols:
        if "rho_erfc" in cols:
            cols["resid1"] = cols["rho_exact"] - cols["rho_erfc"]
        if "rho_order1" in cols:
            cols["resid2"] = cols["rho_exact"] - cols["rho_order1"]
    run = Run("edge-profile", p, options=_options(args, "theta", "xi_min", "xi_max", "steps") | {"include": include})
    if "rho_exact" in cols and "rho_order2" in cols:
        gap = float(np.max(np.abs(cols["rho_exact"] - cols["rho_order2"])))
        run.add_check("sup |rho_exact - rho_order2|", gap, 5 * p.N ** -1.25, gap <= 5 * p.N ** -1.25)
    header = list(cols)
    rows = zip(*(cols[h] for h in header))
    run.emit_csv(args.out, header, rows)
    return 0


def cmd_density_grid(args) -> int:
    p = make_params(args)
    _positive("--nx", args.nx)
    _positive("--ny", args.ny)
    x = np.linspace(args.xmin, args.xmax, args.nx)
    y = np.linspace(args.ymin, args.ymax, args.ny)
    X, Y = np.meshgrid(x, y, indexing="xy")
    z = (X + 1j * Y).ravel()
    rho = np.asarray(ker.density(z, p, resolve_threads(args.threads))).ravel()
    inside = ~np.asarray(geo.is_outside(z, p)).ravel()
    run = Run("density-grid", p, options=_options(args, "xmin", "xmax", "ymin", "ymax", "nx", "ny"))
    run.add_check("min rho", float(rho.min()), 0.0, bool(rho.min() > 0))
    rows = ((zz.real, zz.imag, r, "1" if ins else "0") for zz, r, ins in zip(z, rho, inside))
    run.emit_csv(args.out, ["x", "y", "rho", "inside"], rows)
    return 0


def _scaled_record(v) -> dict:
    return {"log_abs": float(v.log_mag), "phase": float(np.angle(np.exp(1j * np.asarray(v.phase))))}


def cmd_kernel_pair(args) -> int:
    p = make_params(args)
    z, w = args.z, args.w
    k = ker.kernel(z, w, p)
    kzw = k.value
    kwz = ker.kernel(w, z, p).value
    lhs = ker.prekernel_derivative(z, w, p)
    rhs = ker.prekernel_cd_rhs(z, w, p)
    ref = max(float(lhs.log_mag), float(rhs.log_mag))
    a = np.exp(lhs.log_mag - ref + 1j * lhs.phase)
    b = np.exp(rhs.log_mag - ref + 1j * rhs.phase)
    cd_err = float(abs(a - b) / abs(b))
    ref2 = max(float(kzw.log_mag), float(kwz.log_mag))
    herm = float(abs(np.exp(kzw.log_mag - ref2 + 1j * kzw.phase) - np.conj(np.exp(kwz.log_mag - ref2 + 1j * kwz.phase))))
    run = Run("kernel-pair", p, options={"z": [z.real, z.imag], "w": [w.real, w.imag]})
    run.add_check("CD identity relative error", cd_err, 1e-8, cd_err <= 1e-8)
    run.add_check("Hermitian symmetry relative error", herm, 1e-12, herm <= 1e-12)
    result = {
        "z": [z.real, z.imag],
        "w": [w.real, w.imag],
        "kernel": _scaled_record(kzw),
        "prekernel": _scaled_record(ker.prekernel(z, w, p)),
        "cd_lhs": _scaled_record(lhs),
        "cd_rhs": _scaled_record(rhs),
        "cd_relative_error": cd_err,
        "density_z": float(ker.density(z, p)),
        "density_w": float(ker.density(w, p)),
    }
    run.emit_json(args.out, result)
    return 0


def cmd_cauchy(args) -> int:
    p = make_params(args)
    try:
        res = ker.cauchy_transform(args.z, p, refine=args.refine, threads=resolve_threads(args.threads))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    run = Run("cauchy", p, options={"z": [args.z.real, args.z.imag], "refine": args.refine})
    norm_err = abs(res.normalization - 1)
    run.add_check("normalization |I - 1|", norm_err, 1e-7, norm_err <= 1e-7)
    result = {
        "value": [res.value.real, res.value.imag],
        "abs_value": abs(res.value),
        "normalization": res.normalization,
        "nodes": res.nodes,
    }
    run.emit_json(args.out, result)
    return 0


def _sampler_config(args, p: EnsembleParams, threads: int, bins: int = 35, keep: int = 0) -> sampler.SamplerConfig:
    if args.seed is None:
        raise UsageError("this command needs --seed (no hidden entropy)")
    try:
        return sampler.SamplerConfig(
            p, seed=args.seed, sweeps=args.sweeps, burn_in=args.burn_in, thin=args.thin,
            proposal_scale=args.proposal_scale, chains=args.chains, bins=bins, keep_configs=keep, threads=threads,
        )
    except ValueError as exc:
        raise UsageError(f"invalid sampler settings: {exc}") from None


def cmd_outside(args) -> int:
    p = make_params(args)
    threads = resolve_threads(args.threads)
    result = {"method": args.method}
    if args.method == "exact":
        if p.n > 512:
            raise UsageError(f"exact outside count is limited to n <= 512, got n={p.n}")
        run = Run("outside", p, options={"method": "exact"})
        res = ker.expected_outside_exact(p, threads=threads)
        result.update(n_out=res.n_out, interior_deficit=res.interior_deficit)
        run.add_check("|exterior - interior deficit|", res.mismatch, 1e-4, res.mismatch <= 1e-4)
    elif args.method == "asymptotic":
        run = Run("outside", p, options={"method": "asymptotic"})
        res = edge.n_out_asymptotic(p)
        result.update(n_out=res.total, leading=res.leading, correction=res.correction, k_modulus=res.k_modulus, perimeter=res.perimeter)
    else:
        cfg = _sampler_config(args, p, threads)
        run = Run("outside", p, seed=args.seed, rng=sampler.RNG_NAME, options=_mcmc_options(cfg) | {"method": "mcmc"})
        batch = sampler.run(cfg)
        se = sampler.combined_standard_error(batch.outside_counts)
        result.update(n_out=batch.mean_outside, stderr=se, acceptance_rate=batch.acceptance_rate)
        if cfg.chains > 1:
            rhat = sampler.gelman_rubin(batch.outside_counts)
            result["rhat"] = rhat
            run.add_check("R-hat", rhat, 1.05, rhat < 1.05)
        if batch.warning:
            result["warning"] = batch.warning
    run.emit_json(args.out, result)
    return 0


def _mcmc_options(cfg: sampler.SamplerConfig) -> dict:
    return {
        "sweeps": cfg.sweeps, "burn_in": cfg.burn_in, "thin": cfg.thin,
        "proposal_scale": cfg.proposal_scale, "chains": cfg.chains, "bins": cfg.bins,
    }


def cmd_sample(args) -> int:
    p = make_params(args)
    cfg = _sampler_config(args, p, resolve_threads(args.threads), bins=args.bins, keep=args.keep_configs)
    run = Run("sample", p, seed=args.seed, rng=sampler.RNG_NAME, options=_mcmc_options(cfg) | {"keep_configs": args.keep_configs})
    batch = sampler.run(cfg)
    total = int(batch.outside_counts.sum())
    run.add_check("histogram total - outside total", int(batch.arclength_bins.sum()) - total, 0, int(batch.arclength_bins.sum()) == total)
    result = {
        "outside_counts": batch.outside_counts.tolist(),
        "arclength_bins": batch.arclength_bins.tolist(),
        "acceptance_rate": batch.acceptance_rate,
        "chain_acceptance": batch.chain_acceptance.tolist(),
        "configs": [[[float(v.real), float(v.imag)] for v in c] for c in batch.configs],
        "warning": batch.warning,
    }
    run.emit_json(args.out, result)
    return 0


def cmd_arclength_hist(args) -> int:
    p = make_params(args)
    cfg = _sampler_config(args, p, resolve_threads(args.threads), bins=args.bins)
    run = Run("arclength-hist", p, seed=args.seed, rng=sampler.RNG_NAME, options=_mcmc_options(cfg))
    batch = sampler.run(cfg)
    expected = edge.arclength_bin_expectation(p, args.bins)
    leading = edge.arclength_bin_expectation(p, args.bins, order=0)
    records = batch.outside_counts.size
    chi2, dof = sampler.chi_square(batch.arclength_bins, expected)
    run.add_check("chi2/dof", chi2 / dof if dof else math.nan, 2.0, dof > 0 and chi2 / dof <= 2)
    L = geo.perimeter(p)
    edges = np.linspace(0, L, args.bins + 1)
    rows = (
        (str(i), edges[i], edges[i + 1], str(int(batch.arclength_bins[i])), batch.arclength_bins[i] / records, expected[i], leading[i])
        for i in range(args.bins)
    )
    header = ["bin", "s_lo", "s_hi", "count", "per_sample", "expected", "expected_leading"]
    run.emit_csv(args.out, header, rows)
    return 0


def cmd_validate(args) -> int:
    threads = resolve_threads(args.threads)
    failures = []

    def report(res):
        print(res.line(), f"[{res.seconds:.1f}s]", flush=True)
        if not res.passed:
            failures.append(res)

    results = validation.run_all(args.level, threads, report)
    run = Run("validate", None, options={"level": args.level})
    for res in results:
        run.add_check(res.name, res.value, res.bound, res.passed)
    if args.out:
        run.emit_json(args.out, {"level": args.level, "passed": not failures, "checks": len(results)})
    if failures:
        print(f"{len(failures)} check(s) failed: " + ", ".join(r.name for r in failures), file=sys.stderr)
        return 1
    print(f"all {len(results)} checks passed")
    return 0


# ----------------------------------------------------------------------- parser


def _add_params(sp) -> None:
    sp.add_argument("--t", type=float, required=True, help="asymmetry, 0 <= t < 1")
    sp.add_argument("--T", type=float, default=1.0, help="total mass T > 0 (default 1)")
    sp.add_argument("--n", type=int, required=True, help="particle count n >= 1")
    sp.add_argument("--N", type=float, default=None, help="inverse temperature scale (default n/T)")


def _add_common(sp) -> None:
    sp.add_argument("--out", default=None, help="output file (default: stdout, no manifest)")
    sp.add_argument("--threads", type=int, default=None, help=f"worker threads (default all cores; {THREADS_ENV} overrides)")


def _add_mcmc(sp, sweeps: int) -> None:
    sp.add_argument("--seed", type=int, default=None, help="64-bit seed (required for sampling)")
    sp.add_argument("--sweeps", type=int, default=sweeps)
    sp.add_argument("--burn-in", type=int, default=1000)
    sp.add_argument("--thin", type=int, default=1)
    sp.add_argument("--chains", type=int, default=4)
    sp.add_argument("--proposal-scale", type=float, default=None, help="Gaussian step (default 0.7/sqrt(N))")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elliptic-gas",
        description="Density, kernel and boundary asymptotics of the elliptic random normal matrix ensemble.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("edge-profile", help="density across the boundary vs its expansion (CSV)")
    _add_params(sp)
    sp.add_argument("--theta", type=float, default=0.0, help="boundary angle")
    sp.add_argument("--xi-min", type=float, default=-3.0)
    sp.add_argument("--xi-max", type=float, default=3.0)
    sp.add_argument("--steps", type=int, default=121, help="number of xi points (>= 1)")
    sp.add_argument("--include", nargs="+", choices=EDGE_ORDERS, default=None, help="columns to compute (default all)")
    _add_common(sp)
    sp.set_defaults(func=cmd_edge_profile)

    sp = sub.add_parser("density-grid", help="density on a rectangular grid (CSV)")
    _add_params(sp)
    sp.add_argument("--xmin", type=float, default=-2.5)
    sp.add_argument("--xmax", type=float, default=2.5)
    sp.add_argument("--ymin", type=float, default=-1.5)
    sp.add_argument("--ymax", type=float, default=1.5)
    sp.add_argument("--nx", type=int, default=101)
    sp.add_argument("--ny", type=int, default=61)
    _add_common(sp)
    sp.set_defaults(func=cmd_density_grid)

    sp = sub.add_parser("kernel-pair", help="kernel, pre-kernel and derivative identity at (z, w) (JSON)")
    _add_params(sp)
    sp.add_argument("--z", type=parse_complex, required=True, help="complex, e.g. 1.2+0.3j")
    sp.add_argument("--w", type=parse_complex, required=True)
    _add_common(sp)
    sp.set_defaults(func=cmd_kernel_pair)

    sp = sub.add_parser("cauchy", help="Cauchy transform of |p_n|^2 exp(-N V) at an interior point (JSON)")
    _add_params(sp)
    sp.add_argument("--z", type=parse_complex, required=True)
    sp.add_argument("--refine", type=int, default=0)
    _add_common(sp)
    sp.set_defaults(func=cmd_cauchy)

    sp = sub.add_parser("outside", help="expected number of particles outside the droplet (JSON)")
    _add_params(sp)
    sp.add_argument("--method", choices=("exact", "asymptotic", "mcmc"), required=True)
    _add_mcmc(sp, 100_000)
    _add_common(sp)
    sp.set_defaults(func=cmd_outside)

    sp = sub.add_parser("sample", help="run the Metropolis sampler and dump its statistics (JSON)")
    _add_params(sp)
    _add_mcmc(sp, 10_000)
    sp.add_argument("--bins", type=int, default=35)
    sp.add_argument("--keep-configs", type=int, default=0, help="configurations to keep per chain")
    _add_common(sp)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("arclength-hist", help="arclength histogram of escaper projections vs the escape density (CSV)")
    _add_params(sp)
    _add_mcmc(sp, 100_000)
    sp.add_argument("--bins", type=int, default=35)
    _add_common(sp)
    sp.set_defaults(func=cmd_arclength_hist)

    sp = sub.add_parser("validate", help="run the numerical acceptance checks")
    sp.add_argument("--level", choices=("fast", "full"), default="fast")
    _add_common(sp)
    sp.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
