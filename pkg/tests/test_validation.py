import dataclasses
import math

import pytest

from elliptic_gas import geometry as geo
from elliptic_gas import validation as val


def test_check_result_line():
    res = val.CheckResult("demo", 0.5, 1.0, True, "ok")
    assert res.line().startswith("PASS demo: value=0.5 bound=1")
    rec = res.as_record()
    assert rec["name"] == "demo" and rec["pass"] is True


def test_run_check_reports_exceptions_as_failures():
    def broken(level="full", threads=None):
        raise RuntimeError("boom")

    res = val.run_check(broken)
    assert not res.passed and "boom" in res.detail


def test_edge_derivative_check_passes():
    assert val.check_edge_derivatives().passed


def test_sign_flip_in_curvature_derivative_is_detected(monkeypatch):
    # mutation: flip the sign of d kappa / ds in every boundary frame
    original = geo.boundary_frame

    def mutated(theta, params):
        f = original(theta, params)
        return dataclasses.replace(f, dkappa_ds=-f.dkappa_ds)

    monkeypatch.setattr(geo, "boundary_frame", mutated)
    res = val.check_edge_derivatives()
    assert not res.passed, res.line()


def test_fast_level_skips_long_checks():
    names = [f.__name__ for f in val.FULL_ONLY]
    assert "check_mcmc_mean" in names and "check_arclength_histogram" in names
    seen = []
    results = val.run_all("fast", threads=1, report=seen.append)
    assert len(results) == len(seen) == len(val.ACCEPTANCE) + len(val.EXTRA) - len(val.FULL_ONLY)
    assert all(r.passed for r in results), [r.line() for r in results if not r.passed]


@pytest.mark.slow
def test_doubling_sweep_across_asymmetry():
    res = val.check_doubling_sweep()
    assert res.passed, res.line()
    assert res.value >= 2 ** 1.2
    assert not math.isnan(res.value)
