import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import NORM_TIMES
from dnstrip.decay import (
    Thresholds,
    exponential_bound_from_mu,
    fit_rate,
    rate_ratio_test,
    theorem_report,
)
from dnstrip.evolution import NormTrace
from dnstrip.geometry import Theta
from dnstrip.operators import selfsimilar_grid
from dnstrip.oracle import norm_S0_oracle
from dnstrip.spectral import CurveSample, SpectralCurve

T = np.geomspace(10, 200, 20)


def test_exact_power_law_recovered():
    fit = fit_rate((T, (1 + T) ** -0.25))
    assert fit.gamma == pytest.approx(0.25, abs=1e-12)
    assert fit.prefactor == pytest.approx(1.0, rel=1e-12)
    assert fit.rms < 1e-12


def test_perturbed_power_law():
    v = 2 * (1 + T) ** -0.75 * (1 + 0.1 / np.sqrt(1 + T))
    assert 0.70 <= fit_rate((T, v), (10, 200)).gamma <= 0.80


def test_fit_needs_enough_positive_samples():
    with pytest.raises(ValueError):
        fit_rate((T[:7], (1 + T[:7]) ** -0.5))
    with pytest.raises(ValueError):
        fit_rate((T, -(1 + T) ** -0.5))
    with pytest.raises(ValueError):
        fit_rate((T, (1 + T) ** -0.5), (50, 20))


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(0.05, 2.0))
def test_fit_scale_equivariance(scale, gamma):
    v = (1 + T) ** -gamma * (1 + 0.2 * np.sin(T))
    a, b = fit_rate((T, v)), fit_rate((T, scale * v))
    assert b.gamma == pytest.approx(a.gamma, abs=1e-9)
    assert b.prefactor == pytest.approx(scale * a.prefactor, rel=1e-9)


def test_untwisted_semigroup_exponent(norms):
    fit = fit_rate(norms["0"], (10, 128))
    assert 0.22 <= fit.gamma <= 0.28
    oracle = fit_rate((NORM_TIMES, np.array([norm_S0_oracle(t).value for t in NORM_TIMES])), (10, 128))
    assert abs(fit.gamma - oracle.gamma) <= 0.02


def test_ratio_test_identities():
    tr = NormTrace(Theta.UNTWISTED, "g", T, (1 + T) ** -0.25, np.ones_like(T))
    assert fit_rate((T, np.ones_like(T))).gamma == pytest.approx(0.0, abs=1e-12)
    assert rate_ratio_test(tr, tr, (10, 200)).gamma == pytest.approx(0.0, abs=1e-12)
    tp = NormTrace(Theta.TWISTED, "g", T, 3 * (1 + T) ** -0.75, np.ones_like(T))
    assert rate_ratio_test(tp, tr, (10, 200)).gamma == pytest.approx(0.5, abs=1e-12)
    shifted = NormTrace(Theta.TWISTED, "g", T * 1.01, tp.norm, np.ones_like(T))
    with pytest.raises(ValueError):
        rate_ratio_test(shifted, tr)


def test_ratio_exponent_on_default_run(traces):
    assert 0.35 <= rate_ratio_test(traces["pi"], traces["0"], (20, 200)).gamma <= 0.65


def _flat(m, s_max=6.0, step=0.5):
    ss = np.arange(0, s_max + 1e-12, step)
    grid = selfsimilar_grid(L=12.0, n1=240, n2=8)
    return SpectralCurve(Theta.TWISTED, grid, [CurveSample(s, m, 0, 0, 0, 1) for s in ss])


def test_exponential_bound_flat_curve():
    for s in (0.0, 1.0, 2.75, 6.0):
        assert exponential_bound_from_mu(_flat(0.4), s) == pytest.approx(math.exp(-0.4 * s), rel=1e-14)


def test_exponential_bound_monotone_in_mu():
    assert exponential_bound_from_mu(_flat(0.5), 5.0) < exponential_bound_from_mu(_flat(0.3), 5.0)


def test_exponential_bound_coverage():
    with pytest.raises(ValueError):
        exponential_bound_from_mu(_flat(0.3, s_max=4.0), 5.0)


def test_exponential_bound_on_curves(untwisted_curve, twisted_curve):
    assert exponential_bound_from_mu(untwisted_curve, 12.0) == pytest.approx(math.exp(-3.0), rel=1e-6)
    for s in (0.5, 4.0, 12.0):
        assert exponential_bound_from_mu(twisted_curve, s) < math.exp(-s / 4)


def _report(norms, traces, untwisted_curve, twisted_curve, **kw):
    args = dict(
        norms_0=norms["0"],
        norms_pi=norms["pi"],
        trace_0=traces["0"],
        trace_pi=traces["pi"],
        curve_0=untwisted_curve,
        curve_pi=twisted_curve,
    )
    args.update(kw)
    return theorem_report(**args)


def test_full_report_passes(norms, traces, untwisted_curve, twisted_curve):
    rep = _report(norms, traces, untwisted_curve, twisted_curve)
    assert rep.passed, rep.to_text()
    assert len(rep.checks) == 7
    text, kv = rep.to_text(), rep.to_kv()
    for c in rep.checks:
        assert c.name in text and f"{c.name}.passed = 1" in kv


def test_swapped_layouts_fail(norms, traces, untwisted_curve, twisted_curve):
    rep = _report(
        norms, traces, untwisted_curve, twisted_curve,
        norms_0=norms["pi"], norms_pi=norms["0"], trace_0=traces["pi"], trace_pi=traces["0"],
    )
    failed = {c.name for c in rep.checks if not c.passed}
    assert {"ii.ratio", "ii.gamma_pi", "iii.bound"} <= failed


def test_zero_twisted_constant_fails(norms, traces, untwisted_curve, twisted_curve):
    rep = _report(norms, traces, untwisted_curve, twisted_curve, cpi=0.0)
    failed = {c.name for c in rep.checks if not c.passed}
    assert "iv.cpi" in failed


def test_missing_inputs_listed(norms):
    with pytest.raises(ValueError, match="trace_0, trace_pi"):
        theorem_report(norms_0=norms["0"], norms_pi=norms["pi"], c0=0.0, cpi=0.3)


def test_thresholds_in_one_place():
    th = Thresholds()
    assert th.gamma0_band == (0.22, 0.28) and th.bound_slack == 0.05
