"""Decay exponents, the ``mu``-integral bound and the combined rate checks.

Rates are fitted as ``v(t) ~ C (1 + t)^(-gamma)`` by least squares on
``log v`` against ``log(1 + t)``.  The twisted gain is best measured on the
ratio of twisted to untwisted traces started from the same datum, because
the pre-asymptotic corrections the two share cancel in the ratio.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .evolution import NormTrace, SemigroupNormEstimate
from .spectral import SpectralCurve

MIN_SAMPLES = 8


@dataclass(frozen=True)
class DecayFit:
    gamma: float
    prefactor: float
    t_lo: float
    t_hi: float
    rms: float  # root-mean-square residual of log v
    samples: int

    def row(self, label: str) -> dict:
        return {"quantity": label, **asdict(self)}


def _as_pairs(trace) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(trace, NormTrace):
        return trace.t, trace.norm
    if isinstance(trace, tuple) and len(trace) == 2:
        return np.asarray(trace[0], float), np.asarray(trace[1], float)
    if trace and isinstance(trace[0], SemigroupNormEstimate):
        return np.array([e.t for e in trace]), np.array([e.value for e in trace])
    arr = np.asarray(trace, dtype=float)
    return arr[:, 0], arr[:, 1]


def fit_rate(trace, window: tuple[float, float] = (10.0, math.inf)) -> DecayFit:
    """Fit ``v = C (1 + t)^(-gamma)`` on samples with ``t`` in ``window``.

    ``trace`` is a :class:`NormTrace`, a list of semigroup-norm estimates, a
    ``(t, v)`` pair of arrays, or an ``(n, 2)`` array.
    """
    t, v = _as_pairs(trace)
    lo, hi = window
    if not lo < hi:
        raise ValueError(f"empty window [{lo}, {hi}]")
    m = (t >= lo) & (t <= hi)
    if m.sum() < MIN_SAMPLES:
        raise ValueError(f"only {int(m.sum())} samples in [{lo:g}, {hi:g}]; need {MIN_SAMPLES}")
    if np.any(v[m] <= 0) or not np.all(np.isfinite(v[m])):
        raise ValueError("fit values must be positive and finite")
    x, y = np.log1p(t[m]), np.log(v[m])
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    rms = float(np.sqrt(np.mean((y - X @ coef) ** 2)))
    return DecayFit(float(-coef[1]), float(math.exp(coef[0])), float(t[m][0]), float(t[m][-1]), rms, int(m.sum()))


def rate_ratio_test(trace_pi: NormTrace, trace_0: NormTrace, window: tuple[float, float] = (20.0, 200.0)) -> DecayFit:
    """Decay exponent of ``|u_pi(t)| / |u_0(t)|`` on ``window``."""
    tp, vp = _as_pairs(trace_pi)
    t0, v0 = _as_pairs(trace_0)
    if tp.shape != t0.shape or not np.allclose(tp, t0, rtol=1e-12, atol=0):
        raise ValueError("traces are sampled at different times")
    return fit_rate((tp, vp / v0), window)


def exponential_bound_from_mu(curve: SpectralCurve, s: float) -> float:
    """``exp(-int_0^s mu)`` with the trapezoid rule on the curve's samples.

    A final partial interval is closed by linear interpolation of ``mu``.
    """
    ss, mu = curve.s, curve.mu
    if s < 0:
        raise ValueError(f"s must be nonnegative, got {s}")
    if ss.size == 0 or ss[0] > 0 or ss[-1] < s:
        raise ValueError(f"curve covers [{ss[0] if ss.size else math.nan:g}, {ss[-1] if ss.size else math.nan:g}], not [0, {s:g}]")
    if not np.all(np.isfinite(mu)):
        raise ValueError("curve has gaps")
    inside = ss < s
    grid = np.append(ss[inside], s)
    vals = np.append(mu[inside], np.interp(s, ss, mu))
    return math.exp(-float(np.trapezoid(vals, grid)))


# --- combined checks ---------------------------------------------------------


@dataclass(frozen=True)
class Thresholds:
    """Pass/fail limits for :func:`theorem_report`, in one place."""

    fit_window: tuple[float, float] = (10.0, 128.0)
    ratio_window: tuple[float, float] = (20.0, 200.0)
    twisted_window: tuple[float, float] = (20.0, 200.0)
    gamma0_band: tuple[float, float] = (0.22, 0.28)
    ratio_band: tuple[float, float] = (0.35, 0.65)
    gamma_pi_band: tuple[float, float] = (0.55, 0.90)
    scaled_norm_window: tuple[float, float] = (1.0, 128.0)
    scaled_norm_spread: float = 2.0  # max / min of t^(1/4) |S_0(t)|
    bound_slack: float = 0.05
    c0_max: float = 1e-3
    cpi_min: float = 0.01


@dataclass(frozen=True)
class Check:
    name: str
    claim: str
    passed: bool
    value: float
    limit: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.claim} (value {self.value:.6g}, required {self.limit})"


@dataclass
class TheoremReport:
    gamma0: DecayFit
    gamma_pi: DecayFit
    ratio: DecayFit
    c0: float
    cpi: float
    mu_inf: dict
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_text(self) -> str:
        lines = [
            "decay report",
            f"  untwisted exponent  {self.gamma0.gamma:.6f} on t in [{self.gamma0.t_lo:g}, {self.gamma0.t_hi:g}] (rms {self.gamma0.rms:.2e})",
            f"  twisted exponent    {self.gamma_pi.gamma:.6f} on t in [{self.gamma_pi.t_lo:g}, {self.gamma_pi.t_hi:g}] (rms {self.gamma_pi.rms:.2e})",
            f"  ratio exponent      {self.ratio.gamma:.6f} on t in [{self.ratio.t_lo:g}, {self.ratio.t_hi:g}] (rms {self.ratio.rms:.2e})",
            f"  c_0^h = {self.c0:.6g}   c_pi^h = {self.cpi:.6g}",
            f"  mu limits: untwisted {self.mu_inf['0']:.6f} (ref 0.25), twisted {self.mu_inf['pi']:.6f} (ref 0.75)",
        ]
        lines += ["  " + c.line() for c in self.checks]
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def to_kv(self) -> str:
        kv = {
            "gamma0": self.gamma0.gamma,
            "gamma0_rms": self.gamma0.rms,
            "gamma_pi": self.gamma_pi.gamma,
            "gamma_pi_rms": self.gamma_pi.rms,
            "ratio_exponent": self.ratio.gamma,
            "ratio_rms": self.ratio.rms,
            "c0_h": self.c0,
            "cpi_h": self.cpi,
            "mu_last_0": self.mu_inf["0"],
            "mu_last_pi": self.mu_inf["pi"],
        }
        for c in self.checks:
            kv[f"{c.name}.passed"] = int(c.passed)
            kv[f"{c.name}.value"] = c.value
        kv["passed"] = int(self.passed)
        return "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n" for k, v in kv.items())


def _in(band, x) -> bool:
    return band[0] <= x <= band[1]


def theorem_report(
    norms_0: list[SemigroupNormEstimate] | None = None,
    norms_pi: list[SemigroupNormEstimate] | None = None,
    trace_0: NormTrace | None = None,
    trace_pi: NormTrace | None = None,
    curve_0: SpectralCurve | None = None,
    curve_pi: SpectralCurve | None = None,
    thresholds: Thresholds = Thresholds(),
    c0: float | None = None,
    cpi: float | None = None,
) -> TheoremReport:
    """Run the four rate checks.

    (i) untwisted exponent and two-sided ``t^(1/4)`` scaling of ``|S_0(t)|``;
    (ii) twisted gain from the trace ratio and the direct twisted fit;
    (iii) ``|S_pi(t)| <= (1 + t)^-(c_pi + 1/4) (1 + slack)`` at every sample;
    (iv) ``c_0`` vanishes and ``c_pi`` is positive.

    ``c0`` / ``cpi`` override the values read off the curves.
    """
    inputs = dict(norms_0=norms_0, norms_pi=norms_pi, trace_0=trace_0, trace_pi=trace_pi)
    if c0 is None:
        inputs["curve_0"] = curve_0
    if cpi is None:
        inputs["curve_pi"] = curve_pi
    missing = [k for k, v in inputs.items() if v is None or (isinstance(v, list) and not v)]
    if missing:
        raise ValueError(f"theorem_report is missing inputs: {', '.join(missing)}")
    th = thresholds
    c0 = float(np.min(curve_0.mu) - 0.25) if c0 is None else c0
    cpi = float(np.min(curve_pi.mu) - 0.25) if cpi is None else cpi
    mu_inf = {
        "0": float(curve_0.mu[-1]) if curve_0 is not None else math.nan,
        "pi": float(curve_pi.mu[-1]) if curve_pi is not None else math.nan,
    }

    g0 = fit_rate(norms_0, th.fit_window)
    gpi = fit_rate(trace_pi, th.twisted_window)
    ratio = rate_ratio_test(trace_pi, trace_0, th.ratio_window)

    lo, hi = th.scaled_norm_window
    scaled = np.array([e.t**0.25 * e.value for e in norms_0 if lo <= e.t <= hi])
    spread = float(scaled.max() / scaled.min()) if scaled.size else math.inf

    excess = [e.value / (1 + e.t) ** -(cpi + 0.25) for e in norms_pi if lo <= e.t <= hi]
    worst = float(max(excess)) if excess else math.inf

    checks = [
        Check("i.gamma0", "untwisted semigroup-norm exponent near 1/4", _in(th.gamma0_band, g0.gamma), g0.gamma, f"in {list(th.gamma0_band)}"),
        Check("i.scaling", "t^(1/4) |S_0(t)| bounded above and below", spread <= th.scaled_norm_spread, spread, f"max/min <= {th.scaled_norm_spread}"),
        Check("ii.ratio", "twisted/untwisted trace ratio decays like t^(-1/2)", _in(th.ratio_band, ratio.gamma), ratio.gamma, f"in {list(th.ratio_band)}"),
        Check("ii.gamma_pi", "twisted trace exponent at least 3/4 within tolerance", _in(th.gamma_pi_band, gpi.gamma), gpi.gamma, f"in {list(th.gamma_pi_band)}"),
        Check("iii.bound", "|S_pi(t)| (1+t)^(c_pi+1/4) bounded by 1 + slack", worst <= 1 + th.bound_slack, worst, f"<= {1 + th.bound_slack}"),
        Check("iv.c0", "untwisted c vanishes", abs(c0) <= th.c0_max, c0, f"|c0| <= {th.c0_max}"),
        Check("iv.cpi", "twisted c positive", cpi >= th.cpi_min, cpi, f">= {th.cpi_min}"),
    ]
    return TheoremReport(g0, gpi, ratio, c0, cpi, mu_inf, checks)
