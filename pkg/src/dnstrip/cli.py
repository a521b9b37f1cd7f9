"""Command-line experiment runner.

Every subcommand resolves a :class:`RunConfig` (defaults, then an optional
``key = value`` file, then flags), writes ``config.txt`` and its CSV outputs to
the output directory, and returns an exit status:

0 success, 2 configuration error, 3 solver failure, 4 failed check.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .decay import Thresholds, fit_rate, rate_ratio_test, theorem_report
from .errors import ConfigError, SolverError
from .evolution import (
    evolve,
    gaussian_datum,
    log_checkpoints,
    physical_grid,
    semigroup_norm,
)
from .geometry import Grid2D, StripConfig, Theta, build_dof_map
from .eigen import lowest_eigenpairs
from .operators import HarmonicOscillator1D, assemble_harmonic, selfsimilar_grid
from .spectral import mu_curve, positivity_check
from .transverse import discrete_transverse

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4

COMMANDS = (
    "transverse-check",
    "ho-check",
    "mu-curve",
    "evolve",
    "semigroup-norm",
    "rate-fit",
    "report",
    "convergence-study",
)

DEFAULT_NORM_TIMES = "1,2,4,8,16,32,64,128,log:10:128:8"


@dataclass(frozen=True)
class RunConfig:
    """Resolved run parameters.  ``None`` means the per-command default."""

    theta: str = "pi"
    a: float = 1.0
    X: float | None = None  # physical half-length; default max(30, 6 sqrt(t_max))
    n1: int | None = None  # physical: from h1; self-similar: 9600
    n2: int | None = None  # 16; transverse-check: 200
    h1: float = 0.1
    L: float = 12.0
    n_ho: int = 1200
    s: str = "0:0.5:12"
    t: str | None = None
    tol_eig: float = 1e-9
    tol_power: float = 1e-6
    fit_lo: float = 10.0
    fit_hi: float = 128.0
    out: str = "out"
    label: str = "run"
    workers: int = 1

    def validate(self) -> "RunConfig":
        try:
            Theta.parse(self.theta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        checks = [
            (self.a > 0, "a must be positive"),
            (self.X is None or self.X > 0, "X must be positive"),
            (self.n1 is None or (self.n1 >= 2 and self.n1 % 2 == 0), "n1 must be an even integer >= 2"),
            (self.n2 is None or self.n2 >= 4, "n2 must be at least 4"),
            (self.h1 > 0, "h1 must be positive"),
            (self.L > 0, "L must be positive"),
            (self.n_ho >= 4 and self.n_ho % 2 == 0, "n_ho must be an even integer >= 4"),
            (0 < self.tol_eig < 1, "tol_eig must lie in (0, 1)"),
            (0 < self.tol_power < 1, "tol_power must lie in (0, 1)"),
            (0 <= self.fit_lo < self.fit_hi, "need 0 <= fit_lo < fit_hi"),
            (self.workers >= 1, "workers must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        s_samples(self)
        if self.t is not None:
            parse_samples(self.t, "t")
        return self

    def lines(self) -> list[str]:
        return [f"{f.name} = {getattr(self, f.name)}" for f in dataclasses.fields(self)]

    def digest(self) -> str:
        """Hash of everything that can change results (not ``out`` or ``workers``)."""
        keep = [ln for ln in self.lines() if not ln.startswith(("out ", "workers "))]
        return hashlib.sha256("\n".join(keep).encode()).hexdigest()[:16]

    @property
    def strip(self) -> StripConfig:
        return StripConfig(a=self.a, theta=Theta.parse(self.theta))


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    if raw.strip().lower() in ("", "none", "auto") and "None" in kind:
        return None
    try:
        if kind.startswith("float"):
            return float(raw)
        if kind.startswith("int"):
            return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return raw.strip()


def parse_samples(spec: str, name: str = "samples") -> np.ndarray:
    """Sample lists: ``a:step:b`` (inclusive range), ``log:a:b:n`` and commas to combine."""
    out = []
    try:
        for part in str(spec).split(","):
            part = part.strip()
            if part.startswith("log:"):
                lo, hi, n = part[4:].split(":")
                out.extend(np.geomspace(float(lo), float(hi), int(n)))
            elif part.count(":") == 2:
                lo, step, hi = map(float, part.split(":"))
                if step <= 0:
                    raise ValueError
                k = int(math.floor((hi - lo) / step + 1e-9))
                out.extend(lo + step * np.arange(k + 1))
            elif part:
                out.append(float(part))
    except ValueError:
        raise ConfigError(f"cannot parse {name} samples {spec!r}") from None
    arr = np.unique(np.round(np.array(out, dtype=float), 12))
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} samples {spec!r} is empty or non-finite")
    return arr


def s_samples(cfg: RunConfig) -> np.ndarray:
    s = parse_samples(cfg.s, "s")
    if s[0] < 0 or s[-1] > 40:
        raise ConfigError("s samples must lie in [0, 40]")
    return s


def read_config_file(path) -> dict:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        key, raw = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dnstrip", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"dnstrip {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--theta", choices=["0", "pi"])
        sp.add_argument("--a", type=float)
        sp.add_argument("--X", type=float)
        sp.add_argument("--n1", type=int)
        sp.add_argument("--n2", type=int)
        sp.add_argument("--h1", type=float)
        sp.add_argument("--L", type=float)
        sp.add_argument("--n-ho", dest="n_ho", type=int)
        sp.add_argument("--s", help="s samples, e.g. 0:0.5:12 or 2,4,8")
        sp.add_argument("--t", help="t samples, e.g. 1,4,16 or log:10:128:8")
        sp.add_argument("--tol-eig", dest="tol_eig", type=float)
        sp.add_argument("--tol-power", dest="tol_power", type=float)
        sp.add_argument("--out")
        sp.add_argument("--label")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--config", help="key = value file; flags override it")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for key in _FIELD_TYPES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return RunConfig(**values).validate()


# --- output ---------------------------------------------------------------


class Output:
    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.dir = Path(cfg.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / "config.txt").write_text("\n".join(cfg.lines()) + "\n")
        self.written: list[Path] = []

    @property
    def provenance(self) -> str:
        return f"# dnstrip {__version__} config={self.cfg.digest()} command={self.command} label={self.cfg.label}"

    def csv(self, name: str, rows, columns: list[str] | None = None) -> Path:
        rows = list(rows)
        columns = columns or (list(rows[0]) if rows else [])
        path = self.dir / name
        with open(path, "w") as fh:
            fh.write(self.provenance + "\n")
            fh.write(",".join(columns) + "\n")
            for r in rows:
                fh.write(",".join(_fmt(r[c]) for c in columns) + "\n")
        self.written.append(path)
        return path

    def text(self, name: str, body: str) -> Path:
        path = self.dir / name
        path.write_text(self.provenance + "\n" + body)
        self.written.append(path)
        return path


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    return str(v)


# --- subcommands ----------------------------------------------------------


def cmd_transverse_check(cfg: RunConfig, out: Output) -> int:
    n2 = cfg.n2 or 200
    disc = discrete_transverse(cfg.a, n2)
    Eh = disc.eigenvalues(3)
    rows, ok = [], True
    for n, e in enumerate(Eh, 1):
        exact = (2 * n - 1) ** 2 * math.pi**2 / (16 * cfg.a**2)
        rel = abs(e - exact) / exact
        ok &= rel <= 1e-3
        rows.append({"n": n, "E_h": e, "E_exact": exact, "rel_error": rel, "n2": n2})
    out.csv("transverse_check.csv", rows)
    for r in rows:
        print(f"n={r['n']} E_h={r['E_h']:.10f} exact={r['E_exact']:.10f} rel={r['rel_error']:.2e}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_ho_check(cfg: RunConfig, out: Output) -> int:
    H = assemble_harmonic(HarmonicOscillator1D(L=cfg.L, n=cfg.n_ho))
    HD = assemble_harmonic(HarmonicOscillator1D(L=cfg.L, n=cfg.n_ho, dirichlet_at_zero=True))
    pairs = lowest_eigenpairs(H, 3, tol=cfg.tol_eig)
    rows = [
        {"operator": "H", "k": k, "eigenvalue": p.eigenvalue, "reference": 0.5 * (k + 0.5)}
        for k, p in enumerate(pairs)
    ]
    rows.append({"operator": "H_D", "k": 0, "eigenvalue": lowest_eigenpairs(HD, 1, tol=cfg.tol_eig)[0].eigenvalue, "reference": 0.75})
    ok = True
    for r in rows:
        r["abs_error"] = abs(r["eigenvalue"] - r["reference"])
        ok &= r["abs_error"] <= 1e-4
        print(f"{r['operator']:>3} k={r['k']} {r['eigenvalue']:.10f} (ref {r['reference']}, err {r['abs_error']:.1e})")
    out.csv("ho_check.csv", rows)
    return EXIT_OK if ok else EXIT_CHECK


def _ss_grid(cfg: RunConfig) -> Grid2D:
    return selfsimilar_grid(L=cfg.L, n1=cfg.n1 or 9600, n2=cfg.n2 or 16, a=cfg.a)


def _run_curve(cfg: RunConfig, theta: str, out: Output):
    strip = StripConfig(a=cfg.a, theta=theta)
    curve = mu_curve(strip, s_samples(cfg), _ss_grid(cfg), tol=cfg.tol_eig, workers=cfg.workers)
    out.csv(f"mu_curve_{Theta.parse(theta).value}.csv", curve.rows())
    return curve


def cmd_mu_curve(cfg: RunConfig, out: Output) -> int:
    curve = _run_curve(cfg, cfg.theta, out)
    for p in curve.samples:
        print(f"s={p.s:6.2f} mu={p.mu:.10f} junction={p.junction_amplitude:.3e} offmode={p.offmode_residual_sq:.3e}")
    if curve.gaps:
        print(f"eigen solver failed at s = {curve.gaps}", file=sys.stderr)
        return EXIT_SOLVER
    rep = positivity_check(curve)
    print(f"c^h = {rep.c_h:.6g}, behaves like theta={rep.theta_like.value}")
    for v in rep.violations:
        print("violation:", v)
    return EXIT_OK


def _trace_times(cfg: RunConfig) -> np.ndarray:
    return parse_samples(cfg.t, "t") if cfg.t else log_checkpoints(200.0, 48)


def _physical(cfg: RunConfig, t_max: float) -> Grid2D:
    g = physical_grid(t_max, a=cfg.a, h1=cfg.h1, n2=cfg.n2 or 16, extent=cfg.X)
    if cfg.n1:
        g = Grid2D(extent=g.extent, n1=cfg.n1, n2=g.n2, a=cfg.a)
    return g


def _run_trace(cfg: RunConfig, theta: str, times: np.ndarray):
    strip = StripConfig(a=cfg.a, theta=theta)
    dm = build_dof_map(strip, _physical(cfg, float(times[-1])))
    return evolve(gaussian_datum(dm), times)


def cmd_evolve(cfg: RunConfig, out: Output) -> int:
    times = _trace_times(cfg)
    trace = _run_trace(cfg, cfg.theta, times)
    out.csv(f"trace_{Theta.parse(cfg.theta).value}.csv", trace.rows())
    print(f"{len(times)} checkpoints on {trace.grid_id}; final norm {trace.norm[-1]:.6e}")
    if not trace.is_nonincreasing():
        print("norm trace increased", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def _run_norms(cfg: RunConfig, theta: str, times: np.ndarray):
    strip = StripConfig(a=cfg.a, theta=theta)

    def one(t):
        grid = _physical(cfg, float(t)) if (cfg.X or cfg.n1) else None
        return semigroup_norm(strip, float(t), tol=cfg.tol_power, grid=grid, h1=cfg.h1, n2=cfg.n2 or 16)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(one, times))
    return [one(t) for t in times]


def _norm_times(cfg: RunConfig) -> np.ndarray:
    return parse_samples(cfg.t or DEFAULT_NORM_TIMES, "t")


def cmd_semigroup_norm(cfg: RunConfig, out: Output) -> int:
    ests = _run_norms(cfg, cfg.theta, _norm_times(cfg))
    out.csv(f"semigroup_norm_{Theta.parse(cfg.theta).value}.csv", (e.row() for e in ests))
    for e in ests:
        print(f"t={e.t:8.3f} norm={e.value:.8f} residual={e.residual:.1e} it={e.iterations}")
    return EXIT_OK if all(e.converged for e in ests) else EXIT_SOLVER


def cmd_rate_fit(cfg: RunConfig, out: Output) -> int:
    times = log_checkpoints(200.0, 48)
    traces = {th: _run_trace(cfg, th, times) for th in ("0", "pi")}
    norms = _run_norms(cfg, "0", _norm_times(cfg))
    th = Thresholds()
    fits = [
        fit_rate(norms, (cfg.fit_lo, cfg.fit_hi)).row("semigroup_norm_0"),
        fit_rate(traces["0"], (cfg.fit_lo, 200.0)).row("trace_0"),
        fit_rate(traces["pi"], th.twisted_window).row("trace_pi"),
        rate_ratio_test(traces["pi"], traces["0"], th.ratio_window).row("ratio_pi_over_0"),
    ]
    for th_, tr in traces.items():
        out.csv(f"trace_{th_}.csv", tr.rows())
    out.csv("semigroup_norm_0.csv", (e.row() for e in norms))
    out.csv("rate_fit.csv", fits)
    for f in fits:
        print(f"{f['quantity']:>18}: gamma={f['gamma']:.6f} C={f['prefactor']:.4f} rms={f['rms']:.1e} on [{f['t_lo']:g}, {f['t_hi']:g}]")
    return EXIT_OK


def cmd_report(cfg: RunConfig, out: Output) -> int:
    curves = {th: _run_curve(cfg, th, out) for th in ("0", "pi")}
    if any(c.gaps for c in curves.values()):
        print("eigen solver failed on a curve sample", file=sys.stderr)
        return EXIT_SOLVER
    norm_times = _norm_times(cfg)
    norms = {th: _run_norms(cfg, th, norm_times) for th in ("0", "pi")}
    for th, ests in norms.items():
        out.csv(f"semigroup_norm_{th}.csv", (e.row() for e in ests))
    if not all(e.converged for ests in norms.values() for e in ests):
        print("semigroup-norm power iteration did not converge", file=sys.stderr)
        return EXIT_SOLVER
    trace_times = log_checkpoints(200.0, 48)
    traces = {th: _run_trace(cfg, th, trace_times) for th in ("0", "pi")}
    for th, tr in traces.items():
        out.csv(f"trace_{th}.csv", tr.rows())
    th = dataclasses.replace(Thresholds(), fit_window=(cfg.fit_lo, cfg.fit_hi))
    report = theorem_report(norms["0"], norms["pi"], traces["0"], traces["pi"], curves["0"], curves["pi"], th)
    contraction = all(tr.is_nonincreasing() for tr in traces.values())
    text = report.to_text() + f"  norm traces non-increasing: {'yes' if contraction else 'NO'}\n"
    out.text("report.txt", text)
    out.text("report.kv", report.to_kv() + f"contraction = {int(contraction)}\n")
    print(text, end="")
    return EXIT_OK if report.passed and contraction else EXIT_CHECK


def cmd_convergence_study(cfg: RunConfig, out: Output) -> int:
    """Twisted ``mu`` at one ``s`` under joint and ``h1``-only refinement."""
    s = float(s_samples(cfg)[0]) if cfg.s != RunConfig.s else 4.0
    strip = cfg.strip
    base_n1, base_n2 = cfg.n1 or 2400, cfg.n2 or 8
    series = [("joint", base_n1 * 2**k, base_n2 * 2**k) for k in range(3)]
    series += [("h1", base_n1 * 2**k, 2 * base_n2) for k in range(3)]
    rows = []
    for kind, n1, n2 in series:
        grid = selfsimilar_grid(L=cfg.L, n1=n1, n2=n2, a=cfg.a)
        curve = mu_curve(strip, [s], grid, tol=cfg.tol_eig)
        mu = curve.samples[0].mu
        rows.append({"series": kind, "s": s, "n1": n1, "n2": n2, "h1": grid.h1, "h2": grid.h2, "mu": mu})
    for kind in ("joint", "h1"):
        sub = [r for r in rows if r["series"] == kind]
        for i, r in enumerate(sub):
            r["delta"] = sub[i]["mu"] - sub[i - 1]["mu"] if i else math.nan
            r["ratio"] = sub[i - 1]["delta"] / r["delta"] if i > 1 and r["delta"] != 0 else math.nan
            r["order"] = math.log2(abs(r["ratio"])) if math.isfinite(r["ratio"]) and r["ratio"] != 0 else math.nan
    out.csv(f"convergence_{strip.theta.value}.csv", rows)
    for r in rows:
        print(f"{r['series']:>5} n1={r['n1']:6d} n2={r['n2']:3d} mu={r['mu']:.8f} delta={r['delta']:.2e} order={r['order']:.2f}")
    return EXIT_OK


HANDLERS = {
    "transverse-check": cmd_transverse_check,
    "ho-check": cmd_ho_check,
    "mu-curve": cmd_mu_curve,
    "evolve": cmd_evolve,
    "semigroup-norm": cmd_semigroup_norm,
    "rate-fit": cmd_rate_fit,
    "report": cmd_report,
    "convergence-study": cmd_convergence_study,
}


def run_subcommand(name: str, cfg: RunConfig) -> int:
    if name not in HANDLERS:
        raise ConfigError(f"unknown subcommand {name!r}")
    return HANDLERS[name](cfg, Output(cfg, name))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = resolve_config(args)
        return run_subcommand(args.command, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
