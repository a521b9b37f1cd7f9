"""Shifted heat flow on the truncated strip, norm traces and semigroup norms.

Time stepping is Crank-Nicolson on ``M u' = -A u``:
``(M + dt/2 A) u+ = (M - dt/2 A) u``.  The step is M-contractive whenever
``A`` is positive semidefinite, and it satisfies the discrete energy identity
``|u+|^2 - |u|^2 = -2 dt ubar^T A ubar`` with ``ubar = (u+ + u) / 2``.

Step sizes follow ``dt = clamp(t / 64, dt_min, dt_max)``, frozen on sub-spans
between consecutive checkpoints and the doubling ladder ``64 dt_min * 2^k``.
That gives a handful of distinct step sizes per run, so each banded factor
is computed once and reused.
"""
from __future__ import annotations

import csv
import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import SolverError
from .geometry import Field, Grid2D, StripConfig, Theta, build_dof_map, weighted_l2
from .linalg import BandedCholesky
from .operators import SymmetricForm, assemble_physical
from .transverse import eigenfunction_dn

DT_MIN = 1e-3
DT_MAX = 1.0
DT_RATIO = 1.0 / 64.0


def weighted_norm(u: Field) -> float:
    """``sqrt(sum M K u^2)`` with ``K = exp(x1^2 / 4)``."""
    return weighted_l2(u.values, u.dofmap)


def default_extent(t_max: float) -> float:
    """Truncation half-length ``max(30, 6 sqrt(t_max))``.

    At ``6 sqrt(t)`` the Gaussian tail beyond the ends carries a relative
    L2 mass below ``erfc(4.2) ~ 2e-9``.
    """
    return max(30.0, 6.0 * math.sqrt(max(t_max, 0.0)))


def physical_grid(t_max: float, a: float = 1.0, h1: float = 0.1, n2: int = 16, extent: float | None = None) -> Grid2D:
    """Grid on ``[-X, X] x [-a, a]`` with ``X = default_extent(t_max)`` and spacing about ``h1``."""
    X = default_extent(t_max) if extent is None else extent
    n1 = 2 * math.ceil(X / h1)
    return Grid2D(extent=X, n1=n1, n2=n2, a=a)


class CrankNicolson:
    """Crank-Nicolson propagator for one form with an LRU cache of banded factors."""

    def __init__(self, form: SymmetricForm, cache_size: int = 24):
        self.form = form
        self.cache_size = cache_size
        self._factors: OrderedDict[float, BandedCholesky] = OrderedDict()
        self.factorizations = 0

    def factor(self, dt: float) -> BandedCholesky:
        f = self._factors.get(dt)
        if f is not None:
            self._factors.move_to_end(dt)
            return f
        lhs = (sp.diags(self.form.mass) + (0.5 * dt) * self.form.A).tocsr()
        try:
            f = BandedCholesky(lhs)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"Crank-Nicolson matrix not positive definite at dt = {dt:g}") from exc
        self.factorizations += 1
        self._factors[dt] = f
        if len(self._factors) > self.cache_size:
            self._factors.popitem(last=False)
        return f

    def step(self, values: np.ndarray, dt: float, count: int = 1) -> np.ndarray:
        if not dt > 0:
            raise ValueError(f"time step must be positive, got {dt}")
        f = self.factor(dt)
        A, M = self.form.A, self.form.mass
        u = values
        for _ in range(count):
            u = f.solve(M * u - (0.5 * dt) * (A @ u))
        return u

    def advance(self, values: np.ndarray, t0: float, t1: float, **plan_kw) -> np.ndarray:
        u = values
        for dt, n in step_plan(t0, t1, **plan_kw):
            u = self.step(u, dt, n)
        return u


def step_crank_nicolson(u: Field, dt: float, form: SymmetricForm, stepper: CrankNicolson | None = None) -> Field:
    """One Crank-Nicolson step of length ``dt``."""
    if form.dofmap is not None and form.dofmap is not u.dofmap and form.dimension != u.dofmap.size:
        raise ValueError("field and form live on different DOF maps")
    stepper = stepper if stepper is not None else CrankNicolson(form)
    return u.copy(stepper.step(u.values, dt), t=u.t + dt)


def step_plan(
    t0: float,
    t1: float,
    dt_min: float = DT_MIN,
    dt_max: float = DT_MAX,
    ratio: float = DT_RATIO,
) -> list[tuple[float, int]]:
    """``(dt, count)`` segments that land exactly on ``t1``.

    The span is cut at the ladder points ``dt_min / ratio * 2^k`` below
    ``dt_max / ratio`` and at that cap; on each piece ``[alpha, beta]`` the step is the
    nominal ``clamp(ratio * alpha)`` shrunk so an integer count fits.
    """
    if not t1 > t0:
        raise ValueError(f"need t1 > t0, got [{t0}, {t1}]")
    if not 0 < dt_min <= dt_max:
        raise ValueError("need 0 < dt_min <= dt_max")
    ladder = []
    tau = dt_min / ratio
    while tau < dt_max / ratio:
        ladder.append(tau)
        tau *= 2.0
    ladder.append(dt_max / ratio)
    cuts = [t0] + [c for c in ladder if t0 < c < t1] + [t1]
    plan = []
    for alpha, beta in zip(cuts[:-1], cuts[1:]):
        nominal = min(max(ratio * alpha, dt_min), dt_max)
        n = max(1, math.ceil((beta - alpha) / nominal - 1e-9))
        plan.append(((beta - alpha) / n, n))
    return plan


@dataclass
class NormTrace:
    theta: Theta
    grid_id: str
    t: np.ndarray
    norm: np.ndarray
    weighted_norm: np.ndarray
    energy_defect: float = 0.0  # max relative defect of the discrete energy identity, if tracked
    fields: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.norm = np.asarray(self.norm, dtype=float)
        self.weighted_norm = np.asarray(self.weighted_norm, dtype=float)
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("trace times must be strictly increasing")
        if np.any(self.norm < 0):
            raise ValueError("norms must be nonnegative")

    def is_nonincreasing(self, rtol: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.norm) <= rtol * self.norm[:-1]))

    def rows(self):
        for t, n, w in zip(self.t, self.norm, self.weighted_norm):
            yield {"t": float(t), "norm": float(n), "weighted_norm": float(w), "theta": self.theta.value, "grid_id": self.grid_id}

    @classmethod
    def read_csv(cls, path) -> "NormTrace":
        with open(path) as fh:
            rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
        if not rows:
            raise ValueError(f"{path}: empty trace")
        return cls(
            theta=Theta.parse(rows[0]["theta"]),
            grid_id=rows[0]["grid_id"],
            t=[float(r["t"]) for r in rows],
            norm=[float(r["norm"]) for r in rows],
            weighted_norm=[float(r["weighted_norm"]) for r in rows],
        )


def log_checkpoints(t_max: float, count: int = 48, t_min: float = 0.1) -> np.ndarray:
    return np.geomspace(t_min, t_max, count)


def evolve(
    u0: Field,
    checkpoints,
    form: SymmetricForm | None = None,
    config: StripConfig | None = None,
    dt_min: float = DT_MIN,
    dt_max: float = DT_MAX,
    ratio: float = DT_RATIO,
    keep_fields: bool = False,
    track_energy: bool = False,
    stepper: CrankNicolson | None = None,
) -> NormTrace:
    """Evolve ``u0`` and record plain and K-weighted norms at ``checkpoints``.

    ``u0.t`` is the start time.  With ``keep_fields`` the solution at every
    checkpoint is stored in ``trace.fields`` keyed by time.  With
    ``track_energy`` every step is checked against the discrete energy
    identity and the largest relative defect is reported.
    """
    dm = u0.dofmap
    if form is None:
        config = config or StripConfig(a=dm.grid.a, theta=dm.theta)
        form = assemble_physical(config, dm.grid, dm)
    if not math.isfinite(weighted_norm(u0)):
        raise ValueError("initial datum has infinite weighted norm on this grid")
    checkpoints = np.asarray(checkpoints, dtype=float)
    if checkpoints.size == 0 or checkpoints[0] <= u0.t or np.any(np.diff(checkpoints) <= 0):
        raise ValueError("checkpoints must be strictly increasing and after the start time")
    cn = stepper or CrankNicolson(form)
    plan_kw = dict(dt_min=dt_min, dt_max=dt_max, ratio=ratio)
    u, t = u0.values, u0.t
    norms, wnorms, fields = [], [], {}
    defect = 0.0
    for tk in checkpoints:
        if track_energy:
            for dt, n in step_plan(t, tk, **plan_kw):
                for _ in range(n):
                    new = cn.step(u, dt)
                    mid = 0.5 * (new + u)
                    lhs = float(np.dot(form.mass, new * new) - np.dot(form.mass, u * u))
                    rhs = -2.0 * dt * form.energy(mid)
                    defect = max(defect, abs(lhs - rhs) / max(np.dot(form.mass, u * u), 1e-300))
                    u = new
        else:
            u = cn.advance(u, t, tk, **plan_kw)
        t = float(tk)
        f = Field(u, dm, t)
        norms.append(f.norm())
        wnorms.append(weighted_norm(f))
        if keep_fields:
            fields[t] = f
    return NormTrace(dm.theta, dm.grid.grid_id, checkpoints, norms, wnorms, defect, fields)


def gaussian_datum(dofmap, width: float = 1.0) -> Field:
    """``exp(-x1^2 / (2 width^2)) sin(pi (x2 + a) / (2a))``: vanishes on both walls, so admissible for every layout."""
    a = dofmap.grid.a
    vals = dofmap.sample(lambda x1, x2: np.exp(-x1**2 / (2 * width**2)) * np.sin(np.pi * (x2 + a) / (2 * a)))
    return Field(vals, dofmap)


def ground_profile(dofmap) -> np.ndarray:
    """Lattice array of the transverse ground profile matching each column's layout.

    ``J_1(x2)`` on DN columns, its mirror on ND columns, zero on the twisted
    switching column.
    """
    grid = dofmap.grid
    dn = eigenfunction_dn(1, grid.a, grid.x2)
    if dofmap.theta is Theta.UNTWISTED:
        return np.broadcast_to(dn, grid.shape).copy()
    prof = np.where(grid.x1[:, None] < 0, dn[None, :], dn[None, ::-1])
    prof[grid.x1 == 0.0, :] = 0.0
    return prof


# --- self-similar change of variables --------------------------------------


def _interp_columns(lat: np.ndarray, x: np.ndarray, xq: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation of lattice rows (along axis 0) at ``xq``."""
    h = x[1] - x[0]
    pos = np.clip((xq - x[0]) / h, 0.0, len(x) - 1.0)
    i = np.minimum(np.floor(pos).astype(int), len(x) - 2)
    w = (pos - i)[:, None]
    return (1.0 - w) * lat[i] + w * lat[i + 1]


def _matched(src: Grid2D, dst: Grid2D, scale: float) -> bool:
    return src.n1 == dst.n1 and src.n2 == dst.n2 and math.isclose(dst.extent * scale, src.extent, rel_tol=1e-12)


def to_selfsimilar(u: Field, target: Grid2D | None = None) -> Field:
    """``u~(y1, y2) = e^{s/4} u(e^{s/2} y1, y2)`` at ``s = log(1 + u.t)``.

    Without ``target`` the y-grid is the image of the x-grid (``L = e^{-s/2} X``,
    same ``n1``) and the map is exact node by node.  Any other target is filled by
    linear interpolation in ``x1`` and must fit inside the mapped window.
    The returned field carries ``t = s``.
    """
    if u.t < 0:
        raise ValueError(f"time must be nonnegative, got {u.t}")
    dm = u.dofmap
    src = dm.grid
    s = math.log1p(u.t)
    scale = math.exp(s / 2)
    if target is None:
        target = Grid2D(extent=src.extent / scale, n1=src.n1, n2=src.n2, a=src.a)
    if target.n2 != src.n2 or target.a != src.a:
        raise ValueError("transverse lattices differ")
    if target.extent * scale > src.extent * (1 + 1e-12):
        raise ValueError(
            f"target window [-{target.extent:g}, {target.extent:g}] maps beyond the physical window at s = {s:.4g}"
        )
    dst_map = build_dof_map(StripConfig(a=src.a, theta=dm.theta), target)
    lat = u.lattice()
    if not _matched(src, target, scale):
        lat = _interp_columns(lat, src.x1, scale * target.x1)
    return Field(math.exp(s / 4) * dst_map.from_lattice(lat, strict=False), dst_map, s)


def from_selfsimilar(v: Field, target: Grid2D | None = None) -> Field:
    """Inverse map ``u(x1, x2) = e^{-s/4} v(e^{-s/2} x1, x2)`` at ``t = e^s - 1``, with ``s = v.t``."""
    dm = v.dofmap
    src = dm.grid
    s = v.t
    scale = math.exp(-s / 2)
    if target is None:
        target = Grid2D(extent=src.extent / scale, n1=src.n1, n2=src.n2, a=src.a)
    if target.n2 != src.n2 or target.a != src.a:
        raise ValueError("transverse lattices differ")
    if target.extent * scale > src.extent * (1 + 1e-12):
        raise ValueError("physical window maps beyond the self-similar window")
    dst_map = build_dof_map(StripConfig(a=src.a, theta=dm.theta), target)
    lat = v.lattice()
    if not _matched(src, target, scale):
        lat = _interp_columns(lat, src.x1, scale * target.x1)
    return Field(math.exp(-s / 4) * dst_map.from_lattice(lat, strict=False), dst_map, math.expm1(s))


# --- weighted-to-plain semigroup norm ---------------------------------------


@dataclass(frozen=True)
class SemigroupNormEstimate:
    t: float
    value: float
    residual: float
    iterations: int
    converged: bool
    theta: Theta
    grid_id: str

    def row(self) -> dict:
        return {
            "t": self.t,
            "norm": self.value,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": int(self.converged),
            "theta": self.theta.value,
            "grid_id": self.grid_id,
        }


def semigroup_norm(
    config: StripConfig,
    t: float,
    tol: float = 1e-6,
    grid: Grid2D | None = None,
    max_iter: int = 200,
    h1: float = 0.1,
    n2: int = 16,
    **plan_kw,
) -> SemigroupNormEstimate:
    """Power-iteration estimate of ``||S(t)||`` from ``L2(K)`` to ``L2``.

    With ``u = K^{-1/2} w`` the norm is ``sup |S(t) K^{-1/2} w| / |w|``; its
    square is the top eigenvalue of ``B = K^{-1/2} S(t) S(t) K^{-1/2}``.  The
    discrete propagator is a function of ``M^{-1/2} A M^{-1/2}``, hence
    M-self-adjoint, so applying the same schedule twice realises ``S(t)^* S(t)``
    exactly.  Non-convergence returns the last estimate flagged.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if grid is None:
        grid = physical_grid(t, a=config.a, h1=h1, n2=n2)
    dm = build_dof_map(config, grid)
    form = assemble_physical(config, grid, dm)
    cn = CrankNicolson(form)
    mass = dm.mass
    khalf = np.exp(-dm.x1**2 / 8.0)

    def mnorm(v):
        return math.sqrt(float(np.dot(mass, v * v)))

    w = dm.from_lattice(ground_profile(dm), strict=False) * khalf
    w /= mnorm(w)
    lam, res, it = 0.0, math.inf, 0
    for it in range(1, max_iter + 1):
        z = cn.advance(khalf * w, 0.0, t, **plan_kw)
        lam = float(np.dot(mass, z * z))
        Bw = khalf * cn.advance(z, 0.0, t, **plan_kw)
        res = mnorm(Bw - lam * w) / lam
        w = Bw / mnorm(Bw)
        if res < tol:
            break
    return SemigroupNormEstimate(t, math.sqrt(lam), res, it, res < tol, config.theta, grid.grid_id)
