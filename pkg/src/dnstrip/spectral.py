"""Ground energy ``mu(s)`` of the self-similar operator and eigenvector diagnostics.

For the untwisted layout the operator separates and ``mu`` is the oscillator
ground energy for every ``s``.  For the twisted layout ``mu`` rises from its
``s = 0`` value towards the ground energy of the oscillator with an extra
Dirichlet point at ``y1 = 0``.  Two eigenvector diagnostics track how that
Dirichlet point appears:

* junction amplitude: M-norm of the eigenvector on the column ``y1 = 0``;
* off-mode residual: squared M-norm of the part of the eigenvector that is
  not of the form ``phi(y1) J_1(sgn(-y1) y2)``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .eigen import EigenResult, lowest_eigenpairs, smallest_eigenpair
from .errors import SolverError
from .geometry import Field, Grid2D, StripConfig, Theta
from .operators import (
    S_MAX,
    HarmonicOscillator1D,
    assemble_harmonic,
    selfsimilar_family,
    selfsimilar_grid,
)
from .transverse import eigenfunction_dn

__all__ = [
    "CurveSample",
    "EigenResult",
    "PositivityReport",
    "SpectralCurve",
    "default_s_samples",
    "harmonic_floor",
    "junction_amplitude",
    "lowest_eigenpairs",
    "mu_curve",
    "positivity_check",
    "project_h1",
    "smallest_eigenpair",
]

DEFAULT_SS_GRID = dict(L=12.0, n1=9600, n2=16)


def default_s_samples() -> np.ndarray:
    return np.arange(0.0, 12.0 + 1e-12, 0.5)


def h1_profile(grid: Grid2D, theta: Theta) -> np.ndarray:
    """Lattice array ``J_1(sgn(-y1) y2)`` (twisted) or ``J_1(y2)`` (untwisted).

    The twisted switching column ``y1 = 0`` is Dirichlet on both walls, so no
    member of the subspace can be nonzero there; its profile is zero.
    """
    y1, y2 = grid.x1, grid.x2
    dn = eigenfunction_dn(1, grid.a, y2)
    if theta is Theta.UNTWISTED:
        return np.broadcast_to(dn, grid.shape).copy()
    nd = eigenfunction_dn(1, grid.a, -y2)
    prof = np.where(y1[:, None] < 0, dn[None, :], nd[None, :])
    prof[y1 == 0.0, :] = 0.0
    return prof


def project_h1(v: Field) -> tuple[Field, float]:
    """Column-wise M-orthogonal projection onto the ``J_1``-profile subspace.

    Returns the projected field and ``||v - projection||_M**2``.
    """
    dm = v.dofmap
    grid = dm.grid
    prof = h1_profile(grid, dm.theta) * dm.active
    w2 = np.full(grid.n2 + 1, grid.h2)
    w2[[0, -1]] *= 0.5
    lat = v.lattice()
    norms = (prof * prof * w2).sum(axis=1)
    coef = np.divide((lat * prof * w2).sum(axis=1), norms, out=np.zeros_like(norms), where=norms > 0)
    part = dm.from_lattice(coef[:, None] * prof, strict=False)
    diff = v.values - part
    return Field(part, dm, v.t), float(np.dot(dm.mass, diff * diff))


def junction_amplitude(v: Field) -> float:
    """M-norm of ``v`` restricted to the lattice column ``y1 = 0``."""
    dm = v.dofmap
    idx = dm.column(dm.grid.n1 // 2)
    return float(np.sqrt(np.dot(dm.mass[idx], v.values[idx] ** 2)))


@dataclass(frozen=True)
class CurveSample:
    s: float
    mu: float
    junction_amplitude: float
    offmode_residual_sq: float
    solver_residual: float
    iterations: int
    ok: bool = True


@dataclass
class SpectralCurve:
    theta: Theta
    grid: Grid2D
    samples: list[CurveSample] = field(default_factory=list)

    @property
    def s(self) -> np.ndarray:
        return np.array([p.s for p in self.samples])

    @property
    def mu(self) -> np.ndarray:
        return np.array([p.mu for p in self.samples])

    @property
    def gaps(self) -> list[float]:
        return [p.s for p in self.samples if not p.ok]

    def sample_at(self, s: float) -> CurveSample:
        for p in self.samples:
            if abs(p.s - s) < 1e-12:
                return p
        raise KeyError(f"no sample at s = {s}")

    def rows(self):
        for p in self.samples:
            yield {
                "s": p.s,
                "mu": p.mu,
                "junction_amplitude": p.junction_amplitude,
                "offmode_residual_sq": p.offmode_residual_sq,
                "solver_residual": p.solver_residual,
                "n1": self.grid.n1,
                "n2": self.grid.n2,
                "L": self.grid.extent,
            }


def _sample(family, s: float, tol: float) -> CurveSample:
    try:
        res = smallest_eigenpair(family.at(s), tol=tol)
    except SolverError as exc:
        return CurveSample(s, math.nan, math.nan, math.nan, exc.residual or math.nan, exc.iterations or 0, ok=False)
    v = Field(res.eigenvector, family.dofmap)
    _, offmode = project_h1(v)
    return CurveSample(
        s=float(s),
        mu=res.eigenvalue,
        junction_amplitude=junction_amplitude(v),
        offmode_residual_sq=offmode,
        solver_residual=res.residual,
        iterations=res.iterations,
    )


def mu_curve(
    config: StripConfig,
    s_samples=None,
    grid: Grid2D | None = None,
    tol: float = 1e-9,
    workers: int = 1,
) -> SpectralCurve:
    """Sample ``s -> mu_theta(s)`` with eigenvector diagnostics.

    Samples are independent; with ``workers > 1`` they run on a thread pool
    (the heavy lifting is in LAPACK, which releases the GIL).  A sample whose
    eigen iteration fails is kept with ``ok=False`` and NaN values.
    """
    if s_samples is None:
        s_samples = default_s_samples()
    s_samples = np.unique(np.asarray(s_samples, dtype=float))
    if s_samples.size == 0:
        raise ValueError("no s samples given")
    if s_samples[0] < 0 or s_samples[-1] > S_MAX:
        raise ValueError(f"s samples must lie in [0, {S_MAX}]")
    if grid is None:
        grid = selfsimilar_grid(a=config.a, **DEFAULT_SS_GRID)
    family = selfsimilar_family(config, grid)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(lambda s: _sample(family, s, tol), s_samples))
    else:
        samples = [_sample(family, s, tol) for s in s_samples]
    samples.sort(key=lambda p: p.s)
    return SpectralCurve(theta=config.theta, grid=grid, samples=samples)


def harmonic_floor(grid: Grid2D) -> float:
    """Lowest eigenvalue of the discrete oscillator on the y1-lattice of ``grid``."""
    ho = HarmonicOscillator1D(L=grid.extent, n=grid.n1)
    return smallest_eigenpair(assemble_harmonic(ho), tol=1e-12).eigenvalue


@dataclass
class PositivityReport:
    theta_like: Theta
    c_h: float  # min_k mu_k - 1/4
    floor: float  # discrete oscillator ground energy on the curve's y1-lattice
    flatness: float  # max_k |mu_k - mu_0|
    min_margin: float  # min_k mu_k - floor
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def positivity_check(
    curve: SpectralCurve,
    floor: float | None = None,
    margin: float = 1e-6,
    flat_tol: float = 1e-10,
) -> PositivityReport:
    """Check ``mu_0(s) = 1/4`` flatness or ``mu_pi(s) > 1/4`` along a curve.

    The layout is *inferred* from the numbers: a curve that is flat within
    ``flat_tol`` and sits on the oscillator floor reads as untwisted.
    Violations are reported against the layout the curve claims to have.
    """
    mu = curve.mu
    if np.any(~np.isfinite(mu)):
        bad = [p.s for p in curve.samples if not np.isfinite(p.mu)]
        return PositivityReport(curve.theta, math.nan, math.nan, math.nan, math.nan, [f"missing samples at s={bad}"])
    if floor is None:
        floor = harmonic_floor(curve.grid)
    flatness = float(np.max(np.abs(mu - mu[0])))
    min_margin = float(np.min(mu - floor))
    looks_flat = flatness <= flat_tol and abs(mu[0] - floor) <= max(margin, 1e-9)
    theta_like = Theta.UNTWISTED if looks_flat else Theta.TWISTED
    violations = []
    if curve.theta is Theta.UNTWISTED:
        if flatness > flat_tol:
            violations.append(f"untwisted curve not flat: max deviation {flatness:.3e} > {flat_tol:g}")
    else:
        for p in curve.samples:
            if not p.mu > floor + margin:
                violations.append(f"mu({p.s:g}) = {p.mu:.12g} not above floor {floor:.12g} + {margin:g}")
    if theta_like is not curve.theta:
        violations.append(f"curve labelled theta={curve.theta.value} behaves like theta={theta_like.value}")
    return PositivityReport(theta_like, float(mu.min() - 0.25), floor, flatness, min_margin, violations)
