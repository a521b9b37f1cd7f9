"""Closed-form heat flow on the untwisted strip.

With the bottom wall Dirichlet and the top wall Neumann the shifted heat
semigroup separates: transverse mode ``n`` decays like ``exp(-(E_n - E_1) t)``
and each modal coefficient is convolved with the 1D Gaussian heat kernel.
These routines are the reference the numerical solvers are checked against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate

from .errors import ResolutionError, SolverError
from .geometry import Field, Theta
from .transverse import eigenfunction_dn, eigenvalue_dn

N_MAX_DEFAULT = 8


def gauss_kernel(x1, x1p, t):
    """1D heat kernel ``exp(-(x1 - x1p)**2 / (4t)) / sqrt(4 pi t)``."""
    if not t > 0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")
    d = np.asarray(x1, dtype=float) - np.asarray(x1p, dtype=float)
    out = np.exp(-d * d / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class KernelSpec:
    a: float = 1.0
    t: float = 1.0
    n_max: int = N_MAX_DEFAULT
    quad_nodes: int = 2001  # Simpson nodes for pointwise integrals (odd)

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"t must be positive, got {self.t}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")

    @property
    def truncation_bound(self) -> float:
        """Weight ``exp(-(E_{n_max+1} - E_1) t)`` of the first omitted mode."""
        return truncation_bound(self.a, self.t, self.n_max)


def truncation_bound(a: float, t: float, n_max: int) -> float:
    return math.exp(-(eigenvalue_dn(n_max + 1, a) - eigenvalue_dn(1, a)) * t)


def strip_kernel(x, xp, spec: KernelSpec) -> tuple[float, float]:
    """Truncated mode sum of the shifted untwisted strip kernel.

    Returns ``(value, truncation_bound)``; points are ``(x1, x2)`` pairs in
    the closed strip.
    """
    (x1, x2), (y1, y2) = x, xp
    p = gauss_kernel(x1, y1, spec.t)
    E1 = eigenvalue_dn(1, spec.a)
    total = 0.0
    for n in range(1, spec.n_max + 1):
        decay = math.exp(-(eigenvalue_dn(n, spec.a) - E1) * spec.t)
        total += decay * eigenfunction_dn(n, spec.a, x2) * eigenfunction_dn(n, spec.a, y2)
    return total * p, spec.truncation_bound


def _simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights on ``n + 1`` nodes (``n`` even)."""
    w = np.full(n + 1, 2.0)
    w[1::2] = 4.0
    w[[0, -1]] = 1.0
    return w * h / 3.0


def modal_coefficients(u: Field, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients ``c[n-1, i]`` of ``J_n`` in lattice column ``i``, and the sampled modes.

    The inner product uses the lumped transverse weights, under which the
    sampled modes are exactly orthogonal.
    """
    grid = u.dofmap.grid
    lat = u.lattice()
    w2 = np.full(grid.n2 + 1, grid.h2)
    w2[[0, -1]] *= 0.5
    modes = np.array([eigenfunction_dn(n, grid.a, grid.x2) for n in range(1, n_max + 1)])
    gram = (modes * w2) @ modes.T
    return np.linalg.solve(gram, (modes * w2) @ lat.T), modes


def apply_semigroup_untwisted(u0: Field, t: float, n_max: int = N_MAX_DEFAULT) -> Field:
    """Exact shifted heat flow of ``u0`` on the untwisted strip, by quadrature.

    Mode coefficients are convolved with the Gaussian kernel using composite
    Simpson in ``x1`` over the grid window.  The kernel must be resolved:
    ``sqrt(2t) >= 2 h1``, else :class:`ResolutionError`.
    """
    dm = u0.dofmap
    grid = dm.grid
    if dm.theta is not Theta.UNTWISTED:
        raise ValueError("the closed-form semigroup exists only for the untwisted layout")
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if math.sqrt(2.0 * t) < 2.0 * grid.h1:
        raise ResolutionError(
            f"kernel width sqrt(2t) = {math.sqrt(2 * t):.3g} under-resolved by h1 = {grid.h1:.3g}"
        )
    coef, modes = modal_coefficients(u0, n_max)
    x = grid.x1
    P = gauss_kernel(x[:, None], x[None, :], t) * _simpson_weights(grid.n1, grid.h1)[None, :]
    E1 = eigenvalue_dn(1, grid.a)
    decay = np.exp(-(np.array([eigenvalue_dn(n, grid.a) for n in range(1, n_max + 1)]) - E1) * t)
    lat = ((decay[:, None] * coef) @ P.T).T @ modes
    return Field(dm.from_lattice(lat, strict=False), dm, u0.t + t)


@dataclass(frozen=True)
class OracleNorm:
    value: float
    residual: float
    iterations: int
    mode_factor: float = 1.0


def weighted_norm_closed_form(t: float) -> float:
    """``||P(t)||`` from ``L2(R, e^{x^2/4})`` to ``L2(R)`` in closed form.

    Gaussian trial functions are extremal; maximising over their width gives
    ``(1 + t + sqrt(t**2 + 2t))**(-1/4)``.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    return (1.0 + t + math.sqrt(t * t + 2.0 * t)) ** -0.25


def norm_S0_oracle(
    t: float,
    a: float = 1.0,
    extent: float = 24.0,
    n: int = 960,
    tol: float = 1e-12,
    max_iter: int = 2000,
) -> OracleNorm:
    """``||S_0(t)||`` from ``L2(K)`` to ``L2`` via the 1D weighted problem.

    The square of the norm is the top eigenvalue of the symmetric integral
    operator with kernel ``K^{-1/2}(x) p(x, y, 2t) K^{-1/2}(y)``, discretised
    by the trapezoid rule and found by power iteration.  Higher transverse
    modes carry the extra factor ``exp(-(E_n - E_1) t) < 1``, so mode 1
    attains the supremum and the mode factor is 1.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    x = np.linspace(-extent, extent, n + 1)
    h = x[1] - x[0]
    w = np.full(n + 1, h)
    w[[0, -1]] *= 0.5
    g = np.exp(-x * x / 8.0) * np.sqrt(w)
    B = g[:, None] * gauss_kernel(x[:, None], x[None, :], 2.0 * t) * g[None, :]
    v = g / np.linalg.norm(g)
    lam, res = 0.0, np.inf
    for it in range(1, max_iter + 1):
        Bv = B @ v
        lam = float(v @ Bv)
        res = float(np.linalg.norm(Bv - lam * v) / lam)
        v = Bv / np.linalg.norm(Bv)
        if res < tol:
            return OracleNorm(math.sqrt(lam), res, it)
    raise SolverError(f"weighted power iteration stalled at residual {res:.3g}", iterations=max_iter, residual=res)


def gaussian_mass(x1: float, t: float, extent: float = 40.0, n: int = 8000) -> float:
    """Simpson integral of ``gauss_kernel(x1, ., t)`` over ``[-extent, extent]``."""
    y = np.linspace(-extent, extent, n + 1)
    return float(scipy.integrate.simpson(gauss_kernel(x1, y, t), x=y))
