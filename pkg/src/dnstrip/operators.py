"""Sparse symmetric forms on the strip and on the self-similar axis.

Every 2D operator is assembled as a sum of Kronecker products of the 1D P1
stiffness ``K`` and lumped mass ``W`` on the full lattice, then restricted to
the active DOFs.  Neumann walls need nothing (natural condition), Dirichlet
nodes are simply dropped, so symmetry is exact by construction.

Forms are returned as ``(A, M)`` pairs: the generalized problem is
``A v = lambda M v`` with ``M`` diagonal.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fem1d import lumped_mass_1d, stiffness_1d
from .geometry import DofMap, Grid2D, StripConfig, build_dof_map
from .transverse import Orientation, discrete_transverse

S_MAX = 40.0
CONDITION_GUARD = 1e15


@dataclass(eq=False)
class SymmetricForm:
    """Stiffness-plus-potential matrix ``A`` with diagonal mass ``mass``.

    ``parts`` keeps the s-independent and s-scaled blocks of self-similar
    forms so that ``A(s)`` can be rebuilt or its Rayleigh quotient split.
    ``lower_bound`` is a proven floor for the generalized spectrum, used to
    place the eigensolver shift.
    """

    A: sp.csr_matrix = field(repr=False)
    mass: np.ndarray = field(repr=False)
    kind: str
    descriptor: dict = field(default_factory=dict)
    dofmap: DofMap | None = field(default=None, repr=False)
    parts: dict = field(default_factory=dict, repr=False)
    lower_bound: float | None = None
    energy_fn: object = field(default=None, repr=False)

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A)
        self.mass = np.asarray(self.mass, dtype=float)
        n = self.mass.size
        if self.A.shape != (n, n):
            raise ValueError(f"matrix shape {self.A.shape} does not match mass vector of length {n}")
        if np.any(self.mass <= 0):
            raise ValueError("mass weights must be strictly positive")

    @property
    def dimension(self) -> int:
        return self.mass.size

    def energy(self, v: np.ndarray) -> float:
        """Quadratic form ``v^T A v``; uses the structured evaluation when attached."""
        if self.energy_fn is not None:
            return float(self.energy_fn(v))
        return float(v @ (self.A @ v))

    def rayleigh(self, v: np.ndarray) -> float:
        return self.energy(v) / float(np.dot(self.mass, v * v))

    def dump(self, path) -> None:
        """Write ``A`` in coordinate text format (``row col value``, 0-based)."""
        coo = self.A.tocoo()
        with open(path, "w") as fh:
            fh.write(f"# kind={self.kind} n={self.dimension} nnz={coo.nnz}\n")
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{r} {c} {v:.17g}\n")


def _lattice_blocks(grid: Grid2D, dofmap: DofMap):
    """Restricted ``K1 x W2``, ``W1 x K2`` and lattice mass pieces."""
    K1 = stiffness_1d(grid.n1, grid.h1)
    K2 = stiffness_1d(grid.n2, grid.h2)
    W1 = sp.diags(lumped_mass_1d(grid.n1, grid.h1))
    W2 = sp.diags(lumped_mass_1d(grid.n2, grid.h2))
    keep = np.flatnonzero(dofmap.active.ravel())
    long_ = sp.kron(K1, W2, format="csr")[keep][:, keep]
    trans = sp.kron(W1, K2, format="csr")[keep][:, keep]
    return long_.tocsr(), trans.tocsr()


class LatticeEnergy:
    """Cancellation-free evaluation of the form pieces on a lattice.

    ``v^T A v`` from a matrix-vector product loses ``eps * ||A||`` to rounding,
    and ``||A||`` grows like ``e^s / h2**2``.  Here each column profile is split
    into its component along the column's ground mode plus a remainder, so the
    transverse energy is ``gap * alpha**2 + r^T Q r`` with ``gap = 0`` exactly
    on DN and ND columns.  Longitudinal energy is a sum of squared edge
    differences.  Both are sums of nonnegative terms.
    """

    def __init__(self, grid: Grid2D, dofmap: DofMap, E1h: float, potential: np.ndarray | None = None):
        self.grid = grid
        self.dofmap = dofmap
        self.E1h = E1h
        n2, h2 = grid.n2, grid.h2
        self.w1 = lumped_mass_1d(grid.n1, grid.h1)
        self.w2 = lumped_mass_1d(n2, h2)
        self.potential = potential  # lattice-node values of V, or None
        K2 = stiffness_1d(n2, h2).toarray()
        W2 = np.diag(self.w2)
        pattern = dofmap.active
        self.groups = []
        keys = {}
        for i in range(grid.n1 + 1):
            key = tuple(np.flatnonzero(pattern[i]))
            if key:
                keys.setdefault(key, []).append(i)
        y2 = grid.x2
        for key, cols in keys.items():
            keep = np.array(key)
            Q = (K2 - E1h * W2)[np.ix_(keep, keep)]
            w = self.w2[keep]
            bottom, top = 0 in key, n2 in key
            if not bottom and top:
                chi, gap = np.sin(wavenumber_1(grid.a) * (y2[keep] + grid.a)), 0.0
            elif bottom and not top:
                chi, gap = np.sin(wavenumber_1(grid.a) * (grid.a - y2[keep])), 0.0
            else:
                s = 1.0 / np.sqrt(w)
                vals, vecs = np.linalg.eigh(s[:, None] * (K2[np.ix_(keep, keep)]) * s[None, :])
                chi, gap = vecs[:, 0] * s, float(vals[0] - E1h)
            chi = chi / np.sqrt(np.dot(w, chi * chi))
            self.groups.append((np.array(cols), keep, Q, w, chi, gap))

    def transverse(self, v: np.ndarray) -> float:
        lat = self.dofmap.to_lattice(v)
        total = 0.0
        for cols, keep, Q, w, chi, gap in self.groups:
            C = lat[np.ix_(cols, keep)]
            alpha = C @ (w * chi)
            R = C - alpha[:, None] * chi[None, :]
            total += self.w1[cols] @ (gap * alpha**2 + np.einsum("ij,jk,ik->i", R, Q, R))
        return float(total)

    def longitudinal(self, v: np.ndarray) -> float:
        lat = self.dofmap.to_lattice(v)
        d = np.diff(lat, axis=0)
        total = float(np.sum(self.w2 * np.sum(d * d, axis=0)) / self.grid.h1)
        if self.potential is not None:
            total += float(np.sum(self.w1[:, None] * self.w2[None, :] * self.potential * lat * lat))
        return total


def wavenumber_1(a: float) -> float:
    return np.pi / (4.0 * a)


def _check_dofmap(grid: Grid2D, dofmap: DofMap) -> None:
    if dofmap.grid != grid:
        raise ValueError(f"DOF map built for {dofmap.grid.grid_id}, not {grid.grid_id}")


def transverse_shift(a: float, n2: int) -> float:
    """Discrete cross-section ground energy ``E_1^h`` (identical for DN and ND)."""
    return discrete_transverse(a, n2, Orientation.DN).E1h


def assemble_physical(config: StripConfig, grid: Grid2D, dofmap: DofMap | None = None) -> SymmetricForm:
    """Shifted Laplacian ``-Delta_theta - E_1^h`` on the truncated strip."""
    if dofmap is None:
        dofmap = build_dof_map(config, grid)
    _check_dofmap(grid, dofmap)
    long_, trans = _lattice_blocks(grid, dofmap)
    E1h = transverse_shift(grid.a, grid.n2)
    M = dofmap.mass
    shifted_trans = (trans - sp.diags(E1h * M)).tocsr()
    A = (long_ + shifted_trans).tocsr()
    lattice = LatticeEnergy(grid, dofmap, E1h)
    return SymmetricForm(
        A=A,
        mass=M,
        kind="physical",
        descriptor={"theta": config.theta.value, "grid": grid.grid_id, "E1h": E1h},
        dofmap=dofmap,
        parts={"longitudinal": long_, "transverse": shifted_trans},
        lower_bound=0.0,
        energy_fn=lambda v: lattice.longitudinal(v) + lattice.transverse(v),
    )


def harmonic_potential(y1: np.ndarray) -> np.ndarray:
    return np.asarray(y1) ** 2 / 16.0


def selfsimilar_grid(L: float = 12.0, n1: int = 9600, n2: int = 16, a: float = 1.0) -> Grid2D:
    return Grid2D(extent=L, n1=n1, n2=n2, a=a)


@dataclass(eq=False)
class SelfSimilarFamily:
    """The s-independent pieces of ``T(s) = A_long + V + e^s (A_trans - E_1^h M)``.

    Assembling once and rescaling per ``s`` keeps curve sampling cheap.
    """

    config: StripConfig
    grid: Grid2D
    dofmap: DofMap
    base: sp.csr_matrix = field(repr=False)  # longitudinal stiffness + harmonic potential
    shifted_trans: sp.csr_matrix = field(repr=False)
    E1h: float = 0.0
    lattice: LatticeEnergy | None = field(default=None, repr=False)

    def energy(self, v: np.ndarray, s: float) -> float:
        return self.lattice.longitudinal(v) + math.exp(s) * self.lattice.transverse(v)

    def at(self, s: float) -> SymmetricForm:
        if s < 0:
            raise ValueError(f"self-similar time must be nonnegative, got {s}")
        if s > S_MAX:
            warnings.warn(f"s = {s} beyond the validated range [0, {S_MAX}]", RuntimeWarning)
        scale = math.exp(s)
        if scale / self.grid.h2**2 > CONDITION_GUARD:
            warnings.warn(
                f"e^s/h2^2 = {scale / self.grid.h2**2:.3g} exceeds {CONDITION_GUARD:g}; "
                "transverse block dominates to machine precision",
                RuntimeWarning,
            )
        A = (self.base + scale * self.shifted_trans).tocsr()
        return SymmetricForm(
            A=A,
            mass=self.dofmap.mass,
            kind="selfsimilar",
            descriptor={
                "theta": self.config.theta.value,
                "s": float(s),
                "grid": self.grid.grid_id,
                "E1h": self.E1h,
            },
            dofmap=self.dofmap,
            parts={"base": self.base, "transverse": self.shifted_trans, "scale": scale},
            lower_bound=0.0,
            energy_fn=(lambda v, s=s: self.energy(v, s)) if self.lattice is not None else None,
        )


def selfsimilar_family(config: StripConfig, ss_grid: Grid2D) -> SelfSimilarFamily:
    dofmap = build_dof_map(config, ss_grid)
    long_, trans = _lattice_blocks(ss_grid, dofmap)
    M = dofmap.mass
    base = (long_ + sp.diags(harmonic_potential(dofmap.x1) * M)).tocsr()
    E1h = transverse_shift(ss_grid.a, ss_grid.n2)
    shifted = (trans - sp.diags(E1h * M)).tocsr()
    V = harmonic_potential(ss_grid.x1)[:, None] * np.ones(ss_grid.n2 + 1)[None, :]
    lattice = LatticeEnergy(ss_grid, dofmap, E1h, potential=V)
    return SelfSimilarFamily(config, ss_grid, dofmap, base, shifted, E1h, lattice)


def assemble_selfsimilar(config: StripConfig, ss_grid: Grid2D, s: float) -> SymmetricForm:
    """Self-similar operator ``-d1^2 + y1^2/16 + e^s (-d2^2 - E_1^h)`` at time ``s``.

    ``ss_grid`` spans ``[-L, L] x [-a, a]`` with Dirichlet ends at ``y1 = +-L``
    and the walls laid out as in the physical strip.
    """
    if s < 0:
        raise ValueError(f"self-similar time must be nonnegative, got {s}")
    return selfsimilar_family(config, ss_grid).at(s)


@dataclass(frozen=True)
class HarmonicOscillator1D:
    """``-d^2/dy^2 + y^2/16`` on ``[-L, L]`` with Dirichlet ends.

    With ``dirichlet_at_zero`` the node at ``y = 0`` is removed too (``H_D``).
    """

    L: float = 12.0
    n: int = 1200
    dirichlet_at_zero: bool = False

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def nodes(self) -> np.ndarray:
        y = -self.L + self.h * np.arange(self.n + 1)
        if self.n % 2 == 0:
            y[self.n // 2] = 0.0
        return y

    def keep(self) -> np.ndarray:
        keep = np.arange(1, self.n)
        if self.dirichlet_at_zero:
            keep = keep[keep != self.n // 2]
        return keep


def assemble_harmonic(ho: HarmonicOscillator1D) -> SymmetricForm:
    if not ho.L > 0 or ho.n < 2:
        raise ValueError(f"invalid oscillator grid L={ho.L}, n={ho.n}")
    if ho.dirichlet_at_zero and ho.n % 2:
        raise ValueError("H_D needs a node at y = 0: use an even number of intervals")
    h = ho.h
    y = ho.nodes
    keep = ho.keep()
    K = stiffness_1d(ho.n, h)
    W = lumped_mass_1d(ho.n, h)
    A = (K + sp.diags(harmonic_potential(y) * W)).tocsr()[keep][:, keep]
    return SymmetricForm(
        A=A,
        mass=W[keep],
        kind="harmonic_D" if ho.dirichlet_at_zero else "harmonic",
        descriptor={"L": ho.L, "n": ho.n, "dirichlet_at_zero": ho.dirichlet_at_zero},
        parts={"nodes": y[keep]},
        lower_bound=0.0,
    )
