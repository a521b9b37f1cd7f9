"""Strip geometry, boundary layouts and degree-of-freedom maps.

The strip ``R x (-a, a)`` is truncated to ``[-X, X] x [-a, a]`` and covered by a
uniform tensor lattice of ``(n1 + 1) x (n2 + 1)`` nodes.  Node ``(i, j)`` sits at
``x1 = -X + i*h1``, ``x2 = -a + j*h2``.  A node is an unknown (an *active* DOF)
unless it lies on a Dirichlet segment; the truncation ends ``x1 = +-X`` are
always Dirichlet.

DOFs are ordered lexicographically in ``(i, j)`` with ``j`` running fastest, so
every assembled operator is banded with half-bandwidth close to ``n2``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class Theta(enum.Enum):
    """Boundary layout: untwisted (theta = 0) or twisted (theta = pi)."""

    UNTWISTED = "0"
    TWISTED = "pi"

    @classmethod
    def parse(cls, value) -> "Theta":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        if key in ("0", "untwisted", "theta0"):
            return cls.UNTWISTED
        if key in ("pi", "twisted", "thetapi", "3.14159", str(np.pi)):
            return cls.TWISTED
        raise ValueError(f"unknown boundary layout {value!r}; expected '0' or 'pi'")


class Wall(enum.Enum):
    BOTTOM = -1  # x2 = -a
    TOP = 1  # x2 = +a


class BC(enum.Enum):
    DIRICHLET = "D"
    NEUMANN = "N"


@dataclass(frozen=True)
class StripConfig:
    a: float = 1.0
    theta: Theta = Theta.UNTWISTED

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"strip half-width must be positive, got {self.a}")
        object.__setattr__(self, "theta", Theta.parse(self.theta))


def classify_wall_node(x1: float, wall: Wall, theta: Theta) -> BC:
    """Boundary condition carried by the wall point ``(x1, +-a)``.

    Untwisted: bottom Dirichlet, top Neumann everywhere.  Twisted: the bottom
    wall is Dirichlet for ``x1 <= 0`` and the top wall for ``x1 >= 0``; both
    switching points belong to the Dirichlet part.
    """
    theta = Theta.parse(theta)
    wall = Wall(wall)
    if theta is Theta.UNTWISTED:
        return BC.DIRICHLET if wall is Wall.BOTTOM else BC.NEUMANN
    if wall is Wall.BOTTOM:
        return BC.DIRICHLET if x1 <= 0 else BC.NEUMANN
    return BC.DIRICHLET if x1 >= 0 else BC.NEUMANN


def _wall_dirichlet_mask(x1: np.ndarray, wall: Wall, theta: Theta) -> np.ndarray:
    # vectorised classify_wall_node
    if theta is Theta.UNTWISTED:
        return np.full(x1.shape, wall is Wall.BOTTOM)
    return x1 <= 0 if wall is Wall.BOTTOM else x1 >= 0


@dataclass(frozen=True)
class Grid2D:
    """Uniform tensor grid on ``[-extent, extent] x [-a, a]``."""

    extent: float
    n1: int
    n2: int
    a: float = 1.0

    def __post_init__(self):
        if not self.extent > 0:
            raise ValueError(f"extent must be positive, got {self.extent}")
        if self.n1 < 2 or self.n1 % 2:
            raise ValueError(f"n1 must be an even integer >= 2 (node at x1 = 0), got {self.n1}")
        if self.n2 < 1:
            raise ValueError(f"n2 must be positive, got {self.n2}")
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")

    @property
    def h1(self) -> float:
        return 2.0 * self.extent / self.n1

    @property
    def h2(self) -> float:
        return 2.0 * self.a / self.n2

    @cached_property
    def x1(self) -> np.ndarray:
        x = -self.extent + self.h1 * np.arange(self.n1 + 1)
        x[self.n1 // 2] = 0.0
        return x

    @cached_property
    def x2(self) -> np.ndarray:
        return -self.a + self.h2 * np.arange(self.n2 + 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n1 + 1, self.n2 + 1)

    @property
    def grid_id(self) -> str:
        return f"X{self.extent:g}_n1{self.n1}_n2{self.n2}_a{self.a:g}"


@dataclass(frozen=True, eq=False)
class DofMap:
    """Active-node numbering and lumped mass weights for one layout on one grid."""

    grid: Grid2D
    theta: Theta
    active: np.ndarray = field(repr=False)  # bool, grid.shape
    index: np.ndarray = field(repr=False)  # int, grid.shape, -1 where inactive
    mass: np.ndarray = field(repr=False)  # per active DOF

    @property
    def size(self) -> int:
        return int(self.mass.size)

    @cached_property
    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        return np.nonzero(self.active)

    @cached_property
    def x1(self) -> np.ndarray:
        return self.grid.x1[self.nodes[0]]

    @cached_property
    def x2(self) -> np.ndarray:
        return self.grid.x2[self.nodes[1]]

    def column(self, i: int) -> np.ndarray:
        """DOF indices of lattice column ``i`` (ordered bottom to top)."""
        idx = self.index[i]
        return idx[idx >= 0]

    def to_lattice(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.shape + values.shape[1:], dtype=values.dtype)
        out[self.active] = values
        return out

    def from_lattice(self, array: np.ndarray, strict: bool = True) -> np.ndarray:
        """Restrict a lattice array to the active DOFs.

        With ``strict`` set, nonzero values on Dirichlet nodes are rejected:
        such data are not representable in the discrete form domain.
        """
        array = np.asarray(array, dtype=float)
        if array.shape[:2] != self.grid.shape:
            raise ValueError(f"lattice shape {array.shape} does not match grid {self.grid.shape}")
        if strict:
            bad = np.abs(array[~self.active])
            if bad.size and bad.max() > 0:
                raise ValueError(
                    f"field is nonzero on {int(np.count_nonzero(bad))} Dirichlet node(s)"
                )
        return array[self.active]

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(x1, x2)`` on the active DOFs."""
        return np.asarray(func(self.x1, self.x2), dtype=float)


def build_dof_map(config: StripConfig, grid: Grid2D) -> DofMap:
    """Number the active nodes of ``grid`` for the layout of ``config``.

    Mass weights are the lumped (trapezoidal) weights ``h1*h2``, halved on
    Neumann wall nodes.
    """
    if grid.n1 % 2:
        raise ValueError("n1 must be even so that the switching abscissa is a node")
    if not np.isclose(grid.a, config.a, rtol=1e-14, atol=0.0):
        raise ValueError(f"grid half-width {grid.a} differs from strip half-width {config.a}")
    theta = config.theta
    n1, n2 = grid.n1, grid.n2
    x1 = grid.x1
    active = np.ones(grid.shape, dtype=bool)
    active[0, :] = False
    active[n1, :] = False
    active[:, 0] &= ~_wall_dirichlet_mask(x1, Wall.BOTTOM, theta)
    active[:, n2] &= ~_wall_dirichlet_mask(x1, Wall.TOP, theta)

    w1 = np.full(n1 + 1, grid.h1)
    w2 = np.full(n2 + 1, grid.h2)
    w2[[0, -1]] *= 0.5
    weights = np.outer(w1, w2)

    index = np.full(grid.shape, -1, dtype=np.int64)
    index[active] = np.arange(int(active.sum()))
    return DofMap(grid=grid, theta=theta, active=active, index=index, mass=weights[active])


def weight_K(x1: np.ndarray) -> np.ndarray:
    """Gaussian weight ``K(x) = exp(x1**2 / 4)``."""
    return np.exp(np.asarray(x1) ** 2 / 4.0)


def weighted_l2(values: np.ndarray, dofmap: DofMap) -> float:
    """``sqrt(sum M K u**2)``, evaluated in log space (K overflows beyond |x1| ~ 53)."""
    values = np.asarray(values, dtype=float)
    nz = values != 0
    terms = np.zeros_like(values)
    with np.errstate(over="ignore"):
        terms[nz] = np.exp(2.0 * np.log(np.abs(values[nz])) + dofmap.x1[nz] ** 2 / 4.0)
    return float(np.sqrt(np.dot(dofmap.mass, terms)))


@dataclass
class Field:
    """Real grid function on the active DOFs of a :class:`DofMap`."""

    values: np.ndarray
    dofmap: DofMap
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.dofmap.size,):
            raise ValueError(
                f"field has {self.values.shape} entries, DOF map has {self.dofmap.size}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite entries")

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.dofmap.mass, self.values**2)))

    def weighted_norm(self) -> float:
        return weighted_l2(self.values, self.dofmap)

    def lattice(self) -> np.ndarray:
        return self.dofmap.to_lattice(self.values)

    def copy(self, values: np.ndarray | None = None, t: float | None = None) -> "Field":
        return Field(
            self.values.copy() if values is None else values,
            self.dofmap,
            self.t if t is None else t,
        )
