"""Cross-section operators -d^2/dx2^2 on (-a, a) with mixed end conditions.

``DN`` is Dirichlet at ``-a`` and Neumann at ``+a``; ``ND`` is its mirror image.
Both have eigenvalues ``E_n = (2n - 1)**2 * E_1`` with ``E_1 = (pi / (4a))**2``
and orthonormal modes ``sqrt(1/a) * sin(k_n * (x2 + a))``, ``k_n = sqrt(E_n)``.

The published mode formula carries ``E_n`` inside the sine instead of its square
root; that version violates both end conditions, so the wavenumber is used here.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import SolverError
from .fem1d import lumped_mass_1d, restrict, stiffness_1d


class Orientation(enum.Enum):
    DN = "DN"
    ND = "ND"


def _check(n: int, a: float) -> None:
    if int(n) != n or n < 1:
        raise ValueError(f"mode index must be a positive integer, got {n}")
    if not a > 0:
        raise ValueError(f"half-width must be positive, got {a}")


def ground_energy(a: float) -> float:
    """E_1 = (pi / (4a))**2."""
    if not a > 0:
        raise ValueError(f"half-width must be positive, got {a}")
    return (np.pi / (4.0 * a)) ** 2


def eigenvalue_dn(n: int, a: float) -> float:
    _check(n, a)
    return (2 * n - 1) ** 2 * ground_energy(a)


def wavenumber(n: int, a: float) -> float:
    _check(n, a)
    return (2 * n - 1) * np.pi / (4.0 * a)


def _mode(n: int, a: float, y2, derivative: int = 0) -> np.ndarray:
    _check(n, a)
    y2 = np.asarray(y2, dtype=float)
    if np.any(np.abs(y2) > a * (1 + 1e-12)):
        raise ValueError(f"transverse coordinate outside [-{a}, {a}]")
    k = wavenumber(n, a)
    phase = k * (y2 + a)
    amp = np.sqrt(1.0 / a) * k**derivative
    # d^m/dy sin = sin(phase + m*pi/2)
    return amp * np.sin(phase + derivative * np.pi / 2)


def eigenfunction_dn(n: int, a: float, y2, derivative: int = 0):
    """Orthonormal DN mode (or its ``derivative``-th derivative) at ``y2``."""
    out = _mode(n, a, y2, derivative)
    return float(out) if out.ndim == 0 else out


def eigenfunction_nd(n: int, a: float, y2, derivative: int = 0):
    """Mirror image ``eigenfunction_dn(n, a, -y2)`` of the DN mode."""
    out = (-1) ** derivative * _mode(n, a, -np.asarray(y2, dtype=float), derivative)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TransverseMode:
    n: int
    a: float
    orientation: Orientation = Orientation.DN

    @property
    def energy(self) -> float:
        return eigenvalue_dn(self.n, self.a)

    @property
    def k(self) -> float:
        return wavenumber(self.n, self.a)

    def __call__(self, y2, derivative: int = 0):
        if self.orientation is Orientation.DN:
            return eigenfunction_dn(self.n, self.a, y2, derivative)
        return eigenfunction_nd(self.n, self.a, y2, derivative)


@dataclass(frozen=True, eq=False)
class DiscreteTransverse:
    """P1 / lumped-mass discretisation of the cross-section operator.

    ``stiffness`` and ``mass`` live on the active nodes only (the Dirichlet
    end is removed); ``keep`` lists which of the ``n2 + 1`` nodes are active.
    """

    a: float
    n2: int
    orientation: Orientation
    stiffness: sp.csr_matrix = field(repr=False)
    mass: np.ndarray = field(repr=False)
    keep: np.ndarray = field(repr=False)
    E1h: float = 0.0

    @property
    def h(self) -> float:
        return 2.0 * self.a / self.n2

    def eigenvalues(self, count: int = 1) -> np.ndarray:
        return _tridiagonal_eigs(self, count)

    def ground_mode(self) -> np.ndarray:
        """Ground eigenvector on the active nodes, unit lumped-mass norm, positive."""
        d, e = _scaled_tridiagonal(self)
        _, vec = scipy.linalg.eigh_tridiagonal(d, e, select="i", select_range=(0, 0))
        v = vec[:, 0] / np.sqrt(self.mass)
        v /= np.sqrt(np.dot(self.mass, v**2))
        return v if v.sum() > 0 else -v


def _scaled_tridiagonal(dt: DiscreteTransverse) -> tuple[np.ndarray, np.ndarray]:
    # M^{-1/2} K M^{-1/2} is again tridiagonal because M is diagonal
    s = 1.0 / np.sqrt(dt.mass)
    K = dt.stiffness
    d = K.diagonal() * s * s
    e = K.diagonal(1) * s[:-1] * s[1:]
    return d, e


def _tridiagonal_eigs(dt: DiscreteTransverse, count: int) -> np.ndarray:
    d, e = _scaled_tridiagonal(dt)
    count = min(count, d.size)
    try:
        # LAPACK stebz: Sturm-sequence bisection
        vals = scipy.linalg.eigh_tridiagonal(
            d, e, eigvals_only=True, select="i", select_range=(0, count - 1),
            lapack_driver="stebz", tol=0.0,
        )
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise SolverError(f"transverse bisection failed: {exc}") from exc
    return np.sort(vals)


@lru_cache(maxsize=64)
def discrete_transverse(a: float, n2: int, orientation: Orientation | str = Orientation.DN) -> DiscreteTransverse:
    """Assemble the discrete DN/ND cross-section operator and its ground energy ``E_1^h``."""
    orientation = Orientation(orientation)
    if n2 < 4:
        raise ValueError(f"need at least 4 transverse intervals, got {n2}")
    if not a > 0:
        raise ValueError(f"half-width must be positive, got {a}")
    h = 2.0 * a / n2
    keep = np.arange(1, n2 + 1) if orientation is Orientation.DN else np.arange(0, n2)
    K = restrict(stiffness_1d(n2, h), keep)
    M = lumped_mass_1d(n2, h)[keep]
    out = DiscreteTransverse(a=a, n2=n2, orientation=orientation, stiffness=K, mass=M, keep=keep)
    object.__setattr__(out, "E1h", float(_tridiagonal_eigs(out, 1)[0]))
    return out


def discrete_eigenvalue_exact(n: int, a: float, n2: int) -> float:
    """Closed form ``(4/h**2) sin**2(k_n h / 2)`` of the discrete DN eigenvalues.

    The sampled continuous modes are exact discrete eigenvectors of the P1 /
    lumped scheme; only the eigenvalues change.
    """
    h = 2.0 * a / n2
    return 4.0 / h**2 * np.sin(wavenumber(n, a) * h / 2.0) ** 2
