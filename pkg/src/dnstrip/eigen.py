"""Lowest eigenpairs of ``A v = lambda M v`` with ``A`` symmetric, ``M`` diagonal > 0.

Shift-invert block inverse iteration: the shift sits below the spectrum (so
``A - sigma M`` is SPD and a banded Cholesky factor exists), each sweep applies
``(A - sigma M)^{-1} M`` to a small block, and a Rayleigh-Ritz projection on the
block gives the eigenvalue estimates.  The Ritz step separates clustered
eigenvalues, which matters for the twisted layout where the two lowest levels
merge as ``s`` grows.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import SolverError
from .geometry import Field
from .linalg import BandedCholesky
from .operators import SymmetricForm

EPS = np.finfo(float).eps


@dataclass(eq=False)
class EigenResult:
    eigenvalue: float
    eigenvector: np.ndarray = field(repr=False)  # unit M-norm
    residual: float  # ||A v - lambda M v||_{M^-1} / max(1, |lambda|)
    iterations: int
    converged: bool = True
    shift: float = 0.0
    ritz_values: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    def field(self, form: SymmetricForm) -> Field:
        if form.dofmap is None:
            raise ValueError("form has no DOF map; eigenvector is a plain array")
        return Field(self.eigenvector, form.dofmap)


def gershgorin_lower(form: SymmetricForm) -> float:
    """Gershgorin lower bound for the spectrum of ``M^{-1/2} A M^{-1/2}``."""
    s = 1.0 / np.sqrt(form.mass)
    B = sp.diags(s) @ form.A @ sp.diags(s)
    B = sp.csr_matrix(B)
    diag = B.diagonal()
    off = np.asarray(abs(B).sum(axis=1)).ravel() - np.abs(diag)
    return float(np.min(diag - off))


def _scaled_norm_estimate(form: SymmetricForm) -> float:
    s = 1.0 / np.sqrt(form.mass)
    B = sp.diags(s) @ form.A @ sp.diags(s)
    return float(np.max(np.asarray(abs(B).sum(axis=1)).ravel()))


def _factor_below_spectrum(form: SymmetricForm, sigma: float, retries: int):
    M = sp.diags(form.mass)
    for attempt in range(retries + 1):
        try:
            return sigma, BandedCholesky((form.A - sigma * M).tocsr())
        except np.linalg.LinAlgError:
            sigma -= max(1.0, abs(sigma)) * 4.0**attempt
    raise SolverError(f"no SPD shift found after {retries} retries (last shift {sigma:g})")


def _start_block(n: int, p: int) -> np.ndarray:
    rng = np.random.default_rng(20100614)
    X = rng.standard_normal((n, p))
    X[:, 0] = 1.0
    return X


def _m_orthonormalize(Y: np.ndarray, mass: np.ndarray) -> np.ndarray:
    Q, _ = np.linalg.qr(np.sqrt(mass)[:, None] * Y)
    return Q / np.sqrt(mass)[:, None]


def lowest_eigenpairs(
    form: SymmetricForm,
    count: int = 1,
    tol: float = 1e-9,
    block: int | None = None,
    max_iter: int = 500,
    shift: float | None = None,
    retries: int = 6,
) -> list[EigenResult]:
    """The ``count`` lowest eigenpairs, ascending.

    Convergence is declared when every requested pair has relative residual
    below ``tol`` or, for badly scaled forms, below the rounding floor
    ``64 eps ||M^-1/2 A M^-1/2||`` that no residual evaluation can beat.
    """
    n = form.dimension
    p = min(n, block if block is not None else count + 2)
    if count > p:
        raise ValueError("block must be at least as large as count")
    if shift is None:
        floor = form.lower_bound if form.lower_bound is not None else gershgorin_lower(form)
        shift = floor - 0.05 * max(1.0, abs(floor))
    sigma, factor = _factor_below_spectrum(form, shift, retries)

    mass = form.mass
    A = form.A
    noise = 64 * EPS * _scaled_norm_estimate(form)
    X = _m_orthonormalize(_start_block(n, p), mass)
    theta = np.full(p, np.inf)
    res = np.full(count, np.inf)
    it = 0
    for it in range(1, max_iter + 1):
        Y = factor.solve(mass[:, None] * X)
        Y = _m_orthonormalize(Y, mass)
        G = Y.T @ (A @ Y)
        G = 0.5 * (G + G.T)
        theta, C = scipy.linalg.eigh(G)
        X = Y @ C
        R = A @ X[:, :count] - mass[:, None] * X[:, :count] * theta[:count]
        res = np.sqrt(np.sum(R * R / mass[:, None], axis=0)) / np.maximum(1.0, np.abs(theta[:count]))
        limit = np.maximum(tol, noise / np.maximum(1.0, np.abs(theta[:count])))
        if np.all(res <= limit):
            break
    converged = bool(np.all(res <= np.maximum(tol, noise / np.maximum(1.0, np.abs(theta[:count])))))
    out = []
    for k in range(count):
        v = X[:, k]
        v = v / np.sqrt(np.dot(mass, v * v))
        if v.sum() < 0:
            v = -v
        # Ritz values carry eps*||A|| rounding; the structured energy does not
        value = form.rayleigh(v) if form.energy_fn is not None else float(theta[k])
        out.append(
            EigenResult(
                eigenvalue=value,
                eigenvector=v,
                residual=float(res[k]),
                iterations=it,
                converged=converged,
                shift=sigma,
                ritz_values=theta.copy(),
            )
        )
    return out


def smallest_eigenpair(form: SymmetricForm, tol: float = 1e-9, **kwargs) -> EigenResult:
    """Lowest eigenpair; raises :class:`SolverError` when it does not converge."""
    result = lowest_eigenpairs(form, 1, tol=tol, **kwargs)[0]
    if not result.converged:
        raise SolverError(
            f"eigen iteration stalled at residual {result.residual:.3g}",
            iterations=result.iterations,
            residual=result.residual,
        )
    return result
