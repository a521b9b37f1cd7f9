"""Piecewise-linear 1D building blocks on uniform meshes.

All 2D forms are tensor products of these: stiffness ``K`` (the P1 energy
``sum (v[k+1] - v[k])**2 / h``) and the lumped (trapezoidal) mass ``M``.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def stiffness_1d(n: int, h: float) -> sp.csr_matrix:
    """P1 stiffness on ``n`` intervals, all ``n + 1`` nodes kept (natural BCs)."""
    main = np.full(n + 1, 2.0 / h)
    main[[0, -1]] = 1.0 / h
    off = np.full(n, -1.0 / h)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def lumped_mass_1d(n: int, h: float) -> np.ndarray:
    w = np.full(n + 1, h)
    w[[0, -1]] = 0.5 * h
    return w


def restrict(matrix: sp.spmatrix, keep: np.ndarray) -> sp.csr_matrix:
    """Principal submatrix on the index set ``keep`` (Dirichlet DOF removal)."""
    matrix = sp.csr_matrix(matrix)
    return matrix[keep][:, keep].tocsr()
