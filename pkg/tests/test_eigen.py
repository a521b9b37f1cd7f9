import math

import numpy as np
import pytest
import scipy.sparse as sp

from dnstrip.eigen import gershgorin_lower, lowest_eigenpairs, smallest_eigenpair
from dnstrip.errors import SolverError
from dnstrip.geometry import StripConfig
from dnstrip.operators import (
    HarmonicOscillator1D,
    SymmetricForm,
    assemble_harmonic,
    assemble_selfsimilar,
    selfsimilar_grid,
)


def hand_form():
    A = sp.csr_matrix(np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]]))
    return SymmetricForm(A=A, mass=np.ones(3), kind="hand")


def test_three_by_three_exact():
    res = smallest_eigenpair(hand_form(), tol=1e-13)
    assert res.eigenvalue == pytest.approx(2 - math.sqrt(2), abs=1e-12)
    np.testing.assert_allclose(res.eigenvector, np.array([1, math.sqrt(2), 1]) / 2, atol=1e-12)


def test_three_by_three_full_spectrum():
    pairs = lowest_eigenpairs(hand_form(), 3, tol=1e-13, block=3)
    vals = [p.eigenvalue for p in pairs]
    np.testing.assert_allclose(vals, [2 - math.sqrt(2), 2, 2 + math.sqrt(2)], atol=1e-12)


def test_generalized_problem_with_mass():
    A = sp.diags([4.0, 9.0, 1.0]).tocsr()
    form = SymmetricForm(A=A, mass=np.array([2.0, 3.0, 0.5]), kind="diag")
    res = smallest_eigenpair(form, tol=1e-13)
    assert res.eigenvalue == pytest.approx(2.0, abs=1e-12)
    assert np.dot(form.mass, res.eigenvector**2) == pytest.approx(1.0)


def test_oscillator_levels():
    pairs = lowest_eigenpairs(assemble_harmonic(HarmonicOscillator1D(L=12, n=1200)), 3)
    np.testing.assert_allclose([p.eigenvalue for p in pairs], [0.25, 0.75, 1.25], atol=1e-4)


def test_oscillator_with_dirichlet_point():
    res = smallest_eigenpair(assemble_harmonic(HarmonicOscillator1D(L=12, n=1200, dirichlet_at_zero=True)))
    assert res.eigenvalue == pytest.approx(0.75, abs=1e-4)


def test_dirichlet_point_reproduces_second_level():
    # the odd levels of H vanish at 0, so the two problems share them exactly
    ho = HarmonicOscillator1D(L=12, n=1200)
    second = lowest_eigenpairs(assemble_harmonic(ho), 2, tol=1e-12)[1].eigenvalue
    hd = smallest_eigenpair(assemble_harmonic(HarmonicOscillator1D(L=12, n=1200, dirichlet_at_zero=True)), tol=1e-12)
    assert hd.eigenvalue == pytest.approx(second, abs=1e-10)


def test_shift_retry_recovers_from_bad_shift():
    form = assemble_harmonic(HarmonicOscillator1D(L=12, n=400))
    res = smallest_eigenpair(form, shift=3.0)
    assert res.shift < res.eigenvalue
    assert res.eigenvalue == pytest.approx(0.25, abs=1e-3)


def test_nonconvergence_raises():
    form = assemble_harmonic(HarmonicOscillator1D(L=12, n=400))
    with pytest.raises(SolverError) as info:
        smallest_eigenpair(form, tol=1e-15, max_iter=1)
    assert info.value.iterations == 1


def test_gershgorin_is_a_lower_bound():
    form = assemble_harmonic(HarmonicOscillator1D(L=6, n=60))
    assert gershgorin_lower(form) <= smallest_eigenpair(form).eigenvalue


def test_residual_reported_below_tolerance():
    res = smallest_eigenpair(assemble_harmonic(HarmonicOscillator1D(L=12, n=600)), tol=1e-10)
    assert res.converged and res.residual <= 1e-10


def test_rayleigh_quotients_bound_the_ground_energy():
    form = assemble_selfsimilar(StripConfig(theta="pi"), selfsimilar_grid(L=8.0, n1=320, n2=8), 4.0)
    res = smallest_eigenpair(form, tol=1e-10)
    rng = np.random.default_rng(7)
    for _ in range(50):
        v = rng.standard_normal(form.dimension)
        assert form.rayleigh(v) >= res.eigenvalue - 1e-9


def test_eigenvector_is_a_field():
    form = assemble_selfsimilar(StripConfig(theta="pi"), selfsimilar_grid(L=8.0, n1=80, n2=8), 0.0)
    res = smallest_eigenpair(form)
    f = res.field(form)
    assert f.norm() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        smallest_eigenpair(hand_form()).field(hand_form())
