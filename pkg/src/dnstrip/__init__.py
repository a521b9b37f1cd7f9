"""Heat decay on a planar strip with Dirichlet and Neumann walls, untwisted or twisted.

Modules
-------
geometry, transverse, operators
    Grids, boundary layouts, cross-section spectra and sparse forms.
eigen, spectral
    Lowest eigenpairs and the self-similar ground-energy curve ``mu(s)``.
oracle
    Closed-form untwisted semigroup used as a reference.
evolution
    Crank-Nicolson heat flow, norm traces, semigroup norms.
decay
    Rate fits and the checks that tie the pieces together.
"""

__version__ = "0.1.0"
