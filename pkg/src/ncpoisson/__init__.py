"""Numerical verification toolkit for noncommutative Poisson structures.

Modules: ``algebra`` (finite-dimensional associative algebras), ``hochschild``
(cochains, b, the Gerstenhaber bracket, cohomology), ``poisson``
(Poisson structures and Hamiltonian derivations), ``torus`` (the
noncommutative torus), ``classical`` (Poisson geometry on R^d), ``foliation``
(the groupoid algebra of a foliated torus), ``report`` and ``cli``.
"""

__version__ = "0.1.0"
