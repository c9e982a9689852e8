"""Noncommutative Poisson structures on structure-constant algebras.

A Poisson structure is a Hochschild 2-cocycle ``pi`` whose Jacobiator
``pi(a, pi(b, c)) - pi(pi(a, b), c)`` is the coboundary of a 2-cochain
``pi1`` (the Jacobi witness).  Central elements give Hamiltonian
derivations ``X_c = 1/2 [pi, c]`` and a Poisson bracket on the center.

Truncated algebras that are associative only on part of the basis (the
noncommutative torus embedding) carry boolean masks of "safe" basis pairs and
triples; every residual is then a sup over the safe entries only.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .algebra import (
    AlgebraElement,
    StructureConstantAlgebra,
    center,
    centrality_residual,
    is_derivation,
)
from .hochschild import Cochain, CoboundarySolution, differential, gerstenhaber, solve_coboundary

LEIBNIZ_TOL = 1e-10
WITNESS_TOL = 1e-9
CENTRAL_TOL = 1e-10
DERIVATION_TOL = 1e-9


class PoissonError(ValueError):
    pass


def _sup(arr: np.ndarray, mask: np.ndarray | None, reduce_axes: int = 1) -> float:
    err = np.abs(arr)
    for _ in range(reduce_axes):
        err = err.max(axis=-1)
    if mask is not None:
        err = err[mask]
    return float(err.max(initial=0.0))


@dataclass(frozen=True, eq=False)
class PoissonStructure:
    """A 2-cochain ``pi`` with an optional Jacobi witness ``pi1``.

    ``safe_pairs`` / ``safe_triples`` restrict every check to basis tuples
    whose products are computed without truncation.
    """

    pi: Cochain
    pi1: Cochain | None = None
    safe_pairs: np.ndarray | None = None
    safe_triples: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        if self.pi.degree != 2 or (self.pi1 is not None and self.pi1.degree != 2):
            raise PoissonError("pi and pi1 must be 2-cochains")
        res = check_leibniz(self.pi, self.safe_triples)
        if res > LEIBNIZ_TOL * max(1.0, self.pi.norm()):
            raise PoissonError(f"pi is not a Hochschild cocycle (residual {res:.3e})")
        if self.pi1 is not None:
            res = check_jacobi_witness(self.pi, self.pi1, self.safe_triples)
            if res > WITNESS_TOL * max(1.0, self.pi.norm() ** 2):
                raise PoissonError(f"pi1 does not witness the Jacobi rule (residual {res:.3e})")

    @property
    def algebra(self) -> StructureConstantAlgebra:
        return self.pi.algebra


def check_leibniz(pi: Cochain, mask: np.ndarray | None = None) -> float:
    """Sup over basis triples of |a1 pi(a2,a3) - pi(a1a2,a3) + pi(a1,a2a3) - pi(a1,a2)a3|."""
    return _sup(differential(pi).tensor, mask)


def jacobiator(pi: Cochain) -> Cochain:
    """The 3-cochain (a1, a2, a3) -> pi(a1, pi(a2, a3)) - pi(pi(a1, a2), a3)."""
    t = pi.tensor
    outer = np.einsum("jkm,imo->ijko", t, t)
    inner = np.einsum("ijm,mko->ijko", t, t)
    return Cochain(pi.algebra, 3, outer - inner)


def check_jacobi_witness(pi: Cochain, pi1: Cochain, mask: np.ndarray | None = None) -> float:
    return _sup(jacobiator(pi).tensor - differential(pi1).tensor, mask)


def solve_jacobi_witness(pi: Cochain, tol: float = WITNESS_TOL) -> CoboundarySolution:
    """Find pi1 with b(pi1) equal to the Jacobiator of ``pi``.

    ``witness`` is None when the Jacobiator is not a coboundary, i.e. when
    ``pi`` is not a Poisson structure.
    """
    res = check_leibniz(pi)
    if res > LEIBNIZ_TOL * max(1.0, pi.norm()):
        raise PoissonError(f"pi fails the Leibniz rule (residual {res:.3e})")
    jac = jacobiator(pi)
    half_bracket = gerstenhaber(pi, pi) * -0.5
    if (jac - half_bracket).norm() > 1e-12 * max(1.0, pi.norm() ** 2):
        raise PoissonError("Jacobiator disagrees with -1/2 [pi, pi]")
    return solve_coboundary(jac, tol=tol)


def _check_central(c: AlgebraElement):
    res = centrality_residual(c)
    if res > CENTRAL_TOL * max(1.0, c.norm()):
        raise PoissonError(f"element is not central (commutator residual {res:.3e})")


def hamiltonian_derivation(ps: PoissonStructure, c: AlgebraElement) -> Cochain:
    """X_c = 1/2 [pi, c], i.e. X_c(a) = 1/2 (pi(c, a) - pi(a, c))."""
    _check_central(c)
    x = gerstenhaber(ps.pi, Cochain.from_element(c)) * 0.5
    ok, res = is_derivation(ps.algebra, x, tol=DERIVATION_TOL, mask=ps.safe_pairs)
    if not ok:
        raise PoissonError(f"X_c is not a derivation (residual {res:.3e})")
    return x


def center_bracket(ps: PoissonStructure, c: AlgebraElement, e: AlgebraElement) -> AlgebraElement:
    """{c, e} = [X_c, e] = X_c(e)."""
    _check_central(e)
    value = hamiltonian_derivation(ps, c)(e)
    res = centrality_residual(value)
    if res > DERIVATION_TOL * max(1.0, value.norm()):
        raise PoissonError(f"bracket of central elements left the center (residual {res:.3e})")
    return value


def inner_derivation_fit(d: Cochain) -> tuple[AlgebraElement, float]:
    """Minimum-norm a with d ~ [a, .]; returns (a, sup-norm residual)."""
    alg = d.algebra
    c = alg.structure_constants
    # ad_a(e_i)_k = sum_j a_j (c[j, i, k] - c[i, j, k])
    basis = (c - c.transpose(1, 0, 2)).transpose(1, 2, 0).reshape(alg.dim * alg.dim, alg.dim)
    rhs = d.tensor.reshape(-1)
    a, *_ = np.linalg.lstsq(basis, rhs, rcond=None)
    return AlgebraElement(alg, a), float(np.abs(basis @ a - rhs).max(initial=0.0))


class PropositionReport(NamedTuple):
    """Residuals for the three properties of Hamiltonian derivations.

    lie_derivative: [X_c, pi] is a 2-coboundary.
    commutator: [X_c, X_e] + X_{c,e} is an inner derivation.
    commutator_opposite: the same with - X_{c,e}.  With the commutator
        convention [X, Y] = X o Y - Y o X of the Gerstenhaber bracket it is
        this one that vanishes in cohomology; both are reported.
    jacobi: {.,.} satisfies the Jacobi identity on a basis of the center.
    """

    lie_derivative: float
    commutator: float
    commutator_opposite: float
    jacobi: float


def commutator_defect(ps: PoissonStructure, c: AlgebraElement, e: AlgebraElement, sign: int = 1) -> Cochain:
    """[X_c, X_e] + sign * X_{c,e}."""
    xc = hamiltonian_derivation(ps, c)
    xe = hamiltonian_derivation(ps, e)
    x_ce = hamiltonian_derivation(ps, center_bracket(ps, c, e))
    return gerstenhaber(xc, xe) + x_ce * sign


def center_jacobi_residual(ps: PoissonStructure, basis: list[AlgebraElement] | None = None) -> float:
    basis = center(ps.algebra) if basis is None else basis
    if not basis:
        return 0.0
    # goes through center_bracket once per pair so centrality is enforced
    for x, y in itertools.product(basis, repeat=2):
        center_bracket(ps, x, y)
    z = np.array([b.coeffs for b in basis])
    t = ps.pi.tensor
    skew = 0.5 * (t - t.transpose(1, 0, 2))  # {a, b} = X_a(b) on central arguments
    inner = np.einsum("ja,kb,abm->jkm", z, z, skew)
    outer = np.einsum("ia,jkb,abm->ijkm", z, inner, skew)
    total = outer + outer.transpose(1, 2, 0, 3) + outer.transpose(2, 0, 1, 3)
    return float(np.abs(total).max(initial=0.0))


def check_proposition(ps: PoissonStructure, c: AlgebraElement, e: AlgebraElement) -> PropositionReport:
    if ps.pi1 is None:
        raise PoissonError("the proposition needs a Poisson structure with a Jacobi witness")
    xc = hamiltonian_derivation(ps, c)
    lie = solve_coboundary(gerstenhaber(xc, ps.pi), tol=np.inf).residual
    _, plus = inner_derivation_fit(commutator_defect(ps, c, e, sign=1))
    _, minus = inner_derivation_fit(commutator_defect(ps, c, e, sign=-1))
    return PropositionReport(lie, plus, minus, center_jacobi_residual(ps))


# --- built-in structures -------------------------------------------------------


def multiplication_structure(algebra: StructureConstantAlgebra, name: str = "mult") -> PoissonStructure:
    """Pi = mu with witness 0 (the Jacobiator of mu is the associator)."""
    return PoissonStructure(Cochain.multiplication(algebra), Cochain.zero(algebra, 2), name=name)


def structure_with_solved_witness(pi: Cochain, name: str = "") -> PoissonStructure:
    sol = solve_jacobi_witness(pi)
    if sol.witness is None:
        raise PoissonError(f"no Jacobi witness exists (residual {sol.residual:.3e})")
    return PoissonStructure(pi, sol.witness, name=name)


def coboundary_structure(algebra: StructureConstantAlgebra, seed: int = 0, name: str = "") -> PoissonStructure:
    """Pi = b(c) for a seeded random 1-cochain c, with a solved witness."""
    c = Cochain.random(algebra, 1, np.random.default_rng(seed))
    return structure_with_solved_witness(differential(c), name=name)


def log_canonical_structure(k: int = 3) -> PoissonStructure:
    """Pi(a, b) = E_x(a) E_y(b) - E_y(a) E_x(b) on C[x, y]/(x^k, y^k).

    E_x, E_y are the Euler derivations x d/dx, y d/dy; the result is the
    bracket {x, y} = xy, a genuinely non-zero bracket on a commutative algebra.
    """
    from .algebra import truncated_bivariate_algebra

    alg = truncated_bivariate_algebra(k)
    ex = np.array([i for i in range(k) for _ in range(k)], dtype=float)
    ey = np.array([j for _ in range(k) for j in range(k)], dtype=float)
    mu = alg.structure_constants
    t = np.einsum("i,j,ijk->ijk", ex, ey, mu) - np.einsum("i,j,ijk->ijk", ey, ex, mu)
    return structure_with_solved_witness(Cochain(alg, 2, t), name="Cxy-logcanonical")


def _torus_structure():
    from .torus import embed_as_finite_algebra

    return embed_as_finite_algebra(1).poisson_structure()


def _builtin(factory, algebra_name, **kw):
    from .algebra import BUILTIN_ALGEBRAS

    def build():
        return factory(BUILTIN_ALGEBRAS[algebra_name](), **kw)

    return build


BUILTIN_POISSON = {
    "M2-mult": _builtin(multiplication_structure, "M2", name="M2-mult"),
    "M2-coboundary": _builtin(coboundary_structure, "M2", seed=0, name="M2-coboundary"),
    "Ct3-coboundary": _builtin(coboundary_structure, "Ct3", seed=1, name="Ct3-coboundary"),
    "Cxy-logcanonical": log_canonical_structure,
    "torus": _torus_structure,
}


def get_poisson_structure(name: str) -> PoissonStructure:
    try:
        return BUILTIN_POISSON[name]()
    except KeyError:
        raise PoissonError(f"unknown Poisson structure {name!r}") from None
