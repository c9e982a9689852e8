"""Finite-dimensional unital associative algebras given by structure constants."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

ASSOC_TOL = 1e-12


class AlgebraError(ValueError):
    pass


def _frozen(array, dtype=complex) -> np.ndarray:
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class StructureConstantAlgebra:
    """Algebra with basis e_0..e_{dim-1} and e_i e_j = sum_k c[i, j, k] e_k.

    Associativity and the unit law are verified on construction.  Pass
    ``check_associativity=False`` for truncated products that are only
    associative on part of the basis (see :mod:`ncpoisson.torus`).
    """

    structure_constants: np.ndarray
    unit_vector: np.ndarray
    basis_labels: tuple[str, ...] = ()
    check_associativity: bool = field(default=True, repr=False)

    def __post_init__(self):
        c = _frozen(self.structure_constants)
        if c.ndim != 3 or not (c.shape[0] == c.shape[1] == c.shape[2]):
            raise AlgebraError(f"structure constants must have shape (n, n, n), got {c.shape}")
        dim = c.shape[0]
        unit = _frozen(self.unit_vector)
        if unit.shape != (dim,):
            raise AlgebraError("unit vector has wrong length")
        labels = tuple(self.basis_labels) or tuple(f"e{i}" for i in range(dim))
        if len(labels) != dim:
            raise AlgebraError("need one label per basis element")
        object.__setattr__(self, "structure_constants", c)
        object.__setattr__(self, "unit_vector", unit)
        object.__setattr__(self, "basis_labels", labels)

        scale = max(1.0, float(np.abs(c).max()))
        if self.check_associativity:
            res = self.associativity_residual()
            if res > ASSOC_TOL * scale**2:
                raise AlgebraError(f"structure constants are not associative (residual {res:.3e})")
        eye = np.eye(dim)
        left = np.einsum("i,ijk->jk", unit, c)
        right = np.einsum("j,ijk->ik", unit, c)
        if max(np.abs(left - eye).max(), np.abs(right - eye).max()) > ASSOC_TOL * scale:
            raise AlgebraError("unit vector is not a two-sided unit")

    @property
    def dim(self) -> int:
        return self.structure_constants.shape[0]

    def associativity_residual(self) -> float:
        c = self.structure_constants
        lhs = np.einsum("ijm,mkl->ijkl", c, c)
        rhs = np.einsum("jkm,iml->ijkl", c, c)
        return float(np.abs(lhs - rhs).max())

    # element constructors
    def element(self, coeffs) -> AlgebraElement:
        return AlgebraElement(self, coeffs)

    def basis(self, i: int) -> AlgebraElement:
        v = np.zeros(self.dim, dtype=complex)
        v[i] = 1.0
        return AlgebraElement(self, v)

    def basis_elements(self) -> list[AlgebraElement]:
        return [self.basis(i) for i in range(self.dim)]

    def one(self) -> AlgebraElement:
        return AlgebraElement(self, self.unit_vector)

    def zero(self) -> AlgebraElement:
        return AlgebraElement(self, np.zeros(self.dim, dtype=complex))

    def random_element(self, rng: np.random.Generator) -> AlgebraElement:
        return AlgebraElement(self, rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim))

    def left_matrix(self, a) -> np.ndarray:
        """Matrix of x -> a x acting on coefficient column vectors."""
        return np.einsum("i,ijk->kj", _coeffs(a), self.structure_constants)

    def right_matrix(self, a) -> np.ndarray:
        """Matrix of x -> x a acting on coefficient column vectors."""
        return np.einsum("j,ijk->ki", _coeffs(a), self.structure_constants)

    def to_json(self) -> dict:
        c = self.structure_constants
        return {
            "dim": self.dim,
            "labels": list(self.basis_labels),
            "c": _complex_to_json(c),
            "unit": _complex_to_json(self.unit_vector),
        }

    @classmethod
    def from_json(cls, data: dict | str | Path) -> StructureConstantAlgebra:
        """Load ``{"dim", "labels", "c", "unit"}``.

        Entries of ``c`` and ``unit`` may be real numbers or ``[re, im]`` pairs.
        """
        if isinstance(data, (str, Path)):
            data = json.loads(Path(data).read_text())
        dim = int(data["dim"])
        c = _complex_from_json(data["c"], (dim, dim, dim))
        unit = _complex_from_json(data["unit"], (dim,))
        return cls(c, unit, tuple(data.get("labels", ())))


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    algebra: StructureConstantAlgebra
    coeffs: np.ndarray

    def __post_init__(self):
        v = _frozen(self.coeffs)
        if v.shape != (self.algebra.dim,):
            raise AlgebraError(f"expected {self.algebra.dim} coefficients, got shape {v.shape}")
        object.__setattr__(self, "coeffs", v)

    def _same(self, other: AlgebraElement):
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        if other.algebra is not self.algebra:
            raise AlgebraError("elements belong to different algebras")
        return other

    def __add__(self, other):
        if self._same(other) is NotImplemented:
            return NotImplemented
        return AlgebraElement(self.algebra, self.coeffs + other.coeffs)

    def __sub__(self, other):
        if self._same(other) is NotImplemented:
            return NotImplemented
        return AlgebraElement(self.algebra, self.coeffs - other.coeffs)

    def __neg__(self):
        return AlgebraElement(self.algebra, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, AlgebraElement):
            return multiply(self, other)
        if np.isscalar(other):
            return AlgebraElement(self.algebra, self.coeffs * other)
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return AlgebraElement(self.algebra, self.coeffs * other)
        return NotImplemented

    def norm(self) -> float:
        return float(np.abs(self.coeffs).max(initial=0.0))

    def __repr__(self):
        terms = [
            f"({c:.4g})*{lab}"
            for c, lab in zip(self.coeffs, self.algebra.basis_labels)
            if abs(c) > 1e-14
        ]
        return " + ".join(terms) or "0"


def _coeffs(a) -> np.ndarray:
    return a.coeffs if isinstance(a, AlgebraElement) else np.asarray(a, dtype=complex)


def multiply(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    if a.algebra is not b.algebra:
        raise AlgebraError("elements belong to different algebras")
    c = a.algebra.structure_constants
    return AlgebraElement(a.algebra, np.einsum("i,j,ijk->k", a.coeffs, b.coeffs, c))


def commutator(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    return multiply(a, b) - multiply(b, a)


def commutator_matrix(algebra: StructureConstantAlgebra) -> np.ndarray:
    """Stacked map x -> ([x, e_0], ..., [x, e_{n-1}]), shape (n*n, n)."""
    c = algebra.structure_constants
    # [x, e_j]_k = sum_i x_i (c[i, j, k] - c[j, i, k])
    skew = c - c.transpose(1, 0, 2)
    return skew.transpose(1, 2, 0).reshape(algebra.dim * algebra.dim, algebra.dim)


def center(algebra: StructureConstantAlgebra, rcond: float = 1e-10) -> list[AlgebraElement]:
    """Basis of the center, as the null space of the stacked commutator maps."""
    ns = scipy.linalg.null_space(commutator_matrix(algebra), rcond=rcond)
    return [AlgebraElement(algebra, ns[:, i]) for i in range(ns.shape[1])]


def centrality_residual(a: AlgebraElement) -> float:
    return float(np.abs(commutator_matrix(a.algebra) @ a.coeffs).max(initial=0.0))


class DerivationCheck(NamedTuple):
    is_derivation: bool
    residual: float


def is_derivation(
    algebra: StructureConstantAlgebra,
    d,
    tol: float = 1e-12,
    mask: np.ndarray | None = None,
) -> DerivationCheck:
    """Sup over basis pairs of |d(e_i e_j) - d(e_i) e_j - e_i d(e_j)|.

    ``d`` is either a ``dim x dim`` matrix acting on coefficient columns or a
    degree-1 :class:`~ncpoisson.hochschild.Cochain`.  ``mask[i, j]`` restricts
    the sup to selected pairs.
    """
    if hasattr(d, "tensor"):
        if d.degree != 1:
            raise AlgebraError("a derivation is a degree-1 cochain")
        image = np.asarray(d.tensor)  # image[i] = d(e_i)
    else:
        mat = np.asarray(d, dtype=complex)
        if mat.shape != (algebra.dim, algebra.dim):
            raise AlgebraError("derivation matrix has the wrong shape")
        image = mat.T
    c = algebra.structure_constants
    lhs = np.einsum("ijm,mk->ijk", c, image)
    rhs = np.einsum("im,mjk->ijk", image, c) + np.einsum("jm,imk->ijk", image, c)
    err = np.abs(lhs - rhs).max(axis=2)
    if mask is not None:
        err = err[mask]
    res = float(err.max(initial=0.0))
    scale = max(1.0, float(np.abs(image).max(initial=0.0)))
    return DerivationCheck(res <= tol * scale, res)


def inner_derivation_matrix(a: AlgebraElement) -> np.ndarray:
    """Matrix of x -> [a, x]."""
    alg = a.algebra
    return alg.left_matrix(a) - alg.right_matrix(a)


# --- built-in algebras -------------------------------------------------------


def matrix_algebra(n: int) -> StructureConstantAlgebra:
    """M_n(C) in the matrix-unit basis E_ij (index i*n + j)."""
    dim = n * n
    c = np.zeros((dim, dim, dim), dtype=complex)
    for i, j, l in itertools.product(range(n), repeat=3):
        # E_ij E_jl = E_il
        c[i * n + j, j * n + l, i * n + l] = 1.0
    unit = np.zeros(dim, dtype=complex)
    unit[[i * n + i for i in range(n)]] = 1.0
    labels = tuple(f"E{i + 1}{j + 1}" for i in range(n) for j in range(n))
    return StructureConstantAlgebra(c, unit, labels)


def group_algebra(table: Sequence[Sequence[int]], labels: Sequence[str] = ()) -> StructureConstantAlgebra:
    """C[G] for a finite group given by its multiplication table table[g][h] = gh."""
    table = np.asarray(table, dtype=int)
    n = table.shape[0]
    if table.shape != (n, n):
        raise AlgebraError("multiplication table must be square")
    c = np.zeros((n, n, n), dtype=complex)
    for g, h in itertools.product(range(n), repeat=2):
        c[g, h, table[g, h]] = 1.0
    identity = [g for g in range(n) if all(table[g, h] == h for h in range(n))]
    if not identity:
        raise AlgebraError("multiplication table has no identity")
    unit = np.zeros(n, dtype=complex)
    unit[identity[0]] = 1.0
    return StructureConstantAlgebra(c, unit, tuple(labels))


def symmetric_group_algebra(n: int = 3) -> StructureConstantAlgebra:
    perms = list(itertools.permutations(range(n)))
    index = {p: i for i, p in enumerate(perms)}
    # (g h)(x) = g(h(x))
    table = [[index[tuple(g[h[x]] for x in range(n))] for h in perms] for g in perms]
    labels = ["".join(str(v + 1) for v in p) for p in perms]
    return group_algebra(table, labels)


def truncated_polynomial_algebra(k: int) -> StructureConstantAlgebra:
    """C[t]/(t^k) with basis 1, t, ..., t^{k-1}."""
    c = np.zeros((k, k, k), dtype=complex)
    for i, j in itertools.product(range(k), repeat=2):
        if i + j < k:
            c[i, j, i + j] = 1.0
    unit = np.zeros(k, dtype=complex)
    unit[0] = 1.0
    labels = tuple("1" if i == 0 else ("t" if i == 1 else f"t^{i}") for i in range(k))
    return StructureConstantAlgebra(c, unit, labels)


def truncated_bivariate_algebra(k: int = 2) -> StructureConstantAlgebra:
    """C[x, y]/(x^k, y^k) with monomial basis x^i y^j, index i*k + j."""
    mono = [(i, j) for i in range(k) for j in range(k)]
    index = {m: n for n, m in enumerate(mono)}
    dim = k * k
    c = np.zeros((dim, dim, dim), dtype=complex)
    for (n1, a), (n2, b) in itertools.product(enumerate(mono), repeat=2):
        prod = (a[0] + b[0], a[1] + b[1])
        if prod in index:
            c[n1, n2, index[prod]] = 1.0
    unit = np.zeros(dim, dtype=complex)
    unit[0] = 1.0
    labels = tuple(_monomial_label(i, j) for i, j in mono)
    return StructureConstantAlgebra(c, unit, labels)


def _monomial_label(i, j):
    parts = [v if e == 1 else f"{v}^{e}" for v, e in (("x", i), ("y", j)) if e]
    return "".join(parts) or "1"


BUILTIN_ALGEBRAS = {
    "M2": lambda: matrix_algebra(2),
    "M3": lambda: matrix_algebra(3),
    "CS3": lambda: symmetric_group_algebra(3),
    "Ct3": lambda: truncated_polynomial_algebra(3),
    "Cxy": lambda: truncated_bivariate_algebra(3),
}


# --- JSON helpers --------------------------------------------------------------


def _complex_to_json(arr: np.ndarray):
    arr = np.asarray(arr)
    if np.all(arr.imag == 0):
        return arr.real.tolist()
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def _complex_from_json(data, shape) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape == tuple(shape):
        return arr.astype(complex)
    if arr.shape == tuple(shape) + (2,):
        return arr[..., 0] + 1j * arr[..., 1]
    raise AlgebraError(f"cannot read array of shape {arr.shape} as {shape}")
