"""Hochschild cochains of a structure-constant algebra.

A degree-k cochain is stored as a tensor ``T`` of shape ``(dim,) * (k + 1)``
with ``c(e_{i1}, ..., e_{ik}) = sum_j T[i1, ..., ik, j] e_j``.  All operations
below act on these tensors by ``einsum`` contractions against the structure
constants, so every identity is exact up to floating-point rounding.
"""
from __future__ import annotations

import functools
import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .algebra import AlgebraElement, StructureConstantAlgebra

MAX_DEGREE = 4
SIZE_GUARD = 200_000


class CochainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Cochain:
    algebra: StructureConstantAlgebra
    degree: int
    tensor: np.ndarray

    def __post_init__(self):
        if not 0 <= self.degree <= MAX_DEGREE + 1:
            raise CochainError(f"degree {self.degree} outside 0..{MAX_DEGREE + 1}")
        t = np.array(self.tensor, dtype=complex)
        shape = (self.algebra.dim,) * (self.degree + 1)
        if t.shape != shape:
            raise CochainError(f"degree-{self.degree} cochain needs shape {shape}, got {t.shape}")
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)

    @classmethod
    def zero(cls, algebra, degree):
        return cls(algebra, degree, np.zeros((algebra.dim,) * (degree + 1), dtype=complex))

    @classmethod
    def from_element(cls, a: AlgebraElement) -> Cochain:
        return cls(a.algebra, 0, a.coeffs)

    @classmethod
    def multiplication(cls, algebra) -> Cochain:
        """The product mu(a, b) = ab as a 2-cochain."""
        return cls(algebra, 2, algebra.structure_constants)

    @classmethod
    def random(cls, algebra, degree, rng: np.random.Generator) -> Cochain:
        shape = (algebra.dim,) * (degree + 1)
        return cls(algebra, degree, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

    def __call__(self, *args: AlgebraElement) -> AlgebraElement:
        if len(args) != self.degree:
            raise CochainError(f"degree-{self.degree} cochain takes {self.degree} arguments")
        t = self.tensor
        for a in args:
            t = np.tensordot(a.coeffs, t, axes=(0, 0))
        return AlgebraElement(self.algebra, t)

    def as_element(self) -> AlgebraElement:
        if self.degree != 0:
            raise CochainError("only degree-0 cochains are elements")
        return AlgebraElement(self.algebra, self.tensor)

    def _check(self, other):
        if not isinstance(other, Cochain):
            return False
        if other.algebra is not self.algebra or other.degree != self.degree:
            raise CochainError("cochains must share algebra and degree")
        return True

    def __add__(self, other):
        if not self._check(other):
            return NotImplemented
        return Cochain(self.algebra, self.degree, self.tensor + other.tensor)

    def __sub__(self, other):
        if not self._check(other):
            return NotImplemented
        return Cochain(self.algebra, self.degree, self.tensor - other.tensor)

    def __neg__(self):
        return Cochain(self.algebra, self.degree, -self.tensor)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return Cochain(self.algebra, self.degree, self.tensor * scalar)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.abs(self.tensor).max(initial=0.0))

    def to_json(self) -> dict:
        flat = self.tensor.reshape(-1)
        return {"degree": self.degree, "tensor": [[float(z.real), float(z.imag)] for z in flat]}

    @classmethod
    def from_json(cls, data: dict | str, algebra: StructureConstantAlgebra) -> Cochain:
        if isinstance(data, str):
            data = json.loads(data)
        k = int(data["degree"])
        pairs = np.asarray(data["tensor"], dtype=float).reshape(-1, 2)
        t = (pairs[:, 0] + 1j * pairs[:, 1]).reshape((algebra.dim,) * (k + 1))
        return cls(algebra, k, t)


def _same_algebra(*cochains: Cochain):
    alg = cochains[0].algebra
    if any(c.algebra is not alg for c in cochains):
        raise CochainError("cochains belong to different algebras")
    return alg


def differential(c: Cochain) -> Cochain:
    """Hochschild coboundary b: C^k -> C^{k+1}.

    (bc)(a_1..a_{k+1}) = a_1 c(a_2..) + sum_i (-1)^i c(.., a_i a_{i+1}, ..)
                         + (-1)^{k+1} c(a_1..a_k) a_{k+1}
    """
    alg, k, t = c.algebra, c.degree, c.tensor
    if k + 1 > MAX_DEGREE + 1:
        raise CochainError("degree cap exceeded")
    mu = alg.structure_constants
    out_ax = k + 1  # output axis of the result
    # argument axes of the result are 0..k
    args = list(range(k + 1))
    n = k + 2  # fresh summation label

    # a_1 c(a_2, ..., a_{k+1})
    res = np.einsum(mu, [0, n, out_ax], t, args[1:] + [n], args + [out_ax])
    for i in range(1, k + 1):
        # c(a_1, .., a_i a_{i+1}, .., a_{k+1}): slot i-1 of c gets the product
        slots = args[: i - 1] + [n] + args[i + 1 :]
        term = np.einsum(mu, [i - 1, i, n], t, slots + [out_ax], args + [out_ax])
        res = res + (-1) ** i * term
    # c(a_1, .., a_k) a_{k+1}
    last = np.einsum(t, args[:k] + [n], mu, [n, k, out_ax], args + [out_ax])
    res = res + (-1) ** (k + 1) * last
    return Cochain(alg, k + 1, res)


def pre_lie(u: Cochain, v: Cochain) -> Cochain:
    """Gerstenhaber composition U * V of degree u + v - 1.

    (U*V)(a_1..) = sum_{i=1}^{u} (-1)^{(i-1)(v-1)} U(a_1.., V(a_i..a_{i+v-1}), ..)
    """
    alg = _same_algebra(u, v)
    du, dv = u.degree, v.degree
    if du == 0 and dv == 0:
        raise CochainError("pre-Lie product of two degree-0 cochains is undefined")
    deg = du + dv - 1
    if du == 0:
        return Cochain.zero(alg, deg)
    out_ax = deg
    n = deg + 1
    res = np.zeros((alg.dim,) * (deg + 1), dtype=complex)
    for i in range(1, du + 1):
        v_args = list(range(i - 1, i - 1 + dv))
        u_args = list(range(i - 1)) + [n] + list(range(i - 1 + dv, deg))
        term = np.einsum(u.tensor, u_args + [out_ax], v.tensor, v_args + [n], list(range(deg)) + [out_ax])
        res += (-1) ** ((i - 1) * (dv - 1)) * term
    return Cochain(alg, deg, res)


def gerstenhaber(u: Cochain, v: Cochain) -> Cochain:
    """[U, V] = U*V - (-1)^{(u-1)(v-1)} V*U."""
    sign = (-1) ** ((u.degree - 1) * (v.degree - 1))
    return pre_lie(u, v) - sign * pre_lie(v, u)


@functools.lru_cache(maxsize=32)
def differential_matrix(algebra: StructureConstantAlgebra, k: int) -> np.ndarray:
    """Matrix of b: C^k -> C^{k+1} on flattened (row-major) coefficient tensors."""
    dim = algebra.dim
    n_in = dim ** (k + 1)
    n_out = dim ** (k + 2)
    if n_in * n_out > SIZE_GUARD * 50:
        raise CochainError(f"b_{k} matrix for dim {dim} is too large to assemble")
    cols = np.empty((n_out, n_in), dtype=complex)
    basis = np.zeros(n_in, dtype=complex)
    for j in range(n_in):
        basis[j] = 1.0
        cols[:, j] = differential(Cochain(algebra, k, basis.reshape((dim,) * (k + 1)))).tensor.reshape(-1)
        basis[j] = 0.0
    cols.setflags(write=False)
    return cols


class CoboundarySolution(NamedTuple):
    witness: Cochain | None
    residual: float


def solve_coboundary(w: Cochain, tol: float = 1e-9) -> CoboundarySolution:
    """Minimum-norm least-squares solve of b(c) = w.

    Returns the witness when the attained residual (sup norm) is at most
    ``tol``; otherwise ``witness`` is ``None`` and the residual is reported.
    """
    if w.degree < 1:
        raise CochainError("degree-0 cochains are never coboundaries")
    alg = w.algebra
    mat = differential_matrix(alg, w.degree - 1)
    rhs = w.tensor.reshape(-1)
    sol, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    residual = float(np.abs(mat @ sol - rhs).max(initial=0.0))
    if residual > tol:
        return CoboundarySolution(None, residual)
    return CoboundarySolution(Cochain(alg, w.degree - 1, sol.reshape((alg.dim,) * w.degree)), residual)


def _rank(mat: np.ndarray, rel_cutoff: float = 1e-9) -> int:
    if mat.size == 0:
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rel_cutoff * s[0]))


def cohomology_dimension(algebra: StructureConstantAlgebra, k: int) -> int:
    """dim H^k(A, A) = dim ker b_k - rank b_{k-1}, for k <= 3."""
    if not 0 <= k <= 3:
        raise CochainError("cohomology is only computed in degrees 0..3")
    dim = algebra.dim
    if dim ** (k + 1) * dim ** (k + 2) > SIZE_GUARD:
        raise CochainError(f"H^{k} for dim {dim} exceeds the {SIZE_GUARD}-entry size guard")
    kernel = dim ** (k + 1) - _rank(differential_matrix(algebra, k))
    image = _rank(differential_matrix(algebra, k - 1)) if k >= 1 else 0
    return kernel - image
