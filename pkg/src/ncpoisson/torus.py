"""The truncated noncommutative torus.

Elements are finite sums ``sum a[n, m] U^n V^m`` with ``|n|, |m| <= N`` and the
product is fixed by ``V U = exp(2 pi i theta) U V``, so that

    (U^n V^m)(U^n' V^m') = exp(2 pi i theta m n') U^(n+n') V^(m+m').

Modes of a product that fall outside the box are dropped and the result is
flagged as inexact.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import convolve2d

from .algebra import StructureConstantAlgebra
from .hochschild import Cochain
from .poisson import PoissonStructure

GOLDEN_THETA = (math.sqrt(5.0) - 1.0) / 2.0
TWO_PI_I = 2j * math.pi


class TorusError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TorusElement:
    theta: float
    N: int
    coeffs: np.ndarray
    exact: bool = True

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (2 * self.N + 1, 2 * self.N + 1):
            raise TorusError(f"coefficients must have shape {(2 * self.N + 1,) * 2}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, theta=GOLDEN_THETA, N=8):
        return cls(theta, N, np.zeros((2 * N + 1, 2 * N + 1)))

    @classmethod
    def monomial(cls, n: int, m: int, theta=GOLDEN_THETA, N=8, coeff: complex = 1.0):
        if max(abs(n), abs(m)) > N:
            raise TorusError("monomial outside the truncation box")
        c = np.zeros((2 * N + 1, 2 * N + 1), dtype=complex)
        c[n + N, m + N] = coeff
        return cls(theta, N, c)

    @classmethod
    def one(cls, theta=GOLDEN_THETA, N=8):
        return cls.monomial(0, 0, theta, N)

    @classmethod
    def random(cls, rng: np.random.Generator, radius: int, theta=GOLDEN_THETA, N=8):
        """Random element supported on |n| + |m| <= radius."""
        n, m = _mode_grid(N)
        shape = n.shape
        c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        c[np.abs(n) + np.abs(m) > radius] = 0.0
        return cls(theta, N, c)

    @property
    def support_radius(self) -> int:
        n, m = _mode_grid(self.N)
        nz = self.coeffs != 0
        return int((np.abs(n) + np.abs(m))[nz].max(initial=0))

    def coefficient(self, n: int, m: int) -> complex:
        return complex(self.coeffs[n + self.N, m + self.N])

    def _like(self, coeffs, exact=None) -> TorusElement:
        return TorusElement(self.theta, self.N, coeffs, self.exact if exact is None else exact)

    def _check(self, other: TorusElement):
        if not isinstance(other, TorusElement):
            raise TypeError("expected a TorusElement")
        if other.theta != self.theta or other.N != self.N:
            raise TorusError("elements have different theta or truncation")

    def __add__(self, other):
        self._check(other)
        return self._like(self.coeffs + other.coeffs, self.exact and other.exact)

    def __sub__(self, other):
        self._check(other)
        return self._like(self.coeffs - other.coeffs, self.exact and other.exact)

    def __neg__(self):
        return self._like(-self.coeffs)

    def __mul__(self, other):
        if isinstance(other, TorusElement):
            return multiply(self, other)
        if np.isscalar(other):
            return self._like(self.coeffs * other)
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return self._like(self.coeffs * other)
        return NotImplemented

    def norm(self) -> float:
        return float(np.abs(self.coeffs).max())

    def to_json(self) -> list[dict]:
        n, m = _mode_grid(self.N)
        nz = np.argwhere(self.coeffs != 0)
        return [
            {"n": int(n[i, j]), "m": int(m[i, j]), "re": float(self.coeffs[i, j].real), "im": float(self.coeffs[i, j].imag)}
            for i, j in nz
        ]

    @classmethod
    def from_json(cls, items: list[dict], theta=GOLDEN_THETA, N=8) -> TorusElement:
        c = np.zeros((2 * N + 1, 2 * N + 1), dtype=complex)
        for it in items:
            c[it["n"] + N, it["m"] + N] += it["re"] + 1j * it.get("im", 0.0)
        return cls(theta, N, c)


def _mode_grid(N: int):
    r = np.arange(-N, N + 1)
    return np.meshgrid(r, r, indexing="ij")


def multiply(a: TorusElement, b: TorusElement) -> TorusElement:
    """Twisted convolution of coefficient arrays, cropped to the truncation box."""
    a._check(b)
    N, size = a.N, 2 * a.N + 1
    full = np.zeros((2 * size - 1, 2 * size - 1), dtype=complex)
    n_b = np.arange(-N, N + 1)
    for i, j in np.argwhere(a.coeffs != 0):
        m = j - N
        # phase exp(2 pi i theta m n') depends on the V-power of a and U-power of b
        phase = np.exp(TWO_PI_I * a.theta * m * n_b)[:, None]
        full[i : i + size, j : j + size] += a.coeffs[i, j] * phase * b.coeffs
    inside = full[N : N + size, N : N + size]
    reach = convolve2d((a.coeffs != 0).astype(int), (b.coeffs != 0).astype(int))
    reach[N : N + size, N : N + size] = 0
    exact = a.exact and b.exact and not reach.any()
    return TorusElement(a.theta, N, inside, exact)


def delta1(a: TorusElement) -> TorusElement:
    n, _ = _mode_grid(a.N)
    return a._like(TWO_PI_I * n * a.coeffs)


def delta2(a: TorusElement) -> TorusElement:
    _, m = _mode_grid(a.N)
    return a._like(TWO_PI_I * m * a.coeffs)


def canonical_poisson(a1: TorusElement, a2: TorusElement) -> TorusElement:
    """Pi(a1, a2) = delta1(a1) delta2(a2)."""
    return multiply(delta1(a1), delta2(a2))


def canonical_witness(a1: TorusElement, a2: TorusElement) -> TorusElement:
    """Pi_1(a1, a2) = -1/2 delta1^2(a1) delta2^2(a2)."""
    return -0.5 * multiply(delta1(delta1(a1)), delta2(delta2(a2)))


def seminorm(a: TorusElement, k: int) -> float:
    """p_k(a) = sup (|n| + |m|)^k |a_nm|."""
    if k < 0:
        raise TorusError("seminorm order must be non-negative")
    n, m = _mode_grid(a.N)
    weight = (np.abs(n) + np.abs(m)).astype(float) ** k
    return float((weight * np.abs(a.coeffs)).max())


class IdentityCheck(NamedTuple):
    """Sup-norm of an identity's defect, relative to its largest term."""

    residual: float
    scale: float
    exact: bool

    @property
    def relative(self) -> float:
        return self.residual / self.scale if self.scale > 0 else self.residual


def _identity(lhs: list[TorusElement], rhs: list[TorusElement]) -> IdentityCheck:
    terms = lhs + [-t for t in rhs]
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return IdentityCheck(total.norm(), max(t.norm() for t in terms), total.exact)


def leibniz_check(a1: TorusElement, a2: TorusElement, a3: TorusElement) -> IdentityCheck:
    """a1 Pi(a2,a3) - Pi(a1 a2, a3) + Pi(a1, a2 a3) - Pi(a1, a2) a3 = 0."""
    pi = canonical_poisson
    return _identity([a1 * pi(a2, a3), -pi(a1 * a2, a3), pi(a1, a2 * a3), -(pi(a1, a2) * a3)], [])


def jacobi_check(a1: TorusElement, a2: TorusElement, a3: TorusElement, witness=canonical_witness) -> IdentityCheck:
    """Jacobi rule: Pi(a1, Pi(a2,a3)) - Pi(Pi(a1,a2), a3) = b(witness)(a1, a2, a3)."""
    pi, w = canonical_poisson, witness
    lhs = [pi(a1, pi(a2, a3)), -pi(pi(a1, a2), a3)]
    rhs = [a1 * w(a2, a3), -w(a1 * a2, a3), w(a1, a2 * a3), -(w(a1, a2) * a3)]
    return _identity(lhs, rhs)


def associativity_check(a: TorusElement, b: TorusElement, c: TorusElement) -> IdentityCheck:
    return _identity([(a * b) * c], [a * (b * c)])


def derivation_check(delta, a: TorusElement, b: TorusElement) -> IdentityCheck:
    return _identity([delta(a * b)], [delta(a) * b, a * delta(b)])


@dataclass(frozen=True, eq=False)
class TruncatedTorusAlgebra:
    """Structure-constant form of the truncated torus, with its Poisson data.

    The truncated product is associative only on triples whose partial
    products stay inside the box; ``safe_pairs`` and ``safe_triples`` mark
    those basis tuples and every generic check runs on them only.
    """

    algebra: StructureConstantAlgebra
    modes: tuple[tuple[int, int], ...]
    pi: Cochain
    pi1: Cochain
    safe_pairs: np.ndarray
    safe_triples: np.ndarray

    def poisson_structure(self) -> PoissonStructure:
        return PoissonStructure(self.pi, self.pi1, self.safe_pairs, self.safe_triples, name="torus")

    def to_element(self, vec, theta) -> TorusElement:
        N = max(abs(n) for n, _ in self.modes)
        c = np.zeros((2 * N + 1, 2 * N + 1), dtype=complex)
        for (n, m), v in zip(self.modes, np.asarray(vec)):
            c[n + N, m + N] = v
        return TorusElement(theta, N, c)


def embed_as_finite_algebra(N_small: int = 1, theta: float = GOLDEN_THETA) -> TruncatedTorusAlgebra:
    if not 1 <= N_small <= 3:
        raise TorusError("embedding is limited to truncation radius 1..3")
    modes = tuple(itertools.product(range(-N_small, N_small + 1), repeat=2))
    index = {mode: i for i, mode in enumerate(modes)}
    dim = len(modes)
    c = np.zeros((dim, dim, dim), dtype=complex)
    for (i, (n, m)), (j, (n2, m2)) in itertools.product(enumerate(modes), repeat=2):
        target = (n + n2, m + m2)
        if target in index:
            c[i, j, index[target]] = np.exp(TWO_PI_I * theta * m * n2)
    unit = np.zeros(dim, dtype=complex)
    unit[index[(0, 0)]] = 1.0
    labels = tuple(f"U^{n}V^{m}" for n, m in modes)
    alg = StructureConstantAlgebra(c, unit, labels, check_associativity=False)

    d1 = np.array([TWO_PI_I * n for n, _ in modes])
    d2 = np.array([TWO_PI_I * m for _, m in modes])
    pi = np.einsum("i,j,ijk->ijk", d1, d2, c)
    pi1 = -0.5 * np.einsum("i,j,ijk->ijk", d1**2, d2**2, c)

    arr = np.array(modes)
    s_nm = arr[:, None, :] + arr[None, :, :]
    safe_pairs = (np.abs(s_nm) <= N_small).all(axis=-1)
    triple = arr[:, None, None, :] + arr[None, :, None, :] + arr[None, None, :, :]
    safe_triples = (
        safe_pairs[:, :, None]
        & safe_pairs[None, :, :]
        & (np.abs(triple) <= N_small).all(axis=-1)
    )
    return TruncatedTorusAlgebra(
        alg, modes, Cochain(alg, 2, pi), Cochain(alg, 2, pi1), safe_pairs, safe_triples
    )
