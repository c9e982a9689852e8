"""Discretized transversely symplectic fibration foliation.

The manifold is ``M = T^p x T^q`` foliated by the leaves ``T^p x {y}``; the
base ``T^q`` (q even) carries the standard symplectic form.  Holonomy is
trivial, so the holonomy groupoid is ``{(x, x', y)}`` with range ``(x, y)``
and source ``(x', y)``, and every holonomy map is the identity.

All fields live on uniform periodic grids on ``[0, 1)``.  Leafwise integrals
use the trapezoid rule and transverse derivatives are Fourier-spectral, so
identities among band-limited data hold to rounding error.

Array layout: scalar kernels have shape ``(n_x,)*p + (n_x,)*p + (n_y,)*q``;
1-form kernels prepend one component axis of length q, 2-tensor kernels two.
Functions on M have shape ``(n_x,)*p + (n_y,)*q`` and base functions
``(n_y,)*q``.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

TWO_PI = 2.0 * math.pi
COMPONENT_AXES = {0: 0, 1: 1, 2: 2, "2s": 2}


class FoliationError(ValueError):
    pass


def standard_symplectic(q: int) -> np.ndarray:
    """omega = sum dy_{2i-1} ^ dy_{2i} as an antisymmetric matrix."""
    if q <= 0 or q % 2:
        raise FoliationError("the base dimension q must be positive and even")
    w = np.zeros((q, q))
    for i in range(0, q, 2):
        w[i, i + 1], w[i + 1, i] = 1.0, -1.0
    return w


def poisson_bivector(omega: np.ndarray) -> np.ndarray:
    """Lambda with Lambda(#X, #Y) = omega(X, Y) where <#X, Y> = omega(X, Y).

    With # = omega^T this gives Lambda = (omega^{-1})^T.
    """
    return np.linalg.inv(omega).T


@dataclass(frozen=True, eq=False)
class FoliatedTorusModel:
    p: int
    q: int
    n_x: int
    n_y: int
    density: np.ndarray
    omega: np.ndarray = field(init=False)
    lam: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.p < 1:
            raise FoliationError("leaf dimension must be at least 1")
        omega = standard_symplectic(self.q)
        f = np.array(self.density, dtype=float)
        if f.shape != self.m_shape:
            f = np.broadcast_to(f, self.m_shape).copy()
        if not np.all(f > 0):
            raise FoliationError("leafwise density must be positive")
        f.setflags(write=False)
        object.__setattr__(self, "density", f)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "lam", poisson_bivector(omega))

    @property
    def x_shape(self):
        return (self.n_x,) * self.p

    @property
    def y_shape(self):
        return (self.n_y,) * self.q

    @property
    def m_shape(self):
        return self.x_shape + self.y_shape

    @property
    def kernel_shape(self):
        return self.x_shape * 2 + self.y_shape

    @property
    def X(self) -> int:
        return self.n_x**self.p

    @property
    def Y(self) -> int:
        return self.n_y**self.q

    @property
    def quadrature_weight(self) -> float:
        return 1.0 / self.X

    def y_grid(self) -> list[np.ndarray]:
        """Base coordinates y_1..y_q broadcast to the base grid."""
        r = np.arange(self.n_y) / self.n_y
        return list(np.meshgrid(*([r] * self.q), indexing="ij"))

    def m_grid(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Coordinates (x_1..x_p), (y_1..y_q) broadcast to the grid of M."""
        rx = np.arange(self.n_x) / self.n_x
        ry = np.arange(self.n_y) / self.n_y
        grids = np.meshgrid(*([rx] * self.p + [ry] * self.q), indexing="ij")
        return list(grids[: self.p]), list(grids[self.p :])

    @classmethod
    def build(cls, p=1, q=2, n_x=32, n_y=None, density="expsin", coefficients=None):
        """Model with a named density preset.

        ``const``: f = 1.  ``expsin``: f = exp(sin 2 pi y_1).  ``userfourier``:
        f = exp(sum a cos(2 pi (kx.x + ky.y)) + b sin(...)) over
        ``coefficients = [{"kx": [...], "ky": [...], "a": .., "b": ..}, ...]``.
        """
        n_y = n_x if n_y is None else n_y
        shell = cls.__new__(cls)
        for name, val in (("p", p), ("q", q), ("n_x", n_x), ("n_y", n_y)):
            object.__setattr__(shell, name, val)
        xs, ys = shell.m_grid()
        if not isinstance(density, str):
            f = np.asarray(density, dtype=float)
        elif density == "const":
            f = np.ones(shell.m_shape)
        elif density == "expsin":
            f = np.exp(np.sin(TWO_PI * ys[0]))
        elif density == "userfourier":
            log_f = np.zeros(shell.m_shape)
            for term in coefficients or []:
                kx = term.get("kx", [0] * p)
                ky = term.get("ky", [0] * q)
                phase = sum(k * x for k, x in zip(kx, xs)) + sum(k * y for k, y in zip(ky, ys))
                log_f = log_f + term.get("a", 0.0) * np.cos(TWO_PI * phase) + term.get("b", 0.0) * np.sin(TWO_PI * phase)
            f = np.exp(log_f)
        else:
            raise FoliationError(f"unknown density preset {density!r}")
        return cls(p, q, n_x, n_y, f)

    def check_same(self, other: FoliatedTorusModel):
        if other is not self:
            raise FoliationError("objects belong to different models")


# --- spectral derivatives -------------------------------------------------------


def _wavenumbers(n: int) -> np.ndarray:
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0  # drop the Nyquist mode for odd-order derivatives
    return TWO_PI * k


def spectral_derivative(values: np.ndarray, axis: int) -> np.ndarray:
    """d/dy along ``axis`` of a periodic grid function on [0, 1)."""
    n = values.shape[axis]
    shape = [1] * values.ndim
    shape[axis] = n
    ik = (1j * _wavenumbers(n)).reshape(shape)
    out = np.fft.ifft(ik * np.fft.fft(values, axis=axis), axis=axis)
    return out if np.iscomplexobj(values) else out.real


def dy(values: np.ndarray, j: int, q: int) -> np.ndarray:
    """Derivative in base coordinate y_j; the base axes are the last q axes."""
    return spectral_derivative(values, values.ndim - q + j)


# --- data types ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BaseFunction:
    """A leafwise-constant function on M, sampled on the base grid."""

    model: FoliatedTorusModel
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values)
        if v.shape != self.model.y_shape:
            raise FoliationError(f"base function needs shape {self.model.y_shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def on_m(self) -> np.ndarray:
        return np.broadcast_to(self.values, self.model.m_shape)

    def differential(self) -> np.ndarray:
        """d_H h = (d h/d y_j)_j, shape (q,) + y_shape."""
        q = self.model.q
        return np.array([dy(self.values, j, q) for j in range(q)])


FunctionOnM = Union[BaseFunction, np.ndarray]


def as_m_function(model: FoliatedTorusModel, a: FunctionOnM) -> np.ndarray:
    if isinstance(a, BaseFunction):
        model.check_same(a.model)
        return np.asarray(a.on_m())
    a = np.asarray(a)
    if a.shape == model.y_shape:
        return np.broadcast_to(a, model.m_shape)
    if a.shape != model.m_shape:
        raise FoliationError(f"function on M needs shape {model.m_shape}, got {a.shape}")
    return a


def transverse_function_differential(model: FoliatedTorusModel, a: FunctionOnM) -> np.ndarray:
    """d_H a = (d a/d y_j)_j for a function on M, shape (q,) + m_shape."""
    a = np.asarray(as_m_function(model, a))
    return np.array([dy(a, j, model.q) for j in range(model.q)])


@dataclass(frozen=True, eq=False)
class GroupoidKernel:
    """Grid function on the groupoid, valued in scalars or transverse tensors.

    ``form_degree`` is 0 (scalar), 1 (q components), 2 (antisymmetric q x q)
    or ``"2s"`` (symmetric q x q).
    """

    model: FoliatedTorusModel
    values: np.ndarray
    form_degree: int | str = 0

    def __post_init__(self):
        if self.form_degree not in COMPONENT_AXES:
            raise FoliationError(f"unsupported form degree {self.form_degree!r}")
        v = np.ascontiguousarray(self.values, dtype=complex)
        shape = (self.model.q,) * COMPONENT_AXES[self.form_degree] + self.model.kernel_shape
        if v.shape != shape:
            raise FoliationError(f"kernel of degree {self.form_degree} needs shape {shape}, got {v.shape}")
        if self.form_degree in (2, "2s"):
            sign = -1 if self.form_degree == 2 else 1
            defect = np.abs(v - sign * v.swapaxes(0, 1)).max(initial=0.0)
            if defect > 1e-9 * max(1.0, np.abs(v).max(initial=0.0)):
                raise FoliationError("2-tensor kernel lacks the required (anti)symmetry")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def ncomp_axes(self) -> int:
        return COMPONENT_AXES[self.form_degree]

    def flat(self) -> np.ndarray:
        """View with shape (components..., X, X, Y)."""
        m = self.model
        return self.values.reshape(self.values.shape[: self.ncomp_axes] + (m.X, m.X, m.Y))

    def _like(self, values, form_degree=None) -> GroupoidKernel:
        deg = self.form_degree if form_degree is None else form_degree
        return GroupoidKernel(self.model, values, deg)

    def _check(self, other):
        if not isinstance(other, GroupoidKernel):
            raise TypeError("expected a GroupoidKernel")
        self.model.check_same(other.model)
        if other.form_degree != self.form_degree:
            raise FoliationError("kernels have different form degrees")

    def __add__(self, other):
        self._check(other)
        return self._like(self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return self._like(self.values - other.values)

    def __neg__(self):
        return self._like(-self.values)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return self._like(self.values * scalar)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.abs(self.values).max(initial=0.0))

    @classmethod
    def zero(cls, model, form_degree=0):
        shape = (model.q,) * COMPONENT_AXES[form_degree] + model.kernel_shape
        return cls(model, np.zeros(shape, dtype=complex), form_degree)


def _from_flat(model: FoliatedTorusModel, flat: np.ndarray, form_degree=0) -> GroupoidKernel:
    lead = flat.shape[: flat.ndim - 3]
    return GroupoidKernel(model, flat.reshape(lead + model.kernel_shape), form_degree)


def _m_flat(model: FoliatedTorusModel, a: np.ndarray) -> np.ndarray:
    """Function(s) on M reshaped to (..., X, Y)."""
    lead = a.shape[: a.ndim - model.p - model.q]
    return np.asarray(a).reshape(lead + (model.X, model.Y))


def random_kernel(
    model: FoliatedTorusModel,
    rng: np.random.Generator,
    x_modes: int | None = None,
    y_modes: int = 2,
    hermitian: bool = False,
) -> GroupoidKernel:
    """Band-limited random scalar kernel with Fourier modes |k| <= x_modes in
    every leaf direction (default n_x // 4) and |k| <= y_modes in every base
    direction.  The coefficients depend only on the seed and the mode limits,
    so the same function is sampled on every grid."""
    x_modes = model.n_x // 4 if x_modes is None else x_modes
    if 2 * x_modes >= model.n_x or 2 * y_modes >= model.n_y:
        raise FoliationError("mode limits must stay below the Nyquist frequency")
    p, q = model.p, model.q
    kx = np.arange(-x_modes, x_modes + 1)
    ky = np.arange(-y_modes, y_modes + 1)
    mode_shape = (kx.size,) * (2 * p) + (ky.size,) * q
    count = int(np.prod(mode_shape))
    coeffs = (rng.standard_normal(mode_shape) + 1j * rng.standard_normal(mode_shape)) / math.sqrt(count)
    ex = np.exp(TWO_PI * 1j * np.outer(np.arange(model.n_x) / model.n_x, kx))
    ey = np.exp(TWO_PI * 1j * np.outer(np.arange(model.n_y) / model.n_y, ky))
    values = coeffs
    # contract each mode axis with its synthesis matrix; tensordot moves the
    # new grid axis to the end, so after 2p+q steps the order is restored
    for axis_kind in ["x"] * (2 * p) + ["y"] * q:
        values = np.tensordot(values, ex if axis_kind == "x" else ey, axes=([0], [1]))
    k = GroupoidKernel(model, values)
    return involution(k) * 0.5 + k * 0.5 if hermitian else k


def random_base_function(model, rng: np.random.Generator, y_modes: int = 2) -> BaseFunction:
    ky = np.arange(-y_modes, y_modes + 1)
    mode_shape = (ky.size,) * model.q
    coeffs = rng.standard_normal(mode_shape) + 1j * rng.standard_normal(mode_shape)
    coeffs = (coeffs + np.conj(coeffs[(slice(None, None, -1),) * model.q])) / (2 * math.sqrt(coeffs.size))
    ey = np.exp(TWO_PI * 1j * np.outer(np.arange(model.n_y) / model.n_y, ky))
    values = coeffs
    for _ in range(model.q):
        values = np.tensordot(values, ey, axes=([0], [1]))
    return BaseFunction(model, values.real)


# --- algebra -----------------------------------------------------------------------


def _conv_flat(a: np.ndarray, b: np.ndarray, fw: np.ndarray) -> np.ndarray:
    """sum_s a[x, s, y] b[s, x', y] fw[s, y] for (X, X, Y) arrays."""
    # batched matmul is only fast on contiguous (Y, X, X) stacks
    A = np.ascontiguousarray(np.moveaxis(a, -1, 0)) * fw.T[:, None, :]
    B = np.ascontiguousarray(np.moveaxis(b, -1, 0))
    return np.moveaxis(A @ B, 0, -1)


def _weights(model) -> np.ndarray:
    return _m_flat(model, model.density) * model.quadrature_weight


def convolve(k1: GroupoidKernel, k2: GroupoidKernel) -> GroupoidKernel:
    """(k1 * k2)(x, x', y) = int k1(x, s, y) k2(s, x', y) f(s, y) ds."""
    k1.model.check_same(k2.model)
    if k1.form_degree != 0 or k2.form_degree != 0:
        raise FoliationError("convolve takes scalar kernels; use wedge_convolve for forms")
    m = k1.model
    return _from_flat(m, _conv_flat(k1.flat(), k2.flat(), _weights(m)))


def involution(k: GroupoidKernel) -> GroupoidKernel:
    """k*(x, x', y) = conj k(x', x, y)."""
    flat = k.flat()
    return _from_flat(k.model, np.conj(np.swapaxes(flat, -3, -2)), k.form_degree)


def left_action(a: FunctionOnM, k: GroupoidKernel) -> GroupoidKernel:
    """(a . k)(x, x', y) = a(x, y) k(x, x', y)."""
    af = _m_flat(k.model, as_m_function(k.model, a))
    return _from_flat(k.model, af[:, None, :] * k.flat(), k.form_degree)


def right_action(k: GroupoidKernel, a: FunctionOnM) -> GroupoidKernel:
    """(k . a)(x, x', y) = a(x', y) k(x, x', y)."""
    af = _m_flat(k.model, as_m_function(k.model, a))
    return _from_flat(k.model, af[None, :, :] * k.flat(), k.form_degree)


def _component_pairs(deg1, deg2):
    return COMPONENT_AXES[deg1], COMPONENT_AXES[deg2]


def wedge_convolve(w1: GroupoidKernel, w2: GroupoidKernel) -> GroupoidKernel:
    """Convolution of form-valued kernels followed by the wedge of components.

    Degrees add; the total must be at most 2.  For two 1-forms the result is
    the antisymmetric 2-form (w1 ^ w2)_jl = w1_j * w2_l - w1_l * w2_j.
    """
    m = w1.model
    m.check_same(w2.model)
    if "2s" in (w1.form_degree, w2.form_degree):
        raise FoliationError("symmetric tensors do not wedge")
    d1, d2 = w1.form_degree, w2.form_degree
    if d1 + d2 > 2:
        raise FoliationError(f"wedge of degrees {d1} and {d2} exceeds the top degree 2 handled here")
    fw = _weights(m)
    a, b = w1.flat(), w2.flat()
    if d1 == 0 and d2 == 0:
        return _from_flat(m, _conv_flat(a, b, fw))
    if d1 == 0:
        out = np.array([_conv_flat(a, b[idx], fw) for idx in np.ndindex(b.shape[:d2])])
        return _from_flat(m, out.reshape(b.shape), d2)
    if d2 == 0:
        out = np.array([_conv_flat(a[idx], b, fw) for idx in np.ndindex(a.shape[:d1])])
        return _from_flat(m, out.reshape(a.shape), d1)
    q = m.q
    prod = np.empty((q, q) + a.shape[1:], dtype=complex)
    for j, l in itertools.product(range(q), repeat=2):
        prod[j, l] = _conv_flat(a[j], b[l], fw)
    return _from_flat(m, prod - prod.swapaxes(0, 1), 2)


def lambda_contract(w1: GroupoidKernel, w2: GroupoidKernel) -> GroupoidKernel:
    """Lambda(w1, w2) = sum_jl Lambda^jl w1_j * w2_l for 1-form kernels."""
    m = w1.model
    m.check_same(w2.model)
    if w1.form_degree != 1 or w2.form_degree != 1:
        raise FoliationError("Lambda pairs two 1-form kernels")
    fw = _weights(m)
    a, b = w1.flat(), w2.flat()
    out = np.zeros(a.shape[1:], dtype=complex)
    for j, l in zip(*np.nonzero(m.lam)):
        out += m.lam[j, l] * _conv_flat(a[j], b[l], fw)
    return _from_flat(m, out)


# --- transverse calculus ---------------------------------------------------------------


def mean_curvature_form(model: FoliatedTorusModel) -> np.ndarray:
    """kappa_j = d log f / d y_j, shape (q,) + m_shape."""
    if not np.all(model.density > 0):
        raise FoliationError("density must be positive")
    log_f = np.log(model.density)
    return np.array([dy(log_f, j, model.q) for j in range(model.q)])


def _half_kappa_sum(model) -> np.ndarray:
    """1/2 (kappa_j(x, y) + kappa_j(x', y)) with shape (q, X, X, Y)."""
    kf = _m_flat(model, mean_curvature_form(model))
    return 0.5 * (kf[:, :, None, :] + kf[:, None, :, :])


def _corrected_partials(k: GroupoidKernel) -> np.ndarray:
    """D_j applied to every component: d/dy_j + 1/2 (kappa_j(r) + kappa_j(s)).

    Returns shape (q,) + k.values.shape with the new index first.
    """
    m = k.model
    hk = _half_kappa_sum(m).reshape((m.q,) + m.kernel_shape)
    return np.array([dy(k.values, j, m.q) + hk[j] * k.values for j in range(m.q)])


def transverse_differential(k: GroupoidKernel) -> GroupoidKernel:
    """D_H: scalar kernels to 1-form kernels, 1-form kernels to 2-form kernels.

    On scalars (D_H k)_j = d_j k + 1/2 (kappa_j(x, y) + kappa_j(x', y)) k; on
    1-forms (D_H w)_jl = D_j w_l - D_l w_j.
    """
    parts = _corrected_partials(k)
    if k.form_degree == 0:
        return k._like(parts, 1)
    if k.form_degree == 1:
        return k._like(parts - parts.swapaxes(0, 1), 2)
    raise FoliationError("D_H is implemented on scalar and 1-form kernels")


def covariant_derivative(w: GroupoidKernel) -> np.ndarray:
    """Full tensor (nabla w)_jl = D_j w_l of a 1-form kernel (flat connection)."""
    if w.form_degree != 1:
        raise FoliationError("covariant derivative acts on 1-form kernels")
    return _corrected_partials(w)


def second_transverse_differential(k: GroupoidKernel, symmetrize: bool = True) -> GroupoidKernel:
    """D^2 k = nabla(D_H k), symmetric in its two indices."""
    t = covariant_derivative(transverse_differential(k))
    if symmetrize:
        t = 0.5 * (t + t.swapaxes(0, 1))
    return k._like(t, "2s")


def second_differential_asymmetry(k: GroupoidKernel) -> float:
    t = covariant_derivative(transverse_differential(k))
    return float(np.abs(t - t.swapaxes(0, 1)).max())


# --- Poisson structure ---------------------------------------------------------------------


def poisson_bracket_kernels(k1: GroupoidKernel, k2: GroupoidKernel) -> GroupoidKernel:
    """Pi_H(k1, k2) = Lambda(D_H k1, D_H k2)."""
    return lambda_contract(transverse_differential(k1), transverse_differential(k2))


WITNESS_NORMALIZATION = -0.5


def witness_kernels(k1: GroupoidKernel, k2: GroupoidKernel, normalization: float = WITNESS_NORMALIZATION) -> GroupoidKernel:
    """normalization * sum Lambda^jl Lambda^mn (D^2 k1)_jm * (D^2 k2)_ln.

    The scale -1/2 is the one for which the Jacobi rule holds; it matches the
    constant found for the classical pairing and for the torus witness.
    """
    m = k1.model
    m.check_same(k2.model)
    a = second_transverse_differential(k1).flat()
    b = second_transverse_differential(k2).flat()
    fw = _weights(m)
    lam = m.lam
    out = np.zeros(a.shape[2:], dtype=complex)
    nz = list(zip(*np.nonzero(lam)))
    for (j, l), (mm, n) in itertools.product(nz, nz):
        out += lam[j, l] * lam[mm, n] * _conv_flat(a[j, mm], b[l, n], fw)
    return _from_flat(m, normalization * out)


@dataclass(frozen=True, eq=False)
class EnlargedElement:
    """k + a in the unital algebra C_c(G) + C(M)."""

    model: FoliatedTorusModel
    kernel: GroupoidKernel
    function: np.ndarray

    @classmethod
    def of(cls, model, kernel: GroupoidKernel | None = None, function: FunctionOnM | None = None):
        k = GroupoidKernel.zero(model) if kernel is None else kernel
        a = np.zeros(model.m_shape) if function is None else np.array(as_m_function(model, function))
        return cls(model, k, a)

    def __add__(self, other):
        return EnlargedElement(self.model, self.kernel + other.kernel, self.function + other.function)

    def __sub__(self, other):
        return EnlargedElement(self.model, self.kernel - other.kernel, self.function - other.function)

    def __mul__(self, other):
        if isinstance(other, EnlargedElement):
            return enlarged_product(self, other)
        if np.isscalar(other):
            return EnlargedElement(self.model, self.kernel * other, self.function * other)
        return NotImplemented

    __rmul__ = __mul__

    def norm(self) -> float:
        return max(self.kernel.norm(), float(np.abs(self.function).max(initial=0.0)))


def enlarged_product(e1: EnlargedElement, e2: EnlargedElement) -> EnlargedElement:
    """(k1 + a1)(k2 + a2) = k1*k2 + a1.k2 + k1.a2 + a1 a2."""
    k = convolve(e1.kernel, e2.kernel) + left_action(e1.function, e2.kernel) + right_action(e1.kernel, e2.function)
    return EnlargedElement(e1.model, k, e1.function * e2.function)


def extended_bracket(e1: EnlargedElement, e2: EnlargedElement) -> EnlargedElement:
    """Pi_H on the unital algebra.

    Pi_H(k1 + a1, k2 + a2) = Pi_H(k1, k2) + Lambda(d_H a1, D_H k2)
        + Lambda(D_H k1, d_H a2) + Lambda(d_H a1, d_H a2),
    with d_H a1 taken at the range (x, y) and d_H a2 at the source (x', y).
    """
    m = e1.model
    lam = m.lam
    dk1 = transverse_differential(e1.kernel).flat()
    dk2 = transverse_differential(e2.kernel).flat()
    da1 = _m_flat(m, transverse_function_differential(m, e1.function))
    da2 = _m_flat(m, transverse_function_differential(m, e2.function))
    kernel = poisson_bracket_kernels(e1.kernel, e2.kernel).flat().copy()
    func = np.zeros((m.X, m.Y), dtype=np.result_type(da1, da2))
    for j, l in zip(*np.nonzero(lam)):
        kernel += lam[j, l] * da1[j][:, None, :] * dk2[l]
        kernel += lam[j, l] * dk1[j] * da2[l][None, :, :]
        func = func + lam[j, l] * da1[j] * da2[l]
    return EnlargedElement(m, _from_flat(m, kernel), func.reshape(m.m_shape))


# --- Hamiltonian flows ---------------------------------------------------------------------


class HamiltonianField(NamedTuple):
    """Base vector field v_h^l = sum_j Lambda^jl d_j h, shape (q,) + y_shape.

    Its lift to the groupoid has no leafwise components."""

    model: FoliatedTorusModel
    components: np.ndarray

    def apply(self, a: FunctionOnM) -> np.ndarray:
        """v_h(a) for a function on M."""
        da = transverse_function_differential(self.model, a)
        m = self.model
        v = np.broadcast_to(self.components[(slice(None),) + (None,) * m.p], (m.q,) + m.m_shape)
        return np.einsum("l...,l...->...", v, da)


def _require_leafwise_constant(model, h: FunctionOnM) -> BaseFunction:
    if isinstance(h, BaseFunction):
        return h
    h = np.asarray(h)
    if h.shape == model.y_shape:
        return BaseFunction(model, h)
    h = as_m_function(model, h)
    first = h[(0,) * model.p]
    if np.abs(h - first).max() > 1e-12 * max(1.0, np.abs(h).max()):
        raise FoliationError("Hamiltonian must be constant along the leaves")
    return BaseFunction(model, first)


def hamiltonian_field(h: BaseFunction) -> HamiltonianField:
    m = h.model
    dh = h.differential()
    return HamiltonianField(m, np.einsum("jl,j...->l...", m.lam, dh))


def lie_derivative_operator(h: BaseFunction, k: GroupoidKernel) -> GroupoidKernel:
    """L_{v_h} k = sum_l v^l d_l k + 1/2 sum_l v^l (kappa_l(x, y) + kappa_l(x', y)) k."""
    m = k.model
    h = _require_leafwise_constant(m, h)
    v = hamiltonian_field(h).components.reshape(m.q, m.Y)
    kf = k.flat()
    transport = sum(v[l] * dy(k.values, l, m.q).reshape(kf.shape) for l in range(m.q))
    hk = _half_kappa_sum(m)
    weight = sum(v[l] * hk[l] for l in range(m.q))
    return _from_flat(m, transport + weight * kf)


def check_lemma(h: BaseFunction, a: FunctionOnM) -> float:
    """sup |Lambda(d_H h, d_H a) - v_h(a)| over the grid of M."""
    m = h.model
    dh = transverse_function_differential(m, h)
    da = transverse_function_differential(m, a)
    lhs = np.einsum("jl,j...,l...->...", m.lam, dh, da)
    rhs = hamiltonian_field(h).apply(a)
    return float(np.abs(lhs - rhs).max())


class TheoremReport(NamedTuple):
    residual: float
    function_residual: float
    grid: tuple[int, int]
    tolerance: float

    @property
    def passed(self) -> bool:
        return max(self.residual, self.function_residual) <= self.tolerance

    def as_dict(self) -> dict:
        return {
            "residual": self.residual,
            "function_residual": self.function_residual,
            "grid": list(self.grid),
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def hamiltonian_derivation(h: FunctionOnM, e: EnlargedElement) -> EnlargedElement:
    """X_h(e) = 1/2 (Pi(h, e) - Pi(e, h)) for leafwise-constant h."""
    m = e.model
    hb = _require_leafwise_constant(m, h)
    he = EnlargedElement.of(m, function=hb)
    return (extended_bracket(he, e) - extended_bracket(e, he)) * 0.5


def check_main_theorem(h: FunctionOnM, k: GroupoidKernel, a: FunctionOnM | None = None, tol: float = 1e-9) -> TheoremReport:
    """Compare X_h(k + a) with L_{v_h} k + v_h(a)."""
    m = k.model
    hb = _require_leafwise_constant(m, h)
    a_arr = np.zeros(m.m_shape) if a is None else as_m_function(m, a)
    xh = hamiltonian_derivation(hb, EnlargedElement.of(m, k, a_arr))
    kernel_res = (xh.kernel - lie_derivative_operator(hb, k)).norm()
    func_res = float(np.abs(xh.function - hamiltonian_field(hb).apply(a_arr)).max())
    return TheoremReport(kernel_res, func_res, (m.n_x, m.n_y), tol)


# --- residual helpers used by the verification suites ----------------------------------


def leibniz_residual(k1: GroupoidKernel, k2: GroupoidKernel) -> float:
    """sup |D_H(k1*k2) - D_H k1 * k2 - k1 * D_H k2|."""
    lhs = transverse_differential(convolve(k1, k2))
    rhs = wedge_convolve(transverse_differential(k1), k2) + wedge_convolve(k1, transverse_differential(k2))
    return (lhs - rhs).norm()


def associativity_residual(k1, k2, k3) -> float:
    return (convolve(convolve(k1, k2), k3) - convolve(k1, convolve(k2, k3))).norm()


def involution_residual(k1, k2) -> float:
    return (involution(convolve(k1, k2)) - convolve(involution(k2), involution(k1))).norm()


def p1_residual(k1, k2, k3) -> float:
    pi = poisson_bracket_kernels
    total = (
        convolve(k1, pi(k2, k3))
        - pi(convolve(k1, k2), k3)
        + pi(k1, convolve(k2, k3))
        - convolve(pi(k1, k2), k3)
    )
    return total.norm()


def p2_residual(k1, k2, k3, normalization: float = WITNESS_NORMALIZATION) -> float:
    pi = poisson_bracket_kernels

    def w(u, v):
        return witness_kernels(u, v, normalization)

    lhs = pi(k1, pi(k2, k3)) - pi(pi(k1, k2), k3)
    rhs = convolve(k1, w(k2, k3)) - w(convolve(k1, k2), k3) + w(k1, convolve(k2, k3)) - convolve(w(k1, k2), k3)
    return (lhs - rhs).norm()


def extended_p1_residual(e1: EnlargedElement, e2: EnlargedElement, e3: EnlargedElement) -> float:
    pi = extended_bracket
    total = e1 * pi(e2, e3) - pi(e1 * e2, e3) + pi(e1, e2 * e3) - pi(e1, e2) * e3
    return total.norm()


# --- I/O -----------------------------------------------------------------------------------


def _index_columns(model: FoliatedTorusModel, with_x: bool, primed: bool) -> list[str]:
    xs = ["ix"] if model.p == 1 else [f"ix{i + 1}" for i in range(model.p)]
    ys = ["iy"] if model.q == 1 else [f"iy{j + 1}" for j in range(model.q)]
    if not with_x:
        return ys
    return xs + ([c + "'" for c in xs] if primed else []) + ys


def dump_kernel_csv(k: GroupoidKernel, path: str | Path) -> None:
    """Columns: optional component index, ix, ix', iy..., re, im."""
    lead = k.ncomp_axes
    header = (["comp"] if lead else []) + _index_columns(k.model, True, True) + ["re", "im"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for idx in np.ndindex(k.values.shape):
            z = k.values[idx]
            comp = ["".join(str(i + 1) for i in idx[:lead])] if lead else []
            writer.writerow(comp + list(idx[lead:]) + [repr(float(z.real)), repr(float(z.imag))])


def dump_field_csv(model: FoliatedTorusModel, values: np.ndarray, path: str | Path, names: tuple[str, ...] | None = None) -> None:
    """Real grid function(s) on M, or on the base, as CSV with integer grid indices.

    ``values`` has shape m_shape or y_shape, optionally with one leading
    axis stacking several fields (named by ``names``).
    """
    values = np.asarray(values)
    on_m = values.shape[values.ndim - model.p - model.q :] == model.m_shape if values.ndim >= model.p + model.q else False
    grid_shape = model.m_shape if on_m else model.y_shape
    if values.shape[values.ndim - len(grid_shape) :] != grid_shape:
        raise FoliationError("field shape matches neither M nor the base grid")
    stack = values.reshape((-1,) + grid_shape)
    names = tuple(names) if names else tuple(f"field{i + 1}" for i in range(stack.shape[0]))
    if len(names) != stack.shape[0]:
        raise FoliationError("one name per stacked field is required")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_index_columns(model, on_m, False) + list(names))
        for idx in np.ndindex(grid_shape):
            writer.writerow(list(idx) + [repr(float(np.real(stack[(c,) + idx]))) for c in range(stack.shape[0])])
