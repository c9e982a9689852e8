"""Classical Poisson geometry on R^d, evaluated pointwise.

Scalar fields, bivector fields and connections are plain callables of a point
``x`` (a 1-d array).  Derivatives are fourth-order central differences with
step ``h``.  Index conventions:

    {f, g} = sum_ij L[i, j] d_i f d_j g
    X_f^j  = sum_i L[i, j] d_i f            so that X_f g = {f, g}
    (nabla^2 f)_ij = d_i d_j f - sum_k G[k, i, j] d_k f
    <L x L, a x b> = sum L[i, j] L[k, l] a[i, k] b[j, l]
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np
from scipy.stats import qmc

ScalarField = Callable[[np.ndarray], float]
BivectorField = Callable[[np.ndarray], np.ndarray]
Connection = Callable[[np.ndarray], np.ndarray]
VectorField = Callable[[np.ndarray], np.ndarray]

DEFAULT_STEP = 1e-3
_STENCIL = ((-2, 1.0 / 12), (-1, -8.0 / 12), (1, 8.0 / 12), (2, -1.0 / 12))


class ClassicalError(ValueError):
    pass


class FlowError(RuntimeError):
    pass


def partial(f: ScalarField, x: np.ndarray, i: int, h: float = DEFAULT_STEP):
    x = np.asarray(x, dtype=float)
    total = 0.0
    for shift, w in _STENCIL:
        xs = x.copy()
        xs[i] += shift * h
        total = total + w * f(xs)
    return total / h


def gradient(f: ScalarField, x: np.ndarray, h: float = DEFAULT_STEP) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.array([partial(f, x, i, h) for i in range(x.size)])


def second_partials(f: ScalarField, x: np.ndarray, h: float = DEFAULT_STEP) -> np.ndarray:
    """Matrix of d_i d_j f, fourth order (mixed terms by nested stencils)."""
    x = np.asarray(x, dtype=float)
    d = x.size
    out = np.empty((d, d), dtype=np.result_type(f(x), float))
    f0 = f(x)
    for i in range(d):
        xs = [x.copy() for _ in range(4)]
        for xx, s in zip(xs, (-2, -1, 1, 2)):
            xx[i] += s * h
        fm2, fm1, fp1, fp2 = (f(xx) for xx in xs)
        out[i, i] = (-fp2 + 16 * fp1 - 30 * f0 + 16 * fm1 - fm2) / (12 * h * h)
        for j in range(i):
            out[i, j] = out[j, i] = partial(lambda y: partial(f, y, j, h), x, i, h)
    return out


def _check_dims(x, lam):
    if lam.shape != (x.size, x.size):
        raise ClassicalError(f"bivector of shape {lam.shape} at a point of dimension {x.size}")


def poisson_bracket(f: ScalarField, g: ScalarField, lam: BivectorField, h: float = DEFAULT_STEP) -> ScalarField:
    def bracket(x):
        x = np.asarray(x, dtype=float)
        L = np.asarray(lam(x))
        _check_dims(x, L)
        return gradient(f, x, h) @ L @ gradient(g, x, h)

    return bracket


def schouten_jacobiator(lam: BivectorField, h: float = DEFAULT_STEP):
    """Returns J(i, j, k, x) = sum_a (L^ai d_a L^jk + L^aj d_a L^ki + L^ak d_a L^ij)."""

    def jac(i: int, j: int, k: int, x) -> float:
        x = np.asarray(x, dtype=float)
        L = np.asarray(lam(x))
        _check_dims(x, L)
        d = x.size
        if not all(0 <= t < d for t in (i, j, k)):
            raise ClassicalError(f"indices {(i, j, k)} out of range for dimension {d}")
        # dL[a] = d_a L
        dL = np.array([partial(lam, x, a, h) for a in range(d)])
        return float(
            L[:, i] @ dL[:, j, k] + L[:, j] @ dL[:, k, i] + L[:, k] @ dL[:, i, j]
        )

    return jac


def max_jacobiator(lam: BivectorField, points: np.ndarray, h: float = DEFAULT_STEP) -> float:
    jac = schouten_jacobiator(lam, h)
    d = points.shape[1]
    triples = [(i, j, k) for i in range(d) for j in range(i + 1, d) for k in range(j + 1, d)]
    return max((abs(jac(*t, x)) for x in points for t in triples), default=0.0)


def hamiltonian_vector_field(f: ScalarField, lam: BivectorField, h: float = DEFAULT_STEP) -> VectorField:
    def field_(x):
        x = np.asarray(x, dtype=float)
        L = np.asarray(lam(x))
        _check_dims(x, L)
        return gradient(f, x, h) @ L

    return field_


def apply_vector_field(X: VectorField, g: ScalarField, h: float = DEFAULT_STEP) -> ScalarField:
    return lambda x: X(x) @ gradient(g, x, h)


class FlowResult(NamedTuple):
    times: np.ndarray
    states: np.ndarray
    drift: float | None


def integrate_flow(
    X: VectorField,
    x0,
    T: float,
    dt: float,
    conserved: ScalarField | None = None,
    record_every: int = 1,
) -> FlowResult:
    """Classical Runge-Kutta 4 on [0, T]; dt is shrunk so that T is hit exactly.

    ``drift`` is the largest relative deviation of ``conserved`` from its
    initial value along the recorded trajectory.
    """
    if dt <= 0:
        raise FlowError("time step must be positive")
    steps = max(1, int(np.ceil(T / dt - 1e-12)))
    dt = T / steps
    x = np.array(x0, dtype=float)
    times, states = [0.0], [x.copy()]
    for n in range(1, steps + 1):
        k1 = X(x)
        k2 = X(x + 0.5 * dt * k1)
        k3 = X(x + 0.5 * dt * k2)
        k4 = X(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise FlowError(f"non-finite state at step {n}")
        if n % record_every == 0 or n == steps:
            times.append(n * dt)
            states.append(x.copy())
    states = np.array(states)
    drift = None
    if conserved is not None:
        values = np.array([conserved(s) for s in states])
        ref = max(abs(values[0]), 1e-300)
        drift = float(np.abs(values - values[0]).max() / ref)
    return FlowResult(np.array(times), states, drift)


def _check_torsion(G: np.ndarray, tol: float = 1e-12):
    if np.abs(G - G.transpose(0, 2, 1)).max(initial=0.0) > tol * max(1.0, np.abs(G).max(initial=0.0)):
        raise ClassicalError("connection has torsion")


def hessian_with_connection(f: ScalarField, gamma: Connection, h: float = DEFAULT_STEP):
    """x -> nabla^2 f at x, with gamma(x)[k, i, j] the Christoffel symbol G^k_ij."""

    def hess(x):
        x = np.asarray(x, dtype=float)
        G = np.asarray(gamma(x))
        _check_torsion(G)
        H = second_partials(f, x, h) - np.einsum("kij,k->ij", G, gradient(f, x, h))
        if np.abs(H - H.T).max() > 1e-9 * max(1.0, np.abs(H).max()):
            raise ClassicalError("Hessian is not symmetric")
        return H

    return hess


def flat_connection(d: int) -> Connection:
    zero = np.zeros((d, d, d))
    return lambda x: zero


def classical_pi1(
    f: ScalarField,
    g: ScalarField,
    lam: BivectorField,
    gamma: Connection,
    h: float = DEFAULT_STEP,
    normalization: float = 1.0,
) -> ScalarField:
    """normalization * <L x L, nabla^2 f x nabla^2 g>."""
    hf = hessian_with_connection(f, gamma, h)
    hg = hessian_with_connection(g, gamma, h)

    def pi1(x):
        L = np.asarray(lam(x))
        return normalization * np.einsum("ij,kl,ik,jl->", L, L, hf(x), hg(x))

    return pi1


class P2Fit(NamedTuple):
    """Jacobi rule for the classical bracket against b(pi1) with a fitted scale.

    ``normalization`` is the least-squares constant c in
    LHS = c * b(<L x L, nabla^2 . x nabla^2 .>); ``residual`` is the sup of the
    remaining defect and ``unscaled_residual`` the defect at c = 1.
    """

    normalization: float
    residual: float
    unscaled_residual: float


def p2_defect_terms(f, g, k, lam, gamma, x, h: float = DEFAULT_STEP):
    """Returns (LHS, b(Pi1)) at x with Pi1 at unit normalization."""
    br = lambda u, v: poisson_bracket(u, v, lam, h)  # noqa: E731
    p1 = lambda u, v: classical_pi1(u, v, lam, gamma, h)  # noqa: E731
    lhs = br(f, br(g, k))(x) - br(br(f, g), k)(x)
    fg = lambda y: f(y) * g(y)  # noqa: E731
    gk = lambda y: g(y) * k(y)  # noqa: E731
    rhs = f(x) * p1(g, k)(x) - p1(fg, k)(x) + p1(f, gk)(x) - p1(f, g)(x) * k(x)
    return lhs, rhs


def fit_p2_normalization(f, g, k, lam, gamma, points, h: float = DEFAULT_STEP) -> P2Fit:
    pairs = np.array([p2_defect_terms(f, g, k, lam, gamma, x, h) for x in points])
    lhs, rhs = pairs[:, 0], pairs[:, 1]
    c = float(np.real(np.vdot(rhs, lhs) / np.vdot(rhs, rhs)))
    return P2Fit(c, float(np.abs(lhs - c * rhs).max()), float(np.abs(lhs - rhs).max()))


def sample_points(d: int, n: int = 100, seed: int = 0, scale: float = 1.0) -> np.ndarray:
    """n scrambled-Halton points in [-scale, scale]^d."""
    pts = qmc.Halton(d=d, scramble=True, seed=seed).random(n)
    return scale * (2.0 * pts - 1.0)


# --- built-in library --------------------------------------------------------

_CANONICAL_2D = np.array([[0.0, 1.0], [-1.0, 0.0]])


def canonical_bivector(d: int = 2) -> BivectorField:
    """Darboux bivector with L[2i, 2i+1] = 1."""
    if d % 2:
        raise ClassicalError("canonical bivector needs even dimension")
    L = np.zeros((d, d))
    for i in range(0, d, 2):
        L[i, i + 1], L[i + 1, i] = 1.0, -1.0
    return lambda x: L


def so3_bivector(x) -> np.ndarray:
    """Lie-Poisson bivector on so(3)*: L[i, j] = sum_k eps_ijk x_k."""
    x1, x2, x3 = x
    return np.array([[0.0, x3, -x2], [-x3, 0.0, x1], [x2, -x1, 0.0]])


@dataclass(frozen=True)
class ClassicalSystem:
    name: str
    dim: int
    bivector: BivectorField
    hamiltonian: ScalarField
    conserved: dict[str, ScalarField] = field(default_factory=dict)

    def vector_field(self, h: float = DEFAULT_STEP) -> VectorField:
        return hamiltonian_vector_field(self.hamiltonian, self.bivector, h)


def polynomial(terms: list[dict]) -> ScalarField:
    """Polynomial from [{"coeff": c, "powers": [p1, ..., pd]}, ...]."""
    coeffs = np.array([t["coeff"] for t in terms], dtype=float)
    powers = np.array([t["powers"] for t in terms], dtype=float)
    return lambda x: float(coeffs @ np.prod(np.asarray(x, dtype=float) ** powers, axis=1))


def user_polynomial_system(spec: dict | str | Path) -> ClassicalSystem:
    """Polynomial Hamiltonian on a Darboux space from JSON
    ``{"dim": d, "terms": [{"coeff": c, "powers": [...]}, ...]}``."""
    if isinstance(spec, (str, Path)):
        spec = json.loads(Path(spec).read_text())
    d = int(spec.get("dim", 2))
    ham = polynomial(spec["terms"])
    return ClassicalSystem("userpolynomial", d, canonical_bivector(d), ham, {"energy": ham})


def _harmonic():
    ham = lambda x: 0.5 * (x[0] ** 2 + x[1] ** 2)  # noqa: E731
    return ClassicalSystem("harmonic", 2, canonical_bivector(2), ham, {"energy": ham})


def _so3star():
    ham = lambda x: x[2]  # noqa: E731
    casimir = lambda x: float(np.dot(x, x))  # noqa: E731
    return ClassicalSystem("so3star", 3, so3_bivector, ham, {"casimir": casimir, "energy": ham})


def _canonical2d():
    ham = lambda x: np.sin(x[0]) + 0.5 * x[1] ** 2  # noqa: E731
    return ClassicalSystem("canonical2d", 2, canonical_bivector(2), ham, {"energy": ham})


def _zero():
    ham = lambda x: 0.0  # noqa: E731
    return ClassicalSystem("zero", 2, canonical_bivector(2), ham, {})


BUILTIN_SYSTEMS: dict[str, Callable[[], ClassicalSystem]] = {
    "canonical2d": _canonical2d,
    "so3star": _so3star,
    "harmonic": _harmonic,
    "zero": _zero,
}


def get_system(name: str, user_spec: dict | str | Path | None = None) -> ClassicalSystem:
    if name == "userpolynomial":
        if user_spec is None:
            raise ClassicalError("userpolynomial needs a JSON coefficient spec")
        return user_polynomial_system(user_spec)
    try:
        return BUILTIN_SYSTEMS[name]()
    except KeyError:
        raise ClassicalError(f"unknown system {name!r}") from None
