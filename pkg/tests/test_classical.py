import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncpoisson.classical import (
    ClassicalError,
    FlowError,
    apply_vector_field,
    canonical_bivector,
    classical_pi1,
    fit_p2_normalization,
    flat_connection,
    get_system,
    gradient,
    hamiltonian_vector_field,
    hessian_with_connection,
    integrate_flow,
    max_jacobiator,
    partial,
    poisson_bracket,
    sample_points,
    schouten_jacobiator,
    second_partials,
    so3_bivector,
)

CAN = canonical_bivector(2)
X1 = lambda x: x[0]  # noqa: E731
X2 = lambda x: x[1]  # noqa: E731
X3 = lambda x: x[2]  # noqa: E731


def test_canonical_bracket_of_coordinates():
    assert abs(poisson_bracket(X1, X2, CAN)(np.array([0.3, -0.7])) - 1.0) <= 1e-12


def test_so3_bracket():
    x = np.array([0.4, -1.1, 0.6])
    assert abs(poisson_bracket(X1, X2, so3_bivector)(x) - x[2]) <= 1e-10
    assert abs(poisson_bracket(X2, X3, so3_bivector)(x) - x[0]) <= 1e-10


def test_bracket_against_analytic_gradients():
    f = lambda x: math.sin(x[0]) * x[1] ** 2  # noqa: E731
    g = lambda x: math.exp(x[0] - x[1])  # noqa: E731
    x = np.array([0.2, 0.5])
    df = np.array([math.cos(x[0]) * x[1] ** 2, 2 * math.sin(x[0]) * x[1]])
    dg = math.exp(x[0] - x[1]) * np.array([1.0, -1.0])
    assert abs(poisson_bracket(f, g, CAN)(x) - (df[0] * dg[1] - df[1] * dg[0])) <= 1e-9


def test_schouten_vanishes_for_poisson_bivectors():
    pts = sample_points(3, 20, seed=3)
    assert max_jacobiator(so3_bivector, pts) <= 1e-9
    assert max_jacobiator(canonical_bivector(4), sample_points(4, 10)) <= 1e-12
    # in 2D every bivector is Poisson; triples are empty
    lam = lambda x: np.array([[0.0, x[0]], [-x[0], 0.0]])  # noqa: E731
    assert max_jacobiator(lam, sample_points(2, 10)) == 0


def test_schouten_detects_non_poisson_bivector():
    # L^12 = x3, L^13 = x1 (others zero) fails Jacobi
    def lam(x):
        L = np.zeros((3, 3))
        L[0, 1], L[0, 2] = x[2], x[0]
        return L - L.T

    jac = schouten_jacobiator(lam)
    assert abs(jac(0, 1, 2, np.array([0.5, 0.2, 0.3]))) > 0.1
    with pytest.raises(ClassicalError):
        jac(0, 1, 5, np.zeros(3))


def test_hamiltonian_vector_field():
    ham = lambda x: 0.5 * (x[0] ** 2 + x[1] ** 2)  # noqa: E731
    x = np.array([0.3, 0.8])
    np.testing.assert_allclose(hamiltonian_vector_field(ham, CAN)(x), [-x[1], x[0]], atol=1e-12)
    f = lambda x: x[0] ** 3  # noqa: E731
    vf = apply_vector_field(hamiltonian_vector_field(ham, CAN), f)(x)
    assert abs(vf - poisson_bracket(ham, f, CAN)(x)) <= 1e-12


def test_dimension_mismatch():
    with pytest.raises(ClassicalError):
        poisson_bracket(X1, X2, CAN)(np.zeros(3))
    with pytest.raises(ClassicalError):
        canonical_bivector(3)


def test_second_partials_against_analytic():
    f = lambda x: math.sin(x[0]) * math.cos(x[1])  # noqa: E731
    x = np.array([0.4, 1.2])
    s0, c0, s1, c1 = math.sin(x[0]), math.cos(x[0]), math.sin(x[1]), math.cos(x[1])
    exact = np.array([[-s0 * c1, -c0 * s1], [-c0 * s1, -s0 * c1]])
    np.testing.assert_allclose(second_partials(f, x), exact, atol=1e-9)


def test_hessian_with_connection():
    f = lambda x: x[0] ** 2 + x[0] * x[1]  # noqa: E731
    x = np.array([1.0, 2.0])
    np.testing.assert_allclose(hessian_with_connection(f, flat_connection(2))(x), [[2, 1], [1, 0]], atol=1e-8)
    G = np.zeros((2, 2, 2))
    G[0, 1, 1] = 1.0  # G^1_22
    H = hessian_with_connection(f, lambda y: G)(x)
    # subtracts G^1_22 d_1 f = 2 x1 + x2 = 4 from H_22
    np.testing.assert_allclose(H, [[2, 1], [1, -4]], atol=1e-8)
    G[0, 0, 1] = 1.0
    with pytest.raises(ClassicalError):
        hessian_with_connection(f, lambda y: G)(x)


def test_classical_pi1_example():
    f = lambda x: 0.5 * x[0] ** 2  # noqa: E731
    g = lambda x: 0.5 * x[1] ** 2  # noqa: E731
    value = classical_pi1(f, g, CAN, flat_connection(2))(np.array([0.3, 0.1]))
    assert abs(value - 1.0) <= 1e-8


def test_p2_normalization_is_minus_half():
    f = lambda x: math.sin(x[0]) + x[1] ** 2  # noqa: E731
    g = lambda x: x[0] * x[1] ** 2  # noqa: E731
    k = lambda x: math.cos(x[1]) * x[0]  # noqa: E731
    fit = fit_p2_normalization(f, g, k, CAN, flat_connection(2), sample_points(2, 20), h=1e-2)
    assert abs(fit.normalization + 0.5) <= 1e-4
    assert fit.residual <= 1e-4 < fit.unscaled_residual


def test_fd_fourth_order():
    f = lambda x: math.exp(x[0]) * math.sin(x[0])  # noqa: E731
    x = np.array([0.7])
    exact = math.exp(0.7) * (math.sin(0.7) + math.cos(0.7))
    errs = [abs(partial(f, x, 0, h) - exact) for h in (0.1, 0.05, 0.025)]
    assert errs[0] / errs[1] >= 8 and errs[1] / errs[2] >= 8


def test_flow_zero_field():
    res = integrate_flow(lambda x: np.zeros(2), [0.3, 0.4], 1.0, 0.1)
    np.testing.assert_array_equal(res.states[-1], [0.3, 0.4])
    assert res.times[-1] == pytest.approx(1.0)


def test_harmonic_closure_and_energy():
    sys_ = get_system("harmonic")
    res = integrate_flow(sys_.vector_field(), [1.0, 0.0], 2 * math.pi, 1e-2, sys_.conserved["energy"])
    assert np.abs(res.states[-1] - [1.0, 0.0]).max() <= 1e-6
    assert res.drift <= 1e-8


def test_so3_casimir_and_energy_drift():
    sys_ = get_system("so3star")
    res = integrate_flow(sys_.vector_field(), [0.3, 0.5, 0.8], 10.0, 1e-3, sys_.conserved["casimir"], record_every=100)
    assert res.drift <= 1e-8
    sys_ = get_system("canonical2d")
    res = integrate_flow(sys_.vector_field(), [0.1, 0.2], 10.0, 1e-3, sys_.conserved["energy"], record_every=100)
    assert res.drift <= 1e-8


def test_flow_errors():
    with pytest.raises(FlowError):
        integrate_flow(lambda x: x, [1.0], 1.0, 0.0)
    with pytest.raises(FlowError), np.errstate(over="ignore"):
        integrate_flow(lambda x: x**2, [1.0], 5.0, 0.1)


def test_system_library():
    with pytest.raises(ClassicalError):
        get_system("nope")
    with pytest.raises(ClassicalError):
        get_system("userpolynomial")
    spec = {"dim": 2, "terms": [{"coeff": 0.5, "powers": [2, 0]}, {"coeff": 0.5, "powers": [0, 2]}]}
    sys_ = get_system("userpolynomial", spec)
    assert sys_.hamiltonian(np.array([1.0, 2.0])) == pytest.approx(2.5)


def test_halton_points_deterministic():
    a, b = sample_points(3, 16, seed=5), sample_points(3, 16, seed=5)
    np.testing.assert_array_equal(a, b)
    assert np.abs(a).max() <= 1.0


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=2, max_size=2), st.floats(0.1, 3.0))
def test_bracket_antisymmetric_and_gradient_linear(pt, s):
    x = np.array(pt)
    f = lambda y: math.sin(y[0]) * y[1]  # noqa: E731
    g = lambda y: y[0] ** 2 - y[1]  # noqa: E731
    assert abs(poisson_bracket(f, g, CAN)(x) + poisson_bracket(g, f, CAN)(x)) <= 1e-12
    sf = lambda y: s * f(y)  # noqa: E731
    np.testing.assert_allclose(gradient(sf, x), s * gradient(f, x), rtol=1e-12, atol=1e-12)
