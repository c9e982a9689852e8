import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncpoisson.algebra import center
from ncpoisson.poisson import check_jacobi_witness, check_leibniz
from ncpoisson.torus import (
    GOLDEN_THETA,
    TorusElement,
    TorusError,
    associativity_check,
    canonical_poisson,
    canonical_witness,
    delta1,
    delta2,
    derivation_check,
    embed_as_finite_algebra,
    jacobi_check,
    leibniz_check,
    multiply,
    seminorm,
)

N = 8
TH = GOLDEN_THETA


def mono(n, m, N=N, theta=TH):
    return TorusElement.monomial(n, m, theta, N)


def _brute_product(a, b):
    """Monomial-by-monomial expansion of the defining relation."""
    out = {}
    for (i, j), x in np.ndenumerate(a.coeffs):
        if x == 0:
            continue
        for (k, l), y in np.ndenumerate(b.coeffs):
            if y == 0:
                continue
            n, m, n2, m2 = i - a.N, j - a.N, k - b.N, l - b.N
            key = (n + n2, m + m2)
            out[key] = out.get(key, 0) + x * y * cmath.exp(2j * math.pi * a.theta * m * n2)
    return out


def test_defining_relation():
    U, V = mono(1, 0), mono(0, 1)
    vu, uv = V * U, U * V
    assert vu.exact and uv.exact
    assert uv.coefficient(1, 1) == 1
    assert abs(vu.coefficient(1, 1) - cmath.exp(2j * math.pi * TH)) <= 1e-15


def test_product_matches_brute_force(rng):
    a = TorusElement.random(rng, 3, TH, N)
    b = TorusElement.random(rng, 3, TH, N)
    got = multiply(a, b)
    for (n, m), val in _brute_product(a, b).items():
        assert abs(got.coefficient(n, m) - val) <= 1e-12


def test_unit_and_associativity(rng):
    one = TorusElement.one(TH, N)
    a = TorusElement.random(rng, N // 3, TH, N)
    assert ((one * a) - a).norm() == 0
    for _ in range(10):
        x, y, z = (TorusElement.random(rng, N // 3, TH, N) for _ in range(3))
        chk = associativity_check(x, y, z)
        assert chk.exact and chk.relative <= 1e-12


def test_truncation_clears_exactness():
    far = mono(N, 0)
    assert not (far * mono(1, 0)).exact
    assert (far * mono(-1, 0)).exact


def test_derivations():
    U = mono(1, 0)
    np.testing.assert_allclose(delta1(U).coeffs, (2j * math.pi * U).coeffs)
    assert delta1(TorusElement.one(TH, N)).norm() == 0
    assert delta2(U).norm() == 0


def test_derivations_commute(rng):
    a = TorusElement.random(rng, N, TH, N)
    d12 = delta1(delta2(a))
    assert (d12 - delta2(delta1(a))).norm() <= 1e-15 * d12.norm()


def test_canonical_poisson_on_generators():
    U, V = mono(1, 0), mono(0, 1)
    assert abs(canonical_poisson(U, V).coefficient(1, 1) + 4 * math.pi**2) <= 1e-12
    assert canonical_poisson(TorusElement.one(TH, N), U).norm() == 0


def test_witness_on_generators():
    U, V = mono(1, 0), mono(0, 1)
    value = canonical_witness(U, V).coefficient(1, 1)
    assert abs(value + 8 * math.pi**4) <= 1e-10
    assert canonical_witness(TorusElement.one(TH, N), U).norm() == 0


def test_leibniz_and_jacobi_on_safe_supports(rng):
    for _ in range(10):
        a = [TorusElement.random(rng, N // 3, TH, N) for _ in range(3)]
        b = [TorusElement.random(rng, N // 4, TH, N) for _ in range(3)]
        chk = leibniz_check(*a)
        assert chk.exact and chk.relative <= 1e-12
        chk = jacobi_check(*b)
        assert chk.exact and chk.relative <= 1e-10


def test_witness_sign_is_forced(rng):
    b = [TorusElement.random(rng, N // 4, TH, N) for _ in range(3)]
    flipped = lambda x, y: -1.0 * canonical_witness(x, y)  # noqa: E731
    assert jacobi_check(*b, witness=flipped).relative > 0.1


def test_derivation_check(rng):
    a, b = (TorusElement.random(rng, N // 2, TH, N) for _ in range(2))
    assert derivation_check(delta1, a, b).relative <= 1e-13


def test_seminorms():
    assert seminorm(mono(1, 0), 0) == 1
    assert seminorm(mono(1, 0) * mono(0, 1), 1) == 2
    assert seminorm(TorusElement.zero(TH, N), 3) == 0
    with pytest.raises(TorusError):
        seminorm(mono(1, 0), -1)


def test_validation():
    with pytest.raises(TorusError):
        mono(N + 1, 0)
    with pytest.raises(TorusError):
        mono(1, 0) * TorusElement.monomial(0, 1, 0.25, N)
    with pytest.raises(TorusError):
        TorusElement(TH, 2, np.zeros((3, 3)))


def test_json_roundtrip(rng):
    a = TorusElement.random(rng, 3, TH, N)
    back = TorusElement.from_json(a.to_json(), TH, N)
    np.testing.assert_array_equal(back.coeffs, a.coeffs)
    assert a.support_radius <= 3


def test_embedding_centers():
    assert len(center(embed_as_finite_algebra(1, 0.0).algebra)) == 9
    assert len(center(embed_as_finite_algebra(1, math.sqrt(2) - 1).algebra)) == 1


def test_embedding_reproduces_canonical_structure():
    emb = embed_as_finite_algebra(1)
    assert check_leibniz(emb.pi, emb.safe_triples) <= 1e-12
    assert check_jacobi_witness(emb.pi, emb.pi1, emb.safe_triples) <= 1e-10
    alg = emb.algebra
    i, j = emb.modes.index((1, 0)), emb.modes.index((0, 1))
    direct = canonical_poisson(mono(1, 0, N=1), mono(0, 1, N=1))
    got = emb.to_element(emb.pi(alg.basis(i), alg.basis(j)).coeffs, TH)
    assert (got - direct).norm() <= 1e-12
    with pytest.raises(TorusError):
        embed_as_finite_algebra(4)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), theta=st.floats(0.0, 1.0))
def test_leibniz_property_any_theta(seed, theta):
    rng = np.random.default_rng(seed)
    a = [TorusElement.random(rng, 2, theta, 6) for _ in range(3)]
    chk = leibniz_check(*a)
    assert chk.exact and chk.relative <= 1e-12
