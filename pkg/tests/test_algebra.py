import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncpoisson.algebra import (
    AlgebraError,
    StructureConstantAlgebra,
    center,
    centrality_residual,
    commutator,
    group_algebra,
    inner_derivation_matrix,
    is_derivation,
    matrix_algebra,
    multiply,
    symmetric_group_algebra,
    truncated_polynomial_algebra,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def E(alg, label):
    return alg.basis(alg.basis_labels.index(label))


def test_matrix_units_multiply():
    m2 = matrix_algebra(2)
    np.testing.assert_allclose((E(m2, "E11") * E(m2, "E12")).coeffs, E(m2, "E12").coeffs)
    assert (E(m2, "E12") * E(m2, "E11")).norm() == 0


def test_matrix_algebra_matches_numpy_matmul(rng):
    m3 = matrix_algebra(3)
    a, b = rng.standard_normal((2, 3, 3))
    prod = m3.element(a.reshape(-1)) * m3.element(b.reshape(-1))
    np.testing.assert_allclose(prod.coeffs.reshape(3, 3), a @ b, atol=1e-13)


def test_unit_law(algebras, rng):
    for alg in algebras.values():
        a = alg.random_element(rng)
        np.testing.assert_allclose((alg.one() * a).coeffs, a.coeffs, atol=1e-14)
        np.testing.assert_allclose((a * alg.one()).coeffs, a.coeffs, atol=1e-14)


def test_s3_associativity_on_random_triples(rng):
    s3 = symmetric_group_algebra(3)
    worst = 0.0
    for _ in range(100):
        a, b, c = (s3.random_element(rng) for _ in range(3))
        worst = max(worst, ((a * b) * c - a * (b * c)).norm())
    assert worst <= 1e-12


def test_commutator_examples():
    m2 = matrix_algebra(2)
    np.testing.assert_allclose(commutator(E(m2, "E11"), E(m2, "E12")).coeffs, E(m2, "E12").coeffs)
    a = m2.element([1, 2j, 3, 4])
    assert commutator(a, a).norm() == 0


def test_commutator_matches_direct_products(rng, algebras):
    alg = algebras["CS3"]
    a, b = alg.random_element(rng), alg.random_element(rng)
    np.testing.assert_allclose(commutator(a, b).coeffs, (multiply(a, b) - multiply(b, a)).coeffs)


@pytest.mark.parametrize("name, dim", [("M2", 1), ("M3", 1), ("CS3", 3), ("Ct3", 3), ("Cxy", 9)])
def test_center_dimensions(algebras, name, dim):
    z = center(algebras[name])
    assert len(z) == dim
    assert max(centrality_residual(c) for c in z) <= 1e-12


def test_unit_lies_in_center_span(algebras):
    for alg in algebras.values():
        basis = np.array([c.coeffs for c in center(alg)]).T
        coef, *_ = np.linalg.lstsq(basis, alg.unit_vector, rcond=None)
        assert np.abs(basis @ coef - alg.unit_vector).max() <= 1e-12


def test_s3_center_is_spanned_by_class_sums():
    s3 = symmetric_group_algebra(3)
    labels = s3.basis_labels
    transpositions = [labels.index(p) for p in ("213", "132", "321")]
    v = np.zeros(6)
    v[transpositions] = 1
    assert centrality_residual(s3.element(v)) <= 1e-14
    v = np.zeros(6)
    v[labels.index("213")] = 1
    assert centrality_residual(s3.element(v)) > 0.1


def test_inner_derivation_passes(algebras, rng):
    for alg in algebras.values():
        a = alg.random_element(rng)
        ok, res = is_derivation(alg, inner_derivation_matrix(a))
        assert ok and res <= 1e-12 * max(1.0, a.norm())


def test_identity_is_not_a_derivation():
    ok, res = is_derivation(matrix_algebra(2), np.eye(4))
    assert not ok and res > 0.5


def test_rejects_nonassociative_constants():
    m2 = matrix_algebra(2)
    c = np.array(m2.structure_constants)
    c[1, 1, 0] = 1.0  # E12 E12 = E11 keeps the unit law but breaks associativity
    with pytest.raises(AlgebraError):
        StructureConstantAlgebra(c, m2.unit_vector)


def test_rejects_bad_unit():
    with pytest.raises(AlgebraError):
        StructureConstantAlgebra(truncated_polynomial_algebra(3).structure_constants, [0, 1, 0])


def test_group_algebra_needs_identity():
    with pytest.raises(AlgebraError):
        group_algebra([[0, 0], [0, 0]])


def test_mismatched_algebras_raise():
    with pytest.raises(AlgebraError):
        matrix_algebra(2).one() * matrix_algebra(2).one()


def test_json_roundtrip(tmp_path):
    alg = symmetric_group_algebra(3)
    path = tmp_path / "s3.json"
    path.write_text(json.dumps(alg.to_json()))
    back = StructureConstantAlgebra.from_json(path)
    assert back.basis_labels == alg.basis_labels
    np.testing.assert_array_equal(back.structure_constants, alg.structure_constants)


def test_json_accepts_plain_reals():
    data = {"dim": 2, "labels": ["1", "t"], "c": [[[1, 0], [0, 1]], [[0, 1], [0, 0]]], "unit": [1, 0]}
    alg = StructureConstantAlgebra.from_json(data)
    t = alg.basis(1)
    assert (t * t).norm() == 0


@settings(max_examples=25, deadline=None)
@given(seed=seeds)
def test_commutator_is_a_derivation_property(seed):
    alg = matrix_algebra(3)
    rng = np.random.default_rng(seed)
    a = alg.random_element(rng)
    x, y = alg.random_element(rng), alg.random_element(rng)
    lhs = commutator(a, x * y)
    rhs = commutator(a, x) * y + x * commutator(a, y)
    assert (lhs - rhs).norm() <= 1e-12 * max(1.0, a.norm() * x.norm() * y.norm())


@settings(max_examples=25, deadline=None)
@given(seed=seeds)
def test_bilinearity_property(seed):
    alg = symmetric_group_algebra(3)
    rng = np.random.default_rng(seed)
    a, b, c = (alg.random_element(rng) for _ in range(3))
    s = complex(*rng.standard_normal(2))
    lhs = (a * s + b) * c
    rhs = (a * c) * s + b * c
    assert (lhs - rhs).norm() <= 1e-12 * max(1.0, abs(s)) * (a.norm() + b.norm()) * c.norm() * 6
