import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from randrep import linalg
from randrep.errors import BadDensity, DegenerateEigenvalue, EigenvalueNotFound

finite = st.floats(-10, 10, allow_nan=False)
complex_2x2 = st.tuples(arrays(float, (2, 2), elements=finite), arrays(float, (2, 2), elements=finite)).map(
    lambda t: t[0] + 1j * t[1]
)


def random_density(rng):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def test_eig_decompose_orders_by_modulus_then_phase():
    es = linalg.eig_decompose(np.diag([0.5, 1.0, -0.5j, 0.5j]))
    np.testing.assert_allclose(es.eigenvalues, [1.0, -0.5j, 0.5, 0.5j])
    assert es.residual(np.diag([0.5, 1.0, -0.5j, 0.5j])) < 1e-14


def test_eig_decompose_flags_near_degenerate_pairs():
    es = linalg.eig_decompose(np.diag([1.0, 1.0 + 1e-10, 0.3, 0.1]))
    assert es.flags[0] and es.flags[1] and not es.flags[2]


def test_left_vectors_are_biorthogonal():
    rng = np.random.default_rng(0)
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    es = linalg.eig_decompose(m)
    np.testing.assert_allclose(es.left @ es.right, np.eye(4), atol=1e-12)


def test_riesz_projection_errors():
    es = linalg.eig_decompose(np.diag([1.0, 1.0, 0.2, 0.1]))
    with pytest.raises(DegenerateEigenvalue):
        linalg.riesz_projection(es, 1.0)
    with pytest.raises(EigenvalueNotFound):
        linalg.riesz_projection(es, 0.7)


def test_eigenspace_projection_handles_degenerate_unit_eigenvalue():
    m = np.diag([1.0, 1.0, 0.2, 0.1]).astype(complex)
    s = np.array([[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1], [1, 0, 0, 1.5]], dtype=complex)
    a = s @ m @ np.linalg.inv(s)
    p = linalg.eigenspace_projection(a, 1.0)
    np.testing.assert_allclose(p @ p, p, atol=1e-10)
    np.testing.assert_allclose(p @ a, a @ p, atol=1e-10)
    assert np.isclose(np.trace(p).real, 2.0)


@given(st.integers(0, 2**32 - 1))
def test_riesz_projection_is_idempotent_and_commutes(seed):
    rng = np.random.default_rng(seed)
    d = np.array([1.0, 0.6, 0.3 + 0.2j, -0.1])
    s = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) + 3 * np.eye(4)
    a = s @ np.diag(d) @ np.linalg.inv(s)
    p = linalg.riesz_projection(linalg.eig_decompose(a), 1.0)
    np.testing.assert_allclose(p @ p, p, atol=1e-8)
    np.testing.assert_allclose(p @ a, a @ p, atol=1e-8)


@given(complex_2x2)
def test_gns_round_trip(a):
    np.testing.assert_allclose(linalg.gns_to_observable(linalg.observable_to_gns(a)), a, atol=1e-12)


@given(complex_2x2, st.integers(0, 2**32 - 1))
def test_row_pairing_is_the_trace(a, seed):
    rho = random_density(np.random.default_rng(seed))
    lhs = linalg.density_to_row(rho) @ linalg.observable_to_gns(a)
    assert np.isclose(lhs, np.trace(rho @ a), atol=1e-9)


@given(st.integers(0, 2**32 - 1))
def test_functional_to_density_inverts_the_pairing(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(rng)
    # theta with <theta, (A x 1) psi_S> = Tr(rho A)
    theta = linalg.observable_to_gns(2 * rho.conj().T)
    np.testing.assert_allclose(linalg.functional_to_density(theta), rho, atol=1e-12)


@given(complex_2x2, complex_2x2, st.floats(0.0, 1.0))
def test_partial_trace_of_product(a, c, p):
    rho_e = np.diag([p, 1 - p])
    out = linalg.thermal_partial_trace(np.kron(a, c), rho_e)
    np.testing.assert_allclose(out, a * np.trace(rho_e @ c), atol=1e-9)


def test_contraction_norm_of_psi_s_is_one():
    assert np.isclose(linalg.contraction_norm(linalg.PSI_S), 1.0)


@pytest.mark.parametrize(
    "rho",
    [np.diag([0.5, 0.6]), np.array([[0.5, 0.1], [0.2, 0.5]]), np.diag([1.2, -0.2]), np.ones((2, 3)) / 2],
)
def test_check_density_rejects(rho):
    with pytest.raises(BadDensity):
        linalg.check_density(rho)


@given(st.floats(0.0, 20.0), st.floats(0.1, 5.0))
def test_gibbs_qubit_matches_dense_gibbs(beta, e):
    p0, p1 = linalg.gibbs_qubit(beta, e)
    dense = linalg.gibbs(np.diag([0.0, e]), beta)
    np.testing.assert_allclose([p0, p1], np.diag(dense).real, atol=1e-12)
    assert p0 >= p1
