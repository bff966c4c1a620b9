import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randrep import rdo, spin_spin
from randrep.distributions import ParameterDistribution, PointMass, Uniform
from randrep.errors import DegenerateEigenvalue
from randrep.linalg import PSI_S, dagger

params = st.builds(
    spin_spin.SpinSpinParams,
    st.floats(0.5, 3.0),
    st.floats(0.5, 3.0),
    st.floats(0.05, 1.0),
    st.floats(0.1, 5.0),
    st.floats(0.05, 10.0),
)


def generic(p):
    t_per = spin_spin.period(p)
    x = p.tau / t_per
    return abs(x - round(x)) > 1e-3


@given(params)
def test_invariant_functional(p):
    m = spin_spin.build_rdo_map(p)
    if not rdo.gate_membership(m):
        return
    psi = rdo.invariant_functional(m)
    assert np.isclose(np.vdot(psi, PSI_S), 1.0)
    np.testing.assert_allclose(dagger(m) @ psi, psi, atol=1e-9)
    # same fixed vector as the closed Gibbs form
    np.testing.assert_allclose(psi, spin_spin.fixed_vector(p), atol=1e-8)


@given(params)
def test_decomposition(p):
    m = spin_spin.build_rdo_map(p)
    if not rdo.gate_membership(m):
        return
    d = rdo.decompose(m)
    np.testing.assert_allclose(d.p + d.m_q, m, atol=1e-14)
    np.testing.assert_allclose(d.p @ d.p, d.p, atol=1e-9)
    np.testing.assert_allclose(d.p @ d.m_q, 0, atol=1e-9)
    np.testing.assert_allclose(d.m_q @ d.p, 0, atol=1e-9)
    assert np.max(np.abs(np.linalg.eigvals(d.m_q))) < 1


@given(params)
def test_gate_holds_off_the_lattice(p):
    if generic(p):
        assert rdo.gate_membership(spin_spin.build_rdo_map(p))


def test_gate_batch_agrees_with_single():
    taus = np.linspace(0.1, 12, 200)
    ms = spin_spin.rdo_batch(1.0, 0.5, taus, 1.0, 2.0)
    assert list(rdo.gate_batch(ms)) == [rdo.gate_membership(m) for m in ms]


def test_degenerate_unit_eigenvalue():
    t_per = spin_spin.period(1.0, 2.0, 0.5)
    m = spin_spin.build_rdo_map(spin_spin.SpinSpinParams(1.0, 2.0, 0.5, 1.0, t_per))
    rep = rdo.gate_report(m)
    assert not rep.passed and rep.n_unit == 2
    with pytest.raises(DegenerateEigenvalue):
        rdo.invariant_functional(m)
    psi = rdo.invariant_functional(m, allow_degenerate=True)
    assert np.isclose(np.vdot(psi, PSI_S), 1.0)


def test_theta_two_routes_agree():
    rng = np.random.default_rng(4)
    ms = spin_spin.rdo_batch(1.0, 0.5, rng.uniform(0.8, 1.2, 30), 1.0, rng.uniform(1.5, 2.5, 30))
    seq = rdo.theta_sequence(list(ms))
    np.testing.assert_allclose(seq[-1], rdo.theta_direct(list(ms), 30), atol=1e-13)


def test_limit_functional_two_routes():
    d = ParameterDistribution({"tau": Uniform(0.8, 1.2), "beta": PointMass(1.0), "e_e": Uniform(1.5, 2.5)})
    m = spin_spin.SpinSpinModel(1.0, 0.5, d)
    a = rdo.limit_functional(rdo.expected_rdo(m, n_nodes=24).mean)
    b = rdo.theta_resolvent(m, n_nodes=24)
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_expected_rdo_monte_carlo_agrees_with_quadrature():
    d = ParameterDistribution({"tau": Uniform(0.8, 1.2), "beta": PointMass(1.0), "e_e": PointMass(2.0)})
    m = spin_spin.SpinSpinModel(1.0, 0.5, d)
    q = rdo.expected_rdo(m).mean
    mc = rdo.expected_rdo(m, "monte_carlo", n=50_000, seed=1)
    assert np.all(np.abs(mc.mean - q) <= 5 * np.abs(mc.std_error) + 1e-12)
