import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randrep import spin_spin, thermo
from randrep.distributions import ParameterDistribution, PointMass, Uniform
from randrep.validation import random_beta_model, random_energy_model, random_tau_model

params = st.builds(
    spin_spin.SpinSpinParams,
    st.floats(0.5, 3.0),
    st.floats(0.5, 3.0),
    st.floats(-1.0, 1.0),
    st.floats(0.1, 5.0),
    st.floats(0.05, 10.0),
)


@given(params)
def test_batch_fluxes_match_dense_operators(p):
    m = spin_spin.SpinSpinModel(p.e_s, p.lam, None)
    batch = {"tau": np.array([p.tau]), "beta": np.array([p.beta]), "e_e": np.array([p.e_e])}
    np.testing.assert_allclose(thermo.energy_flux_batch(m, batch)[0], thermo.energy_flux_operator(p), atol=1e-12)
    np.testing.assert_allclose(thermo.entropy_flux_batch(m, batch)[0], thermo.entropy_flux_operator(p), atol=1e-11)


@given(params, st.floats(0.0, 1.0), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_reduced_flux_equals_joint_energy_jump(p, a, re, im):
    c = complex(re, im) * np.sqrt(a * (1 - a))  # keeps rho positive
    rho = np.array([[a, c], [np.conj(c), 1 - a]])
    reduced = np.trace(rho @ thermo.energy_flux_operator(p)).real
    assert abs(reduced - thermo.joint_energy_jump(p, rho)) < 1e-11


def test_frozen_energy_flux_random_energy():
    # frozen: joint 4x4 Schrodinger-picture oracle with its own quadrature and null-space solve
    rep = thermo.flux_report(random_energy_model())
    assert abs(rep.dE_plus - 0.005480825582513703) < 1e-12
    np.testing.assert_allclose(np.diag(rep.rho_plus).real, [0.86597583, 0.13402417], atol=1e-8)


@pytest.mark.parametrize("build", [random_tau_model, random_energy_model])
def test_second_law_closed_form(build):
    rep = thermo.flux_report(build())
    assert rep.second_law_residual <= 1e-9
    assert rep.to_dict()["beta_effective"] == 1.0


def test_deterministic_environment_energy_gives_no_net_flux():
    # number conservation makes the flux proportional to (e_s - e_e) times a population change
    # whose stationary expectation vanishes when e_e is fixed
    d = ParameterDistribution({"tau": Uniform(0.3, 2.0), "beta": Uniform(0.5, 2.0), "e_e": PointMass(1.7)})
    m = spin_spin.SpinSpinModel(1.0, 0.4, d)
    assert abs(thermo.dE_plus(m, n_nodes=24)) < 1e-14


def test_zero_coupling_means_zero_flux():
    p = spin_spin.SpinSpinParams(1.0, 2.0, 0.0, 1.0, 0.9)
    np.testing.assert_allclose(thermo.energy_flux_operator(p), 0, atol=1e-15)
    assert thermo.joint_energy_jump(p, np.diag([0.3, 0.7])) == 0.0


@pytest.mark.parametrize("beta_s,sign", [(0.5, 1), (1.0, 1), (2.5, -1), (4.0, -1)])
def test_flux_sign_follows_temperature_order(beta_s, sign):
    # energy flows out of the system iff it is hotter than the environment seen at its own gap
    p = spin_spin.SpinSpinParams(1.0, 2.0, 0.5, 1.0, 1.1)
    jump = thermo.joint_energy_jump(p, spin_spin.gibbs_state(beta_s, 1.0))
    assert np.sign(jump) == sign
    assert abs(thermo.joint_energy_jump(p, spin_spin.gibbs_state(2.0, 1.0))) < 1e-15


def test_random_beta_report_schema():
    d = thermo.flux_report(random_beta_model()).to_dict()
    assert d["beta_effective"] == "random" and "second_law_residual" not in d


def test_trajectory_route_agrees_with_closed_form():
    m = random_energy_model()
    rep = thermo.flux_report(m)
    rho = rep.rho_plus
    t = thermo.cumulative_energy(m, rho, 20_000, seed=3)
    assert abs(t.slope_e - rep.dE_plus) <= 4 * t.se_e
    assert abs(t.residual) <= 4 * t.se_residual + 1e-12
    assert np.isclose(t.delta_e[-1] / 20_000, t.slope_e)


def test_cumulative_energy_slope_within_five_percent():
    m = random_energy_model()
    rep = thermo.flux_report(m)
    t = thermo.cumulative_energy(m, np.eye(2) / 2, 10_000, seed=21)
    slope = (t.delta_e[9_999] - t.delta_e[999]) / 9_000
    assert abs(slope / rep.dE_plus - 1) < 0.05
