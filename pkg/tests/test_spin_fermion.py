import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randrep import rdo, spin_fermion as sf
from randrep.distributions import FiniteSupport, PointMass, Uniform
from randrep.errors import GapTooSmall, ThresholdViolation, UnsupportedDistribution
from randrep.linalg import PSI_S, SIGMA_X, functional_to_density


def params(lam=0.05, tau0=1.3, eps=0.05, beta=1.0, sigma=None):
    law = sigma if sigma is not None else Uniform(-eps, eps)
    return sf.SpinFermionParams(lam, tau0, law, PointMass(beta), sf.default_density())


def test_frozen_alphas():
    # frozen: adaptive scipy.integrate.quad on the continuous integrands
    ri = sf.reservoir_integrals(1.3, 1.0, sf.default_density())
    assert abs(ri.alpha_plus - 0.12288190439708996) < 1e-9
    assert abs(ri.alpha_minus - 0.46114631989480515) < 1e-9


def test_frozen_q_direct():
    # frozen: same quad oracle, nested over sigma ~ U[-0.05, 0.05]
    assert abs(sf.q_direct(params()) - 0.21044105684064296) < 1e-8


def test_detailed_balance_at_long_times():
    # level |0> sits above |1> by 2, so alpha+/alpha- -> e^{-2 beta}
    d = sf.flat_density(1.5, 2.5, 4000)
    for beta in (0.5, 1.0, 2.0):
        ri = sf.reservoir_integrals(800.0, beta, d)
        assert abs(ri.alpha_plus / ri.alpha_minus / np.exp(-2 * beta) - 1) < 5e-3


def test_q_expansion_error_is_third_order():
    errs = []
    for eps in (0.1, 0.05, 0.025):
        p = params(tau0=1.0, sigma=Uniform(0.0, 2 * eps))
        errs.append(abs(sf.q_probability(p) - sf.q_direct(p)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 2.6)


def test_q_two_routes_default_setting():
    p = params()
    assert abs(sf.q_probability(p) - sf.q_direct(p)) < 1e-3
    assert np.isclose(sf.expansion_budget(p), 0.05**3 + 0.05**2)


def test_leading_q_is_alpha_ratio():
    p = params(sigma=PointMass(0.0))
    ri = sf.reservoir_integrals(1.3, 1.0, p.density)
    assert np.isclose(sf.q_probability(p), ri.alpha_plus / (ri.alpha_plus + ri.alpha_minus), rtol=1e-14)
    assert np.isclose(sf.q_direct(p), sf.q_probability(p), rtol=1e-12)


def test_q_requires_deterministic_beta():
    p = sf.SpinFermionParams(0.05, 1.3, Uniform(-0.05, 0.05), FiniteSupport((0.5, 2.0), (0.5, 0.5)), sf.default_density())
    with pytest.raises(UnsupportedDistribution):
        sf.q_probability(p)
    assert 0 < sf.q_direct(p) < 1


@given(st.floats(-1e-3, 1e-3), st.floats(0.2, 5.0))
def test_sinc_is_smooth_across_the_series_cut(x, tau):
    ref = np.sinc(x / np.pi)
    assert abs(sf.sinc(x) - ref) < 1e-15
    direct = (1 - np.sinc(tau * x / np.pi)) / x if x != 0 else 0.0
    assert abs(sf._one_minus_sinc_over(x, tau) - direct) < 1e-7


@given(st.floats(0.1, 3.0), st.floats(0.1, 5.0))
def test_surrogate_rdo_structure(tau, beta):
    lam = 1e-3
    if abs(lam) >= sf.r0(tau) / 4:
        with pytest.raises(ThresholdViolation):
            sf.surrogate_rdo_batch(lam, tau, beta, sf.default_density())
        return
    m = sf.surrogate_rdo_batch(lam, tau, beta, sf.default_density())[0]
    np.testing.assert_allclose(m @ PSI_S, PSI_S, atol=1e-14)
    ex = sf.eigenvalue_expansion(lam, tau, beta, sf.default_density())
    assert np.isclose(m[1, 1], ex.e_plus) and np.isclose(m[2, 2], ex.e_minus)
    assert np.isclose(np.conj(ex.e_plus), ex.e_minus)
    w = np.linalg.eigvals(m)
    assert np.min(np.abs(w - ex.e0)) < 1e-12
    assert np.max(np.abs(w)) <= 1 + 1e-12


def test_gap_condition():
    with pytest.raises(GapTooSmall):
        sf.eigenvalue_expansion(0.5, np.pi / 2, 1.0, sf.default_density())


def test_error_bound_is_fourth_order():
    w = sf.default_density().w_norm_bound(1.0)
    b1, b2 = sf.error_bound(1e-4, 1.3, w), sf.error_bound(5e-5, 1.3, w)
    assert np.isclose(b1 / b2, 16, rtol=1e-3)


def test_coupling_threshold_is_conservative():
    d = sf.default_density()
    chk = sf.coupling_threshold_check(0.05, 1.0, d, (1.25, 1.35), 0.2)
    assert not chk.ok and 0 < chk.lambda_critical < 0.05
    ok = sf.coupling_threshold_check(0.5 * chk.lambda_critical, 1.0, d, (1.25, 1.35), 0.2)
    assert ok.ok and np.isclose(ok.lambda_margin, 2.0)


def test_asymptotic_state_has_no_coherence():
    p = params()
    m = sf.SpinFermionModel(p)
    assert sf.asymptotic_state_expansion(p, SIGMA_X) == 0.0
    rho = functional_to_density(rdo.limit_functional(rdo.expected_rdo(m).mean))
    assert abs(np.trace(rho @ SIGMA_X)) <= p.lam**2
    assert np.isclose(rho[0, 0].real, sf.q_direct(p), atol=1e-9)


def test_q_out_of_range_warns_instead_of_clamping(monkeypatch):
    monkeypatch.setattr(sf, "q_terms", lambda p: {"leading": 0.9, "first": 0.2})
    with pytest.warns(sf.QOutOfRangeWarning):
        q = sf.q_probability(params())
    assert q == pytest.approx(1.1)
