"""Qubit coupled to thermal fermion fields, treated to second order in the coupling.

The qubit has h_S = sigma_z, so |0> sits at energy +1 and |1> at -1, and the
coupling is lam * sigma_x (x) (a*(g) + a(g)). Reservoir quantities enter through
the weight w(r) = dmu(r) |g(r)|^2 on the single-fermion energy r >= 0.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from randrep.distributions import ParameterDistribution, PointMass, gauss_legendre
from randrep.errors import GapTooSmall, QOutOfRangeWarning, ThresholdViolation, UnsupportedDistribution

SERIES_CUT = 1e-4


def sinc(x):
    """sin(x)/x with a Taylor branch for |x| < 1e-4."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SERIES_CUT
    xs = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(xs) / xs)


def _one_minus_sinc_over(x, tau):
    """(1 - sinc(tau x)) / x, smooth through x = 0."""
    x = np.asarray(x, dtype=float)
    tx = tau * x
    small = np.abs(tx) < SERIES_CUT
    xs = np.where(small, 1.0, x)
    return np.where(small, tau * tx / 6.0 - tau * tx**3 / 120.0, (1.0 - sinc(tx)) / xs)


@dataclass(frozen=True)
class SpectralDensity:
    nodes: np.ndarray  # r_j
    weights: np.ndarray  # quadrature weights of dmu
    g_norm_sq: np.ndarray  # |g(r_j)|^2

    def __post_init__(self):
        for name in ("nodes", "weights", "g_norm_sq"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.nodes.shape == self.weights.shape == self.g_norm_sq.shape):
            raise ValueError("nodes, weights and g_norm_sq must have equal length")
        if np.any(self.nodes < 0) or np.any(self.weights < 0) or np.any(self.g_norm_sq < 0):
            raise ValueError("nodes, weights and |g|^2 must be nonnegative")
        if not np.all(np.isfinite(self.g_norm_sq)):
            raise ValueError("|g|^2 must be finite")

    @property
    def w(self):
        return self.weights * self.g_norm_sq

    def form_factor_norm(self, beta) -> float:
        """|(1 + e^{beta h / 2}) g|, the reservoir norm entering the W bound."""
        return float(np.sqrt(np.sum(self.w * (1.0 + np.exp(0.5 * beta * self.nodes)) ** 2)))

    def w_norm_bound(self, beta) -> float:
        return 3.0 * self.form_factor_norm(beta)

    def scaled(self, factor: float):
        """Same density with g multiplied by `factor`."""
        return SpectralDensity(self.nodes, self.weights, self.g_norm_sq * factor**2)


def default_density(r_cut: float = 40.0, n_nodes: int = 256) -> SpectralDensity:
    """dmu = r^{1/2} dr / 2 on [0, r_cut] with |g(r)|^2 = r e^{-r}, Gauss-Legendre nodes."""
    r, w = gauss_legendre(0.0, r_cut, n_nodes)
    return SpectralDensity(r, 0.5 * np.sqrt(r) * w, r * np.exp(-r))


def flat_density(low: float, high: float, n_nodes: int, level: float = 1.0) -> SpectralDensity:
    r, w = gauss_legendre(low, high, n_nodes)
    return SpectralDensity(r, w, np.full_like(r, level))


@dataclass(frozen=True)
class ReservoirIntegrals:
    alpha_plus: np.ndarray
    alpha_minus: np.ndarray
    xi_plus: np.ndarray
    xi_minus: np.ndarray
    eta_plus: np.ndarray
    eta_minus: np.ndarray


def reservoir_integrals(tau0, beta, d: SpectralDensity) -> ReservoirIntegrals:
    """alpha, xi, eta (plus and minus) at interaction time tau0 and inverse temperature beta.

    Broadcasts over array-valued tau0 and beta; the last axis is the quadrature.
    """
    tau0 = np.asarray(tau0, dtype=float)[..., None]
    beta = np.asarray(beta, dtype=float)[..., None]
    r, w = d.nodes, d.w
    up = expit(beta * r)  # 1 / (1 + e^{-beta r})
    down = expit(-beta * r)  # e^{-beta r} / (1 + e^{-beta r})
    xm, xp = (r - 2.0) * tau0, (r + 2.0) * tau0

    def q(fm, fp):
        # returns (plus, minus) combinations
        plus = np.sum(w * (down * fm + up * fp), axis=-1)
        minus = np.sum(w * (down * fp + up * fm), axis=-1)
        return plus, minus

    ap, am = q(sinc(xm / 2) ** 2, sinc(xp / 2) ** 2)
    xip, xim = q(sinc(xm), sinc(xp))
    ep, em = q(np.cos(xm), np.cos(xp))
    t = tau0[..., 0]
    return ReservoirIntegrals(ap, am, t * xip, t * xim, ep, em)


def alpha_total(tau, d: SpectralDensity):
    """alpha = int w (sinc^2(tau(r-2)/2) + sinc^2(tau(r+2)/2)); independent of beta."""
    tau = np.asarray(tau, dtype=float)[..., None]
    r = d.nodes
    return np.sum(d.w * (sinc(tau * (r - 2) / 2) ** 2 + sinc(tau * (r + 2) / 2) ** 2), axis=-1)


def lamb_shift_integral(tau, d: SpectralDensity):
    """int w ((1 - sinc(tau(2-r)))/(2-r) + (1 - sinc(tau(2+r)))/(2+r))."""
    tau = np.asarray(tau, dtype=float)[..., None]
    r = d.nodes
    return np.sum(d.w * (_one_minus_sinc_over(2 - r, tau) + _one_minus_sinc_over(2 + r, tau)), axis=-1)


def r0(tau):
    """Distance between the unperturbed eigenvalues {1, e^{2i tau}, e^{-2i tau}}."""
    tau = np.asarray(tau, dtype=float)
    return np.minimum(2 * np.abs(np.sin(2 * tau)), 2 * np.abs(np.sin(tau)))


def error_bound(lam, tau, w_norm):
    # cosh overflows to inf for large lam tau |W|; an infinite bound is the honest answer
    with np.errstate(over="ignore"):
        lt = abs(lam) * tau * w_norm
        ch = np.cosh(lt)
        return 12 * lam**4 * tau**4 * w_norm**4 * ch**2 * (1 + (1 + lt**2 * ch) / r0(tau))


@dataclass(frozen=True)
class EigenvalueExpansion:
    e0: complex
    e_plus: complex
    e_minus: complex
    error_bound: float


def eigenvalue_expansion(lam: float, tau: float, beta: float, d: SpectralDensity) -> EigenvalueExpansion:
    gap = float(r0(tau))
    if not abs(lam) < gap / 4:
        raise GapTooSmall(f"|lambda| = {abs(lam):g} is not below r0(tau)/4 = {gap / 4:g}")
    x = lam**2 * tau**2 * float(alpha_total(tau, d))
    y = lam**2 * tau**2 * float(lamb_shift_integral(tau, d))
    e_plus = np.exp(2j * tau) * (1 - x / 2 + 1j * y)
    e_minus = np.exp(-2j * tau) * (1 - x / 2 - 1j * y)
    bound = float(error_bound(lam, tau, d.w_norm_bound(beta))) if lam != 0 else 0.0
    return EigenvalueExpansion(complex(1 - x), complex(e_plus), complex(e_minus), bound)


def threshold_lhs(lam, tau, w_norm):
    # cosh overflows to inf for large lam tau |W|; an infinite bound is the honest answer
    with np.errstate(over="ignore"):
        lt = abs(lam) * tau * w_norm
        ch = np.cosh(lt)
        return 96 * lam**2 * tau**2 * w_norm**4 * ch**2 * (1 + (1 + lt**2 * ch) / r0(tau))


@dataclass(frozen=True)
class ThresholdCheck:
    ok: bool
    lambda_margin: float  # lambda_critical / |lambda|
    lambda_critical: float  # largest |lambda| for which the condition holds on the range


def coupling_threshold_check(lam, beta, d: SpectralDensity, tau_range, delta: float, n_grid: int = 256) -> ThresholdCheck:
    """Sufficient smallness condition for strict contraction, on a tau grid away from (pi/2) N."""
    lo, hi = tau_range
    taus = np.linspace(lo, hi, n_grid)
    k = np.round(taus / (np.pi / 2))
    taus = taus[np.abs(taus - k * np.pi / 2) > delta]
    if taus.size == 0:
        raise ValueError("every grid point lies within delta of (pi/2) N")
    alpha = alpha_total(taus, d)
    w_norm = d.w_norm_bound(beta)

    def holds(l):
        return bool(np.all(threshold_lhs(l, taus, w_norm) < alpha))

    if not holds(0.0):
        return ThresholdCheck(False, 0.0, 0.0)
    top = 1e-3
    while holds(top) and top < 1e6:
        top *= 2
    bottom = 0.0
    for _ in range(80):
        mid = 0.5 * (bottom + top)
        bottom, top = (mid, top) if holds(mid) else (bottom, mid)
    crit = bottom
    margin = np.inf if lam == 0 else crit / abs(lam)
    return ThresholdCheck(holds(lam), float(margin), float(crit))


def _check_gap(lam, tau):
    gap = r0(tau)
    if np.any(abs(lam) >= gap / 4):
        raise ThresholdViolation(f"|lambda| = {abs(lam):g} reaches r0(tau)/4 = {np.min(gap) / 4:g}")


def effective_block(lam: float, tau: float, beta: float, d: SpectralDensity) -> np.ndarray:
    """Second-order block of M on span{|00>, |11>} (populations |0>, |1>).

    1 - lam^2 tau^2 [[a-, -a-], [-a+, a+]] with a+- evaluated at the actual tau.
    """
    _check_gap(lam, tau)
    ri = reservoir_integrals(tau, beta, d)
    ap, am = float(ri.alpha_plus), float(ri.alpha_minus)
    return np.eye(2) - lam**2 * tau**2 * np.array([[am, -am], [-ap, ap]])


@dataclass(frozen=True)
class SpinFermionParams:
    lam: float
    tau0: float
    sigma_law: object
    beta_law: object
    density: SpectralDensity

    def __post_init__(self):
        lo, hi = self.sigma_law.support_bounds()
        if not max(abs(lo), abs(hi)) < self.tau0:
            raise ValueError("sigma must stay inside (-tau0, tau0)")
        if not np.isfinite(self.beta_law.support_bounds()[1]):
            raise ValueError("beta law must have bounded support")

    @property
    def epsilon(self) -> float:
        lo, hi = self.sigma_law.support_bounds()
        return max(abs(lo), abs(hi))

    def distribution(self) -> ParameterDistribution:
        return ParameterDistribution({"sigma": self.sigma_law, "beta": self.beta_law})


def _deterministic_beta(p: SpinFermionParams) -> float:
    if not p.beta_law.is_deterministic:
        raise UnsupportedDistribution("the q(sigma) expansion is stated for deterministic beta")
    return p.beta_law.mean


def q_terms(p: SpinFermionParams) -> dict:
    """The four terms of the small-sigma expansion of q."""
    beta = _deterministic_beta(p)
    ri = reservoir_integrals(p.tau0, beta, p.density)
    ap, am = float(ri.alpha_plus), float(ri.alpha_minus)
    xp, xm = float(ri.xi_plus), float(ri.xi_minus)
    ep, em = float(ri.eta_plus), float(ri.eta_minus)
    m1, m2 = p.sigma_law.mean, p.sigma_law.second_moment
    s, t2 = ap + am, p.tau0**2
    return {
        "leading": ap / s,
        "first": 2 * m1 * (am * xp - ap * xm) / (t2 * s**2),
        # minus sign: second-order term of the ratio f+ / (f+ + f-)
        "mean_squared": -4 * m1**2 * (xp + xm) * (am * xp - ap * xm) / (t2**2 * s**3),
        "second_moment": m2 * (am * ep - ap * em) / (t2 * s**2),
    }


def q_probability(p: SpinFermionParams) -> float:
    q = float(sum(q_terms(p).values()))
    if not 0.0 <= q <= 1.0:
        warnings.warn(f"q = {q:.6g} lies outside [0, 1]; expansion outside its validity regime", QOutOfRangeWarning)
    return q


def averaged_block(p: SpinFermionParams, n_nodes: int = 64) -> np.ndarray:
    """E[1 - lam^2 tau^2 K(tau, beta)] over the laws of sigma and beta."""
    nodes, w = p.distribution().quadrature(n_nodes)
    tau = p.tau0 + nodes["sigma"]
    _check_gap(p.lam, tau)
    ri = reservoir_integrals(tau, nodes["beta"], p.density)
    fp = np.dot(w, tau**2 * ri.alpha_plus)
    fm = np.dot(w, tau**2 * ri.alpha_minus)
    return np.eye(2) - p.lam**2 * np.array([[fm, -fm], [-fp, fp]])


def q_direct(p: SpinFermionParams, n_nodes: int = 64) -> float:
    """q from the invariant vector of the transposed averaged block."""
    b = averaged_block(p, n_nodes)
    w, v = np.linalg.eig(b.T)
    i = np.argmin(np.abs(w - 1.0))
    vec = np.real(v[:, i])
    return float(vec[0] / vec.sum())


def asymptotic_state_expansion(p: SpinFermionParams, a) -> float:
    a = np.asarray(a)
    q = q_probability(p)
    return float(np.real(q * a[0, 0] + (1 - q) * a[1, 1]))


def expansion_budget(p: SpinFermionParams) -> float:
    """eps^3 + lam^2, the size of the remainder up to a constant."""
    return p.epsilon**3 + p.lam**2


def surrogate_rdo_batch(lam, tau, beta, d: SpectralDensity, chunk: int = 2048) -> np.ndarray:
    """4x4 second-order RDOs: population block on |0><0|, |1><1| and e+ / e- on the coherences."""
    tau, beta = np.broadcast_arrays(np.atleast_1d(np.asarray(tau, float)), np.atleast_1d(np.asarray(beta, float)))
    _check_gap(lam, tau)
    if len(tau) > chunk:
        return np.concatenate(
            [surrogate_rdo_batch(lam, tau[i : i + chunk], beta[i : i + chunk], d) for i in range(0, len(tau), chunk)]
        )
    ri = reservoir_integrals(tau, beta, d)
    c = lam**2 * tau**2
    x = c * alpha_total(tau, d)
    y = c * lamb_shift_integral(tau, d)
    m = np.zeros((len(tau), 4, 4), dtype=complex)
    m[:, 0, 0] = 1 - c * ri.alpha_minus
    m[:, 0, 3] = c * ri.alpha_minus
    m[:, 3, 0] = c * ri.alpha_plus
    m[:, 3, 3] = 1 - c * ri.alpha_plus
    m[:, 1, 1] = np.exp(2j * tau) * (1 - x / 2 + 1j * y)
    m[:, 2, 2] = np.exp(-2j * tau) * (1 - x / 2 - 1j * y)
    return m


@dataclass(frozen=True)
class SpinFermionModel:
    params: SpinFermionParams
    name = "spin_fermion"

    @property
    def dist(self) -> ParameterDistribution:
        return self.params.distribution()

    def rdo_batch(self, params: dict) -> np.ndarray:
        p = self.params
        return surrogate_rdo_batch(p.lam, p.tau0 + np.asarray(params["sigma"]), params["beta"], p.density)


def fixed_params(lam, tau0, beta, density=None, sigma_law=None) -> SpinFermionParams:
    return SpinFermionParams(
        lam, tau0, sigma_law if sigma_law is not None else PointMass(0.0), PointMass(beta), density or default_density()
    )
