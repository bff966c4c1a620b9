"""Two-qubit spin-spin model.

h = h_S (x) 1 + 1 (x) h_E + lam * v with h_S = diag(0, e_s), h_E = diag(0, e_e) and
v = a (x) a^+ + a^+ (x) a. One interaction step of length tau against an
environment qubit in its Gibbs state at beta gives the unital map
M(A) = (id (x) rho_E)(e^{i tau h} (A (x) 1) e^{-i tau h}).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from randrep.distributions import ParameterDistribution, PointMass
from randrep.errors import DegenerateResonance, GateViolation, UnsupportedDistribution
from randrep.linalg import gibbs_qubit, thermal_partial_trace

LOWER = np.array([[0, 1], [0, 0]], dtype=complex)
RAISE = LOWER.T.copy()
# quantum number n and orientation of the four eigenvectors, order 0+, 0-, 1+, 1-
LEVELS = ("0+", "0-", "1+", "1-")
LATTICE_RTOL = 1e-9


@dataclass(frozen=True)
class SpinSpinParams:
    e_s: float
    e_e: float
    lam: float
    beta: float
    tau: float

    def __post_init__(self):
        for name in ("e_s", "e_e", "lam", "beta", "tau"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.e_s <= 0 or self.e_e <= 0 or self.tau <= 0:
            raise ValueError("e_s, e_e and tau must be positive")
        if self.beta <= 0:
            raise ValueError("beta must be positive")


def omega(e_s, e_e, lam):
    return np.sqrt((np.asarray(e_s) - e_e) ** 2 + 4.0 * np.asarray(lam) ** 2)


def hamiltonian(p: SpinSpinParams) -> np.ndarray:
    h_s = np.diag([0.0, p.e_s])
    h_e = np.diag([0.0, p.e_e])
    v = np.kron(LOWER, RAISE) + np.kron(RAISE, LOWER)
    return np.kron(h_s, np.eye(2)) + np.kron(np.eye(2), h_e) + p.lam * v


def coupling(p: SpinSpinParams) -> np.ndarray:
    return p.lam * (np.kron(LOWER, RAISE) + np.kron(RAISE, LOWER))


@dataclass(frozen=True)
class HLambdaSpectrum:
    energies: np.ndarray  # E_{0+}, E_{0-}, E_{1+}, E_{1-}
    a: np.ndarray
    b: np.ndarray

    def eigenvectors(self) -> np.ndarray:
        """Array psi[k, s, e] of the real eigenvectors a|n>|0> + b|1-n>|1>."""
        return _eigvecs(self.a[None], self.b[None])[0]


def _spectrum_arrays(e_s, e_e, lam):
    """Vectorized energies (n, 4) and coefficients a, b (n, 4)."""
    e_s, e_e, lam = np.broadcast_arrays(*(np.atleast_1d(np.asarray(x, dtype=float)) for x in (e_s, e_e, lam)))
    w = omega(e_s, e_e, lam)
    e1p = 0.5 * (e_s + e_e) + 0.5 * w
    e1m = 0.5 * (e_s + e_e) - 0.5 * w
    energies = np.stack([np.zeros_like(e_s), e_s + e_e, e1p, e1m], axis=-1)
    a = np.zeros_like(energies)
    b = np.zeros_like(energies)
    a[:, 0] = 1.0
    b[:, 1] = 1.0
    # rotation angle of the (|10>, |01>) block; stable for tiny lam and gives
    # the uncoupled labelling (larger of e_s, e_e is 1+) at lam = 0
    theta = 0.5 * np.arctan2(2.0 * lam, e_s - e_e)
    a[:, 2], b[:, 2] = np.cos(theta), np.sin(theta)
    a[:, 3], b[:, 3] = -np.sin(theta), np.cos(theta)
    return energies, a, b


def _eigvecs(a, b):
    n = a.shape[0]
    psi = np.zeros((n, 4, 2, 2))
    # k = 0+, 0- have n = 0; k = 1+, 1- have n = 1
    for k, nk in enumerate((0, 0, 1, 1)):
        psi[:, k, nk, 0] = a[:, k]
        psi[:, k, 1 - nk, 1] = b[:, k]
    return psi


def hamiltonian_spectrum(p: SpinSpinParams) -> HLambdaSpectrum:
    energies, a, b = _spectrum_arrays(p.e_s, p.e_e, p.lam)
    return HLambdaSpectrum(energies[0], a[0], b[0])


def _rdo_from_spectrum(energies, psi, tau, rho_e, chunk=8192):
    """Batch of 4x4 RDO matrices from the eigen-decomposition of h.

    M[(s,t),(p,q)] = sum_{k,l} e^{i tau (E_k - E_l)} sum_e psi_k[s,e] psi_l[t,e] rho_e
                     * sum_f psi_k[p,f] psi_l[q,f]
    """
    n = len(tau)
    out = np.empty((n, 4, 4), dtype=complex)
    shared = psi.ndim == 3
    if shared:
        g = np.einsum("kse,lte->eklst", psi, psi).reshape(2, 16, 4)
        hh = np.einsum("kpf,lqf->klpq", psi, psi).reshape(16, 4)
        # c[kl, e, (st),(pq)]
        c = np.einsum("ekx,ky->kexy", g, hh).reshape(16, 2, 16)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        en = energies[lo:hi] if energies.ndim == 2 else energies[None]
        ph = np.exp(1j * tau[lo:hi, None, None] * (en[:, :, None] - en[:, None, :])).reshape(-1, 16)
        if shared:
            m = (ph[:, :, None] * rho_e[lo:hi, None, :]).reshape(-1, 32) @ c.reshape(32, 16)
        else:
            ps = psi[lo:hi]
            g = np.einsum("nkse,nlte,ne->nklst", ps, ps, rho_e[lo:hi]).reshape(-1, 16, 4)
            hh = np.einsum("nkpf,nlqf->nklpq", ps, ps).reshape(-1, 16, 4)
            m = np.einsum("nk,nks,nkp->nsp", ph, g, hh, optimize=True)
        out[lo:hi] = m.reshape(-1, 4, 4)
    return out


def environment_populations(beta, e_e):
    p0, p1 = gibbs_qubit(np.asarray(beta, dtype=float), np.asarray(e_e, dtype=float))
    return np.stack(np.broadcast_arrays(p0, p1), axis=-1)


def rdo_batch(e_s, lam, tau, beta, e_e) -> np.ndarray:
    """Vectorized closed-form RDO matrices for arrays of (tau, beta, e_e)."""
    tau, beta, e_e = np.broadcast_arrays(*(np.atleast_1d(np.asarray(x, dtype=float)) for x in (tau, beta, e_e)))
    rho = environment_populations(beta, e_e)
    if np.all(e_e == e_e[0]):
        energies, a, b = _spectrum_arrays(e_s, e_e[0], lam)
        return _rdo_from_spectrum(energies[0], _eigvecs(a, b)[0], tau, rho)
    energies, a, b = _spectrum_arrays(e_s, e_e, lam)
    return _rdo_from_spectrum(energies, _eigvecs(a, b), tau, rho)


def build_rdo_map(p: SpinSpinParams) -> np.ndarray:
    """Matrix of M in the basis |0><0|, |0><1|, |1><0|, |1><1| from the closed-form spectrum of h."""
    return rdo_batch(p.e_s, p.lam, p.tau, p.beta, p.e_e)[0]


def build_dual_map(p: SpinSpinParams) -> np.ndarray:
    return build_rdo_map(p).conj().T


def rdo_map_from_hamiltonian(p: SpinSpinParams) -> np.ndarray:
    """Reference route: exponentiate the dense h and take the thermal partial trace."""
    u = expm(1j * p.tau * hamiltonian(p))
    rho_e = np.diag(environment_populations(p.beta, p.e_e)).astype(complex)
    m = np.empty((4, 4), dtype=complex)
    for j in range(4):
        a = np.zeros(4, dtype=complex)
        a[j] = 1.0
        x = u @ np.kron(a.reshape(2, 2), np.eye(2)) @ u.conj().T
        m[:, j] = thermal_partial_trace(x, rho_e).reshape(4)
    return m


def eigenvalue_arrays(e_s, e_e, lam, tau):
    """Closed forms (e0, e_minus, e_plus) of the non-unit eigenvalues, vectorized.

    e_minus belongs to |1><0| and e_plus = conj(e_minus) to |0><1|.
    """
    e_s, e_e, lam, tau = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (e_s, e_e, lam, tau)))
    w = omega(e_s, e_e, lam)
    phase = np.exp(1j * tau * w)
    delta = e_s - e_e
    up = delta > 0
    # ratio = (c + 4 lam^2 e^{i tau w}) / (c + 4 lam^2), c = (delta - w)^2, rewritten without cancellation:
    # delta > 0: delta - w = -4 lam^2 / (delta + w), so divide through by 4 lam^2
    g_up = 4.0 * lam**2 / np.where(up, delta + w, 1.0) ** 2
    dm = np.where(up, 1.0, delta - w)
    dm = np.where(dm == 0.0, 1.0, dm)  # lam = 0 at e_s = e_e: ratio -> 1 = e^{i tau w}
    g_dn = 4.0 * lam**2 / dm**2
    ratio = np.where(up, (g_up + phase) / (g_up + 1.0), (1.0 + g_dn * phase) / (1.0 + g_dn))
    e0 = np.abs(ratio) ** 2
    e_minus = ratio * np.exp(0.5j * tau * (e_s + e_e - w))
    return e0, e_minus, np.conj(e_minus)


def rdo_eigenvalues(p: SpinSpinParams) -> dict:
    e0, em, ep = eigenvalue_arrays(p.e_s, p.e_e, p.lam, p.tau)
    return {"one": 1.0 + 0j, "e0": complex(e0), "e_minus": complex(em), "e_plus": complex(ep)}


def period(p_or_e_s, e_e=None, lam=None) -> float:
    if e_e is None:
        p = p_or_e_s
        e_s, e_e, lam = p.e_s, p.e_e, p.lam
    else:
        e_s = p_or_e_s
    w = float(omega(e_s, e_e, lam))
    if w == 0.0:
        raise DegenerateResonance("period undefined: e_s == e_e and lambda == 0")
    return 2.0 * np.pi / w


def in_period_lattice(tau, t_period, rtol=LATTICE_RTOL):
    x = np.asarray(tau, dtype=float) / t_period
    k = np.round(x)
    return (np.abs(x - k) < rtol) & (k >= 1)


def fixed_vector(p: SpinSpinParams) -> np.ndarray:
    """Common invariant vector of M*: (e^{-beta' h_S} (x) 1) psi_S / Z * 2 with beta' = beta e_e / e_s."""
    bp = p.beta * p.e_e / p.e_s
    p0, p1 = gibbs_qubit(bp, p.e_s)
    return np.sqrt(2.0) * np.array([p0, 0, 0, p1], dtype=complex)


@dataclass(frozen=True)
class SpinSpinModel:
    """Spin-spin model with random (tau, beta, e_e) drawn from `dist`."""

    e_s: float
    lam: float
    dist: ParameterDistribution
    name = "spin_spin"

    @classmethod
    def from_params(cls, p: SpinSpinParams):
        laws = {"tau": PointMass(p.tau), "beta": PointMass(p.beta), "e_e": PointMass(p.e_e)}
        return cls(p.e_s, p.lam, ParameterDistribution(laws))

    def rdo_batch(self, params: dict) -> np.ndarray:
        return rdo_batch(self.e_s, self.lam, params["tau"], params["beta"], params["e_e"])

    def params_at(self, tau, beta, e_e) -> SpinSpinParams:
        return SpinSpinParams(self.e_s, float(e_e), self.lam, float(beta), float(tau))

    def random_names(self):
        return [k for k in ("tau", "beta", "e_e") if not self.dist.is_deterministic(k)]


def _lattice_mass(tau_law, e_e_law, e_s, lam, n_nodes=128):
    """Probability that tau lies in T*N, from the discrete part of the laws."""
    if tau_law.kind not in ("point", "finite") or e_e_law.kind not in ("point", "finite"):
        return 0.0
    tx, tw = tau_law.quadrature(n_nodes)
    ex, ew = e_e_law.quadrature(n_nodes)
    mass = 0.0
    for t, wt in zip(tx, tw):
        for e, we in zip(ex, ew):
            w = float(omega(e_s, e, lam))
            if w == 0.0 or in_period_lattice(t, 2 * np.pi / w):
                mass += wt * we
    return mass


def gate_hypothesis(model: SpinSpinModel) -> bool:
    """p(tau not in T N) != 0 for the model's law."""
    return _lattice_mass(model.dist["tau"], model.dist["e_e"], model.e_s, model.lam) < 1.0 - 1e-12


def infer_case(model: SpinSpinModel) -> str:
    rnd = model.random_names()
    if len(rnd) > 1:
        raise UnsupportedDistribution(f"closed forms cover one random parameter at a time, got {rnd}")
    return {"tau": "random_tau", "e_e": "random_energy", "beta": "random_beta"}.get(rnd[0] if rnd else "tau")


def asymptotic_beta(case: str, model: SpinSpinModel, n_nodes: int = 128) -> float:
    d, e_s, lam = model.dist, model.e_s, model.lam
    need_fixed = {"random_tau": ("beta", "e_e"), "random_energy": ("tau", "beta"), "random_beta": ("tau", "e_e")}
    if case not in need_fixed:
        raise ValueError(f"unknown case {case!r}")
    for k in need_fixed[case]:
        if not d.is_deterministic(k):
            raise UnsupportedDistribution(f"case {case} needs a deterministic {k}")
    if not gate_hypothesis(model):
        raise GateViolation("p(tau not in T N) = 0: no interaction time leaves the spectral gate open")

    if case == "random_tau":
        return d["beta"].mean * d["e_e"].mean / e_s
    if case == "random_beta":
        bx, bw = d["beta"].quadrature(n_nodes)
        e_e = d["e_e"].mean
        ez = np.dot(bw, 1.0 / (1.0 + np.exp(-bx * e_e)))
        return -np.log(1.0 / ez - 1.0) / e_s
    # random_energy
    tau, beta = d["tau"].mean, d["beta"].mean
    ex, ew = d["e_e"].quadrature(n_nodes)
    e0 = eigenvalue_arrays(e_s, ex, lam, tau)[0]
    one_minus_2zinv = -np.tanh(0.5 * beta * ex)
    x = np.dot(ew, (1.0 - e0) * one_minus_2zinv) / (1.0 - np.dot(ew, e0))
    return -np.log(2.0 / (1.0 - x) - 1.0) / e_s


def gibbs_state(beta_prime: float, e_s: float) -> np.ndarray:
    p0, p1 = gibbs_qubit(beta_prime, e_s)
    return np.diag([p0, p1]).astype(complex)


def asymptotic_state(case: str, model: SpinSpinModel, n_nodes: int = 128) -> np.ndarray:
    return gibbs_state(asymptotic_beta(case, model, n_nodes), model.e_s)
