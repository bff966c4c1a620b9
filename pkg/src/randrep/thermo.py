"""Energy and entropy production for the spin-spin model."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.linalg import expm

from randrep.ergodic import RdoStream, batch_means
from randrep.linalg import (
    check_density,
    density_to_row,
    functional_to_density,
    observable_to_gns,
    thermal_partial_trace,
)
from randrep.rdo import expected_rdo, limit_functional
from randrep.spin_spin import (
    SpinSpinModel,
    SpinSpinParams,
    _eigvecs,
    _spectrum_arrays,
    coupling,
    environment_populations,
    hamiltonian,
)


def _heisenberg_flux(p: SpinSpinParams, x: np.ndarray) -> np.ndarray:
    """(id (x) rho_E)(x - e^{i tau h} x e^{-i tau h})."""
    u = expm(1j * p.tau * hamiltonian(p))
    rho_e = np.diag(environment_populations(p.beta, p.e_e)).astype(complex)
    return thermal_partial_trace(x - u @ x @ u.conj().T, rho_e)


def energy_flux_operator(p: SpinSpinParams) -> np.ndarray:
    """Effective 2x2 operator whose expectation is the energy jump of one interaction."""
    return _heisenberg_flux(p, coupling(p))


def entropy_flux_operator(p: SpinSpinParams) -> np.ndarray:
    h_s = np.kron(np.diag([0.0, p.e_s]), np.eye(2))
    return p.beta * _heisenberg_flux(p, h_s + coupling(p))


def _flux_batch(e_s, lam, tau, beta, e_e, with_h_s: bool):
    """Vectorized flux operators (n, 2, 2) via the closed-form eigenbasis of h."""
    tau, beta, e_e = np.broadcast_arrays(*(np.atleast_1d(np.asarray(x, dtype=float)) for x in (tau, beta, e_e)))
    energies, a, b = _spectrum_arrays(e_s, e_e, lam)
    psi = _eigvecs(a, b).reshape(len(a), 4, 4)  # psi[n, k, 2 s + e]
    v = lam * np.array([[0, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 0]], dtype=float)
    x = np.broadcast_to(v, (len(a), 4, 4)).copy()
    if with_h_s:
        x += np.kron(np.diag([0.0, e_s]), np.eye(2))
    ph = np.exp(1j * tau[:, None] * energies)  # e^{i tau E_k}
    u = np.einsum("nkx,nk,nky->nxy", psi, ph, psi)
    evolved = u @ x @ np.conj(np.swapaxes(u, 1, 2))
    rho = environment_populations(beta, e_e)
    d4 = (x - evolved).reshape(-1, 2, 2, 2, 2)
    return np.einsum("niajb,nba->nij", d4, np.einsum("ne,ef->nef", rho, np.eye(2)))


def energy_flux_batch(model: SpinSpinModel, params: dict) -> np.ndarray:
    return _flux_batch(model.e_s, model.lam, params["tau"], params["beta"], params["e_e"], False)


def entropy_flux_batch(model: SpinSpinModel, params: dict) -> np.ndarray:
    beta = np.atleast_1d(np.asarray(params["beta"], dtype=float))
    f = _flux_batch(model.e_s, model.lam, params["tau"], params["beta"], params["e_e"], True)
    return beta[:, None, None] * f


def asymptotic_density(model, n_nodes: int = 64) -> np.ndarray:
    """rho_+ from the invariant functional of E[M]."""
    theta = limit_functional(expected_rdo(model, n_nodes=n_nodes).mean)
    return functional_to_density(theta)


def _expect(model, fn, n_nodes):
    nodes, w = model.dist.quadrature(n_nodes)
    return np.einsum("n,nij->ij", w, fn(model, nodes))


def dE_plus(model: SpinSpinModel, n_nodes: int = 64, rho_plus=None) -> float:
    rho = asymptotic_density(model, n_nodes) if rho_plus is None else rho_plus
    return float(np.real(np.trace(rho @ _expect(model, energy_flux_batch, n_nodes))))


def dS_plus(model: SpinSpinModel, n_nodes: int = 64, rho_plus=None) -> float:
    rho = asymptotic_density(model, n_nodes) if rho_plus is None else rho_plus
    return float(np.real(np.trace(rho @ _expect(model, entropy_flux_batch, n_nodes))))


@dataclass(frozen=True)
class FluxReport:
    dE_plus: float
    dS_plus: float
    beta_effective: Union[float, str]
    second_law_residual: Optional[float]
    dE_plus_per_time: float
    rho_plus: np.ndarray = field(repr=False)

    def to_dict(self):
        d = {
            "dE_plus": self.dE_plus,
            "dS_plus": self.dS_plus,
            "beta_effective": self.beta_effective,
            "dE_plus_per_time": self.dE_plus_per_time,
        }
        if self.second_law_residual is not None:
            d["second_law_residual"] = self.second_law_residual
        return d


def flux_report(model: SpinSpinModel, n_nodes: int = 64) -> FluxReport:
    random_beta = not model.dist.is_deterministic("beta")
    if model.lam == 0:
        # uncoupled: every flux vanishes, and the limit state depends on the initial one
        beta = "random" if random_beta else model.dist["beta"].mean
        return FluxReport(0.0, 0.0, beta, None if random_beta else 0.0, 0.0, np.full((2, 2), np.nan))
    rho = asymptotic_density(model, n_nodes)
    de = dE_plus(model, n_nodes, rho)
    ds = dS_plus(model, n_nodes, rho)
    per_time = de / model.dist["tau"].mean
    if model.dist.is_deterministic("beta"):
        beta = model.dist["beta"].mean
        return FluxReport(de, ds, beta, abs(ds - beta * de), per_time, rho)
    return FluxReport(de, ds, "random", None, per_time, rho)


@dataclass(frozen=True)
class TrajectoryFluxes:
    delta_e: np.ndarray  # cumulative energy Delta E(m), m = 1..n
    delta_s: np.ndarray  # cumulative entropy flux, m = 1..n
    slope_e: float
    slope_s: float
    se_e: float
    se_s: float
    residual: float  # slope_s - beta * slope_e (deterministic beta only)
    se_residual: float


def cumulative_energy(model: SpinSpinModel, initial, n_steps: int, seed: int, index: int = 0, burn_in: int = 0, n_batches: int = 20):
    """Delta E(m) = sum_{k <= m} rho(j(k)) along one draw, with j(k) the jump at the k-th interaction.

    rho(j(k)) = Tr(rho_{k-1} J(w_k)), where rho_{k-1} is the system state before
    the k-th interaction and J the energy-flux operator of that interaction.
    """
    rho0 = check_density(initial, atol=1e-10)
    stream = RdoStream(model, seed, index)
    row = density_to_row(rho0)
    je = np.empty(n_steps)
    js = np.empty(n_steps)
    for lo, hi in stream.spans(n_steps):
        params = stream.params(np.arange(lo, hi))
        ms = stream.matrices(lo, hi)
        xe = np.array([observable_to_gns(f) for f in energy_flux_batch(model, params)])
        xs = np.array([observable_to_gns(f) for f in entropy_flux_batch(model, params)])
        for j in range(hi - lo):
            je[lo + j] = np.real(row @ xe[j])
            js[lo + j] = np.real(row @ xs[j])
            row = row @ ms[j]
        stream.release_before(lo // 65536)
    tail = slice(burn_in, None)
    me, se_e = batch_means(je[tail], n_batches)
    ms_, se_s = batch_means(js[tail], n_batches)
    if model.dist.is_deterministic("beta"):
        beta = model.dist["beta"].mean
        mr, se_r = batch_means(js[tail] - beta * je[tail], n_batches)
    else:
        mr, se_r = float("nan"), float("nan")
    return TrajectoryFluxes(np.cumsum(je), np.cumsum(js), float(me), float(ms_), float(se_e), float(se_s), float(mr), float(se_r))


def joint_energy_jump(p: SpinSpinParams, rho_s) -> float:
    """Energy jump computed on the joint 4x4 state, without the partial-trace reduction."""
    rho_e = np.diag(environment_populations(p.beta, p.e_e)).astype(complex)
    joint = np.kron(rho_s, rho_e)
    u = expm(-1j * p.tau * hamiltonian(p))
    after = u @ joint @ u.conj().T
    v = coupling(p)
    return float(np.real(np.trace(joint @ v) - np.trace(after @ v)))
