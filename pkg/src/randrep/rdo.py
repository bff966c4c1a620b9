"""Model-agnostic RDO layer: invariant functional, P + M_Q split, theta process, gate test, E[M].

A model is any object with a `dist` (ParameterDistribution) and a
`rdo_batch(params: dict) -> (n, 4, 4)` method.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from randrep.errors import DegenerateEigenvalue
from randrep.linalg import PSI_S, dagger, eig_decompose, eigenspace_projection, riesz_projection
from randrep.rng import trajectory_rng

GATE_TOL = 1e-6


@dataclass(frozen=True)
class RdoSample:
    m: np.ndarray
    tau: float = float("nan")
    omega_tag: Any = None

    def check(self, atol=1e-10):
        if np.max(np.abs(self.m @ PSI_S - PSI_S)) > atol:
            raise ValueError("RDO does not fix psi_S")
        if np.max(np.abs(np.linalg.eigvals(self.m))) > 1 + 1e-9:
            raise ValueError("RDO has spectrum outside the closed unit disk")
        return self


@dataclass(frozen=True)
class RdoDecomposition:
    p: np.ndarray
    m_q: np.ndarray
    psi: np.ndarray


def _matrix(s):
    return s.m if isinstance(s, RdoSample) else np.asarray(s, dtype=complex)


def invariant_functional(s, tol: float = 1e-8, allow_degenerate: bool = False) -> np.ndarray:
    """psi(omega) = P_1* psi_S, the invariant vector of M* with <psi, psi_S> = 1.

    With `allow_degenerate`, a multiple eigenvalue 1 is handled by the
    projection onto ker(M - 1) along ran(M - 1) instead of raising.
    """
    m = _matrix(s)
    try:
        p = riesz_projection(eig_decompose(m, tol), 1.0, tol)
    except DegenerateEigenvalue:
        if not allow_degenerate:
            raise
        p = eigenspace_projection(m, 1.0, tol)
    psi = dagger(p) @ PSI_S
    return psi / np.conj(np.vdot(psi, PSI_S))


def decompose(s, tol: float = 1e-8, allow_degenerate: bool = False) -> RdoDecomposition:
    m = _matrix(s)
    psi = invariant_functional(m, tol, allow_degenerate)
    p = np.outer(PSI_S, psi.conj())
    return RdoDecomposition(p, m - p, psi)


@dataclass(frozen=True)
class GateReport:
    passed: bool
    moduli: np.ndarray
    n_unit: int  # eigenvalues within tol of 1
    subdominant: float  # largest modulus among the other eigenvalues
    ill_conditioned: bool


def gate_report(s, tol: float = GATE_TOL) -> GateReport:
    m = _matrix(s)
    es = eig_decompose(m, tol)
    w = es.eigenvalues
    near_one = np.abs(w - 1.0) < tol
    n_unit = int(near_one.sum())
    rest = np.abs(w[~near_one])
    sub = float(rest.max()) if rest.size else 0.0
    passed = n_unit == 1 and sub <= 1.0 - tol
    return GateReport(passed, np.abs(w), n_unit, sub, bool(es.flags.any()))


def gate_membership(s, tol: float = GATE_TOL) -> bool:
    """True iff 1 is a simple eigenvalue and all others have modulus <= 1 - tol."""
    return gate_report(s, tol).passed


def gate_batch(ms: np.ndarray, tol: float = GATE_TOL) -> np.ndarray:
    w = np.linalg.eigvals(ms)
    near_one = np.abs(w - 1.0) < tol
    others = np.where(near_one, 0.0, np.abs(w))
    return (near_one.sum(axis=1) == 1) & (others.max(axis=1) <= 1.0 - tol)


def theta_sequence(samples, tol: float = 1e-8, allow_degenerate: bool = False) -> list:
    """theta_1 = psi(omega_1), theta_{n+1} = M*(omega_{n+1}) theta_n."""
    ms = [_matrix(s) for s in samples]
    theta = invariant_functional(ms[0], tol, allow_degenerate)
    out = [theta]
    for m in ms[1:]:
        theta = dagger(m) @ theta
        out.append(theta)
    return out


def theta_direct(samples, n: int, tol: float = 1e-8, allow_degenerate: bool = False) -> np.ndarray:
    """theta_n = M_n* ... M_2* psi(omega_1) as one explicit product."""
    ms = [_matrix(s) for s in samples]
    prod = np.eye(4, dtype=complex)
    for m in ms[1:n]:
        prod = dagger(m) @ prod
    return prod @ invariant_functional(ms[0], tol, allow_degenerate)


@dataclass(frozen=True)
class ExpectedRdo:
    mean: np.ndarray
    std_error: Optional[np.ndarray] = None
    n_samples: int = 0


def expected_rdo(model, mode: str = "closed_form", n: int = 100_000, seed: int = 0, n_nodes: int = 64) -> ExpectedRdo:
    """E[M] by quadrature / finite sums ("closed_form") or Monte Carlo ("monte_carlo")."""
    if mode == "closed_form":
        nodes, w = model.dist.quadrature(n_nodes)
        ms = model.rdo_batch(nodes)
        return ExpectedRdo(np.einsum("n,nij->ij", w, ms), None, len(w))
    if mode == "monte_carlo":
        ms = model.rdo_batch(model.dist.sample(trajectory_rng(seed, 0), n))
        se = (ms.real.std(axis=0, ddof=1) + 1j * ms.imag.std(axis=0, ddof=1)) / np.sqrt(n)
        return ExpectedRdo(ms.mean(axis=0), se, n)
    raise ValueError(f"unknown mode {mode!r}")


def limit_functional(em, tol: float = 1e-8) -> np.ndarray:
    """theta = P*_{1,E[M]} psi_S for an averaged RDO."""
    return invariant_functional(em, tol)


def theta_resolvent(model, n_nodes: int = 64, tol: float = 1e-8) -> np.ndarray:
    """theta = (1 - E[M_Q]*)^{-1} E[psi], the second expression for the limit functional."""
    nodes, w = model.dist.quadrature(n_nodes)
    ms = model.rdo_batch(nodes)
    e_psi = np.zeros(4, dtype=complex)
    e_mq = np.zeros((4, 4), dtype=complex)
    for wi, m in zip(w, ms):
        d = decompose(m, tol, allow_degenerate=True)
        e_psi += wi * d.psi
        e_mq += wi * d.m_q
    return np.linalg.solve(np.eye(4) - dagger(e_mq), e_psi)
