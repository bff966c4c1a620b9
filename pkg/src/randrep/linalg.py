"""Small dense complex linear algebra on C^2 (x) C^2.

Conventions used everywhere in the package:

* tensor order is system (x) environment, |i>|j> -> index 2*i + j (np.kron);
* the reference vector is psi_S = (|00> + |11>)/sqrt(2);
* a vector phi corresponds to the observable A with (A (x) 1) psi_S = phi,
  which is A = sqrt(2) * phi.reshape(2, 2).

With these conventions, the 4x4 matrix of a map A -> M(A) in the row-major
basis {|0><0|, |0><1|, |1><0|, |1><1|} is also the matrix of the operator
M acting on vectors (A (x) 1) psi_S. Its adjoint M* is the conjugate transpose.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from randrep.errors import BadDensity, DegenerateEigenvalue, EigenvalueNotFound, NonConvergence

SQRT2 = np.sqrt(2.0)
PSI_S = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / SQRT2

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# condition number above which an eigenvalue is flagged as ill-conditioned
COND_FLAG = 1e8


def dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


def as_matrix(m, dim=None) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


@dataclass(frozen=True)
class EigenSystem:
    eigenvalues: np.ndarray
    right: np.ndarray  # columns are right eigenvectors
    left: np.ndarray  # rows are left eigenvectors, left @ right = 1
    condition: np.ndarray  # eigenvalue condition numbers |u_i| |v_i|
    flags: np.ndarray  # True where ill-conditioned or nearly degenerate

    def residual(self, m) -> float:
        m = np.asarray(m)
        r = m @ self.right - self.right * self.eigenvalues
        return float(np.max(np.linalg.norm(r, axis=0)))


def eig_decompose(m, tol: float = 1e-8) -> EigenSystem:
    """Eigendecomposition of a (possibly non-normal) matrix of dimension <= 16.

    Eigenvalues come sorted by descending modulus, ties broken by ascending
    phase. Entries with large condition number or a neighbour closer than
    `tol` are flagged.
    """
    a = as_matrix(m)
    if a.shape[0] > 16:
        raise ValueError("eig_decompose is meant for dim <= 16")
    try:
        w, v = sla.eig(a)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NonConvergence(f"eigensolver failed (|M| = {np.linalg.norm(a):.3e}): {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise NonConvergence(f"eigensolver returned non-finite values (|M| = {np.linalg.norm(a):.3e})")

    # round before sorting so that float noise does not reorder ties
    key_mod = -np.round(np.abs(w), 12)
    key_phase = np.round(np.angle(w), 12)
    order = np.lexsort((key_phase, key_mod))
    w, v = w[order], v[:, order]
    v = v / np.linalg.norm(v, axis=0)

    flags = np.zeros(len(w), dtype=bool)
    if np.linalg.cond(v) > 1e12:
        left = np.linalg.pinv(v)
        flags[:] = True
    else:
        left = np.linalg.inv(v)
    cond = np.linalg.norm(left, axis=1) * np.linalg.norm(v, axis=0)
    flags |= cond > COND_FLAG
    gaps = np.abs(w[:, None] - w[None, :]) + np.diag(np.full(len(w), np.inf))
    flags |= gaps.min(axis=1) < tol
    return EigenSystem(w, v, left, cond, flags)


def riesz_projection(es: EigenSystem, target: complex, tol: float = 1e-8) -> np.ndarray:
    """Rank-one spectral projection |v><u| for a simple eigenvalue near `target`."""
    hits = np.flatnonzero(np.abs(es.eigenvalues - target) < tol)
    if len(hits) == 0:
        raise EigenvalueNotFound(f"no eigenvalue within {tol:g} of {target}")
    if len(hits) > 1:
        raise DegenerateEigenvalue(f"{len(hits)} eigenvalues within {tol:g} of {target}")
    i = hits[0]
    return np.outer(es.right[:, i], es.left[i, :])


def eigenspace_projection(m, target: complex = 1.0, tol: float = 1e-8) -> np.ndarray:
    """Projection onto ker(M - target) along ran(M - target).

    This is the spectral projection when the eigenvalue is semisimple, which
    holds for every eigenvalue of modulus one of a contraction. Unlike
    `riesz_projection` it accepts degenerate eigenvalues.
    """
    a = as_matrix(m) - target * np.eye(len(m))
    r = sla.null_space(a, rcond=tol)
    l = sla.null_space(dagger(a), rcond=tol)
    if r.shape[1] == 0:
        raise EigenvalueNotFound(f"{target} is not an eigenvalue within {tol:g}")
    if r.shape[1] != l.shape[1]:
        raise NonConvergence("left and right eigenspaces have different dimensions")
    g = dagger(l) @ r
    return r @ np.linalg.solve(g, dagger(l))


def check_density(rho, atol: float = 1e-12) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise BadDensity(f"density must be square, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise BadDensity("density has non-finite entries")
    if np.max(np.abs(rho - dagger(rho))) > atol:
        raise BadDensity("density is not Hermitian")
    if abs(np.trace(rho) - 1) > atol:
        raise BadDensity(f"density has trace {np.trace(rho).real:.15g}")
    if np.min(np.linalg.eigvalsh(rho)) < -atol:
        raise BadDensity("density has a negative eigenvalue")
    return rho


def thermal_partial_trace(x, rho_e) -> np.ndarray:
    """(id (x) rho_E)(x): the 2x2 matrix A with Tr(B A) = Tr((B (x) 1) x (1 (x) rho_E))."""
    rho_e = check_density(rho_e)
    x4 = np.asarray(x, dtype=complex).reshape(2, 2, 2, 2)
    return np.einsum("iajb,ba->ij", x4, rho_e)


def gns_to_observable(phi) -> np.ndarray:
    return SQRT2 * np.asarray(phi, dtype=complex).reshape(2, 2)


def observable_to_gns(a) -> np.ndarray:
    return np.asarray(a, dtype=complex).reshape(4) / SQRT2


def density_to_row(rho) -> np.ndarray:
    """Row vector r with r @ observable_to_gns(A) = Tr(rho A)."""
    return SQRT2 * np.asarray(rho, dtype=complex).T.reshape(4)


def functional_to_density(theta) -> np.ndarray:
    """Density rho with Tr(rho A) = <theta, (A (x) 1) psi_S>."""
    return dagger(gns_to_observable(theta)) / 2


def contraction_norm(phi) -> float:
    return float(np.linalg.norm(gns_to_observable(phi), 2))


def gibbs(h, beta: float) -> np.ndarray:
    h = np.asarray(h)
    e, u = np.linalg.eigh(h)
    p = np.exp(-beta * (e - e.min()))
    p /= p.sum()
    return (u * p) @ dagger(u)


def gibbs_qubit(beta, energy):
    """Populations (p0, p1) of diag(0, energy) at inverse temperature beta."""
    p1 = 1.0 / (1.0 + np.exp(beta * np.asarray(energy)))
    return 1.0 - p1, p1
