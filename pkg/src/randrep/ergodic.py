"""Random products M(w1)...M(wn), Cesaro means and decay-rate fits."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from randrep.errors import GateViolation
from randrep.linalg import PSI_S, check_density, contraction_norm, dagger, density_to_row, observable_to_gns
from randrep.rdo import decompose, expected_rdo, gate_batch, limit_functional
from randrep.rng import trajectory_rng

# parameters are drawn in fixed-size blocks so that a trajectory depends only on (seed, index)
BLOCK = 65536


@dataclass(frozen=True)
class TrajectoryConfig:
    n_steps: int
    n_trajectories: int
    seed: int
    cesaro_window: int

    def __post_init__(self):
        for k in ("n_steps", "n_trajectories", "cesaro_window"):
            if int(getattr(self, k)) < 1:
                raise ValueError(f"{k} must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


class RdoStream:
    """Lazily drawn parameters and RDOs of one trajectory, in blocks of BLOCK steps.

    Step n (0-based) always receives the same parameters for a given
    (seed, index), whatever the number of steps requested.
    """

    def __init__(self, model, seed: int, index: int = 0):
        self.model = model
        self.rng = trajectory_rng(seed, index)
        self.blocks = {}
        self.next_block = 0

    def _block(self, b):
        while self.next_block <= b:
            self.blocks[self.next_block] = (self.model.dist.sample(self.rng, BLOCK), None)
            self.next_block += 1
        return self.blocks[b]

    def release_before(self, b):
        for k in [k for k in self.blocks if k < b]:
            del self.blocks[k]

    def matrices(self, lo, hi):
        """RDOs of steps lo..hi-1; the range must not cross a block boundary."""
        b = lo // BLOCK
        params = self._block(b)[0]
        sl = slice(lo - b * BLOCK, hi - b * BLOCK)
        return self.model.rdo_batch({k: v[sl] for k, v in params.items()})

    def params(self, idx) -> dict:
        idx = np.asarray(idx)
        out = {}
        for k in self._block(int(idx.min()) // BLOCK)[0]:
            out[k] = np.array([self._block(int(i) // BLOCK)[0][k][int(i) % BLOCK] for i in idx])
        return out

    def spans(self, n):
        """(lo, hi) chunks covering steps 0..n-1 aligned with the blocks."""
        for lo in range(0, n, BLOCK):
            yield lo, min(n, lo + BLOCK)


def draw_params(model, n: int, seed: int, index: int = 0) -> dict:
    stream = RdoStream(model, seed, index)
    blocks = [stream._block(b)[0] for b in range((n + BLOCK - 1) // BLOCK)]
    return {k: np.concatenate([b[k] for b in blocks])[:n] for k in blocks[0]}


def draw_rdos(model, n: int, seed: int, index: int = 0):
    params = draw_params(model, n, seed, index)
    return model.rdo_batch(params), params


def product(ms) -> np.ndarray:
    """Left-to-right product M1 M2 ... Mn."""
    psi = np.eye(4, dtype=complex)
    for m in ms:
        psi = psi @ m
    return psi


def sample_product(model, n: int, seed: int, index: int = 0) -> np.ndarray:
    ms, _ = draw_rdos(model, n, seed, index)
    return product(ms)


def check_gate_sampled(ms, n_check: int = 256) -> float:
    """Fraction of the first samples inside the spectral gate; GateViolation if zero."""
    frac = float(gate_batch(ms[:n_check]).mean())
    if frac == 0.0:
        w = np.abs(np.linalg.eigvals(ms[: min(4, len(ms))]))
        raise GateViolation(f"no sampled RDO has a simple peripheral eigenvalue 1; sample moduli {np.round(w, 12).tolist()}")
    return frac


def batch_means(x, n_batches: int = 20):
    """Mean and batch-means standard error of a correlated series (axis 0)."""
    x = np.asarray(x)
    n = len(x) - len(x) % n_batches
    if n < n_batches * 2:
        return x.mean(axis=0), np.full(x.shape[1:], np.nan) if x.ndim > 1 else np.nan
    b = x[:n].reshape((n_batches, -1) + x.shape[1:]).mean(axis=1)
    return x.mean(axis=0), b.std(axis=0, ddof=1) / np.sqrt(n_batches)


@dataclass(frozen=True)
class ErgodicEstimate:
    mean_product: np.ndarray
    std_error: float
    std_error_matrix: np.ndarray
    nu: int
    gate_fraction: float


def cesaro_estimate(
    model,
    nu: int,
    seed: int,
    n_builder: Optional[Callable] = None,
    window=(1, 0),
    index: int = 0,
    n_batches: int = 20,
) -> ErgodicEstimate:
    """(1/nu) sum_n M(w1)...M(wn) N_n along one draw.

    N_n = n_builder(window_params) where window_params holds w_{n+1-l} ... w_{n+1+r}
    (arrays of length l + r + 1, indices below 1 clipped to w_1). Default N = 1.
    The sum is streamed in `n_batches` batches; the batch means give the
    standard error and are summed at the end (two-level summation).
    """
    l, r = window
    stream = RdoStream(model, seed, index)
    frac = check_gate_sampled(stream.matrices(0, min(nu, 256)))
    size = max(1, nu // n_batches)
    batch_means_list = []
    acc = np.zeros((4, 4), dtype=complex)
    count = 0
    psi = np.eye(4, dtype=complex)
    for lo, hi in stream.spans(nu):
        ms = stream.matrices(lo, hi)
        for j in range(hi - lo):
            n = lo + j
            psi = psi @ ms[j]
            if n_builder is None:
                acc += psi
            else:
                idx = np.clip(np.arange(n + 1 - l, n + 2 + r), 0, None)
                acc += psi @ n_builder(stream.params(idx))
            count += 1
            if count == size and len(batch_means_list) < n_batches - 1:
                batch_means_list.append(acc / count)
                acc = np.zeros((4, 4), dtype=complex)
                count = 0
        stream.release_before(lo // BLOCK)
    weights = [size] * len(batch_means_list) + [count]
    parts = batch_means_list + [acc / max(count, 1)]
    mean = sum(w * p for w, p in zip(weights, parts)) / nu
    b = np.stack(batch_means_list) if len(batch_means_list) > 1 else None
    if b is None:
        se_mat = np.full((4, 4), np.nan + 0j)
    else:
        se_mat = (b.real.std(axis=0, ddof=1) + 1j * b.imag.std(axis=0, ddof=1)) / np.sqrt(len(b))
    return ErgodicEstimate(mean, float(np.max(np.abs(se_mat))), se_mat, nu, frac)


def theta_limit(model, n_nodes: int = 64, mode: str = "closed_form", **kw) -> np.ndarray:
    """theta = P*_{1,E[M]} psi_S."""
    return limit_functional(expected_rdo(model, mode, n_nodes=n_nodes, **kw).mean)


def evolve_expectations(initial, model, observable, n_steps: int, seed: int, index: int = 0, ms=None):
    """rho(alpha^m(O)) for m = 1..n_steps, through r0 M1 ... Mm x_O.

    `observable` is a 2x2 matrix or a stack (k, 2, 2); the result has shape
    (n_steps,) or (n_steps, k).
    """
    rho = check_density(initial, atol=1e-10)
    obs = np.asarray(observable, dtype=complex)
    single = obs.ndim == 2
    xs = np.stack([observable_to_gns(o) for o in (obs[None] if single else obs)], axis=1)
    if ms is None:
        ms, _ = draw_rdos(model, n_steps, seed, index)
    rows = np.empty((n_steps, 4), dtype=complex)
    row = density_to_row(rho)
    for m in range(n_steps):
        row = row @ ms[m]
        rows[m] = row
    vals = (rows @ xs).real
    return vals[:, 0] if single else vals


def states_along(initial, ms) -> np.ndarray:
    """Densities rho_m (m = 0..n) with Tr(rho_m A) = rho(alpha^m(A))."""
    row = density_to_row(check_density(initial, atol=1e-10))
    out = np.empty((len(ms) + 1, 2, 2), dtype=complex)
    out[0] = initial
    for m, mat in enumerate(ms):
        row = row @ mat
        out[m + 1] = (row / np.sqrt(2)).reshape(2, 2).T
    return out


def invariant_functional_batch(ms, tol: float = 1e-8) -> np.ndarray:
    """psi(w) for a batch of gate-passing RDOs; falls back to the projection route on degenerate ones."""
    w, v = np.linalg.eig(dagger(ms))
    i = np.argmin(np.abs(w - 1.0), axis=1)
    psi = np.take_along_axis(v, i[:, None, None], axis=2)[:, :, 0]
    psi = psi / np.conj(psi @ PSI_S.conj())[:, None]
    degenerate = (np.abs(w - 1.0) < tol).sum(axis=1) != 1
    for k in np.flatnonzero(degenerate):
        psi[k] = decompose(ms[k], tol, allow_degenerate=True).psi
    return psi


@dataclass(frozen=True)
class DecayFit:
    alpha_hat: float
    c_hat: float
    r2: float
    log_norms: np.ndarray  # mean over reps of log |M_Q(w1)...M_Q(wn)|, n = 1..n_max


def _fit_line(n, y):
    a, b = np.polyfit(n, y, 1)
    resid = y - (a * n + b)
    tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / tot if tot > 0 else 0.0
    return a, b, r2


def mq_log_norms(model, n_max: int, seed: int, index: int = 0) -> np.ndarray:
    ms, _ = draw_rdos(model, n_max, seed, index)
    psi = invariant_functional_batch(ms)
    mq = ms - np.einsum("i,nj->nij", PSI_S, psi.conj())
    out = np.empty(n_max)
    prod = np.eye(4, dtype=complex)
    log_scale = 0.0
    for n in range(n_max):
        prod = prod @ mq[n]
        s = np.linalg.norm(prod, 2)
        if s == 0.0:
            out[n:] = -np.inf
            break
        log_scale += np.log(s)
        prod /= s
        out[n] = log_scale
    return out


def mq_decay_rate(model, n_max: int, n_reps: int, seed: int, fit_from: float = 0.2) -> DecayFit:
    """Least-squares fit of log |M_Q(w1)...M_Q(wn)| = log C - alpha n (operator norm)."""
    logs = np.stack([mq_log_norms(model, n_max, seed, k) for k in range(n_reps)])
    mean = logs.mean(axis=0)
    n = np.arange(1, n_max + 1, dtype=float)
    sel = (n >= fit_from * n_max) & np.isfinite(mean)
    slope, icpt, r2 = _fit_line(n[sel], mean[sel])
    return DecayFit(float(-slope), float(np.exp(icpt)), float(r2), mean)


@dataclass(frozen=True)
class SharpConvergence:
    exponential: bool
    rate: float
    r2: float
    hypothesis_holds: bool


def sharp_convergence_check(model, n_max: int, seed: int, n_probe: int = 64, floor: float = 1e-12) -> SharpConvergence:
    """Pointwise decay of |M(w1)...M(wn) - |psi_S><psi*||, valid when M*(w) share their fixed vector."""
    probe, _ = draw_rdos(model, n_probe, seed, 10**6)
    psis = invariant_functional_batch(probe)
    if np.max(np.abs(psis - psis[0])) > 1e-8:
        return SharpConvergence(False, float("nan"), float("nan"), False)
    target = np.outer(PSI_S, psis[0].conj())
    ms, _ = draw_rdos(model, n_max, seed, 0)
    err = np.empty(n_max)
    prod = np.eye(4, dtype=complex)
    for n in range(n_max):
        prod = prod @ ms[n]
        err[n] = np.linalg.norm(prod - target, 2)
    n = np.arange(1, n_max + 1, dtype=float)
    sel = err > floor
    if sel.sum() < 3:
        return SharpConvergence(True, float("inf"), 1.0, True)
    slope, _, r2 = _fit_line(n[sel], np.log(err[sel]))
    return SharpConvergence(bool(-slope > 0 and r2 > 0.9), float(-slope), float(r2), True)


def run_parallel(fn, indices, threads: int = 1) -> list:
    """Map fn over trajectory indices; results come back in index order."""
    indices = list(indices)
    if threads <= 1:
        return [fn(i) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, indices))


def contraction_defect(model, n: int, seed: int, n_vectors: int = 16) -> float:
    """max over random phi of |||Psi_n phi||| - |||phi|||; nonpositive for contractions."""
    psi = sample_product(model, n, seed)
    rng = np.random.default_rng(seed)
    phis = rng.normal(size=(n_vectors, 4)) + 1j * rng.normal(size=(n_vectors, 4))
    return max(contraction_norm(psi @ phi) - contraction_norm(phi) for phi in phis)
