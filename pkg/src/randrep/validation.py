"""Acceptance checks shared by `randrep validate` and the test-suite."""
from __future__ import annotations

import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from randrep import ergodic, linalg, rdo, spin_fermion, spin_spin, thermo
from randrep.distributions import FiniteSupport, ParameterDistribution, PointMass, Uniform
from randrep.linalg import PSI_S, SIGMA_X, SIGMA_Z

P0 = np.diag([1.0, 0.0]).astype(complex)


@dataclass
class CriterionResult:
    id: str
    name: str
    passed: bool
    measured: float
    threshold: float
    runtime: float
    time_limit: float
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (
            f"[{flag}] {self.id} {self.name}: measured={self.measured:.3e} threshold={self.threshold:.3e} "
            f"runtime={self.runtime:.2f}s (limit {self.time_limit:g}s)"
        )

    def to_dict(self):
        return asdict(self)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def _result(cid, name, ok, measured, threshold, runtime, limit, **detail):
    return CriterionResult(cid, name, bool(ok and runtime < limit), float(measured), float(threshold), runtime, limit, detail)


# shared model choices
def random_tau_model(lam=0.5):
    d = ParameterDistribution({"tau": Uniform(0.8, 1.2), "beta": PointMass(1.0), "e_e": PointMass(2.0)})
    return spin_spin.SpinSpinModel(1.0, lam, d)


def random_beta_model(lam=0.5):
    d = ParameterDistribution({"tau": PointMass(1.0), "beta": FiniteSupport((0.5, 2.0), (0.5, 0.5)), "e_e": PointMass(1.0)})
    return spin_spin.SpinSpinModel(1.0, lam, d)


def random_energy_model(lam=0.5):
    d = ParameterDistribution({"tau": Uniform(0.8, 1.2), "beta": PointMass(1.0), "e_e": FiniteSupport((1.5, 2.5), (0.5, 0.5))})
    return spin_spin.SpinSpinModel(1.0, lam, d)


def spin_fermion_params(lam=0.05, tau0=1.3, eps=0.05, beta=1.0):
    return spin_fermion.SpinFermionParams(lam, tau0, Uniform(-eps, eps), PointMass(beta), spin_fermion.default_density())


def _random_spin_spin_params(rng, n):
    out = []
    while len(out) < n:
        e_s, e_e = rng.uniform(0.5, 3.0, 2)
        lam, beta, tau = rng.uniform(-1, 1), rng.uniform(0.1, 5), rng.uniform(0.05, 10)
        t_per = 2 * np.pi / float(spin_spin.omega(e_s, e_e, lam))
        x = tau / t_per
        if abs(x - np.round(x)) * t_per < 1e-3 * t_per:
            continue
        out.append(spin_spin.SpinSpinParams(e_s, e_e, lam, beta, tau))
    return out


def criterion_linalg(seed=11):
    def run():
        rng = np.random.default_rng(seed)
        errs = {}
        es = linalg.eig_decompose(np.diag([1, 0.5j, -0.5, 0.25]))
        errs["diag_eigs"] = np.max(np.abs(es.eigenvalues - np.array([1, 0.5j, -0.5, 0.25])))
        worst_round, worst_contr, worst_proj, worst_trace = 0.0, -np.inf, 0.0, 0.0
        for p in _random_spin_spin_params(rng, 50):
            a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            worst_round = max(worst_round, np.max(np.abs(linalg.gns_to_observable(linalg.observable_to_gns(a)) - a)))
            m = spin_spin.build_rdo_map(p)
            phi = rng.normal(size=4) + 1j * rng.normal(size=4)
            worst_contr = max(worst_contr, linalg.contraction_norm(m @ phi) - linalg.contraction_norm(phi) * (1 + 1e-10))
            pr = linalg.riesz_projection(linalg.eig_decompose(m), 1.0)
            worst_proj = max(worst_proj, np.max(np.abs(pr @ pr - pr)), np.max(np.abs(pr @ m - m @ pr)))
            c = rng.normal(size=(2, 2))
            rho = np.diag(spin_spin.environment_populations(p.beta, p.e_e))
            worst_trace = max(worst_trace, np.max(np.abs(linalg.thermal_partial_trace(np.kron(a, c), rho) - a * np.trace(rho @ c))))
        errs.update(gns_round_trip=worst_round, projection=worst_proj, partial_trace=worst_trace)
        return errs, worst_contr

    (errs, contr), rt = _timed(run)
    worst = max(errs.values())
    return _result("L", "linalg invariants", worst < 1e-9 and contr <= 0, worst, 1e-9, rt, 5.0, contraction_excess=contr, **errs)


def criterion_1(seed=2024, n=200):
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for p in _random_spin_spin_params(rng, n):
            e0, em, ep = spin_spin.eigenvalue_arrays(p.e_s, p.e_e, p.lam, p.tau)
            closed = np.array([1.0, complex(e0), complex(em), complex(ep)])
            numeric = np.linalg.eigvals(spin_spin.rdo_map_from_hamiltonian(p))
            cost = np.abs(closed[:, None] - numeric[None, :])
            i, j = linear_sum_assignment(cost)
            worst = max(worst, cost[i, j].max())
        return worst

    worst, rt = _timed(run)
    return _result("1", "spin-spin spectral oracle", worst <= 1e-9, worst, 1e-9, rt, 1.0, n_params=n)


def criterion_2(seed=7, n=100):
    def run():
        rng = np.random.default_rng(seed)
        e_s, e_e, lam = 1.0, 1.7, 0.4
        t_per = spin_spin.period(e_s, e_e, lam)
        tau = rng.uniform(0.05, 10.0, n)
        a = np.abs(np.stack(spin_spin.eigenvalue_arrays(e_s, e_e, lam, tau)))
        b = np.abs(np.stack(spin_spin.eigenvalue_arrays(e_s, e_e, lam, tau + t_per)))
        return np.max(np.abs(a - b))

    worst, rt = _timed(run)
    return _result("2", "periodicity of |e#|", worst <= 1e-10, worst, 1e-10, rt, 1.0)


def _cesaro_p0(model, nu, seed, index, initial=None):
    initial = np.eye(2) / 2 if initial is None else initial
    v = ergodic.evolve_expectations(initial, model, P0, nu, seed, index)
    return v.mean(), v


def criterion_3(seed=314, n_seeds=8, nu=100_000, tol=5e-3):
    model = random_tau_model()

    def run():
        target = linalg.gibbs_qubit(spin_spin.asymptotic_beta("random_tau", model), model.e_s)[0]
        errs = [abs(_cesaro_p0(model, nu, seed, i)[0] - target) for i in range(n_seeds)]
        return np.array(errs)

    errs, rt = _timed(run)
    n_ok = int(np.sum(errs <= tol))
    return _result("3", "random tau: Gibbs state at beta_1", n_ok >= n_seeds - 1, errs.max(), tol, rt, 30.0, seeds_within=n_ok, errors=errs.tolist())


def criterion_4(seed=99, n_seeds=8, nu=100_000, tol=5e-3):
    model = random_beta_model()

    def run():
        b3 = spin_spin.asymptotic_beta("random_beta", model)
        p0 = np.array([_cesaro_p0(model, nu, seed, i)[0] for i in range(n_seeds)])
        per_seed = -np.log((1 - p0) / p0) / model.e_s
        pooled = -np.log((1 - p0.mean()) / p0.mean()) / model.e_s
        return b3, per_seed, pooled

    (b3, per_seed, pooled), rt = _timed(run)
    naive = model.dist["beta"].mean * model.dist["e_e"].mean / model.e_s
    err = abs(pooled - b3)
    distinct = abs(b3 - naive) > 10 * tol
    return _result(
        "4", "random beta: beta_3 and non-averaging", err <= tol and distinct, err, tol, rt, 30.0,
        beta_3=b3, beta_estimate=pooled, mean_beta_prediction=naive, per_seed=per_seed.tolist(),
    )


def lyapunov_oracle(model, n_nodes=256):
    """-max_# E[log |e_#(tau)|] for the random-tau spin-spin model, whose RDOs commute."""
    x, w = model.dist["tau"].quadrature(n_nodes)
    e0, em, _ = spin_spin.eigenvalue_arrays(model.e_s, model.dist["e_e"].mean, model.lam, x)
    return -max(np.dot(w, np.log(np.abs(e0))), np.dot(w, np.log(np.abs(em))))


def criterion_5(seed=5, n_seeds=8, n_max=2000, n_reps=8, rel_tol=0.10):
    model = random_tau_model()

    def run():
        return np.array([ergodic.mq_decay_rate(model, n_max, n_reps, seed + 1000 * s).alpha_hat for s in range(n_seeds)])

    rates, rt = _timed(run)
    oracle = lyapunov_oracle(model)
    rel = np.max(np.abs(rates - oracle)) / oracle
    return _result("5", "exponential M_Q decay", rel <= rel_tol and np.all(rates > 0), rel, rel_tol, rt, 10.0, oracle=oracle, rates=rates.tolist())


def criterion_6(seed=66, n_steps=20_000, n_traj=4, floor=1e-12):
    models = {"random_tau": random_tau_model(), "random_tau_and_e_e": random_energy_model()}

    def run():
        out = {}
        for name, model in models.items():
            rep = thermo.flux_report(model)
            trajs = [thermo.cumulative_energy(model, np.eye(2) / 2, n_steps, seed, i, burn_in=200) for i in range(n_traj)]
            res = np.array([t.residual for t in trajs])
            se_res = np.sqrt(np.sum(np.square([t.se_residual for t in trajs]))) / n_traj
            slope = np.mean([t.slope_e for t in trajs])
            se_slope = np.sqrt(np.sum(np.square([t.se_e for t in trajs]))) / n_traj
            out[name] = dict(
                closed_residual=rep.second_law_residual, dE_plus=rep.dE_plus, dS_plus=rep.dS_plus,
                traj_residual=float(res.mean()), traj_se=float(se_res), traj_dE=float(slope), traj_dE_se=float(se_slope),
            )
        return out

    out, rt = _timed(run)
    closed = max(v["closed_residual"] for v in out.values())
    traj_ok = all(abs(v["traj_residual"]) <= 3 * v["traj_se"] + floor for v in out.values())
    slope_ok = all(abs(v["traj_dE"] - v["dE_plus"]) <= 3 * v["traj_dE_se"] + floor for v in out.values())
    return _result("6", "second law dS = beta dE", closed <= 1e-9 and traj_ok and slope_ok, closed, 1e-9, rt, 30.0, **out)


def criterion_7(seed=77, n_seeds=4, nu=100_000):
    model = random_beta_model()
    ground = np.diag([1.0, 0.0]).astype(complex)
    mixed = np.eye(2, dtype=complex) / 2

    def run():
        rows = []
        for i in range(n_seeds):
            ms, _ = ergodic.draw_rdos(model, nu, seed, i)
            a = ergodic.evolve_expectations(ground, model, SIGMA_Z, nu, seed, i, ms=ms)
            b = ergodic.evolve_expectations(mixed, model, SIGMA_Z, nu, seed, i, ms=ms)
            (ma, sa), (mb, sb) = ergodic.batch_means(a), ergodic.batch_means(b)
            rows.append((abs(ma - mb), 2 * np.hypot(sa, sb)))
        return np.array(rows)

    rows, rt = _timed(run)
    ratio = np.max(rows[:, 0] / rows[:, 1])
    return _result("7", "initial-state independence", np.all(rows[:, 0] <= rows[:, 1]), ratio, 1.0, rt, 30.0,
                   differences=rows[:, 0].tolist(), bounds=rows[:, 1].tolist())


def criterion_8(tol=1e-3):
    p = spin_fermion_params()

    def run():
        return spin_fermion.q_probability(p), spin_fermion.q_direct(p)

    (q_exp, q_dir), rt = _timed(run)
    err = abs(q_exp - q_dir)
    return _result("8", "spin-fermion two-route q", err <= tol, err, tol, rt, 5.0, q_expansion=q_exp, q_direct=q_dir,
                   budget=spin_fermion.expansion_budget(p))


def criterion_9(seed=9, nu=20_000):
    p = spin_fermion_params()
    model = spin_fermion.SpinFermionModel(p)
    plus = np.full((2, 2), 0.5, dtype=complex)

    def run():
        expansion = spin_fermion.asymptotic_state_expansion(p, SIGMA_X)
        em = rdo.expected_rdo(model).mean
        rho = linalg.functional_to_density(rdo.limit_functional(em))
        direct = float(np.real(np.trace(rho @ SIGMA_X)))
        traj = ergodic.evolve_expectations(plus, model, SIGMA_X, nu, seed).mean()
        return expansion, direct, traj

    (expansion, direct, traj), rt = _timed(run)
    tol = p.lam**2
    worst = max(abs(expansion), abs(direct), abs(traj))
    return _result("9", "decoherence <sigma_x> -> 0", worst <= tol, worst, tol, rt, 5.0, expansion=expansion, direct=direct, trajectory=traj)


GATE_CONFIG = """\
model = "spin_spin"
seed = 1

[params]
e_s = 1.0
lambda = 0.5

[distributions.tau]
kind = "point"
value = {tau!r}

[distributions.beta]
kind = "point"
value = 1.0

[distributions.e_e]
kind = "point"
value = 2.0

[run]
n_steps = 1000
n_trajectories = 1
cesaro_window = 1000

[[outputs]]
kind = "json"
path = "summary.json"
"""


def criterion_10():
    from randrep.cli import main

    def run():
        t_per = spin_spin.period(1.0, 2.0, 0.5)
        p = spin_spin.SpinSpinParams(1.0, 2.0, 0.5, 1.0, t_per)
        gate = rdo.gate_membership(spin_spin.build_rdo_map(p))
        with tempfile.TemporaryDirectory() as tmp:
            cfg = Path(tmp) / "gate.toml"
            cfg.write_text(GATE_CONFIG.format(tau=t_per))
            out = Path(tmp) / "out"
            code = main(["simulate", "--config", str(cfg), "--out", str(out), "--quiet"])
            leftovers = sorted(x.name for x in out.iterdir()) if out.exists() else []
        return gate, code, leftovers

    (gate, code, leftovers), rt = _timed(run)
    ok = (not gate) and code == 3 and not leftovers
    return _result("10", "gate boundary tau = T", ok, float(code), 3.0, rt, 1.0, gate=gate, exit_code=code, files=leftovers)


SUITES = {
    "linalg": [criterion_linalg],
    "spin_spin": [criterion_1, criterion_2, criterion_10],
    "ergodic": [criterion_3, criterion_4, criterion_5, criterion_7],
    "thermo": [criterion_6],
    "spin_fermion": [criterion_8, criterion_9],
}
ALL = [
    criterion_linalg, criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
    criterion_6, criterion_7, criterion_8, criterion_9, criterion_10,
]


def run_suite(name: str) -> list:
    fns = ALL if name == "all" else SUITES[name]
    return [fn() for fn in fns]
