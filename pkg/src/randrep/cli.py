"""Command-line runner: `randrep {spectrum,simulate,thermo,validate}`."""
from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from randrep import config as cfgmod
from randrep import ergodic, linalg, rdo, spin_fermion, spin_spin, thermo
from randrep.errors import ConfigError, RandRepError, UnsupportedDistribution

EXIT_OK, EXIT_CONFIG, EXIT_GATE, EXIT_VALIDATION = 0, 2, 3, 4
SUITES = ("linalg", "spin_spin", "spin_fermion", "ergodic", "thermo", "all")

INITIAL = {
    "maximally_mixed": np.eye(2, dtype=complex) / 2,
    "ground": np.diag([1.0, 0.0]).astype(complex),
    "excited": np.diag([0.0, 1.0]).astype(complex),
    "plus": np.full((2, 2), 0.5, dtype=complex),
}
OBSERVABLES = np.stack([np.diag([1.0, 0.0]).astype(complex), linalg.SIGMA_X, linalg.SIGMA_Y])


def build_model(cfg: cfgmod.ExperimentConfig):
    dist = cfg.parameter_distribution()
    if cfg.model == "spin_spin":
        return spin_spin.SpinSpinModel(float(cfg.params["e_s"]), float(cfg.params["lambda"]), dist)
    d = spin_fermion.default_density(float(cfg.params.get("r_cut", 40.0)), int(cfg.params.get("n_nodes", 256)))
    try:
        p = spin_fermion.SpinFermionParams(
            float(cfg.params["lambda"]), float(cfg.params["tau0"]), dist["sigma"], dist["beta"], d
        )
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from exc
    return spin_fermion.SpinFermionModel(p)


# ---------------------------------------------------------------- output


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return "%.17e" % float(x)


def csv_text(cfg, command: str, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# model={cfg.model} command={command} seed={cfg.seed} config_hash={cfg.config_hash()}\n")
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(v) for v in r) + "\n")
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(np.real(x)), "im": float(np.imag(x))}
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    return x


def summary(cfg, estimates, targets, discrepancies, **extra) -> dict:
    d = {
        "model": cfg.model,
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "estimates": estimates,
        "targets": targets,
        "discrepancies": discrepancies,
    }
    d.update(extra)
    return _jsonable(d)


def write_atomic(files: dict):
    """Write {path: text} so that either every file appears complete or none does."""
    staged = []
    try:
        for path, text in files.items():
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    except BaseException:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise


def _route_outputs(cfg, command, out_dir, csv_payload, json_payload) -> dict:
    out_dir = Path(out_dir)
    specs = cfg.outputs or (cfgmod.OutputSpec("csv", f"{command}.csv"), cfgmod.OutputSpec("json", f"{command}.json"))
    files = {}
    for o in specs:
        path = Path(o.path)
        path = path if path.is_absolute() else out_dir / path
        if o.kind == "csv":
            files[path] = csv_payload
        else:
            files[path] = json.dumps(json_payload, indent=2, sort_keys=True) + "\n"
    return files


# ---------------------------------------------------------------- commands


def _match_error(closed, m) -> float:
    numeric = np.linalg.eigvals(m)
    cost = np.abs(np.asarray(closed)[:, None] - numeric[None, :])
    i, j = linear_sum_assignment(cost)
    return float(cost[i, j].max())


def cmd_spectrum(cfg, threads=1):
    sp = cfg.spectrum
    n_points = int(sp.get("n_points", 100))
    dist = cfg.parameter_distribution()
    if cfg.model == "spin_spin":
        e_s, lam = float(cfg.params["e_s"]), float(cfg.params["lambda"])
        e_e, beta = dist["e_e"].mean, dist["beta"].mean
        t_per = spin_spin.period(e_s, e_e, lam)
        lo, hi = float(sp.get("tau_min", 0.1)), float(sp.get("tau_max", 2 * t_per))
        taus = np.linspace(lo, hi, n_points)
        lattice = t_per * np.arange(1, int(np.floor(hi / t_per)) + 1)
        taus = np.unique(np.concatenate([taus, lattice[lattice >= lo]]))
        e0, em, ep = spin_spin.eigenvalue_arrays(e_s, e_e, lam, taus)
        ms = spin_spin.rdo_batch(e_s, lam, taus, beta, e_e)
        rows, worst = [], 0.0
        for k, t in enumerate(taus):
            gate = rdo.gate_membership(ms[k])
            err = _match_error([1.0, e0[k], em[k], ep[k]], ms[k])
            worst = max(worst, err)
            rows.append((t, abs(e0[k]), abs(ep[k]), abs(em[k]), gate, err))
        cols = ("tau", "abs_e0", "abs_e_plus", "abs_e_minus", "gate", "closed_vs_numeric")
        lattice_gate = [bool(r[4]) for r in rows if np.any(np.isclose(r[0], lattice, rtol=0, atol=1e-12))]
        est = {"max_closed_vs_numeric": worst, "n_rows": len(rows)}
        tgt = {"period": t_per, "gate_at_lattice": [False] * len(lattice_gate)}
        disc = {"gate_at_lattice_mismatch": int(sum(lattice_gate))}
        return csv_text(cfg, "spectrum", cols, rows), summary(cfg, est, tgt, disc, gate_at_lattice=lattice_gate)

    p = build_model(cfg).params
    beta = dist["beta"].mean
    lo, hi = float(sp.get("tau_min", 0.1)), float(sp.get("tau_max", 2 * p.tau0))
    taus = np.linspace(lo, hi, n_points)
    w_norm = p.density.w_norm_bound(beta)
    rows = []
    for t in taus:
        gap = float(spin_fermion.r0(t))
        inside = abs(p.lam) < gap / 4
        if inside:
            ex = spin_fermion.eigenvalue_expansion(p.lam, t, beta, p.density)
            m = spin_fermion.surrogate_rdo_batch(p.lam, t, beta, p.density)[0]
            gate = rdo.gate_membership(m)
            vals = (abs(ex.e0), abs(ex.e_plus), abs(ex.e_minus), ex.error_bound)
        else:
            gate, vals = False, (np.nan, np.nan, np.nan, np.nan)
        rows.append((t, *vals, gap, inside, gate))
    cols = ("tau", "abs_e0", "abs_e_plus", "abs_e_minus", "error_bound", "r0", "gap_ok", "gate")
    delta = float(sp.get("delta", 0.2))
    sig_lo, sig_hi = p.sigma_law.support_bounds()
    th = spin_fermion.coupling_threshold_check(p.lam, beta, p.density, (p.tau0 + sig_lo, p.tau0 + sig_hi), delta)
    est = {"coupling_threshold_ok": th.ok, "lambda_critical": th.lambda_critical, "lambda_margin": th.lambda_margin}
    tgt = {"r0_tau0": float(spin_fermion.r0(p.tau0)), "w_norm_bound": w_norm}
    disc = {"gap_margin_tau0": float(spin_fermion.r0(p.tau0)) / 4 - abs(p.lam)}
    return csv_text(cfg, "spectrum", cols, rows), summary(cfg, est, tgt, disc)


def _trajectory(cfg, model, index):
    rho0 = INITIAL[cfg.run.initial_state]
    return ergodic.evolve_expectations(rho0, model, OBSERVABLES, cfg.run.n_steps, cfg.seed, index)


def _state_from(p0, sx, sy):
    return np.array([[p0, (sx - 1j * sy) / 2], [(sx + 1j * sy) / 2, 1 - p0]])


def cmd_simulate(cfg, threads=1):
    model = build_model(cfg)
    ms0, _ = ergodic.draw_rdos(model, min(cfg.run.n_steps, 256), cfg.seed, 0)
    gate_fraction = ergodic.check_gate_sampled(ms0)

    idx = list(range(cfg.run.n_trajectories))
    vals = ergodic.run_parallel(lambda i: _trajectory(cfg, model, i), idx, threads)
    vals = np.stack(vals)  # (n_traj, n_steps, 3)
    window = cfg.run.cesaro_window
    tail = vals[:, -window:, :].mean(axis=1)  # per-trajectory Cesaro means
    est_obs = tail.mean(axis=0)
    se_obs = tail.std(axis=0, ddof=1) / np.sqrt(len(idx)) if len(idx) > 1 else np.full(3, np.nan)
    rho_est = _state_from(*est_obs)

    theta = ergodic.theta_limit(model, n_nodes=cfg.run.n_nodes)
    rho_theta = linalg.functional_to_density(theta)
    targets = {"p0_theta_route": float(np.real(rho_theta[0, 0])), "sigma_x_theta_route": float(np.real(np.trace(rho_theta @ linalg.SIGMA_X)))}
    estimates = {
        "p0": est_obs[0], "sigma_x": est_obs[1], "sigma_y": est_obs[2],
        "p0_std_error": se_obs[0], "sigma_x_std_error": se_obs[1], "sigma_y_std_error": se_obs[2],
        "per_trajectory_p0": tail[:, 0], "gate_fraction": gate_fraction,
        "state": [[rho_est[0, 0], rho_est[0, 1]], [rho_est[1, 0], rho_est[1, 1]]],
    }
    disc = {"p0_theta_route": abs(est_obs[0] - targets["p0_theta_route"])}
    closed = None

    if cfg.model == "spin_spin":
        p0 = float(np.clip(est_obs[0], 1e-300, 1 - 1e-16))
        estimates["beta_prime"] = -np.log((1 - p0) / p0) / model.e_s
        try:
            case = spin_spin.infer_case(model)
            b = spin_spin.asymptotic_beta(case, model)
            closed = linalg.gibbs_qubit(b, model.e_s)[0]
            targets.update(case=case, beta_prime=b, p0_closed_form=closed)
            disc["beta_prime"] = abs(estimates["beta_prime"] - b)
        except UnsupportedDistribution as exc:
            targets["closed_form"] = f"unavailable: {exc}"
    else:
        p = model.params
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                closed = spin_fermion.q_probability(p)
            targets.update(q_expansion=closed, q_direct=spin_fermion.q_direct(p, cfg.run.n_nodes), budget=spin_fermion.expansion_budget(p))
            disc["q_expansion_vs_direct"] = abs(closed - targets["q_direct"])
            disc["within_budget"] = bool(abs(est_obs[0] - closed) <= targets["budget"])
        except UnsupportedDistribution as exc:
            targets["q_expansion"] = f"unavailable: {exc}"
    if closed is not None:
        disc["p0_closed_form"] = abs(est_obs[0] - closed)

    # running Cesaro means at checkpoints, pooled over trajectories
    steps = np.arange(1, cfg.run.n_steps + 1)
    running = np.cumsum(vals[:, :, 0], axis=1) / steps
    every = cfg.run.checkpoint_every
    marks = np.unique(np.append(np.arange(every, cfg.run.n_steps + 1, every), cfg.run.n_steps)) - 1
    rows = []
    target_p0 = closed if closed is not None else targets["p0_theta_route"]
    for k in marks:
        col = running[:, k]
        mean = col.mean()
        se = col.std(ddof=1) / np.sqrt(len(col)) if len(col) > 1 else np.nan
        rows.append((k + 1, mean, se, target_p0, abs(mean - target_p0)))
    cols = ("step", "cesaro_p0", "std_error", "target_p0", "discrepancy")
    return csv_text(cfg, "simulate", cols, rows), summary(cfg, estimates, targets, disc)


def cmd_thermo(cfg, threads=1):
    if cfg.model != "spin_spin":
        raise ConfigError("model: thermo is available for spin_spin only")
    model = build_model(cfg)
    if model.lam != 0:
        ms0, _ = ergodic.draw_rdos(model, min(cfg.run.n_steps, 256), cfg.seed, 0)
        ergodic.check_gate_sampled(ms0)
    rep = thermo.flux_report(model, cfg.run.n_nodes)
    rho0 = INITIAL[cfg.run.initial_state]
    idx = list(range(cfg.run.n_trajectories))
    trajs = ergodic.run_parallel(lambda i: thermo.cumulative_energy(model, rho0, cfg.run.n_steps, cfg.seed, i, burn_in=cfg.run.n_steps // 10), idx, threads)
    n = len(trajs)
    slope_e = np.mean([t.slope_e for t in trajs])
    slope_s = np.mean([t.slope_s for t in trajs])
    se_e = np.sqrt(np.sum(np.square([t.se_e for t in trajs]))) / n
    se_s = np.sqrt(np.sum(np.square([t.se_s for t in trajs]))) / n
    estimates = {"dE_per_step": slope_e, "dS_per_step": slope_s, "dE_std_error": se_e, "dS_std_error": se_s}
    disc = {"dE": abs(slope_e - rep.dE_plus), "dS": abs(slope_s - rep.dS_plus)}
    if rep.second_law_residual is not None:
        res = np.mean([t.residual for t in trajs])
        estimates["second_law_residual"] = res
        estimates["second_law_residual_std_error"] = np.sqrt(np.sum(np.square([t.se_residual for t in trajs]))) / n
    de = np.mean([t.delta_e for t in trajs], axis=0)
    ds = np.mean([t.delta_s for t in trajs], axis=0)
    every = cfg.run.checkpoint_every
    marks = np.unique(np.append(np.arange(every, cfg.run.n_steps + 1, every), cfg.run.n_steps)) - 1
    rows = [(k + 1, de[k], ds[k], (k + 1) * rep.dE_plus) for k in marks]
    cols = ("m", "delta_E", "delta_S", "closed_form_m_dE_plus")
    js = summary(cfg, estimates, rep.to_dict(), disc, flux_report=rep.to_dict())
    return csv_text(cfg, "thermo", cols, rows), js


COMMANDS = {"spectrum": cmd_spectrum, "simulate": cmd_simulate, "thermo": cmd_thermo}


def cmd_validate(suite: str, out_dir, quiet: bool) -> int:
    from randrep.validation import run_suite

    results = run_suite(suite)
    if not quiet:
        for r in results:
            print(r.line())
    passed = all(r.passed for r in results)
    payload = _jsonable({"suite": suite, "passed": passed, "criteria": [r.to_dict() for r in results]})
    if out_dir is not None:
        write_atomic({Path(out_dir) / f"validate_{suite}.json": json.dumps(payload, indent=2, sort_keys=True) + "\n"})
    elif not quiet:
        print(json.dumps({"suite": suite, "passed": passed}))
    return EXIT_OK if passed else EXIT_VALIDATION


def _seed_arg(text):
    try:
        v = int(text, 0)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from exc
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="randrep", description="Random repeated interaction simulations.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True)
        s.add_argument("--seed", type=_seed_arg)
        s.add_argument("--out", default=".")
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--quiet", action="store_true")
    v = sub.add_parser("validate")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--out", default=None)
    v.add_argument("--quiet", action="store_true")
    return ap


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "validate":
        return cmd_validate(args.suite, args.out, args.quiet)
    try:
        cfg = cfgmod.load(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        csv_payload, json_payload = COMMANDS[args.command](cfg, max(1, args.threads))
        files = _route_outputs(cfg, args.command, args.out, csv_payload, json_payload)
        write_atomic(files)
    except RandRepError as exc:
        print(f"randrep {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    if not args.quiet:
        print(json.dumps(json_payload, indent=2, sort_keys=True))
    return EXIT_OK


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
