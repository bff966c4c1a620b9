import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randrep import cli, config, spin_spin, validation
from randrep.errors import ConfigError

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = sorted((ROOT / "configs").glob("*.toml"))


def small(path, **run):
    cfg = config.load(path)
    defaults = dict(n_steps=2000, n_trajectories=2, cesaro_window=1000, checkpoint_every=500)
    defaults.update(run)
    return replace(cfg, run=replace(cfg.run, **defaults))


def write(tmp_path, cfg, name="c.toml"):
    p = tmp_path / name
    p.write_text(cfg.to_toml())
    return p


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_round_trip(path):
    cfg = config.load(path)
    again = config.loads(cfg.to_toml())
    assert again == cfg and again.config_hash() == cfg.config_hash()


laws = st.one_of(
    st.builds(lambda v: {"kind": "point", "value": v}, st.floats(0.1, 5)),
    st.builds(lambda a, w: {"kind": "uniform", "low": a, "high": a + w}, st.floats(0.1, 3), st.floats(0.01, 1)),
    st.builds(lambda v: {"kind": "finite", "values": v, "weights": [1.0] * len(v)}, st.lists(st.floats(0.1, 5), min_size=1, max_size=4)),
)


@given(st.integers(0, 2**64 - 1), st.floats(0.1, 3), st.floats(-1, 1), laws, laws, laws, st.integers(1, 10**6))
def test_round_trip_property(seed, e_s, lam, tau, beta, e_e, n):
    d = {
        "model": "spin_spin",
        "seed": seed,
        "params": {"e_s": e_s, "lambda": lam},
        "distributions": {"tau": tau, "beta": beta, "e_e": e_e},
        "run": {"n_steps": n, "cesaro_window": n},
        "outputs": [{"kind": "json", "path": "x.json"}],
    }
    cfg = config.from_dict(d)
    assert config.loads(cfg.to_toml()) == cfg


BASE = (ROOT / "configs" / "random_tau.toml").read_text()


@pytest.mark.parametrize(
    "edit,needle",
    [
        (lambda t: t.replace("seed = 20240601", ""), "seed"),
        (lambda t: t.replace('model = "spin_spin"', 'model = "spin_boson"'), "model"),
        (lambda t: t.replace("lambda = 0.5", "lambda = 0.5\nkappa = 1.0"), "params.kappa"),
        (lambda t: t.replace('kind = "uniform"', 'kind = "cauchy-ish"'), "distributions.tau"),
        (lambda t: t.replace("n_trajectories = 8", "n_trajectories = 0"), "run.n_trajectories"),
        (lambda t: t.replace("[distributions.e_e]\nkind", "[distributions.e_x]\nkind"), "distributions"),
        (lambda t: t.replace("[run]", "[run\n"), "malformed"),
    ],
)
def test_malformed_configs(edit, needle):
    with pytest.raises(ConfigError, match=needle.split(".")[0]):
        config.loads(edit(BASE))


def test_error_carries_a_line_number():
    line = BASE.splitlines().index("n_trajectories = 8       # independent trajectories (RNG substreams 0..7)") + 1
    with pytest.raises(ConfigError, match=rf"line {line}\)"):
        config.loads(BASE.replace("n_trajectories = 8", "n_trajectories = -1"))


def test_malformed_config_exits_2_without_output(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(BASE.replace("seed = 20240601", ""))
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", str(bad), "--out", str(out), "--quiet"]) == 2
    assert not out.exists()


def test_gate_violation_exits_3_without_output(tmp_path):
    t_per = spin_spin.period(1.0, 2.0, 0.5)
    cfg = tmp_path / "gate.toml"
    cfg.write_text(validation.GATE_CONFIG.format(tau=t_per))
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(out), "--quiet"]) == 3
    assert not out.exists() or not any(out.iterdir())


def test_unknown_suite_is_a_usage_error(capsys):
    assert cli.main(["validate", "nonsense"]) == 2


def test_simulate_is_bitwise_deterministic(tmp_path):
    p = write(tmp_path, small(ROOT / "configs" / "random_tau.toml"))
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["simulate", "--config", str(p), "--out", str(a), "--quiet"]) == 0
    assert cli.main(["simulate", "--config", str(p), "--out", str(b), "--quiet", "--threads", "3"]) == 0
    for f in ("random_tau.csv", "random_tau.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_seed_override_changes_hash_and_draws(tmp_path):
    p = write(tmp_path, small(ROOT / "configs" / "random_tau.toml"))
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["simulate", "--config", str(p), "--out", str(a), "--quiet"])
    cli.main(["simulate", "--config", str(p), "--out", str(b), "--quiet", "--seed", "17"])
    ja, jb = (json.loads((d / "random_tau.json").read_text()) for d in (a, b))
    assert jb["seed"] == 17 and ja["config_hash"] != jb["config_hash"]
    assert ja["estimates"]["p0"] != jb["estimates"]["p0"]


def test_outputs_carry_hash_and_seed(tmp_path):
    cfg = small(ROOT / "configs" / "random_tau.toml")
    p = write(tmp_path, cfg)
    cli.main(["simulate", "--config", str(p), "--out", str(tmp_path), "--quiet"])
    head = (tmp_path / "random_tau.csv").read_text().splitlines()
    assert cfg.config_hash() in head[0] and f"seed={cfg.seed}" in head[0]
    assert head[1] == "step,cesaro_p0,std_error,target_p0,discrepancy"
    assert all("e" in v for v in head[2].split(","))
    js = json.loads((tmp_path / "random_tau.json").read_text())
    assert {"model", "seed", "config_hash", "estimates", "targets", "discrepancies"} <= set(js)


def test_spectrum_sweep_marks_the_lattice(tmp_path):
    p = write(tmp_path, config.load(ROOT / "configs" / "random_tau.toml"))
    assert cli.main(["spectrum", "--config", str(p), "--out", str(tmp_path), "--quiet"]) == 0
    lines = (tmp_path / "random_tau.csv").read_text().splitlines()
    assert lines[1].startswith("tau,abs_e0,abs_e_plus,abs_e_minus,gate")
    rows = [l.split(",") for l in lines[2:]]
    t_per = spin_spin.period(1.0, 2.0, 0.5)
    assert len(rows) == 101  # 100 sweep points plus T; 2T is the sweep endpoint
    on_lattice = [r for r in rows if np.isclose(float(r[0]), [t_per, 2 * t_per], atol=1e-12).any()]
    assert len(on_lattice) == 2 and all(r[4] == "false" for r in on_lattice)
    assert max(float(r[5]) for r in rows) < 1e-9
    e0 = spin_spin.eigenvalue_arrays(1.0, 2.0, 0.5, float(rows[10][0]))[0]
    assert float(rows[10][1]) == float("%.17e" % abs(e0))


def test_spin_fermion_simulate_reports_budget(tmp_path):
    p = write(tmp_path, small(ROOT / "configs" / "spin_fermion.toml", n_steps=5000, cesaro_window=2000))
    assert cli.main(["simulate", "--config", str(p), "--out", str(tmp_path), "--quiet"]) == 0
    js = json.loads((tmp_path / "spin_fermion.json").read_text())
    assert js["discrepancies"]["q_expansion_vs_direct"] < 1e-3
    assert js["targets"]["budget"] == pytest.approx(0.05**3 + 0.05**2)


def test_thermo_closed_form_residual(tmp_path):
    p = write(tmp_path, small(ROOT / "configs" / "thermo.toml"))
    assert cli.main(["thermo", "--config", str(p), "--out", str(tmp_path), "--quiet"]) == 0
    js = json.loads((tmp_path / "thermo_summary.json").read_text())
    assert js["flux_report"]["second_law_residual"] <= 1e-9
    assert (tmp_path / "thermo_delta_e.csv").read_text().splitlines()[1] == "m,delta_E,delta_S,closed_form_m_dE_plus"


def test_thermo_without_coupling_is_flux_free(tmp_path):
    cfg = small(ROOT / "configs" / "thermo.toml")
    cfg = replace(cfg, params={**cfg.params, "lambda": 0.0})
    p = write(tmp_path, cfg)
    assert cli.main(["thermo", "--config", str(p), "--out", str(tmp_path), "--quiet"]) == 0
    js = json.loads((tmp_path / "thermo_summary.json").read_text())
    assert js["flux_report"]["dE_plus"] == 0.0 and js["flux_report"]["dS_plus"] == 0.0
    assert js["estimates"]["dE_per_step"] == 0.0


def test_thermo_random_beta_schema(tmp_path):
    p = write(tmp_path, small(ROOT / "configs" / "random_beta.toml"))
    assert cli.main(["thermo", "--config", str(p), "--out", str(tmp_path), "--quiet"]) == 0
    js = json.loads((tmp_path / "random_beta.json").read_text())
    assert js["flux_report"]["beta_effective"] == "random"
    assert "second_law_residual" not in js["flux_report"]


def test_thermo_rejects_spin_fermion(tmp_path):
    p = write(tmp_path, small(ROOT / "configs" / "spin_fermion.toml"))
    assert cli.main(["thermo", "--config", str(p), "--out", str(tmp_path / "o"), "--quiet"]) == 2


def test_validate_spin_spin_suite_catches_a_perturbed_e0(monkeypatch, tmp_path):
    original = spin_spin.eigenvalue_arrays

    def perturbed(*args):
        e0, em, ep = original(*args)
        return e0 + 1e-3, em, ep

    monkeypatch.setattr(spin_spin, "eigenvalue_arrays", perturbed)
    assert cli.main(["validate", "spin_spin", "--out", str(tmp_path), "--quiet"]) == 4
    js = json.loads((tmp_path / "validate_spin_spin.json").read_text())
    failed = [c["id"] for c in js["criteria"] if not c["passed"]]
    assert "1" in failed


def test_validate_linalg_suite_passes(tmp_path):
    assert cli.main(["validate", "linalg", "--out", str(tmp_path), "--quiet"]) == 0
