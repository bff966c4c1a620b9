"""Experiment configuration: TOML in, dataclasses out, and back."""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import tomli
import tomli_w

from randrep.distributions import ParameterDistribution, law_from_dict
from randrep.errors import ConfigError

MODELS = {
    "spin_spin": {"params": {"e_s", "lambda"}, "required": {"e_s", "lambda"}, "laws": ("tau", "beta", "e_e")},
    "spin_fermion": {
        "params": {"lambda", "tau0", "r_cut", "n_nodes"},
        "required": {"lambda", "tau0"},
        "laws": ("sigma", "beta"),
    },
}
INITIAL_STATES = ("maximally_mixed", "ground", "excited", "plus")
OUTPUT_KINDS = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    n_steps: int = 100_000
    n_trajectories: int = 8
    cesaro_window: int = 100_000
    n_nodes: int = 64
    checkpoint_every: int = 1000
    initial_state: str = "maximally_mixed"


@dataclass(frozen=True)
class OutputSpec:
    kind: str
    path: str


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    seed: int
    params: dict
    distributions: dict
    run: RunConfig = field(default_factory=RunConfig)
    spectrum: dict = field(default_factory=dict)
    outputs: tuple = ()

    def to_dict(self) -> dict:
        d = {
            "model": self.model,
            "seed": self.seed,
            "params": dict(self.params),
            "distributions": {k: dict(v) for k, v in self.distributions.items()},
            "run": asdict(self.run),
            "outputs": [asdict(o) for o in self.outputs],
        }
        if self.spectrum:
            d["spectrum"] = dict(self.spectrum)
        return d

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_seed(self, seed: int):
        return replace(self, seed=_seed(seed, "seed"))

    def parameter_distribution(self) -> ParameterDistribution:
        return ParameterDistribution.from_dict(self.distributions)


def _fail(msg, text=None, key=None):
    line = _locate(text, key) if text and key else None
    raise ConfigError(f"{msg}" + (f" (line {line})" if line else ""))


def _locate(text: str, key: str):
    leaf = key.split(".")[-1]
    pat = re.compile(rf"^\s*(\[+\s*[\w.]*{re.escape(leaf)}[\w.]*\s*\]+|{re.escape(leaf)}\s*=)")
    for i, line in enumerate(text.splitlines(), 1):
        if pat.search(line):
            return i
    return None


def _seed(v, where):
    if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v < 2**64:
        raise ConfigError(f"{where}: seed must be an integer in [0, 2^64)")
    return v


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    return float(v)


def from_dict(d: dict, text: str = None) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config root must be a table")
    unknown = set(d) - {"model", "seed", "params", "distributions", "run", "spectrum", "outputs"}
    if unknown:
        _fail(f"unknown top-level keys {sorted(unknown)}", text, sorted(unknown)[0])
    model = d.get("model")
    if model not in MODELS:
        _fail(f"model: expected one of {sorted(MODELS)}, got {model!r}", text, "model")
    if "seed" not in d:
        raise ConfigError("seed: missing (a seed is mandatory)")
    seed = _seed(d["seed"], "seed")
    spec = MODELS[model]

    params = d.get("params", {})
    if not isinstance(params, dict):
        _fail("params: expected a table", text, "params")
    for k in params:
        if k not in spec["params"]:
            _fail(f"params.{k}: not a parameter of {model}", text, f"params.{k}")
        if k == "n_nodes":
            if isinstance(params[k], bool) or not isinstance(params[k], int) or params[k] < 2:
                _fail("params.n_nodes: expected an integer >= 2", text, "params.n_nodes")
        else:
            _number(params[k], f"params.{k}")
    missing = spec["required"] - set(params)
    if missing:
        _fail(f"params: missing {sorted(missing)}", text, "params")

    dists = d.get("distributions", {})
    if not isinstance(dists, dict):
        _fail("distributions: expected a table", text, "distributions")
    for k in spec["laws"]:
        if k not in dists:
            _fail(f"distributions.{k}: missing law for {model}", text, "distributions")
    for k, law in dists.items():
        if k not in spec["laws"]:
            _fail(f"distributions.{k}: not a random parameter of {model}", text, f"distributions.{k}")
        if not isinstance(law, dict):
            _fail(f"distributions.{k}: expected a table", text, f"distributions.{k}")
        try:
            law_from_dict(law)
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            _fail(f"distributions.{k}: invalid law ({exc})", text, f"distributions.{k}")

    run_d = d.get("run", {})
    if not isinstance(run_d, dict):
        _fail("run: expected a table", text, "run")
    fields = RunConfig.__dataclass_fields__
    for k, v in run_d.items():
        if k not in fields:
            _fail(f"run.{k}: unknown key", text, f"run.{k}")
        if k == "initial_state":
            if v not in INITIAL_STATES:
                _fail(f"run.initial_state: expected one of {INITIAL_STATES}", text, f"run.{k}")
        elif isinstance(v, bool) or not isinstance(v, int) or v < 1:
            _fail(f"run.{k}: expected a positive integer", text, f"run.{k}")
    run = RunConfig(**run_d)
    if run.cesaro_window > run.n_steps:
        _fail("run.cesaro_window: must not exceed run.n_steps", text, "run.cesaro_window")

    spectrum = d.get("spectrum", {})
    if not isinstance(spectrum, dict):
        _fail("spectrum: expected a table", text, "spectrum")
    for k, v in spectrum.items():
        if k not in ("tau_min", "tau_max", "n_points", "delta"):
            _fail(f"spectrum.{k}: unknown key", text, f"spectrum.{k}")
        _number(v, f"spectrum.{k}")

    outs = d.get("outputs", [])
    if not isinstance(outs, list):
        _fail("outputs: expected an array of tables", text, "outputs")
    outputs = []
    for i, o in enumerate(outs):
        if not isinstance(o, dict) or set(o) != {"kind", "path"}:
            _fail(f"outputs[{i}]: expected keys kind and path", text, "outputs")
        if o["kind"] not in OUTPUT_KINDS:
            _fail(f"outputs[{i}].kind: expected csv or json", text, "outputs")
        outputs.append(OutputSpec(o["kind"], str(o["path"])))
    return ExperimentConfig(model, seed, dict(params), {k: dict(v) for k, v in dists.items()}, run, dict(spectrum), tuple(outputs))


def loads(text: str) -> ExperimentConfig:
    try:
        d = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from exc
    return from_dict(d, text)


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text)
