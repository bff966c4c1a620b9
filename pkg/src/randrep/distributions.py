"""Laws for the random parameters (tau, beta, e_e, sigma) with exact moments and quadrature."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from randrep.errors import UnsupportedDistribution


def gauss_legendre(low: float, high: float, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (high - low)
    return low + half * (x + 1.0), half * w


@dataclass(frozen=True)
class PointMass:
    value: float
    kind = "point"

    def sample(self, rng, n):
        return np.full(n, float(self.value))

    @property
    def mean(self):
        return float(self.value)

    @property
    def second_moment(self):
        return float(self.value) ** 2

    @property
    def is_deterministic(self):
        return True

    def support_bounds(self):
        return float(self.value), float(self.value)

    def quadrature(self, n_nodes=64):
        return np.array([float(self.value)]), np.array([1.0])

    def to_dict(self):
        return {"kind": "point", "value": float(self.value)}


@dataclass(frozen=True)
class FiniteSupport:
    values: tuple
    weights: tuple
    kind = "finite"

    def __post_init__(self):
        v = tuple(float(x) for x in self.values)
        w = np.asarray(self.weights, dtype=float)
        if len(v) != len(w) or len(v) == 0:
            raise ValueError("values and weights must have the same nonzero length")
        if np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be nonnegative with positive sum")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", tuple(float(x) for x in w / w.sum()))

    def sample(self, rng, n):
        idx = rng.choice(len(self.values), size=n, p=np.asarray(self.weights))
        return np.asarray(self.values)[idx]

    @property
    def mean(self):
        return float(np.dot(self.values, self.weights))

    @property
    def second_moment(self):
        return float(np.dot(np.square(self.values), self.weights))

    @property
    def is_deterministic(self):
        return len(set(v for v, w in zip(self.values, self.weights) if w > 0)) == 1

    def support_bounds(self):
        return min(self.values), max(self.values)

    def quadrature(self, n_nodes=64):
        return np.asarray(self.values), np.asarray(self.weights)

    def to_dict(self):
        return {"kind": "finite", "values": list(self.values), "weights": list(self.weights)}


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float
    kind = "uniform"

    def __post_init__(self):
        if not self.high > self.low:
            raise ValueError("uniform law needs high > low")

    def sample(self, rng, n):
        return rng.uniform(self.low, self.high, size=n)

    @property
    def mean(self):
        return 0.5 * (self.low + self.high)

    @property
    def second_moment(self):
        a, b = self.low, self.high
        return (a * a + a * b + b * b) / 3.0

    @property
    def is_deterministic(self):
        return False

    def support_bounds(self):
        return float(self.low), float(self.high)

    def quadrature(self, n_nodes=64):
        x, w = gauss_legendre(self.low, self.high, n_nodes)
        return x, w / (self.high - self.low)

    def to_dict(self):
        return {"kind": "uniform", "low": float(self.low), "high": float(self.high)}


@dataclass(frozen=True)
class InverseCDF:
    """Generic law given by its quantile function on (0, 1).

    Moments are taken from `mean`/`second_moment` when given, otherwise
    computed by Gauss-Legendre in quantile space. Set `integrable=False` for
    laws whose quantile function is too singular for that rule.
    """

    ppf: Callable
    low: float = -np.inf
    high: float = np.inf
    exact_mean: Optional[float] = None
    exact_second_moment: Optional[float] = None
    integrable: bool = True
    spec: dict = field(default_factory=dict, compare=False)
    kind = "inverse_cdf"

    def sample(self, rng, n):
        return np.asarray(self.ppf(rng.uniform(size=n)), dtype=float)

    def quadrature(self, n_nodes=64):
        if not self.integrable:
            raise UnsupportedDistribution("this inverse-CDF law has no quadrature rule")
        u, w = gauss_legendre(0.0, 1.0, n_nodes)
        return np.asarray(self.ppf(u), dtype=float), w

    @property
    def mean(self):
        if self.exact_mean is not None:
            return self.exact_mean
        x, w = self.quadrature(256)
        return float(np.dot(x, w))

    @property
    def second_moment(self):
        if self.exact_second_moment is not None:
            return self.exact_second_moment
        x, w = self.quadrature(256)
        return float(np.dot(x * x, w))

    @property
    def is_deterministic(self):
        return False

    def support_bounds(self):
        return float(self.low), float(self.high)

    def to_dict(self):
        if not self.spec:
            raise UnsupportedDistribution("inverse-CDF law built from a callable cannot be serialized")
        return dict(self.spec)


def scipy_law(name: str, args=(), kwds=None) -> InverseCDF:
    """Wrap a frozen scipy.stats distribution as an InverseCDF law."""
    import scipy.stats

    kwds = dict(kwds or {})
    dist = getattr(scipy.stats, name)(*args, **kwds)
    low, high = dist.support()
    mean, var = dist.stats(moments="mv")
    spec = {"kind": "scipy", "name": name, "args": list(args), "kwds": kwds}
    return InverseCDF(dist.ppf, float(low), float(high), float(mean), float(var + mean**2), spec=spec)


def law_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "point":
        return PointMass(float(d["value"]))
    if kind == "finite":
        return FiniteSupport(tuple(d["values"]), tuple(d.get("weights", [1.0] * len(d["values"]))))
    if kind == "uniform":
        return Uniform(float(d["low"]), float(d["high"]))
    if kind == "scipy":
        return scipy_law(d["name"], tuple(d.get("args", ())), d.get("kwds"))
    raise ValueError(f"unknown law kind {kind!r}")


@dataclass(frozen=True)
class ParameterDistribution:
    """Independent product law over named parameters."""

    laws: dict

    def __getitem__(self, name):
        return self.laws[name]

    def names(self):
        return list(self.laws)

    def is_deterministic(self, name) -> bool:
        return self.laws[name].is_deterministic

    def sample(self, rng, n) -> dict:
        # fixed name order keeps the stream layout reproducible
        return {k: self.laws[k].sample(rng, n) for k in sorted(self.laws)}

    def quadrature(self, n_nodes=64):
        """Tensor-product rule: dict of node arrays and a weight array summing to 1."""
        names = sorted(self.laws)
        rules = [self.laws[k].quadrature(n_nodes) for k in names]
        nodes = {k: [] for k in names}
        weights = []
        for combo in itertools.product(*[range(len(r[0])) for r in rules]):
            w = 1.0
            for k, (x, wx), i in zip(names, rules, combo):
                nodes[k].append(x[i])
                w *= wx[i]
            weights.append(w)
        return {k: np.asarray(v) for k, v in nodes.items()}, np.asarray(weights)

    def to_dict(self):
        return {k: self.laws[k].to_dict() for k in sorted(self.laws)}

    @classmethod
    def from_dict(cls, d: dict):
        return cls({k: law_from_dict(v) for k, v in d.items()})
