"""Samplers for the i.i.d. point-process families and their superpositions.

Every sampler takes an explicit ``numpy.random.Generator``; :class:`RngSeed`
turns a ``(seed, stream)`` pair into one, so identical pairs reproduce
identical draws for identical call sequences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.sparse.csgraph import connected_components

from .carrier import Configuration
from .spatial import SpatialMeasure

__all__ = [
    "ModelError",
    "UnsupportedDistribution",
    "RngSeed",
    "Exponential",
    "Uniform",
    "TwoPointMixture",
    "Bernoulli",
    "BernoulliShift",
    "CompoundPoisson",
    "Renewal",
    "MarkovEntrance",
    "ProcessModel",
    "draw_points",
    "sample_one",
    "sample_many",
    "sample_superposition",
    "sample_superpositions",
    "sample_equilibrium_delay",
    "markov_entrance_times",
    "model_from_dict",
    "model_to_dict",
]


class ModelError(ValueError):
    """Model parameters violate the family's invariants."""


class UnsupportedDistribution(ValueError):
    pass


@dataclass(frozen=True)
class RngSeed:
    seed: int
    stream: int = 0

    def generator(self, *subkeys: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *subkeys))
        return np.random.default_rng(ss)


# ---------------------------------------------------------------------------
# inter-renewal laws


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ModelError("rate must be positive")

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    @property
    def second_moment(self) -> float:
        return 2.0 / self.rate**2

    def sample(self, size, rng):
        return rng.exponential(1.0 / self.rate, size)

    def sample_equilibrium(self, size, rng):
        return rng.exponential(1.0 / self.rate, size)

    def equilibrium_cdf(self, x):
        return 1.0 - np.exp(-self.rate * np.maximum(np.asarray(x, float), 0.0))


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self):
        if not 0 <= self.low < self.high:
            raise ModelError("need 0 <= low < high")

    @property
    def mean(self) -> float:
        return (self.low + self.high) / 2

    @property
    def second_moment(self) -> float:
        return (self.low**2 + self.low * self.high + self.high**2) / 3

    def sample(self, size, rng):
        return rng.uniform(self.low, self.high, size)

    def equilibrium_cdf(self, x):
        x = np.clip(np.asarray(x, float), 0.0, self.high)
        l, u = self.low, self.high
        inner = l + ((u - l) ** 2 - (u - np.maximum(x, l)) ** 2) / (2 * (u - l))
        return np.where(x <= l, x, inner) / self.mean

    def sample_equilibrium(self, size, rng):
        # inverse of the integrated tail: linear up to `low`, quadratic after
        l, u = self.low, self.high
        c = rng.random(size) * self.mean
        tail = u - np.sqrt(np.maximum((u - l) ** 2 - 2 * (u - l) * (c - l), 0.0))
        return np.where(c <= l, c, tail)


@dataclass(frozen=True)
class TwoPointMixture:
    """W = x_k + jitter * U(-1, 1) with probability q_k, k = 1, 2."""

    x1: float
    q1: float
    x2: float
    q2: float
    jitter: float = 0.0

    def __post_init__(self):
        if self.q1 < 0 or self.q2 < 0 or abs(self.q1 + self.q2 - 1) > 1e-12:
            raise ModelError("mixture weights must be nonnegative and sum to 1")
        if self.jitter < 0 or min(self.x1, self.x2) - self.jitter <= 0:
            raise ModelError("support must stay strictly positive")

    def _parts(self):
        h = self.jitter
        if h == 0:
            return [(self.q1, None, self.x1), (self.q2, None, self.x2)]
        return [(self.q1, Uniform(self.x1 - h, self.x1 + h), self.x1),
                (self.q2, Uniform(self.x2 - h, self.x2 + h), self.x2)]

    @property
    def mean(self) -> float:
        return self.q1 * self.x1 + self.q2 * self.x2

    @property
    def second_moment(self) -> float:
        h2 = self.jitter**2 / 3
        return self.q1 * (self.x1**2 + h2) + self.q2 * (self.x2**2 + h2)

    def sample(self, size, rng):
        pick = rng.random(size) < self.q1
        base = np.where(pick, self.x1, self.x2)
        if self.jitter:
            base = base + self.jitter * rng.uniform(-1, 1, size)
        return base

    def equilibrium_cdf(self, x):
        x = np.asarray(x, float)
        out = np.zeros_like(x)
        for q, u, c in self._parts():
            if q == 0:
                continue
            comp = np.clip(x / c, 0, 1) if u is None else u.equilibrium_cdf(x)
            out += q * c / self.mean * comp
        return out

    def sample_equilibrium(self, size, rng):
        # equilibrium of a mixture = mixture of component equilibria, reweighted by mean
        w1 = self.q1 * self.x1 / self.mean
        pick = rng.random(size) < w1
        out = np.empty(size)
        for mask, (q, u, c) in zip((pick, ~pick), self._parts()):
            k = int(mask.sum())
            if k == 0:
                continue
            out[mask] = rng.uniform(0, c, k) if u is None else u.sample_equilibrium(k, rng)
        return out


InterarrivalLaw = Union[Exponential, Uniform, TwoPointMixture]


def sample_equilibrium_delay(spec, rng: np.random.Generator, size=None):
    """Draw from the stationary-excess law with density P(W > x) / E[W]."""
    if not isinstance(spec, (Exponential, Uniform, TwoPointMixture)):
        raise UnsupportedDistribution(f"no equilibrium sampler for {type(spec).__name__}")
    out = spec.sample_equilibrium(1 if size is None else size, rng)
    return float(out[0]) if size is None else out


# ---------------------------------------------------------------------------
# process families


def _probs(p) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size == 0 or np.any(p <= 0) or np.any(p >= 1):
        raise ModelError("probabilities must lie strictly inside (0, 1)")
    return p


@dataclass(frozen=True, eq=False)
class Bernoulli:
    """Independent indicators I_i placing a point at fixed atom t_i."""

    atoms: tuple
    probs: tuple

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float).reshape(-1)
        p = _probs(self.probs)
        if a.size != p.size:
            raise ModelError("one probability per atom")
        if np.any(np.diff(a) <= 0) or np.any(a < 0) or np.any(a > 1):
            raise ModelError("atoms must be strictly increasing in [0, 1]")
        object.__setattr__(self, "atoms", tuple(a.tolist()))
        object.__setattr__(self, "probs", tuple(p.tolist()))

    family = "bernoulli"


@dataclass(frozen=True, eq=False)
class BernoulliShift:
    """Independent pairs (I_i, ζ_i); a point at ζ_i when I_i = 1."""

    probs: tuple
    shift_laws: tuple

    def __post_init__(self):
        p = _probs(self.probs)
        laws = tuple(self.shift_laws)
        if len(laws) != p.size:
            raise ModelError("one shift law per indicator")
        for law in laws:
            if not isinstance(law, SpatialMeasure) or abs(law.total - 1) > 1e-12:
                raise ModelError("shift laws must be probability SpatialMeasures")
        object.__setattr__(self, "probs", tuple(p.tolist()))
        object.__setattr__(self, "shift_laws", laws)

    family = "bernoulli_shift"


@dataclass(frozen=True, eq=False)
class CompoundPoisson:
    """Σ_i i·X_i with X_i Poisson processes of mean measure rates[i-1] * base.

    Only marks up to ``max_mark`` are simulated; ``tail_mass`` reports the
    dropped mean count Σ_{i > max_mark} i c_i |base|.
    """

    rates: tuple
    base: SpatialMeasure = field(default_factory=SpatialMeasure.lebesgue)
    max_mark: int | None = None

    def __post_init__(self):
        c = np.asarray(self.rates, dtype=float).reshape(-1)
        if c.size == 0 or np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ModelError("rates must be finite and nonnegative")
        if c[0] <= 0:
            raise ModelError("the unit-mark rate c_1 must be positive")
        if self.base.total <= 0:
            raise ModelError("base measure must have positive mass")
        mm = c.size if self.max_mark is None else int(self.max_mark)
        if mm < 1:
            raise ModelError("max_mark must be >= 1")
        object.__setattr__(self, "rates", tuple(c.tolist()))
        object.__setattr__(self, "max_mark", mm)

    family = "compound_poisson"

    @property
    def active_rates(self) -> np.ndarray:
        return np.asarray(self.rates[: self.max_mark])

    @property
    def tail_mass(self) -> float:
        c = np.asarray(self.rates)
        i = np.arange(1, c.size + 1)
        return float(np.sum((i * c)[self.max_mark:]) * self.base.total)


@dataclass(frozen=True, eq=False)
class Renewal:
    """Stationary renewal process restricted to [0, 1]."""

    interarrival: InterarrivalLaw

    def __post_init__(self):
        if not isinstance(self.interarrival, (Exponential, Uniform, TwoPointMixture)):
            raise UnsupportedDistribution("interarrival law must be Exponential, Uniform or TwoPointMixture")
        if self.interarrival.mean <= 0:
            raise ModelError("interarrival times must be strictly positive")

    family = "renewal"


@dataclass(frozen=True, eq=False)
class MarkovEntrance:
    """Entrance times into ``target_set`` of a stationary finite Markov chain, on [0, 1]."""

    rate_matrix: np.ndarray
    target_set: tuple
    strict_reversibility: bool = True

    def __post_init__(self):
        q = np.array(self.rate_matrix, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 2:
            raise ModelError("rate matrix must be square with at least 2 states")
        off = q - np.diag(np.diag(q))
        if np.any(off < 0):
            raise ModelError("off-diagonal rates must be nonnegative")
        scale = max(1.0, float(np.abs(q).max()))
        if np.any(np.abs(q.sum(axis=1)) > 1e-10 * scale):
            raise ModelError("rows of a rate matrix must sum to zero")
        ncomp, _ = connected_components(off > 0, directed=True, connection="strong")
        if ncomp != 1:
            raise ModelError("rate matrix is not irreducible")
        s0 = tuple(sorted(set(int(s) for s in self.target_set)))
        if not s0 or len(s0) >= q.shape[0] or s0[0] < 0 or s0[-1] >= q.shape[0]:
            raise ModelError("target set must be a proper nonempty subset of the states")
        pi = _stationary(q)
        if self.strict_reversibility:
            flux = pi[:, None] * q
            if np.max(np.abs(flux - flux.T)) > 1e-10 * max(1.0, float(np.abs(flux).max())):
                raise ModelError("chain is not reversible (detailed balance fails)")
        q.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "rate_matrix", q)
        object.__setattr__(self, "target_set", s0)
        object.__setattr__(self, "stationary", pi)

    family = "markov_entrance"

    @property
    def entrance_rate(self) -> float:
        """Stationary mean number of entrances per unit time."""
        inside = np.zeros(self.rate_matrix.shape[0], bool)
        inside[list(self.target_set)] = True
        q = self.rate_matrix
        return float(np.sum(self.stationary[~inside] * q[np.ix_(~inside, inside)].sum(axis=1)))


ProcessModel = Union[Bernoulli, BernoulliShift, CompoundPoisson, Renewal, MarkovEntrance]


def _stationary(q: np.ndarray) -> np.ndarray:
    k = q.shape[0]
    a = np.vstack([q.T, np.ones(k)])
    rhs = np.zeros(k + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    pi = np.clip(pi, 0, None)
    return pi / pi.sum()


# ---------------------------------------------------------------------------
# raw draws: (points, owner) for `count` independent copies of Ξ_1


def _draw_bernoulli(model: Bernoulli, count, rng):
    p = np.asarray(model.probs)
    hit = rng.random((count, p.size)) < p
    owner, col = np.nonzero(hit)
    return np.asarray(model.atoms)[col], owner


def _draw_bernoulli_shift(model: BernoulliShift, count, rng):
    p = np.asarray(model.probs)
    hit = rng.random((count, p.size)) < p
    owners, points = [], []
    for i, law in enumerate(model.shift_laws):
        who = np.flatnonzero(hit[:, i])
        owners.append(who)
        points.append(law.sample(who.size, rng))
    return np.concatenate(points), np.concatenate(owners)


def _draw_compound_poisson(model: CompoundPoisson, count, rng):
    base_total = model.base.total
    owners, points = [], []
    for i, c in enumerate(model.active_rates, start=1):
        if c == 0:
            continue
        k = rng.poisson(c * base_total, count)
        who = np.repeat(np.arange(count), k)
        loc = model.base.sample(who.size, rng)
        owners.append(np.repeat(who, i))
        points.append(np.repeat(loc, i))
    if not points:
        return np.empty(0), np.empty(0, dtype=np.int64)
    return np.concatenate(points), np.concatenate(owners)


def _draw_renewal(model: Renewal, count, rng):
    law = model.interarrival
    t = law.sample_equilibrium(count, rng)
    alive = np.flatnonzero(t <= 1.0)
    owners, points = [alive], [t[alive]]
    t = t[alive]
    while alive.size:
        t = t + law.sample(alive.size, rng)
        keep = t <= 1.0
        alive, t = alive[keep], t[keep]
        owners.append(alive)
        points.append(t)
    return np.concatenate(points), np.concatenate(owners)


def _draw_markov(model: MarkovEntrance, count, rng):
    q = model.rate_matrix
    k = q.shape[0]
    out_rate = -np.diag(q)
    jump = np.where(np.eye(k, dtype=bool), 0.0, q) / out_rate[:, None]
    cum = np.cumsum(jump, axis=1)
    inside = np.zeros(k, bool)
    inside[list(model.target_set)] = True
    state = rng.choice(k, size=count, p=model.stationary)
    who = np.arange(count)
    t = np.zeros(count)
    owners, points = [], []
    while who.size:
        t = t + rng.exponential(1.0, who.size) / out_rate[state]
        live = t <= 1.0
        who, t, state = who[live], t[live], state[live]
        u = rng.random(who.size)
        nxt = np.minimum((cum[state] < u[:, None]).sum(axis=1), k - 1)
        enter = inside[nxt] & ~inside[state]
        owners.append(who[enter])
        points.append(t[enter])
        state = nxt
    if not points:
        return np.empty(0), np.empty(0, dtype=np.int64)
    return np.concatenate(points), np.concatenate(owners)


_DRAW = {
    "bernoulli": _draw_bernoulli,
    "bernoulli_shift": _draw_bernoulli_shift,
    "compound_poisson": _draw_compound_poisson,
    "renewal": _draw_renewal,
    "markov_entrance": _draw_markov,
}


def draw_points(model, count: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Raw points of ``count`` independent copies of Ξ_1 with the copy index of each point."""
    try:
        fn = _DRAW[model.family]
    except (AttributeError, KeyError):
        raise ModelError(f"not a process model: {model!r}") from None
    return fn(model, count, rng)


def _group(points, owner, groups: int) -> list[Configuration]:
    order = np.lexsort((points, owner))
    points, owner = points[order], owner[order]
    cuts = np.searchsorted(owner, np.arange(groups + 1))
    return [Configuration.from_points(points[cuts[g]: cuts[g + 1]]) for g in range(groups)]


def sample_many(model: ProcessModel, count: int, rng: np.random.Generator) -> list[Configuration]:
    """``count`` independent realizations of Ξ_1."""
    pts, owner = draw_points(model, count, rng)
    return _group(pts, owner, count)


def sample_one(model: ProcessModel, rng: np.random.Generator) -> Configuration:
    return sample_many(model, 1, rng)[0]


def sample_superpositions(model: ProcessModel, n: int, m: int, rng: np.random.Generator) -> list[Configuration]:
    """``m`` independent copies of Ξ_1 + ... + Ξ_n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pts, owner = draw_points(model, n * m, rng)
    return _group(pts, owner // n, m)


def sample_superposition(model: ProcessModel, n: int, rng: np.random.Generator) -> Configuration:
    return sample_superpositions(model, n, 1, rng)[0]


def markov_entrance_times(q, target_set, rng: np.random.Generator, strict_reversibility=True) -> Configuration:
    """Entrance times into ``target_set`` on [0, 1] for a stationary chain with rates ``q``."""
    return sample_one(MarkovEntrance(np.asarray(q, float), tuple(target_set), strict_reversibility), rng)


# ---------------------------------------------------------------------------
# structured config round-trip


def _law_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind", None)
    try:
        if kind == "exponential":
            return Exponential(**d)
        if kind == "uniform":
            return Uniform(**d)
        if kind == "two_point":
            return TwoPointMixture(**d)
    except TypeError as e:
        raise ModelError(f"bad interarrival keys: {e}") from None
    raise UnsupportedDistribution(f"unsupported interarrival family {kind!r}")


def _law_to_dict(law) -> dict:
    if isinstance(law, Exponential):
        return {"kind": "exponential", "rate": law.rate}
    if isinstance(law, Uniform):
        return {"kind": "uniform", "low": law.low, "high": law.high}
    return {"kind": "two_point", "x1": law.x1, "q1": law.q1, "x2": law.x2, "q2": law.q2,
            "jitter": law.jitter}


_MODEL_KEYS = {
    "bernoulli": {"family", "atoms", "probs"},
    "bernoulli_shift": {"family", "probs", "shift_laws"},
    "compound_poisson": {"family", "rates", "base", "max_mark"},
    "renewal": {"family", "interarrival"},
    "markov_entrance": {"family", "rate_matrix", "target_set", "strict_reversibility"},
}


def model_from_dict(d: dict) -> ProcessModel:
    """Build a model from its config block; unknown keys raise."""
    fam = d.get("family")
    if fam not in _MODEL_KEYS:
        raise ModelError(f"unknown model family {fam!r}")
    unknown = set(d) - _MODEL_KEYS[fam]
    if unknown:
        raise ModelError(f"unknown keys for {fam}: {sorted(unknown)}")
    if fam == "bernoulli":
        return Bernoulli(tuple(d["atoms"]), tuple(d["probs"]))
    if fam == "bernoulli_shift":
        return BernoulliShift(tuple(d["probs"]), tuple(SpatialMeasure.from_dict(x) for x in d["shift_laws"]))
    if fam == "compound_poisson":
        base = SpatialMeasure.from_dict(d["base"]) if "base" in d else SpatialMeasure.lebesgue()
        return CompoundPoisson(tuple(d["rates"]), base, d.get("max_mark"))
    if fam == "renewal":
        return Renewal(_law_from_dict(d["interarrival"]))
    return MarkovEntrance(np.asarray(d["rate_matrix"], float), tuple(d["target_set"]),
                          bool(d.get("strict_reversibility", True)))


def model_to_dict(model: ProcessModel) -> dict:
    fam = model.family
    if fam == "bernoulli":
        return {"family": fam, "atoms": list(model.atoms), "probs": list(model.probs)}
    if fam == "bernoulli_shift":
        return {"family": fam, "probs": list(model.probs),
                "shift_laws": [law.to_dict() for law in model.shift_laws]}
    if fam == "compound_poisson":
        return {"family": fam, "rates": list(model.rates), "base": model.base.to_dict(),
                "max_mark": model.max_mark}
    if fam == "renewal":
        return {"family": fam, "interarrival": _law_to_dict(model.interarrival)}
    return {"family": fam, "rate_matrix": model.rate_matrix.tolist(),
            "target_set": list(model.target_set),
            "strict_reversibility": model.strict_reversibility}
