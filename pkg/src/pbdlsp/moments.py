"""Factorial moments of |Ξ_1|, dispersion cases, and the mean measure λ."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .carrier import dyadic_partition
from .processes import ProcessModel, draw_points
from .spatial import SpatialMeasure

__all__ = [
    "UnsupportedExact",
    "FactorialMoments",
    "DispersionCase",
    "Classification",
    "IntensitySpec",
    "factorial_moments",
    "moments_from_counts",
    "classify_case",
    "intensity",
]

EXACT_FAMILIES = ("bernoulli", "bernoulli_shift", "compound_poisson")


class UnsupportedExact(ValueError):
    """Exact computation requested for a family without a closed form."""


@dataclass(frozen=True)
class FactorialMoments:
    """θ_1..θ_4 of the total count.

    ``source`` is ``"exact"`` or ``"monte_carlo"``; Monte Carlo moments carry
    standard errors for each θ_r and for ``variance - mean``.
    """

    theta: tuple
    source: str = "exact"
    sample_size: Optional[int] = None
    standard_errors: Optional[tuple] = None
    dispersion_se: Optional[float] = None

    def __post_init__(self):
        th = tuple(float(x) for x in self.theta)
        if len(th) != 4:
            raise ValueError("need theta_1..theta_4")
        if th[0] < 0:
            raise ValueError("theta_1 must be nonnegative")
        object.__setattr__(self, "theta", th)

    @property
    def mean(self) -> float:
        return self.theta[0]

    @property
    def variance(self) -> float:
        t1, t2 = self.theta[:2]
        return t2 - t1 * t1 + t1

    @property
    def exact(self) -> bool:
        return self.source == "exact"


def _elementary_symmetric(p: np.ndarray, r: int) -> np.ndarray:
    e = np.zeros(r + 1)
    e[0] = 1.0
    for x in p:
        e[1:] = e[1:] + x * e[:-1]
    return e


def _falling(x: np.ndarray, r: int) -> np.ndarray:
    out = np.ones_like(x, dtype=float)
    for j in range(r):
        out = out * (x - j)
    return out


def moments_from_counts(counts) -> FactorialMoments:
    """Sample factorial moments (with standard errors) from observed totals."""
    c = np.asarray(counts, dtype=float)
    m = c.size
    if m < 2:
        raise ValueError("need at least two samples")
    ff = [_falling(c, r) for r in range(1, 5)]
    theta = tuple(float(f.mean()) for f in ff)
    se = tuple(float(f.std(ddof=1) / np.sqrt(m)) for f in ff)
    # per-sample contribution to Var - E, linearised around the sample mean
    resid = (c - c.mean()) ** 2 - c
    return FactorialMoments(theta, "monte_carlo", m, se, float(resid.std(ddof=1) / np.sqrt(m)))


def factorial_moments(model: ProcessModel, mode: str = "exact", sample_size: int = 100_000,
                      rng: np.random.Generator | None = None) -> FactorialMoments:
    if mode == "exact":
        if model.family in ("bernoulli", "bernoulli_shift"):
            e = _elementary_symmetric(np.asarray(model.probs), 4)
            return FactorialMoments(tuple(np.array([1, 2, 6, 24]) * e[1:]))
        if model.family == "compound_poisson":
            # factorial cumulants of Σ i N_i are Σ λ_i i^(r) (falling power)
            lam = model.active_rates * model.base.total
            i = np.arange(1, lam.size + 1, dtype=float)
            k1, k2, k3, k4 = (float(np.sum(lam * _falling(i, r))) for r in range(1, 5))
            theta = (
                k1,
                k2 + k1**2,
                k3 + 3 * k2 * k1 + k1**3,
                k4 + 4 * k3 * k1 + 3 * k2**2 + 6 * k2 * k1**2 + k1**4,
            )
            return FactorialMoments(theta)
        raise UnsupportedExact(f"no closed-form moments for {model.family}")
    if mode == "mc":
        if rng is None:
            raise ValueError("Monte Carlo mode needs a generator")
        _, owner = draw_points(model, sample_size, rng)
        return moments_from_counts(np.bincount(owner, minlength=sample_size))
    raise ValueError(f"unknown mode {mode!r}")


class DispersionCase(enum.Enum):
    CASE1 = "case1"
    CASE2 = "case2"
    OUT_OF_SCOPE = "out_of_scope"


@dataclass(frozen=True)
class Classification:
    case: DispersionCase
    min_n: Optional[float] = None
    n_valid: bool = True
    reason: str = ""


def case2_min_n(fm: FactorialMoments) -> float:
    """Strict lower bound on n for which Case 2 yields β > 0."""
    t1, t2, t3, _ = fm.theta
    denom = t1 * (t1 - 2 * (t1 * t1 - t2))
    num = t1 * t2 - t2 - t3
    if denom == 0:
        # Var = E/2: β no longer depends on n and is positive exactly when num < 0
        return 1.0 if num < 0 else math.inf
    return 1.0 + max(0.0, num / denom)


def classify_case(fm: FactorialMoments, n: int) -> Classification:
    """Over-dispersion (case 1), moderate under-dispersion (case 2), or neither.

    Monte Carlo moments within three standard errors of Var = E count as case 1.
    """
    t1, t2, t3, _ = fm.theta
    var, mean = fm.variance, fm.mean
    if mean <= 0:
        return Classification(DispersionCase.OUT_OF_SCOPE, reason="E|Ξ_1| = 0")
    band = 3 * fm.dispersion_se if (not fm.exact and fm.dispersion_se) else 0.0
    if var >= mean or abs(var - mean) <= band:
        return Classification(DispersionCase.CASE1)
    case2 = (mean / 2 < var < mean) or (var == mean / 2 and t3 > t2 * (t1 - 1))
    if case2:
        mn = case2_min_n(fm)
        ok = n > mn
        reason = "" if ok else f"case 2 needs n > {mn:.6g}, got n = {n}"
        return Classification(DispersionCase.CASE2, mn, ok, reason)
    return Classification(
        DispersionCase.OUT_OF_SCOPE,
        reason=f"Var = {var:.6g} is below E/2 = {mean / 2:.6g} (or on it without θ_3 > θ_2(θ_1 - 1))",
    )


@dataclass(frozen=True)
class IntensitySpec:
    """Mean measure λ and, when known exactly, the Palm-weighted measure E|Ξ_{1,x}| λ(dx).

    For Monte Carlo specs ``bin_se`` holds the standard error of each
    histogram cell mass.
    """

    measure: SpatialMeasure
    palm: Optional[SpatialMeasure] = None
    source: str = "exact"
    bin_se: Optional[np.ndarray] = None

    @property
    def total(self) -> float:
        return self.measure.total

    @property
    def kind(self) -> str:
        return "atomic" if not np.any(self.measure.heights) else "piecewise_density"

    def palm_mean(self, x: float) -> float:
        """E|Ξ_{1,x}| at a point carrying positive λ-mass or density."""
        if self.palm is None:
            raise ValueError("reduced Palm means are not available for this intensity")
        hit = np.flatnonzero(self.measure.atom_points == x)
        if hit.size:
            j = np.flatnonzero(self.palm.atom_points == x)
            return float(self.palm.atom_weights[j].sum() / self.measure.atom_weights[hit[0]])
        h = float(self.measure.refine_at(np.array([x]))[0])
        if h == 0:
            raise ValueError(f"λ has no mass at {x}")
        return float(self.palm.refine_at(np.array([x]))[0] / h)


def intensity(model: ProcessModel, mode: str = "exact", sample_size: int = 100_000,
              grid_depth: int = 5, rng: np.random.Generator | None = None) -> IntensitySpec:
    if mode == "exact":
        fam = model.family
        if fam == "bernoulli":
            p = np.asarray(model.probs)
            lam = SpatialMeasure.atomic(model.atoms, p)
            # removing I_i leaves the other indicators untouched
            palm = SpatialMeasure.atomic(model.atoms, p * (p.sum() - p))
            return IntensitySpec(lam, palm)
        if fam == "bernoulli_shift":
            p = np.asarray(model.probs)
            lam = SpatialMeasure()
            palm = SpatialMeasure()
            for pi, law in zip(p, model.shift_laws):
                lam = lam + law.scaled(pi)
                palm = palm + law.scaled(pi * (p.sum() - pi))
            return IntensitySpec(lam, palm)
        if fam == "compound_poisson":
            c = model.active_rates
            i = np.arange(1, c.size + 1)
            lam = model.base.scaled(float(np.sum(i * c)))
            # a point of an i-cluster sees i-1 companions plus an independent copy
            theta1 = lam.total
            companion = float(np.sum(i * (i - 1) * c) / np.sum(i * c))
            return IntensitySpec(lam, lam.scaled(theta1 + companion))
        raise UnsupportedExact(f"no closed-form intensity for {fam}")
    if mode == "mc":
        if rng is None:
            raise ValueError("Monte Carlo mode needs a generator")
        part = dyadic_partition(grid_depth)
        edges = part.boundaries
        pts, owner = draw_points(model, sample_size, rng)
        k = part.k
        cells = np.bincount(owner * k + part.cell_index(pts), minlength=sample_size * k)
        cells = cells.reshape(sample_size, k).astype(float)
        mass = cells.mean(axis=0)
        se = cells.std(axis=0, ddof=1) / np.sqrt(sample_size)
        lam = SpatialMeasure.piecewise(edges, mass / np.diff(edges))
        return IntensitySpec(lam, None, "monte_carlo", se)
    raise ValueError(f"unknown mode {mode!r}")
