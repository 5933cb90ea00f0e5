"""Finite measures on [0, 1]: atoms plus a piecewise-constant density."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = ["SpatialMeasure"]


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpatialMeasure:
    """``sum_j w_j δ(x_j) + h(x) dx`` with ``h`` constant on ``[breaks[i], breaks[i+1])``.

    Either part may be empty.  Weights and heights are nonnegative.
    """

    atom_points: np.ndarray = field(default_factory=lambda: np.empty(0))
    atom_weights: np.ndarray = field(default_factory=lambda: np.empty(0))
    breaks: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))
    heights: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        x, w = _frozen(self.atom_points), _frozen(self.atom_weights)
        b, h = _frozen(self.breaks), _frozen(self.heights)
        if x.shape != w.shape:
            raise ValueError("atom points and weights differ in length")
        if np.any(w < 0) or np.any(h < 0):
            raise ValueError("measure must be nonnegative")
        if np.any(x < 0) or np.any(x > 1):
            raise ValueError("atoms must lie in [0, 1]")
        if b.size != h.size + 1 or b[0] != 0.0 or b[-1] != 1.0 or np.any(np.diff(b) <= 0):
            raise ValueError("breaks must increase strictly from 0 to 1, one more than heights")
        if x.size:
            order = np.argsort(x, kind="stable")
            x, w = x[order], w[order]
            ux, inv = np.unique(x, return_inverse=True)
            if ux.size != x.size:
                w = np.bincount(inv, weights=w)
                x = ux
            x, w = _frozen(x), _frozen(w)
        object.__setattr__(self, "atom_points", x)
        object.__setattr__(self, "atom_weights", w)
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "heights", h)

    # construction -----------------------------------------------------------

    @classmethod
    def atomic(cls, points: Sequence[float], weights: Sequence[float]) -> "SpatialMeasure":
        return cls(atom_points=points, atom_weights=weights)

    @classmethod
    def point_mass(cls, x: float, weight: float = 1.0) -> "SpatialMeasure":
        return cls.atomic([x], [weight])

    @classmethod
    def piecewise(cls, breaks: Sequence[float], heights: Sequence[float]) -> "SpatialMeasure":
        return cls(breaks=breaks, heights=heights)

    @classmethod
    def lebesgue(cls, scale: float = 1.0) -> "SpatialMeasure":
        return cls.piecewise([0.0, 1.0], [scale])

    @classmethod
    def uniform(cls, low: float, high: float) -> "SpatialMeasure":
        """Uniform probability law on [low, high] inside [0, 1]."""
        if not 0.0 <= low < high <= 1.0:
            raise ValueError("need 0 <= low < high <= 1")
        b = np.unique([0.0, low, high, 1.0])
        mid = (b[:-1] + b[1:]) / 2
        h = np.where((mid > low) & (mid < high), 1.0 / (high - low), 0.0)
        return cls.piecewise(b, h)

    @classmethod
    def from_dict(cls, d: dict) -> "SpatialMeasure":
        kind = d.get("kind")
        allowed = {"kind", "points", "weights", "low", "high", "breaks", "heights", "scale"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown spatial keys: {sorted(unknown)}")
        if kind == "atoms":
            return cls.atomic(d["points"], d["weights"])
        if kind == "uniform":
            return cls.uniform(d.get("low", 0.0), d.get("high", 1.0))
        if kind == "lebesgue":
            return cls.lebesgue(d.get("scale", 1.0))
        if kind == "piecewise":
            return cls.piecewise(d["breaks"], d["heights"])
        raise ValueError(f"unknown spatial kind {kind!r}")

    def to_dict(self) -> dict:
        if self.atom_points.size and not np.any(self.heights):
            return {"kind": "atoms", "points": self.atom_points.tolist(),
                    "weights": self.atom_weights.tolist()}
        if not self.atom_points.size:
            return {"kind": "piecewise", "breaks": self.breaks.tolist(),
                    "heights": self.heights.tolist()}
        raise ValueError("mixed atom/density measures have no dict form")

    # algebra ----------------------------------------------------------------

    @property
    def atom_mass(self) -> float:
        return float(self.atom_weights.sum())

    @property
    def density_mass(self) -> float:
        return float(np.dot(self.heights, np.diff(self.breaks)))

    @property
    def total(self) -> float:
        return self.atom_mass + self.density_mass

    def scaled(self, c: float) -> "SpatialMeasure":
        if c < 0:
            raise ValueError("scale must be nonnegative")
        return SpatialMeasure(self.atom_points, self.atom_weights * c, self.breaks, self.heights * c)

    def normalized(self) -> "SpatialMeasure":
        tot = self.total
        if tot <= 0:
            raise ValueError("cannot normalize a zero measure")
        return self.scaled(1.0 / tot)

    def refine(self, breaks: np.ndarray) -> np.ndarray:
        """Heights of the density part on a finer break grid containing ``self.breaks``."""
        mid = (breaks[:-1] + breaks[1:]) / 2
        idx = np.searchsorted(self.breaks, mid, side="right") - 1
        return self.heights[idx]

    def __add__(self, other: "SpatialMeasure") -> "SpatialMeasure":
        b = np.union1d(self.breaks, other.breaks)
        return SpatialMeasure(
            np.concatenate([self.atom_points, other.atom_points]),
            np.concatenate([self.atom_weights, other.atom_weights]),
            b,
            self.refine(b) + other.refine(b),
        )

    # evaluation -------------------------------------------------------------

    def cdf(self, x) -> np.ndarray:
        """Mass of [0, x]."""
        x = np.asarray(x, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.heights * np.diff(self.breaks))])
        i = np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, self.heights.size - 1)
        dens = cum[i] + self.heights[i] * (np.clip(x, 0, 1) - self.breaks[i])
        cum_atoms = np.concatenate([[0.0], np.cumsum(self.atom_weights)])
        j = np.searchsorted(self.atom_points, x, side="right")
        return dens + cum_atoms[j]

    def mass(self, low: float, high: float) -> float:
        """Mass of (low, high]."""
        return float(self.cdf(high) - self.cdf(low))

    def histogram(self, edges: np.ndarray) -> np.ndarray:
        """Mass of each cell of an interval partition given by its boundaries.

        The first cell is closed at 0, matching the partition convention.
        """
        edges = np.asarray(edges, dtype=float)
        c = self.cdf(edges)
        out = np.diff(c)
        # atoms sitting exactly at 0 belong to the first cell
        out[0] += float(self.atom_weights[self.atom_points == 0.0].sum())
        return out

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``size`` i.i.d. points from the normalized measure."""
        tot = self.total
        if size == 0:
            return np.empty(0)
        if tot <= 0:
            raise ValueError("cannot sample from a zero measure")
        masses = np.concatenate([self.atom_weights, self.heights * np.diff(self.breaks)])
        cum = np.cumsum(masses)
        u = rng.random(size) * cum[-1]
        idx = np.minimum(np.searchsorted(cum, u, side="right"), masses.size - 1)
        na = self.atom_points.size
        out = np.empty(size)
        is_atom = idx < na
        out[is_atom] = self.atom_points[idx[is_atom]]
        cell = idx[~is_atom] - na
        lo, hi = self.breaks[cell], self.breaks[cell + 1]
        out[~is_atom] = lo + rng.random(cell.size) * (hi - lo)
        return out

    def d1(self, other: "SpatialMeasure") -> float:
        """Kantorovich distance between the two normalized measures, ∫|F - G| on [0, 1]."""
        p, q = self.normalized(), other.normalized()
        knots = np.unique(np.concatenate([p.breaks, q.breaks, p.atom_points, q.atom_points, [0.0, 1.0]]))
        lo, hi = knots[:-1], knots[1:]
        # F - G is linear on each open gap; use right limits at lo and left limits at hi
        eps_mid = (lo + hi) / 2
        fp_lo = p.cdf(lo)
        fq_lo = q.cdf(lo)
        slope = p.refine_at(eps_mid) - q.refine_at(eps_mid)
        d_lo = fp_lo - fq_lo
        d_hi = d_lo + slope * (hi - lo)
        width = hi - lo
        same = d_lo * d_hi >= 0
        area = np.where(
            same,
            0.5 * np.abs(d_lo + d_hi) * width,
            0.5 * (d_lo**2 + d_hi**2) / np.where(same, 1.0, np.abs(d_lo - d_hi)) * width,
        )
        return float(area.sum())

    def refine_at(self, x) -> np.ndarray:
        """Density height at interior points ``x``."""
        i = np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, self.heights.size - 1)
        return self.heights[i]

    def __repr__(self) -> str:
        return (f"SpatialMeasure(atoms={self.atom_points.size}, cells={self.heights.size}, "
                f"total={self.total:.6g})")
