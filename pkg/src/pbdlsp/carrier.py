"""Carrier-space geometry on [0, 1]: metric, configurations, partitions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "CarrierError",
    "CarrierSpace",
    "Configuration",
    "Partition",
    "INTERVAL",
    "metric_d0",
    "dyadic_partition",
    "assemble",
]


class CarrierError(ValueError):
    """A point or configuration does not belong to the carrier space."""


@dataclass(frozen=True)
class CarrierSpace:
    """Either the unit interval or a finite ordered atom set inside it.

    ``atom_metric="all_distinct_one"`` puts every pair of distinct atoms at
    distance 1, which is the ground space used for marked embeddings.
    """

    kind: str = "interval"
    atoms: tuple[float, ...] = ()
    atom_metric: str = "euclidean"

    def __post_init__(self):
        if self.kind not in ("interval", "atoms"):
            raise ValueError(f"unknown carrier kind {self.kind!r}")
        if self.kind == "atoms":
            a = np.asarray(self.atoms, dtype=float)
            if a.size == 0:
                raise ValueError("atom set must be nonempty")
            if np.any(a < 0) or np.any(a > 1):
                raise ValueError("atoms must lie in [0, 1]")
            if np.any(np.diff(a) <= 0):
                raise ValueError("atoms must be strictly increasing")
            if self.atom_metric not in ("euclidean", "all_distinct_one"):
                raise ValueError(f"unknown atom metric {self.atom_metric!r}")
            object.__setattr__(self, "atoms", tuple(float(x) for x in a))

    @classmethod
    def atom_set(cls, atoms: Iterable[float], metric: str = "euclidean") -> "CarrierSpace":
        return cls("atoms", tuple(atoms), metric)

    @property
    def is_euclidean(self) -> bool:
        return self.kind == "interval" or self.atom_metric == "euclidean"

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind == "interval":
            return bool(np.all((x >= 0) & (x <= 1)))
        return bool(np.all(np.isin(x, np.asarray(self.atoms))))

    def check(self, x) -> None:
        if not self.contains(x):
            raise CarrierError(f"point(s) outside carrier: {x!r}")


INTERVAL = CarrierSpace()


def metric_d0(space: CarrierSpace, x: float, y: float) -> float:
    space.check([x, y])
    if space.kind == "atoms" and space.atom_metric == "all_distinct_one":
        return 0.0 if x == y else 1.0
    return abs(float(x) - float(y))


@dataclass(frozen=True, eq=False)
class Configuration:
    """Finite counting measure stored as sorted distinct points with multiplicities."""

    points: np.ndarray = field(default_factory=lambda: np.empty(0))
    counts: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1)
        cnt = np.asarray(self.counts, dtype=np.int64).reshape(-1)
        if pts.shape != cnt.shape:
            raise ValueError("points and counts must have the same length")
        if np.any(cnt < 1):
            raise ValueError("multiplicities must be >= 1")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("points must be strictly increasing; use from_points")
        pts.setflags(write=False)
        cnt.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "counts", cnt)

    @classmethod
    def from_points(cls, xs: Iterable[float]) -> "Configuration":
        xs = np.asarray(list(xs) if not isinstance(xs, np.ndarray) else xs, dtype=float)
        if xs.size == 0:
            return cls()
        pts, cnt = np.unique(xs, return_counts=True)
        return cls(pts, cnt)

    @classmethod
    def from_counts(cls, locations: Sequence[float], counts: Sequence[int]) -> "Configuration":
        """Build from per-location counts; zero counts are dropped, locations may repeat."""
        loc = np.asarray(locations, dtype=float)
        cnt = np.asarray(counts, dtype=np.int64)
        keep = cnt > 0
        return cls.from_points(np.repeat(loc[keep], cnt[keep]))

    @property
    def size(self) -> int:
        return int(self.counts.sum())

    def __len__(self) -> int:
        return self.size

    def expanded(self) -> np.ndarray:
        """Sorted point array with repeats."""
        return np.repeat(self.points, self.counts)

    def __add__(self, other: "Configuration") -> "Configuration":
        return Configuration.from_points(np.concatenate([self.expanded(), other.expanded()]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return np.array_equal(self.points, other.points) and np.array_equal(self.counts, other.counts)

    def __hash__(self) -> int:
        return hash((self.points.tobytes(), self.counts.tobytes()))

    def __repr__(self) -> str:
        terms = " + ".join(
            (f"{c}δ({p:g})" if c > 1 else f"δ({p:g})") for p, c in zip(self.points, self.counts)
        )
        return f"Configuration({terms or '0'})"


@dataclass(frozen=True, eq=False)
class Partition:
    """Interval partition of [0, 1] with one designated center per cell.

    ``boundaries`` is 0 = s_0 < s_1 < ... < s_k = 1.  The first cell is
    [0, s_1]; every other cell is (s_{i-1}, s_i].
    """

    boundaries: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.boundaries, dtype=float).reshape(-1)
        t = np.asarray(self.centers, dtype=float).reshape(-1)
        if s.size < 2 or s[0] != 0.0 or s[-1] != 1.0:
            raise ValueError("boundaries must start at 0 and end at 1")
        if np.any(np.diff(s) <= 0):
            raise ValueError("boundaries must be strictly increasing")
        if t.size != s.size - 1:
            raise ValueError("need exactly one center per cell")
        if np.any(t < 0) or np.any(t > 1):
            raise ValueError("centers must lie in [0, 1]")
        s.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "boundaries", s)
        object.__setattr__(self, "centers", t)

    @classmethod
    def around_atoms(cls, atoms: Sequence[float]) -> "Partition":
        """Cells split at midpoints between consecutive atoms, each centered on its atom."""
        a = np.asarray(atoms, dtype=float)
        if a.size == 0 or np.any(np.diff(a) <= 0):
            raise ValueError("atoms must be nonempty and strictly increasing")
        mids = (a[1:] + a[:-1]) / 2
        return cls(np.concatenate([[0.0], mids, [1.0]]), a)

    @property
    def k(self) -> int:
        return self.centers.size

    @property
    def mesh(self) -> float:
        s, t = self.boundaries, self.centers
        return float(np.max(np.maximum(np.abs(t - s[:-1]), np.abs(s[1:] - t))))

    def is_eps_partition(self, eps: float) -> bool:
        return self.mesh <= eps

    def cell_index(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(x > 1):
            raise CarrierError("points outside [0, 1]")
        # side="left" sends x == s_i to the cell on its left
        return np.searchsorted(self.boundaries[1:-1], x, side="left")

    def cell_counts(self, config: Configuration) -> np.ndarray:
        idx = self.cell_index(config.points)
        return np.bincount(idx, weights=config.counts, minlength=self.k).astype(np.int64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.boundaries, other.boundaries) and np.array_equal(
            self.centers, other.centers
        )

    def __hash__(self) -> int:
        return hash((self.boundaries.tobytes(), self.centers.tobytes()))

    def __repr__(self) -> str:
        return f"Partition(k={self.k}, mesh={self.mesh:g})"


def dyadic_partition(m: int) -> Partition:
    """2**m equal cells with midpoint centers; mesh is 2**-(m+1)."""
    if m < 0:
        raise ValueError("depth must be nonnegative")
    s = np.arange(2**m + 1) / 2**m
    return Partition(s, (s[:-1] + s[1:]) / 2)


def assemble(partition: Partition, config: Configuration) -> Configuration:
    """Move every point to the center of its cell; cell counts and size are kept."""
    if config.size == 0:
        return Configuration()
    counts = partition.cell_counts(config)
    return Configuration.from_counts(partition.centers, counts)
