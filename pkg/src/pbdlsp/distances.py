"""Distances between configurations and between point-process laws.

``d1`` is the normalised optimal-matching distance (1 when sizes differ),
``d2_empirical`` the optimal matching between two equal-size samples with
ground cost ``d1``.  Count-vector laws on a partition give the partitional
total variation ``TV_G``, its infimum surrogate over partition families,
the positivity constant ``u_m`` and the self-consistent scale ``ε_n``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from .assignment import solve_assignment
from .carrier import INTERVAL, CarrierSpace, Configuration, Partition, dyadic_partition
from .moments import UnsupportedExact
from .processes import ProcessModel, draw_points

__all__ = [
    "SizeMismatch",
    "EmpiricalLaw",
    "CountVectorLaw",
    "D2Estimate",
    "d1",
    "d1_bruteforce",
    "pairwise_d1",
    "d2_empirical",
    "count_law",
    "tv",
    "shift_tv",
    "tv_partition",
    "u_m",
    "u_m_spread",
    "theta_eps",
    "dyadic_family",
    "solve_crossing",
    "epsilon_n",
    "write_cost_matrix_csv",
    "write_empirical_law_csv",
    "single_count_pmf",
    "superposition_count_pmf",
    "count_tv_lower_bound",
]

log = logging.getLogger(__name__)


class SizeMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# configurations


def _cost(space: CarrierSpace, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if space.kind == "atoms" and space.atom_metric == "all_distinct_one":
        return (x[:, None] != y[None, :]).astype(float)
    return np.abs(x[:, None] - y[None, :])


def d1(x: Configuration, y: Configuration, space: CarrierSpace = INTERVAL,
       method: str = "assignment") -> float:
    """Average matched d0 over an optimal bijection; 1 for unequal sizes, 0 for two empties.

    ``method="assignment"`` solves the |x| x |y| assignment problem exactly;
    ``method="sorted"`` uses the monotone matching, which is optimal when the
    ground metric is |s - t| on the line.
    """
    if x.size != y.size:
        return 1.0
    if x.size == 0:
        return 0.0
    xs, ys = x.expanded(), y.expanded()
    space.check(xs)
    space.check(ys)
    if method == "sorted":
        if not space.is_euclidean:
            raise ValueError("sorted matching needs the line metric")
        return math.fsum(np.abs(xs - ys)) / xs.size
    if method not in ("assignment", "scipy"):
        raise ValueError(f"unknown method {method!r}")
    c = _cost(space, xs, ys)
    cols = solve_assignment(c, "hungarian" if method == "assignment" else "scipy")
    return math.fsum(c[np.arange(xs.size), cols]) / xs.size


def d1_bruteforce(x: Configuration, y: Configuration, space: CarrierSpace = INTERVAL) -> float:
    """Minimum over all permutations; only for small configurations."""
    import itertools

    if x.size != y.size:
        return 1.0
    if x.size == 0:
        return 0.0
    if x.size > 8:
        raise ValueError("brute force limited to 8 points")
    c = _cost(space, x.expanded(), y.expanded())
    k = x.size
    rows = np.arange(k)
    return min(math.fsum(c[rows, list(p)]) for p in itertools.permutations(range(k))) / k


@dataclass
class EmpiricalLaw:
    """I.i.d. configurations standing in for a point-process law."""

    samples: list
    space: CarrierSpace = INTERVAL
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.samples) < 1:
            raise ValueError("an empirical law needs at least one sample")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([c.size for c in self.samples])


def _block_cost(space, A, B, k, chunk_elems=20_000_000):
    out = np.empty((A.shape[0], B.shape[0]))
    if space.kind == "atoms" and space.atom_metric == "all_distinct_one":
        atoms = np.asarray(space.atoms)
        ca = np.stack([np.searchsorted(atoms, r) for r in A])
        cb = np.stack([np.searchsorted(atoms, r) for r in B])
        na = atoms.size
        va = np.stack([np.bincount(r, minlength=na) for r in ca])
        vb = np.stack([np.bincount(r, minlength=na) for r in cb])
        return 1.0 - np.minimum(va[:, None, :], vb[None, :, :]).sum(-1) / k
    step = max(1, chunk_elems // max(1, B.shape[0] * k))
    for s in range(0, A.shape[0], step):
        out[s: s + step] = np.abs(A[s: s + step, None, :] - B[None, :, :]).mean(-1)
    return out


def pairwise_d1(p: Sequence[Configuration], q: Sequence[Configuration],
                space: CarrierSpace = INTERVAL) -> np.ndarray:
    """Matrix of d1 between every sample of ``p`` and every sample of ``q``.

    Equal-size blocks use monotone matching on the line (exact for |s - t|)
    or the closed form 1 - overlap/k for the all-distinct atom metric.
    """
    sp = np.array([c.size for c in p])
    sq = np.array([c.size for c in q])
    out = np.ones((sp.size, sq.size))
    for k in np.intersect1d(sp, sq):
        ip, iq = np.flatnonzero(sp == k), np.flatnonzero(sq == k)
        if k == 0:
            out[np.ix_(ip, iq)] = 0.0
            continue
        A = np.stack([p[i].expanded() for i in ip])
        B = np.stack([q[j].expanded() for j in iq])
        out[np.ix_(ip, iq)] = _block_cost(space, A, B, int(k))
    return out


@dataclass(frozen=True)
class D2Estimate:
    estimate: float
    ci_low: float
    ci_high: float
    level: float
    n_boot: int
    matching: np.ndarray = field(repr=False, default=None)


def _matched_mean(cost, backend):
    cols = solve_assignment(cost, backend)
    return math.fsum(cost[np.arange(cost.shape[0]), cols]) / cost.shape[0], cols


def d2_empirical(p: EmpiricalLaw, q: EmpiricalLaw, rng: np.random.Generator | None = None,
                 n_boot: int = 200, level: float = 0.95, backend: str = "scipy",
                 cost: np.ndarray | None = None) -> D2Estimate:
    """Optimal one-to-one matching of two equal-size samples under d1.

    The point estimate is biased upward for a fixed sample size.  The
    interval comes from re-pairings: both samples are pooled, split again
    at random into two halves of the original size and re-matched, and the
    central ``level`` quantiles of the re-matched costs are reported.  It
    is the spread of the estimator when the two laws coincide, so an
    estimate above ``ci_high`` flags a detectable difference.
    """
    m = len(p)
    if len(q) != m:
        raise SizeMismatch(f"sample counts differ: {m} vs {len(q)}")
    if cost is None:
        cost = pairwise_d1(p.samples, q.samples, p.space)
    est, cols = _matched_mean(cost, backend)
    if n_boot <= 0 or rng is None:
        return D2Estimate(est, est, est, level, 0, cols)
    pp = pairwise_d1(p.samples, p.samples, p.space)
    qq = pairwise_d1(q.samples, q.samples, p.space)
    full = np.block([[pp, cost], [cost.T, qq]])
    reps = np.empty(n_boot)
    for b in range(n_boot):
        perm = rng.permutation(2 * m)
        reps[b], _ = _matched_mean(full[np.ix_(perm[:m], perm[m:])], backend)
    alpha = (1 - level) / 2
    lo, hi = np.quantile(reps, [alpha, 1 - alpha])
    return D2Estimate(est, float(lo), float(hi), level, n_boot, cols)


# ---------------------------------------------------------------------------
# count-vector laws


@dataclass
class CountVectorLaw:
    """Law of a vector of cell counts.

    Exact product laws keep their one-dimensional ``marginals``; the joint
    ``support`` is only materialised on request.  Plug-in laws store the
    observed frequency of each count vector.  ``cells`` lists the partition
    cells the coordinates refer to.
    """

    dim: int
    kind: str = "exact"
    support: dict | None = None
    marginals: tuple | None = None
    sample_size: int | None = None
    cells: tuple | None = None

    def joint(self, limit: int = 2_000_000) -> dict:
        if self.support is not None:
            return self.support
        sizes = [m.size for m in self.marginals]
        if math.prod(sizes) > limit:
            raise MemoryError("joint support too large to enumerate")
        grids = np.meshgrid(*[np.arange(s) for s in sizes], indexing="ij")
        probs = np.ones(sizes)
        for j, m in enumerate(self.marginals):
            shape = [1] * len(sizes)
            shape[j] = m.size
            probs = probs * m.reshape(shape)
        keys = np.stack([g.ravel() for g in grids], axis=1)
        self.support = {tuple(int(x) for x in k): float(v) for k, v in zip(keys, probs.ravel()) if v > 0}
        return self.support

    def shifted(self, j: int) -> "CountVectorLaw":
        e = [0] * self.dim
        e[j] = 1
        sup = {tuple(a + b for a, b in zip(k, e)): v for k, v in self.joint().items()}
        return CountVectorLaw(self.dim, self.kind, sup, None, self.sample_size)


def tv(p: CountVectorLaw, q: CountVectorLaw) -> float:
    """½ Σ |p - q| over the union of supports."""
    if p.dim != q.dim:
        raise ValueError("dimension mismatch")
    jp, jq = p.joint(), q.joint()
    keys = set(jp) | set(jq)
    return 0.5 * math.fsum(abs(jp.get(k, 0.0) - jq.get(k, 0.0)) for k in keys)


def _shift_tv_1d(f: np.ndarray) -> float:
    g = np.concatenate([f, [0.0]])
    h = np.concatenate([[0.0], f])
    return 0.5 * math.fsum(np.abs(g - h))


def _plugin_shift_tvs(rows: np.ndarray) -> np.ndarray:
    uniq, freq = np.unique(rows, axis=0, return_counts=True)
    return _freq_shift_tvs(uniq, freq)


def _freq_shift_tvs(uniq: np.ndarray, freq: np.ndarray) -> np.ndarray:
    """Per-coordinate unit-shift TV of the law putting mass freq/Σfreq on the rows of ``uniq``."""
    m = freq.sum()
    k = uniq.shape[1]
    radix = int(uniq.max()) + 2
    out = np.empty(k)
    if k * math.log2(radix) < 62:
        w = radix ** np.arange(k, dtype=np.int64)
        keys = uniq.astype(np.int64) @ w
        order = np.argsort(keys)
        keys, f = keys[order], freq[order]
        for j in range(k):
            # mass at v in the original minus mass at v in the shifted law (= original at v - e_j)
            skeys = keys + w[j]
            allk = np.union1d(keys, skeys)
            a = np.zeros(allk.size)
            b = np.zeros(allk.size)
            a[np.searchsorted(allk, keys)] = f
            b[np.searchsorted(allk, skeys)] = f
            out[j] = 0.5 * np.abs(a - b).sum() / m
        return out
    table = {tuple(r): c for r, c in zip(uniq.tolist(), freq.tolist())}
    for j in range(k):
        e = np.zeros(k, dtype=np.int64)
        e[j] = 1
        shifted = {tuple(r): c for r, c in zip((uniq + e).tolist(), freq.tolist())}
        keys = set(table) | set(shifted)
        out[j] = 0.5 * sum(abs(table.get(x, 0) - shifted.get(x, 0)) for x in keys) / m
    return out


def shift_tv(law: CountVectorLaw, j: int) -> float:
    """d_tv(L(X + e_j), L(X))."""
    if law.marginals is not None:
        return _shift_tv_1d(law.marginals[j])
    return tv(law.shifted(j), law)


def _bernoulli_cell_marginals(model, n: int, partition: Partition) -> tuple:
    cells = partition.cell_index(np.asarray(model.atoms))
    margs = []
    for c in range(partition.k):
        f = np.array([1.0])
        for p in np.asarray(model.probs)[cells == c]:
            f = np.convolve(f, stats.binom.pmf(np.arange(n + 1), n, p))
        margs.append(f)
    return tuple(margs)


def _sample_cell_rows(model, n: int, partition: Partition, m: int, rng) -> np.ndarray:
    pts, owner = draw_points(model, n * m, rng)
    k = partition.k
    flat = (owner // n) * k + partition.cell_index(pts)
    return np.bincount(flat, minlength=m * k).reshape(m, k)


def count_law(model: ProcessModel, n: int, partition: Partition, mode: str = "exact",
              sample_size: int = 100_000, rng: np.random.Generator | None = None) -> CountVectorLaw:
    """Law of the cell counts of Ξ_1 + ... + Ξ_n on ``partition``.

    Cells are taken on the reduced carrier space: a cell that the support
    of the mean measure misses (no atom for an exact Bernoulli law, never
    hit for a plug-in law) is left out, since its count is identically zero
    and its shift distance would be 1 for trivial reasons.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if mode == "exact":
        if model.family != "bernoulli":
            raise UnsupportedExact(f"exact count laws only for Bernoulli models, not {model.family}")
        margs = _bernoulli_cell_marginals(model, n, partition)
        keep = tuple(j for j, f in enumerate(margs) if f.size > 1)
        return CountVectorLaw(len(keep), "exact", None, tuple(margs[j] for j in keep), None, keep)
    if mode == "plugin":
        if rng is None:
            raise ValueError("plug-in mode needs a generator")
        rows = _sample_cell_rows(model, n, partition, sample_size, rng)
        keep = np.flatnonzero(rows.any(axis=0))
        if keep.size == 0:
            raise ValueError("no sampled points in any cell")
        rows = np.ascontiguousarray(rows[:, keep])
        uniq, freq = np.unique(rows, axis=0, return_counts=True)
        if uniq.shape[0] > sample_size / 50:
            log.warning("plug-in count law has %d support points for %d samples; TV is biased upward",
                        uniq.shape[0], sample_size)
        sup = {tuple(int(x) for x in r): c / sample_size for r, c in zip(uniq, freq)}
        law = CountVectorLaw(keep.size, "plugin_mc", sup, None, sample_size, tuple(int(j) for j in keep))
        law._rows = rows
        return law
    raise ValueError(f"unknown mode {mode!r}")


def _shift_tvs(law: CountVectorLaw) -> np.ndarray:
    if law.marginals is not None:
        return np.array([_shift_tv_1d(f) for f in law.marginals])
    rows = getattr(law, "_rows", None)
    if rows is not None:
        return _plugin_shift_tvs(rows)
    return np.array([shift_tv(law, j) for j in range(law.dim)])


def tv_partition(model: ProcessModel, n: int, partition: Partition, mode: str = "exact",
                 sample_size: int = 100_000, rng: np.random.Generator | None = None) -> float:
    """max over cells of d_tv(L(M∘V + δ_t), L(M∘V)), V the n-fold superposition."""
    law = count_law(model, n, partition, mode, sample_size, rng)
    return float(_shift_tvs(law).max())


def u_m(model: ProcessModel, partition: Partition, mode: str = "exact",
        sample_size: int = 100_000, rng: np.random.Generator | None = None) -> float:
    """min over cells of 1 - d_tv(L(X), L(X + e_j)) for a single copy."""
    law = count_law(model, 1, partition, mode, sample_size, rng)
    return float(1.0 - _shift_tvs(law).max())


def u_m_spread(model: ProcessModel, partition: Partition, sample_size: int, rng: np.random.Generator,
               n_boot: int = 100, level: float = 0.95) -> tuple[float, float, float]:
    """Plug-in u_m with a bootstrap interval from resampling the simulated count vectors."""
    rows = _sample_cell_rows(model, 1, partition, sample_size, rng)
    rows = rows[:, rows.any(axis=0)]
    uniq, freq = np.unique(rows, axis=0, return_counts=True)
    est = 1.0 - float(_freq_shift_tvs(uniq, freq).max())
    # resampling rows with replacement = multinomial draw of the observed frequencies
    reps = np.array([1.0 - _freq_shift_tvs(uniq, rng.multinomial(sample_size, freq / sample_size)).max()
                     for _ in range(n_boot)])
    alpha = (1 - level) / 2
    lo, hi = np.quantile(reps, [alpha, 1 - alpha])
    return est, float(lo), float(hi)


def dyadic_family(eps: float, max_depth: int = 10) -> list:
    """Dyadic partitions of depth <= max_depth whose mesh 2**-(m+1) is at most eps."""
    return [dyadic_partition(m) for m in range(max_depth + 1) if 2.0 ** -(m + 1) <= eps]


def theta_eps(model: ProcessModel, n: int, eps: float, family: Iterable[Partition],
              mode: str = "exact", sample_size: int = 100_000,
              rng: np.random.Generator | None = None) -> float:
    """min of TV_G over the supplied ε-partitions; an upper bound for the infimum over all of them."""
    family = list(family)
    if not family:
        raise ValueError("empty partition family")
    for g in family:
        if g.mesh > eps:
            raise ValueError(f"partition mesh {g.mesh} exceeds eps = {eps}")
    return min(tv_partition(model, n, g, mode, sample_size, rng) for g in family)


def solve_crossing(theta: Callable[[float], float], tol: float = 1e-3, upper: float = 0.5) -> float:
    """Smallest v on the bisection grid of [0, upper] with 2v >= theta(v).

    ``theta`` must be nonincreasing in v; ``inf`` marks an empty family.
    Because the search runs on a fixed dyadic grid, a pointwise smaller
    ``theta`` never gives a larger answer.
    """
    if 2 * 0.0 >= theta(0.0):
        return 0.0
    lo, hi = 0.0, upper
    if not 2 * hi >= theta(hi):
        raise ValueError("no crossing on [0, upper]")
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if 2 * mid >= theta(mid):
            hi = mid
        else:
            lo = mid
    return hi


def epsilon_n(model: ProcessModel, n: int,
              family_generator: Callable[[float], list] = dyadic_family,
              mode: str = "exact", tol: float = 1e-3, sample_size: int = 100_000,
              rng: np.random.Generator | None = None) -> float:
    """Surrogate for inf{v : 2v >= ϑ_v(Ξ_1 + ... + Ξ_n)} using the supplied partition families."""
    cache: dict = {}

    def tvg(g: Partition) -> float:
        if g not in cache:
            cache[g] = tv_partition(model, n, g, mode, sample_size, rng)
        return cache[g]

    def theta(v: float) -> float:
        fam = [g for g in family_generator(v) if g.mesh <= v]
        return min((tvg(g) for g in fam), default=math.inf)

    return solve_crossing(theta, tol)


# ---------------------------------------------------------------------------
# debugging exports


def write_cost_matrix_csv(cost: np.ndarray, path) -> None:
    """Long format with header ``row,col,cost``."""
    r, c = np.indices(cost.shape)
    data = np.column_stack([r.ravel(), c.ravel(), cost.ravel()])
    np.savetxt(Path(path), data, fmt=["%d", "%d", "%.17g"], delimiter=",", header="row,col,cost", comments="")


def write_empirical_law_csv(law: EmpiricalLaw, path) -> None:
    """One line per point with header ``sample,x``; empty samples are omitted."""
    rows = [(i, x) for i, c in enumerate(law.samples) for x in c.expanded()]
    data = np.array(rows, dtype=float).reshape(-1, 2)
    np.savetxt(Path(path), data, fmt=["%d", "%.17g"], delimiter=",", header="sample,x", comments="")


# ---------------------------------------------------------------------------
# exact total-count laws
#
# d1 = 1 whenever sizes differ, so the total-variation distance between the
# laws of |V_n| and of the PBD count is a lower bound for d2.  Unlike the
# matching estimate it carries no sampling noise.


def _panjer(rates: np.ndarray, tol: float) -> np.ndarray:
    f = [math.exp(-rates.sum())]
    i = np.arange(1, rates.size + 1)
    while math.fsum(f) < 1 - tol:
        k = len(f)
        j = i[i <= k]
        f.append(float(np.sum(j * rates[j - 1] * np.array(f)[k - j])) / k)
        if k > 100_000:
            raise RuntimeError("compound Poisson pmf did not converge")
    return np.array(f)


def _markov_count_pmf(model, tol: float) -> np.ndarray:
    from scipy.linalg import expm

    q = model.rate_matrix
    s = q.shape[0]
    inside = np.zeros(s, bool)
    inside[list(model.target_set)] = True
    jumps = np.where(~inside[:, None] & inside[None, :], q, 0.0)
    kmax = 16
    while True:
        # block (0, k) of exp of the bidiagonal generator holds P(k entrances, end state)
        big = np.kron(np.eye(kmax + 1), q - jumps) + np.kron(np.eye(kmax + 1, k=1), jumps)
        top = expm(big)[:s]
        f = np.array([model.stationary @ top[:, k * s:(k + 1) * s].sum(axis=1) for k in range(kmax + 1)])
        if f.sum() >= 1 - tol or kmax > 4096:
            return np.clip(f, 0, None)
        kmax *= 2


def single_count_pmf(model: ProcessModel, tol: float = 1e-14) -> np.ndarray:
    """Exact pmf of |Ξ_1| (up to a tail of mass below ``tol``)."""
    fam = model.family
    if fam in ("bernoulli", "bernoulli_shift"):
        f = np.array([1.0])
        for p in model.probs:
            f = np.convolve(f, [1 - p, p])
        return f
    if fam == "compound_poisson":
        return _panjer(model.active_rates * model.base.total, tol)
    if fam == "renewal" and type(model.interarrival).__name__ == "Exponential":
        rate = model.interarrival.rate
        k = np.arange(int(rate + 20 * math.sqrt(rate) + 30))
        return stats.poisson.pmf(k, rate)
    if fam == "markov_entrance":
        return _markov_count_pmf(model, tol)
    raise UnsupportedExact(f"no exact count law for {fam}")


def superposition_count_pmf(model: ProcessModel, n: int, tol: float = 1e-14) -> np.ndarray:
    """Exact pmf of |Ξ_1 + ... + Ξ_n| by repeated squaring of the single-copy pmf."""
    base = single_count_pmf(model, tol)
    out = np.array([1.0])
    while n:
        if n & 1:
            out = np.convolve(out, base)
        n >>= 1
        if n:
            base = np.convolve(base, base)
    return out


def count_tv_lower_bound(model: ProcessModel, n: int, pbd_probs: np.ndarray) -> float:
    """d_tv(L|V_n|, π_{a,b;β}), a noise-free lower bound for d2(L(V_n), PBD)."""
    f = superposition_count_pmf(model, n)
    width = max(f.size, pbd_probs.size)
    f = np.pad(f, (0, width - f.size))
    g = np.pad(np.asarray(pbd_probs), (0, width - len(pbd_probs)))
    return 0.5 * math.fsum(np.abs(f - g))
