"""Experiment harness: distance-vs-n curves, slope fits, PBD and counterexample checks."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.optimize import isotonic_regression

from .carrier import dyadic_partition
from .distances import EmpiricalLaw, d2_empirical, u_m_spread
from .moments import (
    EXACT_FAMILIES,
    DispersionCase,
    classify_case,
    factorial_moments,
    intensity,
)
from .pbd import (
    CaseRangeError,
    UnsupportedDispersion,
    a_formula,
    bd_chain_validate,
    pbd_pmf,
    pbd_process_samples,
    select_params,
)
from .processes import Exponential, ProcessModel, Renewal, RngSeed, Uniform, sample_superpositions

log = logging.getLogger(__name__)

__all__ = [
    "CSV_COLUMNS",
    "ExperimentSpec",
    "CurveRow",
    "CurveResult",
    "fit_slope",
    "isotonic_r2",
    "run_lsp_curve",
    "run_counterexample",
    "run_validate_pbd",
    "verify_rows",
]

CSV_COLUMNS = ("n", "a", "b", "beta", "used_nu", "distance", "ci_low", "ci_high", "seconds")

# substream keys; per-n streams use the n value itself
_MOMENTS_KEY = 1 << 40
_INTENSITY_KEY = (1 << 40) + 1
_BASELINE_KEY = 1 << 41


@dataclass
class ExperimentSpec:
    model: ProcessModel
    n_grid: list
    samples_per_n: int = 500
    seed: RngSeed = field(default_factory=lambda: RngSeed(0))
    partition_depth: int = 5
    distance: str = "d2_empirical"
    output: str | None = None
    n_boot: int = 100
    ci_level: float = 0.95
    mc_samples: int = 100_000
    use_nu: bool = False
    baseline: bool = False
    timing: bool = True
    workers: int = 1

    def __post_init__(self):
        grid = [int(n) for n in self.n_grid]
        if not grid or any(n < 1 for n in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be strictly increasing positive integers")
        if self.samples_per_n < 50:
            raise ValueError("samples_per_n must be >= 50")
        if self.distance != "d2_empirical":
            raise ValueError(f"unknown distance {self.distance!r}")
        self.n_grid = grid


@dataclass
class CurveRow:
    n: int
    a: float
    b: float
    beta: float
    used_nu: bool
    distance: float
    ci_low: float
    ci_high: float
    seconds: float


@dataclass
class CurveResult:
    rows: list
    slope: float | None
    slope_se: float | None
    case: str
    theta: tuple
    moment_source: str
    baseline: list = field(default_factory=list)

    def distances(self) -> np.ndarray:
        return np.array([r.distance for r in self.rows])

    def to_dict(self) -> dict:
        return {
            "columns": list(CSV_COLUMNS),
            "rows": [asdict(r) for r in self.rows],
            "baseline": [asdict(r) for r in self.baseline],
            "slope": self.slope,
            "slope_se": self.slope_se,
            "case": self.case,
            "theta": list(self.theta),
            "moment_source": self.moment_source,
        }


def fit_slope(ns, ds) -> tuple[float, float]:
    """Least-squares slope (and its standard error) of log d against log n."""
    ns = np.asarray(ns, dtype=float)
    ds = np.asarray(ds, dtype=float)
    ok = ds > 0
    if not ok.all():
        log.warning("dropping %d nonpositive distance(s) from the slope fit", int((~ok).sum()))
    if ok.sum() < 3:
        raise ValueError("need at least 3 positive distances to fit a slope")
    res = stats.linregress(np.log(ns[ok]), np.log(ds[ok]))
    return float(res.slope), float(res.stderr)


def isotonic_r2(ns, ds) -> float:
    """Share of variance explained by the best nonincreasing fit of d against n.

    Repeated n values (several seeds) are pooled.
    """
    ns = np.asarray(ns, dtype=float)
    ds = np.asarray(ds, dtype=float)
    order = np.argsort(ns, kind="stable")
    ns, ds = ns[order], ds[order]
    uniq, inv, cnt = np.unique(ns, return_inverse=True, return_counts=True)
    means = np.bincount(inv, weights=ds) / cnt
    fit = isotonic_regression(means, weights=cnt, increasing=False).x
    resid = ds - fit[inv]
    ss_tot = float(np.sum((ds - ds.mean()) ** 2))
    if ss_tot == 0:
        return 1.0
    return 1.0 - float(np.sum(resid**2)) / ss_tot


def _moments_and_intensity(spec: ExperimentSpec):
    model = spec.model
    if model.family in EXACT_FAMILIES:
        return factorial_moments(model), intensity(model)
    fm = factorial_moments(model, "mc", spec.mc_samples, spec.seed.generator(_MOMENTS_KEY))
    lam = intensity(model, "mc", spec.mc_samples, spec.partition_depth, spec.seed.generator(_INTENSITY_KEY))
    return fm, lam


def check_grid(fm, n_grid) -> DispersionCase:
    """Classify once; raise if the model is out of scope or some n is too small for case 2."""
    cls = classify_case(fm, n_grid[0])
    if cls.case is DispersionCase.OUT_OF_SCOPE:
        raise UnsupportedDispersion(cls.reason)
    if cls.case is DispersionCase.CASE2:
        bad = [n for n in n_grid if not n > cls.min_n]
        if bad:
            raise CaseRangeError(f"case 2 needs n > {cls.min_n:.6g}; offending n: {bad}", cls.min_n)
    return cls.case


def _curve_point(spec: ExperimentSpec, fm, lam, n: int):
    t0 = time.perf_counter()
    rng = spec.seed.generator(n)
    m = spec.samples_per_n
    params = select_params(fm, lam, n, use_nu=spec.use_nu)
    pmf = pbd_pmf(params.a, params.b, params.beta)
    sup = EmpiricalLaw(sample_superpositions(spec.model, n, m, rng))
    pbd = EmpiricalLaw(pbd_process_samples(params, m, rng, pmf))
    est = d2_empirical(sup, pbd, rng, spec.n_boot, spec.ci_level)
    row_args = (n, params.a, params.b, params.beta, params.used_nu_fallback)
    secs = time.perf_counter() - t0 if spec.timing else 0.0
    row = CurveRow(*row_args, est.estimate, est.ci_low, est.ci_high, secs)
    log.info("n=%d a=%.6g b=%.6g beta=%.6g d2=%.5f", n, params.a, params.b, params.beta, est.estimate)
    base = None
    if spec.baseline:
        t0 = time.perf_counter()
        brng = spec.seed.generator(_BASELINE_KEY, n)
        other = EmpiricalLaw(sample_superpositions(spec.model, n, m, brng))
        best = d2_empirical(sup, other, brng, spec.n_boot, spec.ci_level)
        secs = time.perf_counter() - t0 if spec.timing else 0.0
        base = CurveRow(*row_args, best.estimate, best.ci_low, best.ci_high, secs)
    return row, base


def run_lsp_curve(spec: ExperimentSpec) -> CurveResult:
    """For each n: fit PBD parameters, draw matched samples from both laws, estimate d2.

    Every n has its own random stream, so running the grid on ``workers``
    processes gives the same rows as a serial run.
    """
    fm, lam = _moments_and_intensity(spec)
    case = check_grid(fm, spec.n_grid)
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            points = list(pool.map(_curve_point, *zip(*[(spec, fm, lam, n) for n in spec.n_grid])))
    else:
        points = [_curve_point(spec, fm, lam, n) for n in spec.n_grid]
    rows = [p[0] for p in points]
    base_rows = [p[1] for p in points if p[1] is not None]
    d = np.array([r.distance for r in rows])
    slope = slope_se = None
    if len(rows) >= 3 and np.all(d > 0):
        slope, slope_se = fit_slope([r.n for r in rows], d)
    return CurveResult(rows, slope, slope_se, case.value, fm.theta, fm.source, base_rows)


def verify_rows(result: CurveResult) -> None:
    """Re-check the PBD parameter invariants of every row before it is written."""
    for r in result.rows + result.baseline:
        if not (r.a > 0 and 0 <= r.b < 1 and r.beta >= 0):
            raise ValueError(f"row n={r.n}: parameters out of domain")
        if result.case == DispersionCase.CASE1.value and r.beta != 0:
            raise ValueError(f"row n={r.n}: case 1 needs beta = 0")
        if result.case == DispersionCase.CASE2.value and (r.b != 0 or not r.beta > 0):
            raise ValueError(f"row n={r.n}: case 2 needs b = 0 < beta")
        expected = a_formula(result.theta, r.n, r.b, r.beta)
        if abs(r.a - expected) > 1e-12 * max(1.0, abs(expected)):
            raise ValueError(f"row n={r.n}: a = {r.a} but the moments give {expected}")


def run_counterexample(sample_size: int = 100_000, seed: RngSeed = RngSeed(0),
                       depths=(1, 2, 3, 4), n_boot: int = 50) -> dict:
    """Plug-in u_m for a renewal law violating the support condition and for one satisfying it.

    Depth 1 is reported without a claim; the counterexample only needs one
    depth in {2, 3, 4} with u_m = 0.  ``spread`` holds bootstrap intervals.
    """
    bad = Renewal(Uniform(0.3, 0.5))
    good = Renewal(Exponential(1.0))
    report = {"sample_size": sample_size, "uniform_0.3_0.5": {}, "exponential_1": {},
              "spread": {"uniform_0.3_0.5": {}, "exponential_1": {}}}
    for m in depths:
        est, lo, hi = u_m_spread(bad, dyadic_partition(m), sample_size, seed.generator(100 + m), n_boot)
        report["uniform_0.3_0.5"][m] = est
        report["spread"]["uniform_0.3_0.5"][m] = [lo, hi]
    est, lo, hi = u_m_spread(good, dyadic_partition(2), sample_size, seed.generator(200), n_boot)
    report["exponential_1"][2] = est
    report["spread"]["exponential_1"][2] = [lo, hi]
    claimed = [m for m in depths if m >= 2]
    report["zero_at"] = [m for m in claimed if report["uniform_0.3_0.5"][m] == 0.0]
    report["counterexample_holds"] = bool(report["zero_at"])
    report["condition_case_positive"] = report["exponential_1"][2] >= 0.01
    report["passed"] = report["counterexample_holds"] and report["condition_case_positive"]
    return report


def run_validate_pbd(a: float, b: float, beta: float, seed: RngSeed = RngSeed(0),
                     tv_threshold: float = 0.02, residual_threshold: float = 1e-10) -> dict:
    """Chain-occupancy and pmf cross-checks; ``passed`` is false when any threshold fails."""
    pmf = pbd_pmf(a, b, beta)
    chain = bd_chain_validate(a, b, beta, seed.generator(0))
    k = np.arange(pmf.probs.size)
    report = {
        "a": a, "b": b, "beta": beta,
        "support_max": pmf.support_max,
        "normalizer": pmf.normalizer,
        "truncation_tail": pmf.truncation_tail,
        "detailed_balance_residual": pmf.detailed_balance_residual(),
        "chain_tv": chain.tv,
        "chain_events": chain.events,
    }
    checks = {
        "detailed_balance": report["detailed_balance_residual"] <= residual_threshold,
        "truncation": pmf.truncation_tail <= 1e-12,
        "chain_tv": chain.tv < tv_threshold,
    }
    if b == 0 and beta == 0:
        err = float(np.max(np.abs(pmf.probs - stats.poisson.pmf(k, a))))
        report["poisson_oracle_error"] = err
        checks["poisson_oracle"] = err <= 1e-12
    elif beta == 0:
        err = float(np.max(np.abs(pmf.probs - stats.nbinom.pmf(k, a / b, 1 - b))))
        report["negbin_oracle_error"] = err
        checks["negbin_oracle"] = err <= 1e-10
    report["checks"] = checks
    report["passed"] = all(checks.values())
    return report
