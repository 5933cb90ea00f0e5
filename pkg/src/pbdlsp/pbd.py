"""Polynomial birth-death distributions and point processes.

π_{a,b;β}(k) is proportional to ∏_{j<k} (a + b j) / ((j + 1)(1 + β j)),
the equilibrium of the birth-death chain on counts with birth rates
a + b k and death rates k (1 + β (k - 1)).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .carrier import Configuration
from .moments import Classification, DispersionCase, FactorialMoments, IntensitySpec, classify_case
from .spatial import SpatialMeasure

__all__ = [
    "UnsupportedDispersion",
    "CaseRangeError",
    "DivergentSeries",
    "PbdParams",
    "PbdPmf",
    "ChainValidation",
    "select_params",
    "pbd_pmf",
    "pbd_sample_count",
    "pbd_process_sample",
    "pbd_process_samples",
    "bd_chain_validate",
    "write_pmf",
]


class UnsupportedDispersion(ValueError):
    """Var|Ξ_1| is too small for either parameter case."""


class CaseRangeError(ValueError):
    """Case 2 requested with n not beyond its minimum."""

    def __init__(self, msg, min_n):
        super().__init__(msg)
        self.min_n = min_n


class DivergentSeries(ValueError):
    """b >= 1: the unnormalized weights are not summable."""


def _check_abb(a, b, beta):
    if not a > 0:
        raise ValueError("a must be > 0")
    if b >= 1:
        raise DivergentSeries("b must be < 1")
    if b < 0:
        raise ValueError("b must be >= 0")
    if beta < 0:
        raise ValueError("beta must be >= 0")


@dataclass(frozen=True)
class PbdParams:
    a: float
    b: float
    beta: float
    n: int
    case: DispersionCase
    spatial: SpatialMeasure
    used_nu_fallback: bool
    theta: tuple

    def __post_init__(self):
        _check_abb(self.a, self.b, self.beta)
        if self.case is DispersionCase.CASE1 and self.beta != 0:
            raise ValueError("case 1 has beta = 0")
        if self.case is DispersionCase.CASE2 and (self.b != 0 or not self.beta > 0):
            raise ValueError("case 2 has b = 0 and beta > 0")
        if abs(self.spatial.total - 1) > 1e-12:
            raise ValueError("spatial law must be a probability measure")
        expected = a_formula(self.theta, self.n, self.b, self.beta)
        if abs(self.a - expected) > 1e-12 * max(1.0, abs(expected)):
            raise ValueError("a is inconsistent with the moments")

    def as_row(self) -> dict:
        return {"n": self.n, "a": self.a, "b": self.b, "beta": self.beta,
                "case": self.case.value, "used_nu": self.used_nu_fallback}


def a_formula(theta, n, b, beta) -> float:
    t1, t2 = theta[0], theta[1]
    return n * ((1 - b) * t1 + beta * t2 + beta * (n - 1) * t1 * t1)


def select_params(fm: FactorialMoments, lam: IntensitySpec, n: int, use_nu: bool = False) -> PbdParams:
    """Pick (a, b, β) from the factorial moments and the spatial law μ (or ν)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cls: Classification = classify_case(fm, n)
    t1, t2, t3, _ = fm.theta
    if cls.case is DispersionCase.OUT_OF_SCOPE:
        raise UnsupportedDispersion(cls.reason)
    if cls.case is DispersionCase.CASE1:
        # inside the Monte Carlo tie band Var may sit just below E; clamp b at 0
        b = max(0.0, (t2 - t1 * t1) / (t2 - t1 * t1 + t1))
        beta = 0.0
    else:
        if not cls.n_valid:
            raise CaseRangeError(cls.reason, cls.min_n)
        b = 0.0
        beta = (t1 * t1 - t2) / ((n - 1) * t1 * (t1 - 2 * (t1 * t1 - t2)) + (t3 + t2 - t1 * t2))
    a = a_formula(fm.theta, n, b, beta)
    if lam.palm is not None and not use_nu:
        weighted = lam.measure.scaled(1 + beta * (n - 1) * t1) + lam.palm.scaled(beta)
        spatial, nu = weighted.normalized(), False
    else:
        spatial, nu = lam.measure.normalized(), True
    return PbdParams(a, b, beta, n, cls.case, spatial, nu, fm.theta)


@dataclass(frozen=True)
class PbdPmf:
    """π(0..K); ``truncation_tail`` bounds the omitted mass relative to the retained mass."""

    probs: np.ndarray
    truncation_tail: float
    a: float
    b: float
    beta: float
    log_probs: np.ndarray | None = None

    @property
    def normalizer(self) -> float:
        return float(self.probs[0])

    @property
    def support_max(self) -> int:
        return self.probs.size - 1

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def mean(self) -> float:
        return float(np.dot(np.arange(self.probs.size), self.probs))

    def detailed_balance_residual(self) -> float:
        """max_k |π(k)(a+bk) - π(k+1)(k+1)(1+βk)| / (π(k)(a+bk)).

        Evaluated on log π over the states whose probability is a normal
        double; below ~1e-308 the stored π(k) is zero or subnormal and its
        log (near -a for large a) has no bits left for a ratio test.
        """
        k = np.arange(self.probs.size - 1)
        if self.log_probs is not None:
            lp = self.log_probs
            floor = np.log(np.finfo(float).tiny)
            ok = (lp[:-1] > floor) & (lp[1:] > floor)
            d = (lp[1:] + np.log(k + 1) + np.log1p(self.beta * k)) - (lp[:-1] + np.log(self.a + self.b * k))
            return float(np.max(np.abs(np.expm1(d[ok])))) if ok.any() else 0.0
        up = self.probs[:-1] * (self.a + self.b * k)
        down = self.probs[1:] * (k + 1) * (1 + self.beta * k)
        ok = up > 0
        return float(np.max(np.abs(up - down)[ok] / up[ok])) if ok.any() else 0.0


def pbd_pmf(a: float, b: float = 0.0, beta: float = 0.0, tol: float = 1e-12) -> PbdPmf:
    """Compute π_{a,b;β}, accumulating log weights until a geometric tail bound drops below tol."""
    _check_abb(a, b, beta)
    logs = [np.zeros(1)]
    steps = []
    log_total = 0.0
    last = 0.0
    start = 0
    block = int(max(64, 2 * a + 10 * np.sqrt(a + 1)))
    while True:
        j = np.arange(start, start + block, dtype=float)
        step = np.log(a + b * j) - np.log(j + 1) - np.log1p(beta * j)
        lw = last + np.cumsum(step)  # log w_{j+1}
        running = np.logaddexp.accumulate(np.concatenate([[log_total], lw]))[1:]
        # sup_{i >= j+1} of the weight ratio, for the tail after w_{j+1}
        jj = j + 1
        rho = np.maximum((a + b * jj) / (jj + 1), b) / (1 + beta * jj)
        with np.errstate(divide="ignore"):
            log_tail = lw + np.log(rho) - np.log1p(-np.minimum(rho, 1 - 1e-300))
        stop = (rho < 1) & (log_tail - running <= np.log(tol))
        if stop.any():
            i = int(np.argmax(stop))
            logs.append(lw[: i + 1])
            steps.append(step[: i + 1])
            log_total = running[i]
            tail = float(np.exp(log_tail[i] - running[i]))
            break
        logs.append(lw)
        steps.append(step)
        log_total, last, start = running[-1], lw[-1], start + block
        if start > 1e8:
            raise RuntimeError("pmf did not converge")
    # re-accumulate outward from the mode so that large-a log weights keep
    # their low-order bits (a running sum near a log a rounds at ~1e-9)
    step_all = np.concatenate(steps)
    mode = int(np.argmax(np.concatenate(logs)))
    lw_all = np.empty(step_all.size + 1)
    lw_all[mode] = 0.0
    lw_all[mode + 1:] = np.cumsum(step_all[mode:])
    lw_all[:mode] = -np.cumsum(step_all[:mode][::-1])[::-1]
    log_probs = lw_all - logsumexp(lw_all)
    probs = np.exp(log_probs)
    probs /= probs.sum()
    probs.setflags(write=False)
    log_probs.setflags(write=False)
    return PbdPmf(probs, tail, float(a), float(b), float(beta), log_probs)


def pbd_sample_count(pmf: PbdPmf, rng: np.random.Generator, size=None):
    """Inverse-CDF draw(s) of Z ~ π_{a,b;β}."""
    cdf = pmf.cdf
    u = rng.random(1 if size is None else size) * cdf[-1]
    z = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    return int(z[0]) if size is None else z


def pbd_process_samples(params: PbdParams, m: int, rng: np.random.Generator,
                        pmf: PbdPmf | None = None) -> list[Configuration]:
    """m i.i.d. draws of Z points i.i.d. from the spatial law, Z ~ π_{a,b;β}."""
    pmf = pmf or pbd_pmf(params.a, params.b, params.beta)
    z = pbd_sample_count(pmf, rng, m)
    pts = params.spatial.sample(int(z.sum()), rng)
    cuts = np.concatenate([[0], np.cumsum(z)])
    return [Configuration.from_points(pts[cuts[i]: cuts[i + 1]]) for i in range(m)]


def pbd_process_sample(params: PbdParams, rng: np.random.Generator, pmf: PbdPmf | None = None) -> Configuration:
    return pbd_process_samples(params, 1, rng, pmf)[0]


@dataclass(frozen=True)
class ChainValidation:
    occupancy: np.ndarray
    pmf: np.ndarray
    tv: float
    events: int
    horizon: float
    burn_in: float


def bd_chain_validate(a: float, b: float, beta: float, rng: np.random.Generator,
                      horizon: float | None = None, burn_in: float | None = None,
                      target_events: int = 200_000) -> ChainValidation:
    """Time-averaged occupancy of the count chain, compared with π_{a,b;β} in total variation."""
    _check_abb(a, b, beta)
    pmf = pbd_pmf(a, b, beta)
    k_all = np.arange(pmf.probs.size)
    mean_rate = 2 * float(np.dot(pmf.probs, a + b * k_all))
    if horizon is None:
        horizon = target_events / mean_rate
    if burn_in is None:
        burn_in = 0.05 * horizon
    total_time = burn_in + horizon
    occ = np.zeros(max(64, pmf.probs.size * 2))
    k = int(np.argmax(pmf.probs))
    t = 0.0
    events = 0
    chunk = 4096
    while t < total_time:
        e = rng.exponential(1.0, chunk)
        u = rng.random(chunk)
        for ei, ui in zip(e, u):
            birth = a + b * k
            death = k * (1 + beta * (k - 1))
            rate = birth + death
            dt = ei / rate
            lo, hi = max(t, burn_in), min(t + dt, total_time)
            if hi > lo:
                if k >= occ.size:
                    occ = np.concatenate([occ, np.zeros(occ.size)])
                occ[k] += hi - lo
            t += dt
            if t >= total_time:
                break
            k = k + 1 if ui * rate < birth else k - 1
            events += 1
    occ = occ / occ.sum()
    width = max(occ.size, pmf.probs.size)
    p = np.pad(pmf.probs, (0, width - pmf.probs.size))
    q = np.pad(occ, (0, width - occ.size))
    tv = 0.5 * float(np.abs(p - q).sum())
    return ChainValidation(q, p, tv, events, horizon, burn_in)


def write_pmf(pmf: PbdPmf, path) -> None:
    """Two-column text export: k and π(k)."""
    k = np.arange(pmf.probs.size)
    header = f"a={pmf.a!r} b={pmf.b!r} beta={pmf.beta!r} tail<={pmf.truncation_tail:.3g}\nk prob"
    np.savetxt(Path(path), np.column_stack([k, pmf.probs]), fmt=["%d", "%.17g"], header=header)
