import json
from dataclasses import replace

import numpy as np
import pytest

from pbdlsp.distances import EmpiricalLaw, d2_empirical
from pbdlsp.experiments import (
    CSV_COLUMNS,
    ExperimentSpec,
    check_grid,
    fit_slope,
    isotonic_r2,
    run_counterexample,
    run_lsp_curve,
    run_validate_pbd,
    verify_rows,
)
from pbdlsp.moments import DispersionCase, FactorialMoments
from pbdlsp.pbd import CaseRangeError, UnsupportedDispersion
from pbdlsp.processes import Bernoulli, CompoundPoisson, Exponential, Renewal, RngSeed, sample_superpositions

NS = np.array([4, 8, 16, 32, 64, 128, 256])


class TestFitSlope:
    def test_inverse_root(self):
        s, se = fit_slope(NS, NS**-0.5)
        assert abs(s + 0.5) < 1e-12 and se < 1e-12

    def test_constant(self):
        assert fit_slope(NS, np.full(7, 0.3))[0] == pytest.approx(0, abs=1e-12)

    def test_inverse(self):
        assert fit_slope(NS, 3 / NS)[0] == pytest.approx(-1, abs=1e-12)

    def test_nonpositive_dropped(self, caplog):
        d = 1 / NS.astype(float)
        d[2] = 0.0
        assert fit_slope(NS, d)[0] == pytest.approx(-1, abs=1e-12)
        assert "dropping" in caplog.text

    def test_too_few(self):
        with pytest.raises(ValueError):
            fit_slope([1, 2, 3], [1.0, 0.0, -1.0])


class TestIsotonic:
    def test_monotone_data_explained(self):
        assert isotonic_r2(NS, 1 / NS) == pytest.approx(1.0)

    def test_increasing_data_not_explained(self):
        assert isotonic_r2(NS, NS.astype(float)) == pytest.approx(0.0, abs=1e-12)

    def test_pooled_seeds(self):
        ns = np.tile(NS, 3)
        d = np.concatenate([1 / NS + 0.001 * k for k in range(3)])
        assert 0.9 < isotonic_r2(ns, d) <= 1


class TestSpec:
    def test_validation(self):
        m = Bernoulli([0.5], [0.3])
        for bad in (dict(n_grid=[4, 4]), dict(n_grid=[8, 4]), dict(n_grid=[0, 1]), dict(n_grid=[4], samples_per_n=49),
                    dict(n_grid=[4], distance="tv")):
            with pytest.raises(ValueError):
                ExperimentSpec(m, **bad)

    def test_case2_grid(self):
        fm = FactorialMoments((1.2, 1.0, 0.1, 0.0))
        with pytest.raises(CaseRangeError, match=r"offending n: \[1\]"):
            check_grid(fm, [1, 2, 4])
        assert check_grid(fm, [2, 4]) is DispersionCase.CASE2

    def test_out_of_scope_grid(self):
        with pytest.raises(UnsupportedDispersion):
            check_grid(FactorialMoments((1.8, 1.62, 0.0, 0.0)), [4])


class TestCurve:
    spec = ExperimentSpec(Bernoulli([0.1, 0.5, 0.9], [0.3, 0.3, 0.3]), [4, 8, 16], 60, RngSeed(3),
                          n_boot=20, timing=False, baseline=True)

    def test_rows_and_invariants(self):
        res = run_lsp_curve(self.spec)
        assert [r.n for r in res.rows] == [4, 8, 16]
        assert len(res.baseline) == 3
        assert res.case == "case2" and res.moment_source == "exact"
        verify_rows(res)
        assert res.slope is not None
        d = res.to_dict()
        assert d["columns"] == list(CSV_COLUMNS)
        assert set(d["rows"][0]) == set(CSV_COLUMNS)
        json.dumps(d)

    def test_deterministic_and_worker_independent(self):
        a = run_lsp_curve(self.spec).to_dict()
        assert a == run_lsp_curve(self.spec).to_dict()
        assert a == run_lsp_curve(replace(self.spec, workers=2)).to_dict()
        assert a != run_lsp_curve(replace(self.spec, seed=RngSeed(4))).to_dict()

    def test_verify_rows_catches_tampering(self):
        res = run_lsp_curve(self.spec)
        res.rows[1].a += 1e-6
        with pytest.raises(ValueError):
            verify_rows(res)

    def test_monte_carlo_moments(self):
        spec = ExperimentSpec(Renewal(Exponential(3.0)), [2, 4, 8], 50, n_boot=0, mc_samples=20_000, timing=False)
        res = run_lsp_curve(spec)
        assert res.moment_source == "monte_carlo" and res.case == "case1"
        assert all(r.used_nu for r in res.rows)


class TestCalibration:
    def test_same_law_inside_own_band(self):
        model = CompoundPoisson([1.0, 0.5])
        inside = 0
        for s in range(50):
            rng = RngSeed(s).generator(0)
            p = EmpiricalLaw(sample_superpositions(model, 8, 100, rng))
            q = EmpiricalLaw(sample_superpositions(model, 8, 100, rng))
            est = d2_empirical(p, q, rng, n_boot=100, level=0.95)
            inside += est.ci_low <= est.estimate <= est.ci_high
        assert inside >= 40


class TestReports:
    @pytest.mark.parametrize("abb,key", [((2, 0, 0), "poisson_oracle"), ((1, 0.5, 0), "negbin_oracle"),
                                         ((1, 0, 1), "chain_tv")])
    def test_validate_pbd(self, abb, key):
        rep = run_validate_pbd(*abb)
        assert rep["passed"] and rep["checks"][key]

    def test_validate_pbd_threshold_failure(self):
        assert not run_validate_pbd(2, 0, 0, tv_threshold=1e-6)["passed"]

    def test_counterexample(self):
        rep = run_counterexample(20_000, n_boot=5)
        assert rep["passed"] and 4 in rep["zero_at"]
        assert 1 in rep["uniform_0.3_0.5"] and 1 not in rep["zero_at"]
        assert rep["exponential_1"][2] >= 0.01
