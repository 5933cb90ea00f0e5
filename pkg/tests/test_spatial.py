import numpy as np
import pytest
from scipy import stats

from pbdlsp.spatial import SpatialMeasure


class TestSpatialMeasure:
    def test_constructors(self):
        assert SpatialMeasure.lebesgue(2.0).total == 2.0
        u = SpatialMeasure.uniform(0.2, 0.6)
        assert u.total == pytest.approx(1.0)
        assert u.mass(0.0, 0.4) == pytest.approx(0.5)
        assert SpatialMeasure.point_mass(0.3, 2.0).atom_mass == 2.0

    def test_duplicate_atoms_merge(self):
        m = SpatialMeasure.atomic([0.5, 0.2, 0.5], [1.0, 1.0, 2.0])
        np.testing.assert_array_equal(m.atom_points, [0.2, 0.5])
        np.testing.assert_array_equal(m.atom_weights, [1.0, 3.0])

    def test_sum_merges_breaks(self):
        m = SpatialMeasure.uniform(0, 0.5) + SpatialMeasure.uniform(0.25, 1) + SpatialMeasure.point_mass(0.9)
        assert m.total == pytest.approx(3.0)
        np.testing.assert_allclose(m.refine_at(np.array([0.1, 0.3, 0.6])), [2, 2 + 4 / 3, 4 / 3])

    def test_cdf_and_histogram(self):
        m = SpatialMeasure.point_mass(0.0, 0.5) + SpatialMeasure.uniform(0, 1).scaled(0.5)
        assert m.cdf(0.0) == pytest.approx(0.5)
        assert m.cdf(0.5) == pytest.approx(0.75)
        np.testing.assert_allclose(m.histogram(np.array([0, 0.5, 1])), [0.75, 0.25])

    def test_sampling(self, rng):
        m = (SpatialMeasure.uniform(0.2, 0.4) + SpatialMeasure.point_mass(0.9)).normalized()
        x = m.sample(20_000, rng)
        assert abs(np.mean(x == 0.9) - 0.5) < 0.02
        cont = x[x != 0.9]
        assert stats.kstest(cont, stats.uniform(0.2, 0.2).cdf).pvalue > 0.001

    def test_d1_closed_forms(self):
        a = SpatialMeasure.point_mass(0.2)
        b = SpatialMeasure.point_mass(0.7)
        assert a.d1(b) == pytest.approx(0.5)
        # uniform on [0,1] vs point mass at 1/2: ∫|x - 1/2| dx = 1/4
        assert SpatialMeasure.lebesgue().d1(SpatialMeasure.point_mass(0.5)) == pytest.approx(0.25)
        assert a.d1(a.scaled(3.0)) == 0.0

    def test_dict_round_trip(self):
        for m in (SpatialMeasure.uniform(0.1, 0.3), SpatialMeasure.lebesgue(2.0),
                  SpatialMeasure.atomic([0.1, 0.4], [0.3, 0.7])):
            back = SpatialMeasure.from_dict(m.to_dict())
            assert back.to_dict() == m.to_dict()
        with pytest.raises(ValueError):
            SpatialMeasure.from_dict({"kind": "uniform", "low": 0, "high": 1, "extra": 2})

    def test_invalid(self):
        with pytest.raises(ValueError):
            SpatialMeasure.uniform(0.5, 0.2)
        with pytest.raises(ValueError):
            SpatialMeasure.atomic([1.5], [1.0])
