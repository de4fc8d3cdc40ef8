import math

import mpmath
import numpy as np
import pytest

from ellcov.procedure import (
    DegenerateScaleError,
    normal_cdf,
    normal_quantile,
    normal_sf,
    run_test,
)
from ellcov.simulation import ScenarioConfig, populations, run_scenario


def mp_quantile(q):
    """High-precision inversion of the normal CDF by root finding."""
    mpmath.mp.dps = 40
    q = mpmath.mpf(q)
    return float(mpmath.findroot(lambda x: mpmath.ncdf(x) - q, mpmath.sqrt(2) * mpmath.erfinv(2 * q - 1)))


class TestNormalQuantile:
    def test_median(self):
        assert normal_quantile(0.5) == 0.0

    def test_reference_values(self):
        assert normal_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-12)
        assert normal_quantile(0.95) == pytest.approx(1.6448536269514722, abs=1e-12)

    def test_against_high_precision(self):
        for q in [1e-12, 1e-6, 0.001, 0.02425, 0.1, 0.3, 0.7, 0.97575, 0.999, 1 - 1e-9]:
            assert normal_quantile(q) == pytest.approx(mp_quantile(q), abs=1e-10)

    def test_round_trip(self):
        for q in np.arange(1, 100) / 100:
            assert normal_cdf(normal_quantile(q)) == pytest.approx(q, abs=1e-9)

    @pytest.mark.parametrize("q", [0.0, 1.0, -0.1, 1.5, math.nan])
    def test_out_of_range(self, q):
        with pytest.raises(ValueError):
            normal_quantile(q)

    def test_tails(self):
        assert normal_sf(0.0) == 0.5
        assert normal_sf(10.0) == pytest.approx(7.61985302416047e-24, rel=1e-12)


class TestRunTest:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.x = rng.normal(size=(40, 15))
        self.y = rng.normal(size=(35, 15))

    def test_outcome_fields(self):
        out = run_test(self.x, self.y, 0.05)
        assert out.statistic == out.t / out.sigma_hat
        assert out.p_value == pytest.approx(1 - normal_cdf(out.statistic), abs=1e-15)
        assert out.reject == (out.statistic > normal_quantile(0.95))
        assert (out.n1, out.n2, out.p) == (40, 35, 15)

    def test_zero_statistic(self):
        # statistic 0 gives p-value 1/2, so no rejection at any alpha < 1/2
        assert normal_sf(0.0) == 0.5
        assert not 0.0 > normal_quantile(1 - 0.49)

    def test_deterministic(self):
        assert run_test(self.x, self.y) == run_test(self.x.copy(), self.y.copy())

    def test_location_invariant_decision(self):
        rng = np.random.default_rng(1)
        for alpha in (0.01, 0.05, 0.2, 0.5):
            a = run_test(self.x, self.y, alpha)
            b = run_test(self.x + rng.normal(size=15), self.y - 3.0, alpha)
            assert a.reject == b.reject
            assert b.statistic == pytest.approx(a.statistic, rel=1e-8)

    def test_rejects_scale_change(self):
        assert run_test(self.x, 3 * self.y).reject

    def test_degenerate_scale(self):
        with pytest.raises(DegenerateScaleError, match="degenerate null-scale"):
            run_test(np.eye(5)[:4], np.eye(5)[1:], 0.05)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -1.0])
    def test_alpha_range(self, alpha):
        with pytest.raises(ValueError):
            run_test(self.x, self.y, alpha)

    def test_statistic_matches_simulation_route(self):
        cfg = ScenarioConfig(30, 30, 10, "ii", case="b", replicates=3, seed=4)
        rep = run_scenario(cfg, keep_statistics=True)
        from ellcov.simulation import EllipticalSpec, replicate_rng, sample_elliptical
        from ellcov.laws import RadialLaw

        _, _, a1, a2 = populations(cfg)
        rng = replicate_rng(cfg.seed, 0)
        x1 = sample_elliptical(EllipticalSpec(RadialLaw("ii", 10), a1, 30), rng)
        x2 = sample_elliptical(EllipticalSpec(RadialLaw("ii", 10), a2, 30), rng)
        assert run_test(x1, x2).statistic == pytest.approx(rep.statistics[0], rel=1e-14)


def test_null_level_normal_case_a():
    rep = run_scenario(ScenarioConfig(300, 300, 100, "i", case="a", replicates=500, seed=101))
    assert 0.03 <= rep.rejection_rate <= 0.08


def test_statistic_mean_increases_with_delta():
    means = []
    for delta in (0.0, 0.1, 0.2, 0.3):
        cfg = ScenarioConfig(80, 80, 40, "i", case="b", delta=delta, replicates=150, seed=7)
        means.append(np.mean(run_scenario(cfg, keep_statistics=True).statistics))
    assert means == sorted(means)
