"""Monte Carlo estimators against the exact small-horizon oracles."""

import math

import numpy as np
import pytest

from unifolio.covering import FiniteSet, SideInfoSample, Threshold1D, ThresholdFunction
from unifolio.montecarlo import (
    McConfig,
    _log_mean_exp_se,
    mc_wealth_epoch_mixture,
    mc_wealth_statewise,
    mc_wealth_up,
    sample_uniform_simplex,
)
from unifolio.portfolio import (
    MarketSequence,
    epoch_mixture_wealth_two_stock,
    statewise_universal_wealth_two_stock,
    universal_crp_wealth_two_stock,
)


def rand_market(rng, n, m=2, lo=0.5, hi=1.5):
    return MarketSequence(rng.uniform(lo, hi, size=(n, m)))


class TestSimplexSampling:
    def test_two_coordinates_uniform(self):
        rng = np.random.default_rng(0)
        draws = np.array([sample_uniform_simplex(2, rng) for _ in range(4000)])
        first = draws[:, 0]
        # first coordinate of a flat Dirichlet on the segment is Uniform(0,1)
        assert first.mean() == pytest.approx(0.5, abs=0.03)
        assert np.quantile(first, 0.25) == pytest.approx(0.25, abs=0.03)

    @pytest.mark.parametrize("m", [2, 3, 5])
    def test_coordinate_means(self, m):
        rng = np.random.default_rng(1)
        draws = rng.dirichlet(np.ones(m), size=100_000)
        np.testing.assert_allclose(draws.mean(axis=0), np.full(m, 1 / m), atol=0.01)

    def test_seed_determinism(self):
        a = sample_uniform_simplex(3, np.random.default_rng(5))
        b = sample_uniform_simplex(3, np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)


class TestUniformMixtureEstimator:
    def test_all_ones_is_exactly_zero(self):
        market = MarketSequence(np.ones((7, 2)))
        for seed in (0, 1, 2):
            r = mc_wealth_up(market, McConfig(samples=64, seed=seed))
            assert r.log_wealth == 0.0
            assert r.stderr == 0.0

    def test_within_three_se_of_exact(self):
        rng = np.random.default_rng(2)
        market = rand_market(rng, 6)
        exact = universal_crp_wealth_two_stock(market)
        hits = 0
        for seed in range(10):
            r = mc_wealth_up(market, McConfig(samples=8000, seed=seed))
            hits += abs(r.log_wealth - exact) <= 3 * r.stderr
        assert hits >= 9

    def test_closed_form_integral(self):
        market = MarketSequence([[2.0, 0.0], [0.0, 2.0]])
        r = mc_wealth_up(market, McConfig(samples=100_000, seed=3))
        assert abs(r.log_wealth - math.log(2 / 3)) <= 3 * r.stderr

    def test_bit_identical_reruns(self):
        rng = np.random.default_rng(4)
        market = rand_market(rng, 9)
        a = mc_wealth_up(market, McConfig(samples=500, seed=11))
        b = mc_wealth_up(market, McConfig(samples=500, seed=11))
        assert (a.log_wealth, a.stderr) == (b.log_wealth, b.stderr)
        c = mc_wealth_up(market, McConfig(samples=500, seed=12))
        assert c.log_wealth != a.log_wealth


class TestStatewiseEstimator:
    def test_single_state_equals_plain(self):
        rng = np.random.default_rng(5)
        market = rand_market(rng, 7)
        cfg = McConfig(samples=700, seed=6)
        a = mc_wealth_up(market, cfg)
        b = mc_wealth_statewise(market, [1] * 7, cfg)
        assert a.log_wealth == b.log_wealth

    def test_empty_state_contributes_factor_one(self):
        from unifolio.montecarlo import _crp_log_wealths

        rng = np.random.default_rng(6)
        market = rand_market(rng, 5)
        cfg = McConfig(samples=300, seed=7)
        states = np.array([1, 1, 3, 3, 1])  # state 2 is declared but empty
        r = mc_wealth_statewise(market, states, cfg)
        # white-box: the result is the sum of the occupied states' estimates,
        # each drawn from its index's spawned stream
        children = np.random.SeedSequence(7).spawn(3)
        expected = 0.0
        for s, child in ((1, children[0]), (3, children[2])):
            thetas = np.random.default_rng(child).dirichlet(np.ones(2), size=300)
            logw = _crp_log_wealths(thetas, market.relatives[states == s])
            expected += float(np.log(np.exp(logw).mean()))
        assert r.log_wealth == pytest.approx(expected, abs=1e-12)

    def test_within_three_se_of_exact(self):
        rng = np.random.default_rng(7)
        market = rand_market(rng, 6)
        states = rng.integers(1, 3, size=6)
        exact = statewise_universal_wealth_two_stock(market, states)
        hits = 0
        for seed in range(10):
            r = mc_wealth_statewise(market, states, McConfig(samples=8000, seed=seed))
            hits += abs(r.log_wealth - exact) <= 3 * r.stderr
        assert hits >= 9

    def test_length_mismatch(self):
        market = MarketSequence(np.ones((3, 2)))
        with pytest.raises(Exception):
            mc_wealth_statewise(market, [1, 2], McConfig(samples=10, seed=0))


class TestEpochMixtureEstimator:
    def test_all_ones_exact_zero(self):
        market = MarketSequence(np.ones((8, 2)))
        z = SideInfoSample(np.ones(8))
        r = mc_wealth_epoch_mixture(market, z, Threshold1D(), McConfig(samples=64, seed=0))
        assert r.log_wealth == 0.0

    def test_singleton_class_equals_statewise_per_epoch(self):
        rng = np.random.default_rng(8)
        market = rand_market(rng, 8)
        z = SideInfoSample(rng.random(8))
        g = ThresholdFunction(0.5)
        cfg = McConfig(samples=2000, seed=9)
        r = mc_wealth_epoch_mixture(market, z, FiniteSet((g,)), cfg)
        assert r.per_epoch is not None
        assert [e["ell"] for e in r.per_epoch] == [1, 1, 1, 1]

    def test_within_three_se_of_exact(self):
        rng = np.random.default_rng(9)
        market = rand_market(rng, 8)
        z = SideInfoSample(rng.random(8))
        exact, _ = epoch_mixture_wealth_two_stock(market, z, Threshold1D())
        hits = 0
        for seed in range(10):
            r = mc_wealth_epoch_mixture(market, z, Threshold1D(), McConfig(samples=4000, seed=seed))
            hits += abs(r.log_wealth - exact) <= 3 * r.stderr
        assert hits >= 9

    def test_first_epoch_entry_is_exact_uniform_day(self):
        rng = np.random.default_rng(10)
        market = rand_market(rng, 4)
        z = SideInfoSample(rng.random(4))
        r = mc_wealth_epoch_mixture(market, z, Threshold1D(), McConfig(samples=100, seed=0))
        assert r.per_epoch[0] == {
            "j": 0,
            "ell": 1,
            "log_factor": pytest.approx(math.log(market.relatives[0].mean())),
        }

    def test_breakdown_sums_to_estimate(self):
        rng = np.random.default_rng(11)
        market = rand_market(rng, 11)
        z = SideInfoSample(rng.random(11))
        r = mc_wealth_epoch_mixture(market, z, Threshold1D(), McConfig(samples=500, seed=1))
        assert r.log_wealth == pytest.approx(sum(e["log_factor"] for e in r.per_epoch), abs=1e-12)

    def test_breakdown_flag(self):
        rng = np.random.default_rng(12)
        market = rand_market(rng, 4)
        z = SideInfoSample(rng.random(4))
        r = mc_wealth_epoch_mixture(
            market, z, Threshold1D(), McConfig(samples=50, seed=0, epoch_breakdown=False)
        )
        assert r.per_epoch is None

    def test_json_shape(self):
        rng = np.random.default_rng(13)
        market = rand_market(rng, 4)
        z = SideInfoSample(rng.random(4))
        d = mc_wealth_epoch_mixture(market, z, Threshold1D(), McConfig(samples=50, seed=0)).to_json_dict()
        assert set(d) == {"log_wealth", "stderr", "degenerate_draws", "per_epoch"}
        assert set(d["per_epoch"][0]) == {"j", "ell", "log_factor"}


class TestEstimatorConsistency:
    def test_error_shrinks_with_hundredfold_samples(self):
        rng = np.random.default_rng(14)
        market = rand_market(rng, 5)
        exact = universal_crp_wealth_two_stock(market)
        small = [abs(mc_wealth_up(market, McConfig(samples=60, seed=s)).log_wealth - exact) for s in range(20)]
        large = [abs(mc_wealth_up(market, McConfig(samples=6000, seed=s)).log_wealth - exact) for s in range(20)]
        assert np.median(large) < np.median(small)


class TestDegenerateHandling:
    def test_log_mean_exp_counts_zero_wealth_draws(self):
        log_mean, se, deg = _log_mean_exp_se(np.array([0.0, -np.inf, math.log(0.5)]))
        assert deg == 1
        assert log_mean == pytest.approx(math.log(0.5))

    def test_all_zero_wealth_returns_minus_inf(self):
        log_mean, se, deg = _log_mean_exp_se(np.array([-np.inf, -np.inf]))
        assert log_mean == -math.inf
        assert se == math.inf
        assert deg == 2

    def test_config_validation(self):
        with pytest.raises(ValueError):
            McConfig(samples=0, seed=0)
