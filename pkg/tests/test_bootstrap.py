import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hermite_gof import BHParams, BivariateSample, FitOptions, WeightSpec, run_bootstrap_multi, run_bootstrap_test, sample_bhd
from hermite_gof import bootstrap as bs
from hermite_gof.bootstrap import (
    BootstrapError,
    bootstrap_p_value,
    critical_value,
    derive_replicate_seed,
    derive_seed,
)
from hermite_gof.mle import FitError

NULL = BHParams(1.0, 0.8, 0.5, 0.5, 0.0)


@pytest.fixture(scope="module")
def null_sample():
    return sample_bhd(NULL, 50, np.random.default_rng(2024))


class TestSeeds:
    def test_distinct_and_deterministic(self):
        assert derive_replicate_seed(42, 0) != derive_replicate_seed(42, 1)
        assert derive_replicate_seed(42, 0) == derive_replicate_seed(42, 0)

    def test_no_collisions(self):
        seeds = {derive_replicate_seed(42, b) for b in range(10_000)}
        assert len(seeds) == 10_000
        assert all(0 <= s < 2**64 for s in seeds)

    def test_hierarchical_no_collisions(self):
        seeds = {derive_seed(7, c, d) for c in range(100) for d in range(100)}
        assert len(seeds) == 10_000

    def test_frozen_values(self):
        # splitmix64 finaliser applied to master + (index + 1) * 0x9E3779B97F4A7C15
        assert derive_replicate_seed(0, 0) == 0xE220A8397B1DCDAF
        assert derive_seed(0) == 0


class TestPValue:
    def test_all_replicates_below(self):
        assert bootstrap_p_value(10.0, np.linspace(0, 1, 500)) == pytest.approx(1 / 501)
        assert 1 / 501 == pytest.approx(0.001996, abs=1e-6)

    def test_all_replicates_above(self):
        assert bootstrap_p_value(0.0, np.ones(200)) == 1.0

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.integers(0, 20), min_size=1, max_size=300),
        st.integers(0, 21),
        st.integers(0, 21),
    )
    def test_bounds_and_monotonicity(self, stats, v1, v2):
        stats = np.array(stats, dtype=float) / 4
        lo, hi = sorted((v1 / 4, v2 / 4))
        p_lo, p_hi = bootstrap_p_value(lo, stats), bootstrap_p_value(hi, stats)
        assert 0 < p_hi <= p_lo <= 1
        assert p_hi >= 1 / (len(stats) + 1)

    @settings(max_examples=300, deadline=None)
    @given(
        st.lists(st.integers(0, 15), min_size=99, max_size=400),
        st.integers(0, 16),
        st.sampled_from([0.01, 0.05, 0.10]),
    )
    def test_critical_value_agrees_with_p_value(self, stats, v, alpha):
        """Ties included: reject iff p <= alpha iff v_obs > critical value."""
        stats = np.array(stats, dtype=float)
        c = critical_value(stats, alpha)
        assert (bootstrap_p_value(float(v), stats) <= alpha) == (v > c)

    @pytest.mark.parametrize("B", [99, 200, 500, 2000])
    @pytest.mark.parametrize("alpha", [0.01, 0.05, 0.10])
    def test_order_statistic_index(self, B, alpha):
        stats = np.random.default_rng(B).random(B)
        k = math.ceil((1 - alpha) * (B + 1))
        assert critical_value(stats, alpha) == np.sort(stats)[k - 1]


class TestBootstrap:
    def test_report_consistency(self, null_sample):
        rep = run_bootstrap_test(null_sample, WeightSpec(1, 1), B=120, seed=5, fit_opts=FitOptions(fix_lambda3=True))
        assert rep.B_effective == rep.B - rep.failures == rep.replicate_stats.size
        assert rep.p_value == (1 + np.sum(rep.replicate_stats >= rep.v_obs)) / (rep.B_effective + 1)
        assert 0 < rep.p_value <= 1 and rep.v_obs >= 0
        assert set(rep.critical_values) == {0.01, 0.05, 0.10}
        for a, c in rep.critical_values.items():
            assert rep.reject(a) == (rep.v_obs > c)
        d = rep.as_dict()
        assert d["B_effective"] == rep.B_effective and len(d["replicate_stats"]) == rep.B_effective

    def test_far_from_null_gets_minimum_p(self):
        s = BivariateSample.from_pairs([(0, 0)] * 50 + [(8, 8)] * 50)
        rep = run_bootstrap_test(s, WeightSpec(0, 0), B=500, seed=1)
        assert rep.failures == 0
        assert np.all(rep.replicate_stats < rep.v_obs)
        assert rep.p_value == pytest.approx(1 / 501)

    def test_deterministic(self, null_sample):
        kw = dict(B=99, seed=11, fit_opts=FitOptions(fix_lambda3=True))
        a = run_bootstrap_test(null_sample, WeightSpec(1, 0), **kw)
        b = run_bootstrap_test(null_sample, WeightSpec(1, 0), **kw)
        np.testing.assert_array_equal(a.replicate_stats, b.replicate_stats)
        assert a.p_value == b.p_value and a.v_obs == b.v_obs

    def test_worker_count_independence(self, null_sample):
        kw = dict(B=160, seed=99, fit_opts=FitOptions(fix_lambda3=True))
        one = run_bootstrap_test(null_sample, WeightSpec(1, 1), workers=1, **kw)
        eight = run_bootstrap_test(null_sample, WeightSpec(1, 1), workers=8, **kw)
        np.testing.assert_array_equal(one.replicate_index, eight.replicate_index)
        assert one.replicate_stats.tobytes() == eight.replicate_stats.tobytes()
        assert one.p_value == eight.p_value

    def test_multi_matches_single(self, null_sample):
        weights = [WeightSpec(0, 0), WeightSpec(1, 5), WeightSpec(5, 5)]
        kw = dict(B=99, seed=3, fit_opts=FitOptions(fix_lambda3=True))
        multi = run_bootstrap_multi(null_sample, weights, **kw)
        for w in weights:
            single = run_bootstrap_test(null_sample, w, **kw)
            np.testing.assert_array_equal(multi[w].replicate_stats, single.replicate_stats)
            assert multi[w].p_value == single.p_value

    def test_null_p_values_spread(self):
        ps = []
        for seed in range(6):
            s = sample_bhd(NULL, 50, np.random.default_rng(100 + seed))
            ps.append(run_bootstrap_test(s, WeightSpec(1, 1), B=99, seed=seed, fit_opts=FitOptions(fix_lambda3=True)).p_value)
        assert not all(p < 0.05 for p in ps)

    def test_no_refit_mode(self, null_sample):
        rep = run_bootstrap_test(null_sample, WeightSpec(1, 0), B=99, seed=1, refit=False)
        assert not rep.refit and rep.B_effective == 99

    def test_minimum_B(self, null_sample):
        with pytest.raises(ValueError):
            run_bootstrap_test(null_sample, WeightSpec(1, 0), B=50)


class TestFailurePolicy:
    def _flaky_fit(self, fail_every):
        real = bs.fit_mle
        calls = {"n": 0}

        def fit(sample, opts=None):
            calls["n"] += 1
            if calls["n"] > 1 and calls["n"] % fail_every == 0:
                raise FitError("injected")
            return real(sample, opts)

        return fit

    def test_rare_failures_are_skipped(self, null_sample, monkeypatch):
        monkeypatch.setattr(bs, "fit_mle", self._flaky_fit(50))
        rep = run_bootstrap_test(null_sample, WeightSpec(1, 0), B=100, seed=2, fit_opts=FitOptions(fix_lambda3=True))
        assert rep.failures == 2 and rep.B_effective == 98
        assert rep.p_value == (1 + np.sum(rep.replicate_stats >= rep.v_obs)) / 99

    def test_failure_ceiling(self, null_sample, monkeypatch):
        monkeypatch.setattr(bs, "fit_mle", self._flaky_fit(10))
        with pytest.raises(BootstrapError):
            run_bootstrap_test(null_sample, WeightSpec(1, 0), B=100, seed=2, fit_opts=FitOptions(fix_lambda3=True))


class TestOriginBoundary:
    def test_all_zero_replicates_score_zero(self):
        """Sparse null: many bootstrap draws are all (0, 0); they are V* = 0, not failures."""
        s = BivariateSample.from_pairs([(0, 0)] * 27 + [(0, 1)] * 3)
        rep = run_bootstrap_test(s, WeightSpec(1, 0), B=200, seed=3, fit_opts=FitOptions(fix_lambda3=True))
        k = rep.metadata["boundary_replicates"]
        assert k > 0
        assert rep.failures == 0 and rep.B_effective == 200
        assert np.sum(rep.replicate_stats == 0.0) >= k

    def test_origin_sample_statistic_vanishes_in_limit(self):
        """V against BH with rates -> 0 tends to 0 for an all-(0, 0) sample."""
        from hermite_gof import statistic_vnw

        s = BivariateSample.from_pairs([(0, 0)] * 30)
        vals = [statistic_vnw(s, BHParams(2 * e, 1.0, e, e, 0.0), WeightSpec(1, 0)) for e in (1e-2, 1e-3, 1e-4)]
        assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-6
