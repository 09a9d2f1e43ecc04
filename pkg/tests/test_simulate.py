import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from avastcdf.simulate import (
    PARETO_SCALE,
    BandConfig,
    GeneratorConfig,
    TruthTracker,
    coverage_mc,
    dkw_band,
    dkw_radius,
    evaluate_band,
    generate,
    make_rng,
    time_to_width,
    weight_law_sample,
)
from avastcdf.stats import ValueCounts


def replay_urn_params(x, t_max, q, gamma_scale=1.0, mask=None):
    """Rebuild per-step Beta parameters from the drawn values alone."""
    hi = lo = 0
    out = []
    for s in range(t_max):
        g = gamma_scale * float(s + 1) ** q
        out.append((2.0 + g * hi, 2.0 + g * lo))
        if mask is None or mask[s]:
            if x[s] > 0.5:
                hi += 1
            else:
                lo += 1
    return np.array(out)


class TestConfig:
    @pytest.mark.parametrize(
        "changes",
        [{"kind": "nope"}, {"horizon": 0}, {"a": 0.0}, {"eps": 0.0}, {"eps": 1.5}, {"w_max": 0.5}, {"weight_law": "cauchy"}, {"seed": -1}],
    )
    def test_rejects_invalid(self, changes):
        with pytest.raises(ValueError):
            GeneratorConfig(**changes)

    def test_domain_and_weighted(self):
        assert GeneratorConfig(kind="iid-gaussian").domain == "real"
        assert GeneratorConfig(kind="iw-polya").weighted
        assert not GeneratorConfig(kind="polya").weighted

    def test_tracker_needs_one_source(self):
        with pytest.raises(ValueError):
            TruthTracker()


class TestGenerators:
    def test_iid_beta_tracker(self):
        s = generate(GeneratorConfig(kind="iid-beta", horizon=50))
        v = np.linspace(0, 1, 33)
        assert np.allclose(s.truth(v, 7), special.betainc(6, 3, v), atol=1e-14)
        assert np.all(s.w == 1.0) and np.all((s.x >= 0) & (s.x <= 1))

    def test_frozen_polya(self):
        s = generate(GeneratorConfig(kind="polya", gamma_scale=0.0, horizon=300))
        v = np.linspace(0, 1, 17)
        for t in (1, 150, 300):
            assert np.allclose(s.truth(v, t), 3 * v**2 - 2 * v**3, atol=1e-14)

    def test_polya_store_and_average(self):
        s = generate(GeneratorConfig(kind="polya", q=1.0, seed=11, horizon=1000))
        params = replay_urn_params(s.x, 1000, 1.0)
        v = np.linspace(0, 1, 64)
        brute = np.mean([special.betainc(a, b, v) for a, b in params], axis=0)
        assert np.allclose(s.truth(v, 1000), brute, rtol=0, atol=1e-10)
        brute_half = np.mean([special.betainc(a, b, v) for a, b in params[:400]], axis=0)
        assert np.allclose(s.truth(v, 400), brute_half, rtol=0, atol=1e-10)

    def test_polya_tracker_outside_horizon(self):
        s = generate(GeneratorConfig(kind="polya", horizon=10))
        with pytest.raises(ValueError):
            s.truth(0.5, 11)

    def test_iw_polya_identity(self):
        cfg = GeneratorConfig(kind="iw-polya", q=0.5, seed=4, horizon=600, w_max=5.0)
        s = generate(cfg)
        assert set(np.unique(s.w)) <= {0.0, 5.0}
        v = np.linspace(0, 1, 40)
        weighted = replay_urn_params(s.x, 600, 0.5, mask=s.w > 0)
        brute = np.mean([special.betainc(a, b, v) for a, b in weighted], axis=0)
        assert np.allclose(s.truth(v), brute, atol=1e-10)
        zero = replay_urn_params(s.x, 600, 0.5, mask=s.w == 0)
        brute_zero = np.mean([special.betainc(a, b, v) for a, b in zero], axis=0)
        assert np.allclose(s.factual(v), 0.2 * brute + 0.8 * brute_zero, atol=1e-10)

    def test_iw_polya_weight_frequency(self):
        s = generate(GeneratorConfig(kind="iw-polya", seed=1, horizon=20_000, w_max=10.0, q=0.0))
        assert np.mean(s.w) == pytest.approx(1.0, abs=0.07)

    def test_uniform_eps(self):
        s = generate(GeneratorConfig(kind="iid-uniform-eps", eps=1 / 64, horizon=1000))
        assert s.x.max() <= 1 / 64
        assert s.smoothness.xi == 1 / 64
        assert s.truth(1 / 128) == pytest.approx(0.5)
        assert s.truth(0.5) == 1.0

    @pytest.mark.parametrize("kind", ["iid-lognormal", "iid-gaussian"])
    def test_real_line_truth_is_cdf(self, kind):
        s = generate(GeneratorConfig(kind=kind, mu=0.5, sigma=2.0, horizon=10))
        v = np.sort(np.r_[-np.logspace(-6, 9, 4000), 0.0, np.logspace(-6, 9, 4000)])
        f = s.truth(v)
        assert np.all(np.diff(f) >= 0)
        assert f[0] < 1e-12 and f[-1] > 1 - 1e-12

    @given(st.integers(0, 2**63), st.sampled_from(["polya", "iid-beta", "iid-iw", "iw-polya"]))
    @settings(max_examples=10, deadline=None)
    def test_reproducible(self, seed, kind):
        cfg = GeneratorConfig(kind=kind, seed=seed, horizon=200)
        a, b = generate(cfg), generate(cfg)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.w, b.w)
        v = np.linspace(0, 1, 9)
        assert np.array_equal(a.truth(v, 100), b.truth(v, 100))
        assert not np.array_equal(a.x, generate(cfg.replace(seed=(seed + 1) % 2**64)).x)

    def test_polya_tracker_monotone(self):
        s = generate(GeneratorConfig(kind="polya", q=1.0, seed=3, horizon=500))
        f = s.truth(np.linspace(0, 1, 2001), 500)
        assert np.all(np.diff(f) >= 0) and f[0] == 0.0 and f[-1] == pytest.approx(1.0)


class TestWeightLaws:
    def test_pareto_mean_and_support(self):
        w = weight_law_sample("pareto", make_rng(0), 10**6)
        assert abs(w.mean() - 1) <= 0.05
        assert w.min() >= 1 / 3

    def test_pareto_distribution(self):
        w = weight_law_sample("pareto", make_rng(1), 20_000)
        assert stats.kstest(w, stats.pareto(b=1.5, scale=PARETO_SCALE).cdf).pvalue > 1e-3

    def test_exp_mean(self):
        w = weight_law_sample("exp", make_rng(0), 10**6)
        assert abs(w.mean() - 1) <= 0.005 and w.min() >= 0

    def test_unit_mean_scale(self):
        assert stats.pareto(b=1.5, scale=PARETO_SCALE).mean() == pytest.approx(1.0, rel=1e-14)

    def test_unknown_law(self):
        with pytest.raises(ValueError):
            weight_law_sample("cauchy", make_rng(0))


class TestDKW:
    def test_formula(self):
        expected = math.sqrt(math.log(2 * math.pi**2 * 1e8 / (6 * 0.05)) / 20_000)
        assert dkw_radius(10_000, 0.05) == pytest.approx(expected, rel=1e-14)

    def test_decreasing(self):
        r = dkw_radius(np.arange(1, 5000), 0.05)
        assert np.all(np.diff(r) < 0)

    def test_budget_sums_to_alpha(self):
        t = np.arange(1, 10**6, dtype=float)
        assert np.sum(6 * 0.05 / (math.pi**2 * t**2)) == pytest.approx(0.05, rel=1e-5)

    def test_band_clipped(self):
        xs = np.random.default_rng(0).random(100)
        r, lo, hi = dkw_band(100, 0.05, ValueCounts().extend(xs), [0.0, 0.5, 1.0])
        assert lo[0] == 0.0 and hi[-1] == 1.0
        assert hi[1] - lo[1] == pytest.approx(2 * r)
        with pytest.raises(ValueError):
            dkw_band(99, 0.05, ValueCounts().extend(xs), [0.5])
        with pytest.raises(ValueError):
            dkw_radius(0, 0.05)


class TestCoverage:
    def test_trivial_alpha(self):
        rep = coverage_mc(BandConfig(alpha=1.0), GeneratorConfig(horizon=200), 3, np.linspace(0, 1, 16), [50, 200])
        assert rep.failures == 0 and np.all(rep.worst_margin <= -0.0)

    def test_small_iid_run(self):
        rep = coverage_mc(BandConfig(), GeneratorConfig(horizon=500), 4, np.linspace(0, 1, 64), [100, 500])
        assert rep.failures == 0 and rep.n_seeds == 4
        assert rep.ci_low == 0.0 and 0 < rep.ci_high < 1
        assert rep.threshold(0.05) == pytest.approx(0.05 + 3 * math.sqrt(0.05 * 0.95 / 4))

    def test_polya_divergent_seeds_covered(self):
        # seeds 0 and 2 lock into opposite urns
        gen = GeneratorConfig(kind="polya", q=1.0, horizon=2000)
        limits = [generate(gen.replace(seed=s)).truth(0.5, 2000) for s in (0, 2)]
        assert abs(limits[0] - limits[1]) > 0.9
        rep = coverage_mc(BandConfig(), gen, 2, np.linspace(0, 1, 128), [100, 1000, 2000], seeds=[0, 2])
        assert rep.failures == 0

    def test_weighted_needs_weighted_oracle(self):
        with pytest.raises(ValueError):
            coverage_mc(BandConfig(oracle="bernoulli"), GeneratorConfig(kind="iid-iw", horizon=50), 1, [0.5], [50])

    def test_weighted_run(self):
        rep = coverage_mc(
            BandConfig(oracle="empbern"), GeneratorConfig(kind="iw-polya", q=0.5, horizon=400), 2, np.linspace(0, 1, 32), [400]
        )
        assert rep.failures == 0

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            coverage_mc(BandConfig(), GeneratorConfig(horizon=10), 0, [0.5], [10])
        with pytest.raises(ValueError):
            coverage_mc(BandConfig(), GeneratorConfig(horizon=10), 1, [0.5], [0])
        with pytest.raises(ValueError):
            BandConfig(alpha=0.0)


class TestHelpers:
    def test_evaluate_band(self):
        s = generate(GeneratorConfig(horizon=300))
        band = evaluate_band(s, 300, np.linspace(0, 1, 11), BandConfig())
        assert band.t == 300 and np.all(band.covers(s.truth(band.v)))

    def test_time_to_width(self):
        x = generate(GeneratorConfig(kind="iid-uniform-eps", eps=1.0, horizon=4000)).x
        t, w = time_to_width(x, np.linspace(0, 1, 33), 0.3, [100, 1000, 4000], BandConfig())
        assert t is not None and w <= 0.3
        t2, w2 = time_to_width(x, np.linspace(0, 1, 33), 1e-3, [100, 1000], BandConfig())
        assert t2 is None and w2 > 1e-3
