import numpy as np
import pytest

from optrack.quadratics import QuadraticFunction
from optrack.scenarios import (
    NoiseModel,
    Scenario,
    ScenarioError,
    TrackingCost,
    UserCost,
    benchmark_scenario,
    scenario_from_spec,
    scenario_to_spec,
    static_scenario,
)


class TestTargetPath:
    def test_starts_at_anchor(self):
        c = TrackingCost([1.0, 2.0], [0.5, 0.5], 120)
        assert np.array_equal(c.target(0), [1.0, 2.0])

    def test_near_quarter_period(self):
        c = TrackingCost([1.0, 0.0, 0.0], [0.5, 0.5, 0.5], 100)
        p = c.target(157)
        assert np.allclose(p, [1.5, 0.5, 0.5], atol=1e-4)

    def test_excursion_bounded_by_amplitude(self):
        c = TrackingCost([0.0, 0.0], [0.5, 0.6], 100)
        for t in range(0, 3000, 37):
            assert np.all(np.abs(c.target(t) - c.anchor) <= c.amplitude + 1e-15)

    def test_timescale_floor(self):
        with pytest.raises(ScenarioError):
            TrackingCost([0.0], [0.0], 1)


class TestGradV:
    def test_zero_at_target(self):
        c = TrackingCost([1.0, 1.0], [0.0, 0.0], 100)
        assert np.array_equal(c.gradient(c.target(5), 5), [0.0, 0.0])

    def test_linear_in_offset(self):
        c = TrackingCost([0.0, 0.0, 0.0], [0.0, 0.0, 0.0], 100)
        assert np.array_equal(c.gradient([1.0, 1.0, 1.0], 0), [2.0, 2.0, 2.0])

    def test_matches_central_differences(self):
        c = TrackingCost([0.3, -0.7], [0.5, 0.55], 110)
        rng = np.random.default_rng(1)
        x = rng.normal(size=2)
        h = 1e-5
        g = c.gradient(x, 42)
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            fd = (c.value(x + e, 42) - c.value(x - e, 42)) / (2 * h)
            assert abs(g[k] - fd) <= 1e-6


class TestFeedback:
    def scenario(self, variance):
        return Scenario(
            n=2,
            engineering=[TrackingCost([0.0, 0.0], [0.0, 0.0], 100)],
            user=[UserCost(QuadraticFunction.squared_distance([1.0, 0.0]))],
            noise=NoiseModel(variance, seed=9),
            x0=np.zeros((1, 2)),
        )

    def test_noise_free_is_exact(self):
        s = self.scenario(0.0)
        x = np.array([0.25, -0.5])
        assert s.feedback(0, x, 7) == s.user[0].truth(x)

    def test_reproducible_given_agent_and_time(self):
        s = self.scenario(0.3)
        x = np.array([0.1, 0.2])
        assert s.feedback(0, x, 12) == s.feedback(0, x, 12)
        assert s.feedback(0, x, 12) != s.feedback(0, x, 13)

    def test_sample_mean_near_zero(self):
        noise = NoiseModel(0.2, seed=123)
        draws = np.array([noise.sample(0, t) for t in range(100_000)])
        bound = 4 * noise.std / np.sqrt(draws.size)
        assert abs(draws.mean()) < bound


class TestBenchmarkScenario:
    def test_structure(self):
        s = benchmark_scenario(6, 3, seed=4)
        assert s.N == 6 and s.n == 3
        for u in s.user:
            assert np.array_equal(u.truth.P, 2 * np.eye(3))
            assert u.smoothness == 2.0 and u.strong_convexity == 2.0
        for c in s.engineering:
            assert 100 <= c.timescale <= 150
            assert np.all((0.5 <= c.amplitude) & (c.amplitude <= 0.6))
            assert np.all(np.abs(c.anchor) <= 5.0)
        assert np.all(np.abs(s.x0) <= 1.5)

    def test_deterministic_given_seed(self):
        a = benchmark_scenario(5, 3, seed=11)
        b = benchmark_scenario(5, 3, seed=11)
        assert np.array_equal(a.x0, b.x0)
        for ca, cb in zip(a.engineering, b.engineering):
            assert np.array_equal(ca.anchor, cb.anchor)
            assert ca.timescale == cb.timescale
        c = benchmark_scenario(5, 3, seed=12)
        assert not np.array_equal(a.x0, c.x0)

    def test_noise_interpretation_recorded(self):
        s = benchmark_scenario(2, 3, seed=0)
        assert s.noise.variance == 0.2
        assert s.noise.std == pytest.approx(np.sqrt(0.2))
        assert "variance" in s.meta["noise_note"]

    def test_curvature_bounds_hold_by_construction(self):
        s = benchmark_scenario(8, 2, seed=3)
        for u in s.user:
            eigs = u.truth.eigenvalues()
            assert eigs[0] >= u.strong_convexity - 1e-12
            assert eigs[-1] <= u.smoothness + 1e-12


class TestUserCost:
    def test_rejects_indefinite(self):
        P = np.diag([2.0, -0.5])
        with pytest.raises(ScenarioError, match="convex"):
            UserCost(QuadraticFunction(P, np.zeros(2), 0.0))

    def test_rejects_bound_violation(self):
        f = QuadraticFunction(5 * np.eye(2), np.zeros(2), 0.0)
        with pytest.raises(ScenarioError, match="bounds"):
            UserCost(f, smoothness=2.0, strong_convexity=1.0)


class TestSpecRoundtrip:
    def test_benchmark_to_explicit_and_back(self):
        s = benchmark_scenario(4, 3, seed=7)
        spec = scenario_to_spec(s)
        t = scenario_from_spec(spec, 4, 3, default_seed=0)
        assert np.array_equal(t.x0, s.x0)
        assert t.noise.variance == s.noise.variance
        assert t.noise.seed == s.noise.seed
        x = np.array([0.1, -0.2, 0.3])
        for i in range(4):
            assert t.feedback(i, x, 9) == s.feedback(i, x, 9)
            assert np.array_equal(t.grad_V(i, x, 5), s.grad_V(i, x, 5))

    def test_unknown_keys_rejected(self):
        with pytest.raises(ScenarioError, match="unknown"):
            scenario_from_spec({"kind": "benchmark", "sigma": 1.0}, 3, 2, 0)

    def test_static_has_no_motion_or_noise(self):
        s = static_scenario(3, 2, seed=5)
        for c in s.engineering:
            assert np.array_equal(c.target(0), c.target(500))
        assert s.noise.variance == 0.0
