"""Tail bounds, failure probability, and the feasibility limits."""

import math

import numpy as np
import pytest

from zodp.concentration import TailBoundInputs, beta_tail, delta_f, min_K, xi_max
from zodp.errors import NoFeasibleK, ValidationError
from zodp.params import ConvexityClass, ProblemParams, theta_star

from test_params import make_params


def appendix_params(**overrides):
    base = dict(
        d=10**6,
        n=10**4,
        K=204,
        eta=204.0,
        sigma=0.5,
        Delta=1.0,
        R=1.0,
        M=1.0,
        m=0.9,
        xi=0.0,
        convexity=ConvexityClass.STRONGLY_CONVEX,
    )
    base.update(overrides)
    return ProblemParams(**base)


class TestBetaTail:
    def test_trivial_at_zero_eps(self):
        assert beta_tail(10, 100, 0.0, "upper") == 1.0

    def test_monotone_decreasing_in_eps(self):
        eps_grid = np.linspace(0.0, 5.0, 50)
        vals = [beta_tail(10, 100, float(e), "upper") for e in eps_grid]
        assert all(b <= a + 1e-18 for a, b in zip(vals, vals[1:]))

    def test_monte_carlo_oracle(self):
        # Gamma-ratio Beta(50, 4950) tail frequency stays under the bound
        K, d, eps = 100, 10_000, 1.0
        rng = np.random.default_rng(101)
        g1 = rng.gamma(K / 2.0, 1.0, 10**6)
        g2 = rng.gamma((d - K) / 2.0, 1.0, 10**6)
        x = g1 / (g1 + g2)
        upper_freq = float(np.mean(x > (1 + eps) * K / d))
        lower_freq = float(np.mean(x < (1 - eps) * K / d))
        bound = beta_tail(K, d, eps, "upper")
        assert upper_freq <= bound
        assert lower_freq <= bound

    def test_rejects_bad_domain(self):
        with pytest.raises(ValidationError):
            beta_tail(10, 19, 0.5, "upper")
        with pytest.raises(ValidationError):
            beta_tail(10, 100, 0.5, "middle")


class TestDeltaF:
    def test_zero_steps(self):
        assert delta_f(TailBoundInputs(K=10, d=100, theta=0.5, steps=0)) == 0.0

    def test_zero_theta_gives_two_per_step(self):
        assert delta_f(TailBoundInputs(K=10, d=100, theta=0.0, steps=7)) == 14.0

    def test_linear_in_steps(self):
        one = delta_f(TailBoundInputs(K=10, d=100, theta=0.5, steps=1))
        many = delta_f(TailBoundInputs(K=10, d=100, theta=0.5, steps=1000))
        assert many == pytest.approx(1000 * one, rel=1e-12)

    def test_strictly_decreasing_in_theta(self):
        thetas = np.linspace(0.1, 3.0, 30)
        vals = [delta_f(TailBoundInputs(K=10, d=100, theta=float(t), steps=5)) for t in thetas]
        assert all(b < a for a, b in zip(vals, vals[1:]))


class TestMinK:
    def test_matches_direct_arithmetic(self):
        # independent evaluation of the same closed form
        p = appendix_params()
        delta = 1e-5
        c = 1.0 - p.m / p.M
        ceil_term = math.ceil(p.M * p.R * p.n * math.sqrt(2 * p.d) / p.Delta)
        coeff = 20.0 * (1 + c * c) ** 2 / (3.0 * (1 - c * c) ** 2)
        lower = coeff * math.log(4.0 / delta * ceil_term)
        assert min_K(p, delta) == max(math.ceil(lower), 1)

    def test_failure_probability_within_budget(self):
        # at K = min_K the union bound over the saturated window fits delta/2
        delta = 1e-5
        p = appendix_params()
        k = min_K(p, delta)
        p_k = appendix_params(K=k, eta=k / 1.0)
        steps = math.ceil(p_k.n * p_k.R * math.sqrt(2 * p_k.d) / (p_k.eta * p_k.Delta))
        theta = theta_star(1.0 - p_k.m / p_k.M)
        assert delta_f(TailBoundInputs(K=k, d=p_k.d, theta=theta, steps=steps)) <= delta / 2

    def test_log_growth_in_n(self):
        delta = 1e-5
        p1 = appendix_params()
        p2 = appendix_params(n=2 * p1.n)
        c = 0.1
        coeff = 20.0 * (1 + c * c) ** 2 / (3.0 * (1 - c * c) ** 2)
        assert min_K(p2, delta) - min_K(p1, delta) <= coeff * math.log(2.0) + 1

    def test_no_feasible_k_when_barely_convex(self):
        p = appendix_params(d=1000, K=10, eta=10.0, m=1e-6)
        with pytest.raises(NoFeasibleK):
            min_K(p, 1e-5)

    def test_requires_strong_convexity(self):
        p = make_params(convexity=ConvexityClass.CONVEX, m=0.0, eta=10.0)
        with pytest.raises(ValidationError):
            min_K(p, 1e-5)

    def test_exact_ceiling_on_perfect_square(self):
        # 2d a perfect square and integer coefficient: boundary must not round up
        p = appendix_params(d=8, n=10, K=2, eta=2.0, R=1.0, Delta=1.0)
        # M R n sqrt(2d)/Delta = 10*4 = 40 exactly; ceil = 40
        from zodp.concentration import _exact_ceil_sqrt_term

        assert _exact_ceil_sqrt_term(1.0, 1.0, 10, 1.0, 8) == 40


class TestXiMax:
    def test_formula_instance(self):
        p = appendix_params(K=100, eta=100.0)
        want = 2.0 / (10**4 * 100 * math.sqrt(2 * 10**6))
        assert xi_max(p) == pytest.approx(want, rel=1e-12)

    def test_zero_always_admissible(self):
        assert xi_max(appendix_params()) > 0.0

    def test_shrinks_with_sqrt_d(self):
        p1 = appendix_params(d=10**6)
        p2 = appendix_params(d=2 * 10**6)
        assert xi_max(p1) / xi_max(p2) == pytest.approx(math.sqrt(2.0), rel=1e-12)


def test_lipschitz_tail_bound_monte_carlo_sweep():
    """Realized coefficient exceeds the cap no more often than the bound.

    200 random (K, d, theta, c) configurations, 1e5 Gamma-ratio draws of
    the two Beta sums each; the union bound must hold within 3 SE.
    """
    rng = np.random.default_rng(20240809)
    n_samples = 100_000
    for _ in range(200):
        d = int(rng.integers(10, 5000))
        K = int(rng.integers(1, d // 2 + 1))
        theta = float(rng.uniform(0.0, 2.0))
        c = float(rng.uniform(0.0, 1.2))
        g1 = rng.gamma(K / 2.0, 1.0, n_samples)
        g2 = rng.gamma((d - K) / 2.0, 1.0, n_samples)
        su = g1 / (g1 + g2)
        h1 = rng.gamma(K / 2.0, 1.0, n_samples)
        h2 = rng.gamma((d - K) / 2.0, 1.0, n_samples)
        sg = h1 / (h1 + h2)
        c1 = np.sqrt(np.maximum(1.0 - su + c * c * sg, 0.0))
        ratio = K / d
        cap = math.sqrt(1.0 - (1 - c * c) * ratio + theta * (1 + c * c) * ratio)
        bound = 2.0 * math.exp(
            -3.0 * theta**2 * d * K / (12.0 * (d - K) + 8.0 * theta * (d - 2 * K))
        )
        exceed = float(np.mean(c1 > cap))
        se = math.sqrt(exceed * (1 - exceed) / n_samples)
        assert exceed <= bound + 3.0 * se, (d, K, theta, c, exceed, bound)
