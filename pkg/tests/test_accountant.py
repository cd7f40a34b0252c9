"""Hidden-state optimizer, closed form, and the public baselines."""

import math

import numpy as np
import pytest

from zodp.accountant import (
    Schedule,
    account_curve,
    closed_form_strongly_convex,
    composition_baseline,
    minibatch_hidden_state,
    optimize_hidden_state,
    output_perturbation,
    rho_for_schedule,
    saturation_step_count,
    verify_schedule,
    winf_bound,
)
from zodp.errors import InfeasibleSchedule, PreconditionViolated, ValidationError
from zodp.params import ConvexityClass, ProblemParams, derived_constants

DELTA = 1e-5


def appendix_params(**overrides):
    base = dict(
        d=10**6,
        n=10**4,
        K=204,
        eta=204.0,
        sigma=0.4331,
        Delta=1.0,
        R=1.0,
        M=1.0,
        m=0.9,
        xi=0.0,
        convexity=ConvexityClass.STRONGLY_CONVEX,
    )
    base.update(overrides)
    return ProblemParams(**base)


def small_params(**overrides):
    base = dict(
        d=2000,
        n=400,
        K=8,
        eta=8.0,
        sigma=1.0,
        Delta=1.0,
        R=1.0,
        M=1.0,
        m=0.9,
        xi=0.0,
        convexity=ConvexityClass.STRONGLY_CONVEX,
    )
    base.update(overrides)
    return ProblemParams(**base)


class TestWinfBound:
    def test_shared_initialization(self):
        assert winf_bound(0, appendix_params()) == 0.0

    def test_cap_saturates(self):
        p = small_params()
        t_cap = math.ceil(p.R * math.sqrt(p.K) / (p.eta * p.Delta))
        assert winf_bound(10 * t_cap + 5, p) == 2.0 * p.R

    def test_linear_regime_value(self):
        p = ProblemParams(
            d=8, n=10, K=4, eta=1.0, sigma=1.0, Delta=1.0, R=100.0, M=1.0, m=0.0,
            convexity=ConvexityClass.CONVEX,
        )
        assert winf_bound(3, p) == pytest.approx(3.0, rel=1e-15)


class TestRhoForSchedule:
    def test_composition_schedule_value(self):
        p = small_params()
        T = 50
        sched = Schedule(tau=0, beta=np.ones(T), a=np.zeros(T), z=np.zeros(T + 1))
        consts = derived_constants(p)
        alpha = 3.0
        want = T * alpha * (2 * p.Delta / p.n) ** 2 / (2 * p.sigma**2)
        assert rho_for_schedule(p, sched, alpha, consts) == pytest.approx(want, rel=1e-12)

    def test_empty_schedule(self):
        p = small_params()
        sched = Schedule(tau=5, beta=np.zeros(0), a=np.zeros(0), z=np.zeros(1))
        assert rho_for_schedule(p, sched, 2.0, derived_constants(p)) == 0.0

    def test_beta_zero_is_infinite(self):
        p = small_params()
        sched = Schedule(tau=0, beta=np.zeros(1), a=np.zeros(1), z=np.zeros(2))
        assert rho_for_schedule(p, sched, 2.0, derived_constants(p)) == math.inf

    def test_beta_one_with_shift_is_infinite(self):
        p = small_params()
        consts = derived_constants(p)
        # feasible one-step schedule paying the full displacement at once
        tau = 1000
        z_req = winf_bound(tau, p)
        a = np.array([z_req])
        z = np.array([z_req, 0.0])
        sched = Schedule(tau=tau, beta=np.ones(1), a=a, z=z)
        assert rho_for_schedule(p, sched, 2.0, consts) == math.inf

    def test_infeasible_recursion_rejected(self):
        p = small_params()
        consts = derived_constants(p)
        sched = Schedule(tau=1000, beta=np.full(2, 0.5), a=np.zeros(2), z=np.array([1.0, 0.5, 0.0]))
        with pytest.raises(InfeasibleSchedule):
            rho_for_schedule(p, sched, 2.0, consts)

    def test_equal_split_schedule_upper_bounds_optimizer(self):
        # any feasible (tau, beta, a) is at least the optimized value
        p = appendix_params()
        T = 3 * saturation_step_count(p)
        res = optimize_hidden_state(p, DELTA, T)
        consts = derived_constants(p, res.theta)
        S = saturation_step_count(p)
        tau = T - S
        z_req = winf_bound(tau, p)
        a = np.full(S, z_req / S)
        z = np.concatenate([z_req - np.arange(S) * (z_req / S), [0.0]])
        sched = Schedule(tau=tau, beta=np.full(S, 0.5), a=a, z=z)
        alpha = res.alpha_star
        rho_subopt = rho_for_schedule(p, sched, alpha, consts)
        rho_best = rho_for_schedule(p, res.schedule, alpha, consts)
        assert rho_best <= rho_subopt * (1 + 1e-12)


class TestHiddenStateOptimizer:
    def test_small_t_equals_composition_to_machine_precision(self):
        p = appendix_params()
        W = saturation_step_count(p)
        for T in (10, W // 2, W - 1):
            hid = optimize_hidden_state(p, DELTA, T)
            comp = composition_baseline(p, DELTA, T, "beta1")
            assert hid.epsilon == pytest.approx(comp.epsilon, rel=1e-12)
            assert hid.tau_star == 0 and hid.delta_f == 0.0

    def test_dominates_composition_everywhere(self):
        p = appendix_params()
        W = saturation_step_count(p)
        for T in (1, 100, 4096, W, 2 * W, 3 * W, 10 * W):
            hid = optimize_hidden_state(p, DELTA, T)
            comp = composition_baseline(p, DELTA, T, "beta1")
            assert hid.epsilon <= comp.epsilon * (1 + 1e-12)

    def test_saturation_past_the_crossover(self):
        # The growing tau = 0 branch hands over to the saturated schedule at
        # 2*sqrt(2) * ceil(n R sqrt(2d)/(Delta eta)) up to a small offset from
        # the failure-probability surcharge; from the handover on, eps(T) is
        # exactly constant.
        p = appendix_params()
        W = saturation_step_count(p)
        lo, hi = 2 * W, 3 * W
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if optimize_hidden_state(p, DELTA, mid).tau_star > 0:
                hi = mid
            else:
                lo = mid
        t_switch = hi
        assert 2 * math.sqrt(2) * W <= t_switch <= 1.001 * 2 * math.sqrt(2) * W
        eps = [
            optimize_hidden_state(p, DELTA, T).epsilon
            for T in (t_switch, 2 * t_switch, 5 * t_switch, 16 * t_switch)
        ]
        for e in eps[1:]:
            assert abs(e - eps[0]) <= 1e-9

    def test_returned_schedule_is_feasible_and_consistent(self):
        p = appendix_params()
        T = 4 * saturation_step_count(p)
        res = optimize_hidden_state(p, DELTA, T)
        consts = derived_constants(p, res.theta)
        verify_schedule(res.schedule, p, consts)
        rho = rho_for_schedule(p, res.schedule, res.alpha_star, consts)
        eps_again = rho + math.log(1.0 / res.delta_p) / (res.alpha_star - 1.0)
        assert eps_again == pytest.approx(res.epsilon, rel=1e-9)
        assert res.delta_p + res.delta_f == pytest.approx(DELTA, rel=1e-12)
        assert np.all(res.schedule.a >= 0.0)
        assert res.schedule.z[-1] == 0.0

    def test_deterministic(self):
        p = appendix_params()
        T = 3 * saturation_step_count(p)
        r1 = optimize_hidden_state(p, DELTA, T)
        r2 = optimize_hidden_state(p, DELTA, T)
        assert r1.epsilon == r2.epsilon and r1.tau_star == r2.tau_star
        assert r1.beta == r2.beta and r1.alpha_star == r2.alpha_star

    def test_monotone_in_problem_scalars(self):
        p = small_params()
        T = 5000
        base = optimize_hidden_state(p, DELTA, T).epsilon
        assert optimize_hidden_state(p.with_(sigma=2.0), DELTA, T).epsilon <= base
        assert optimize_hidden_state(p.with_(n=800), DELTA, T).epsilon <= base
        assert optimize_hidden_state(p.with_(Delta=2.0), DELTA, T).epsilon >= base
        assert optimize_hidden_state(p.with_(R=2.0), DELTA, T).epsilon >= base

    def test_convex_class_runs_and_dominates(self):
        p = small_params(convexity=ConvexityClass.CONVEX, m=0.0, eta=16.0)
        res = optimize_hidden_state(p, DELTA, 2000)
        comp = composition_baseline(p, DELTA, 2000, "beta1")
        assert res.epsilon <= comp.epsilon * (1 + 1e-12)

    def test_nonconvex_class_runs_and_dominates(self):
        p = small_params(convexity=ConvexityClass.NONCONVEX, m=0.0)
        res = optimize_hidden_state(p, DELTA, 2000)
        comp = composition_baseline(p, DELTA, 2000, "beta1")
        assert res.epsilon <= comp.epsilon * (1 + 1e-12)

    def test_t_zero(self):
        p = small_params()
        res = optimize_hidden_state(p, DELTA, 0)
        assert res.epsilon == pytest.approx(math.log(1 / DELTA) / 255.0, rel=1e-12)

    def test_requires_d_at_least_2k(self):
        p = small_params(d=15, K=8)
        with pytest.raises(ValidationError):
            optimize_hidden_state(p, DELTA, 10)


class TestClosedForm:
    def test_explicit_constant_bracketing(self):
        # optimizer attains the equal-split optimum: 1/sqrt(2) of the stated constant
        p = appendix_params()
        T = 4 * saturation_step_count(p)
        res = optimize_hidden_state(p, DELTA, T)
        consts = derived_constants(p, res.theta)
        for alpha in (1.02, 2.0, 24.0, 101.0, 256.0):
            rho = rho_for_schedule(p, res.schedule, alpha, consts)
            stated = 8 * alpha * p.Delta * p.R * math.sqrt(2 * p.d) / (p.eta * p.n * p.sigma**2)
            assert 0.5 * stated <= rho <= stated

    def test_optimizer_within_ten_percent_of_closed_form(self):
        p = appendix_params()
        W = saturation_step_count(p)
        for T in (W // 2, 2 * W, 4 * W):
            hid = optimize_hidden_state(p, DELTA, T)
            cf = closed_form_strongly_convex(p, DELTA, T)
            assert hid.epsilon <= cf.epsilon * 1.1

    def test_infinite_noise_drives_rho_to_zero(self):
        p = appendix_params(sigma=1e9)
        cf = closed_form_strongly_convex(p, DELTA, 10**6)
        floor = math.log(2 / DELTA) / 255.0
        assert cf.epsilon == pytest.approx(floor, rel=1e-6)

    def test_saturates_in_t(self):
        p = appendix_params()
        W = saturation_step_count(p)
        eps = [closed_form_strongly_convex(p, DELTA, T).epsilon for T in (4 * W, 8 * W, 32 * W)]
        assert eps[0] == eps[1] == eps[2]
        early = closed_form_strongly_convex(p, DELTA, W // 4).epsilon
        assert early < eps[0]

    def test_precondition_failures_are_listed(self):
        p = appendix_params(K=50, eta=50.0)  # K below the admissible floor
        with pytest.raises(PreconditionViolated, match="K must lie in"):
            closed_form_strongly_convex(p, DELTA, 1000)
        p2 = appendix_params(eta=100.0)  # eta != K/M
        with pytest.raises(PreconditionViolated, match="eta"):
            closed_form_strongly_convex(p2, DELTA, 1000)
        p3 = appendix_params(xi=1.0)
        with pytest.raises(PreconditionViolated, match="xi"):
            closed_form_strongly_convex(p3, DELTA, 1000)
        p4 = small_params(convexity=ConvexityClass.CONVEX, m=0.0)
        with pytest.raises(PreconditionViolated, match="strongly_convex"):
            closed_form_strongly_convex(p4, DELTA, 1000)


class TestCompositionBaseline:
    def test_t_zero_is_conversion_floor(self):
        p = small_params()
        res = composition_baseline(p, DELTA, 0, "beta1")
        assert res.epsilon == pytest.approx(math.log(1 / DELTA) / 255.0, rel=1e-12)

    def test_beta0_to_beta1_ratio_approaches_sqrt_d_over_k(self):
        # in the sqrt-dominated regime the two eps differ by sqrt(d/K);
        # sigma is placed so both optimal orders are interior to the grid
        p = small_params(sigma=13.7)
        T = 3000
        e1 = composition_baseline(p, DELTA, T, "beta1").epsilon
        e0 = composition_baseline(p, DELTA, T, "beta0").epsilon
        assert e0 / e1 == pytest.approx(math.sqrt(p.d / p.K), rel=0.05)

    def test_sqrt_t_growth(self):
        p = appendix_params()
        T = 2 * saturation_step_count(p)
        e1 = composition_baseline(p, DELTA, T, "beta1").epsilon
        e4 = composition_baseline(p, DELTA, 4 * T, "beta1").epsilon
        assert 1.9 <= e4 / e1 <= 2.1

    def test_rejects_unknown_variant(self):
        with pytest.raises(ValidationError):
            composition_baseline(small_params(), DELTA, 10, "beta2")


class TestOutputPerturbation:
    def test_independent_of_t(self):
        # signature has no T at all; confirm stability across params copies
        p = appendix_params()
        assert output_perturbation(p, DELTA).epsilon == output_perturbation(p, DELTA).epsilon

    def test_radius_doubling_quadruples_rho(self):
        p = appendix_params()
        e1, _ = output_perturbation(p, DELTA, alpha_grid=[2.0]).epsilon, None
        e2 = output_perturbation(p.with_(R=2.0), DELTA, alpha_grid=[2.0]).epsilon
        log_term = math.log(1 / DELTA)
        rho1 = e1 - log_term
        rho2 = e2 - log_term
        assert rho2 == pytest.approx(4 * rho1, rel=1e-12)

    def test_above_hidden_state_for_moderate_t(self):
        p = appendix_params()
        T = 4 * saturation_step_count(p)
        assert output_perturbation(p, DELTA).epsilon > optimize_hidden_state(p, DELTA, T).epsilon

    def test_below_composition_for_very_large_t(self):
        p = appendix_params()
        T = 3 * 10**10
        assert output_perturbation(p, DELTA).epsilon < composition_baseline(
            p, DELTA, T, "beta1"
        ).epsilon


class TestMinibatch:
    def test_full_batch_case_matches_exactly(self):
        p = appendix_params(batch=10**4)
        T = 3 * saturation_step_count(p)
        mb = minibatch_hidden_state(p, DELTA, T)
        full = optimize_hidden_state(appendix_params(), DELTA, T)
        assert mb.epsilon == full.epsilon
        assert mb.analysis == "minibatch_hidden_state"

    def test_subsampling_never_hurts(self):
        p_half = small_params(batch=200)
        p_full = small_params(batch=400)
        for T in (200, 5000, 20000):
            e_half = minibatch_hidden_state(p_half, DELTA, T).epsilon
            e_full = minibatch_hidden_state(p_full, DELTA, T).epsilon
            assert e_half <= e_full * (1 + 1e-9)

    def test_k_one_branches_coincide(self):
        from zodp.accountant import _minibatch_dir_curve
        from zodp.rdp import default_alpha_grid

        p = small_params(K=1, eta=1.0, batch=100)
        alphas = default_alpha_grid()[:40]
        q = p.batch / p.n
        base = p.sigma * p.batch / (2 * p.Delta)
        a = _minibatch_dir_curve(alphas, q, 0.5, p)
        from zodp.rdp import sgm_rdp_grid

        b = sgm_rdp_grid(alphas, q, math.sqrt(0.5) * base)
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_schedule_reported(self):
        p = small_params(batch=200)
        res = minibatch_hidden_state(p, DELTA, 20000)
        assert res.schedule is not None
        assert res.delta_p + res.delta_f == pytest.approx(DELTA, rel=1e-12)

    def test_requires_batch(self):
        with pytest.raises(ValidationError):
            minibatch_hidden_state(small_params(), DELTA, 10)


class TestAccountCurve:
    def test_singleton_grid_rows(self):
        p = small_params()
        rows = account_curve(p, DELTA, [100], analyses=("hidden_state", "composition_beta1"))
        assert len(rows) == 1
        T, results = rows[0]
        assert T == 100
        assert [r.analysis for r in results] == ["hidden_state", "composition_beta1", "min"]

    def test_min_column_is_pointwise_minimum(self):
        p = appendix_params()
        W = saturation_step_count(p)
        rows = account_curve(
            p,
            DELTA,
            [100, W, 4 * W],
            analyses=("hidden_state", "composition_beta1", "output_perturbation"),
        )
        for _, results in rows:
            eps_min = results[-1].epsilon
            assert all(eps_min <= r.epsilon for r in results[:-1])

    def test_hidden_column_nondecreasing_then_constant(self):
        p = appendix_params()
        W = saturation_step_count(p)
        grid = [100, W, 2 * W, 3 * W, 4 * W, 8 * W]
        rows = account_curve(p, DELTA, grid, analyses=("hidden_state",))
        eps = [results[0].epsilon for _, results in rows]
        assert all(b >= a - 1e-12 for a, b in zip(eps, eps[1:]))
        assert eps[-1] == pytest.approx(eps[-2], abs=1e-9)

    def test_threads_do_not_change_results(self):
        p = small_params()
        grid = [10, 100, 1000]
        serial = account_curve(p, DELTA, grid, analyses=("hidden_state", "composition_beta1"))
        threaded = account_curve(
            p, DELTA, grid, analyses=("hidden_state", "composition_beta1"), threads=4
        )
        for (_, rs), (_, rt) in zip(serial, threaded):
            for a, b in zip(rs, rt):
                assert a.epsilon == b.epsilon

    def test_rejects_bad_grid(self):
        with pytest.raises(ValidationError):
            account_curve(small_params(), DELTA, [10, 10], analyses=("hidden_state",))
        with pytest.raises(ValidationError):
            account_curve(small_params(), DELTA, [10], analyses=("nope",))
