"""Verification-harness behavior: determinism, sensitivity, reporting."""

import json

import numpy as np
import pytest

from zodp import zogd
from zodp.verify import (
    check_beta_identity,
    check_beta_utility_equivalence,
    check_iid_vs_orthonormal,
    check_lipschitz_tail,
    check_winf,
)


class TestBetaIdentity:
    def test_passes_at_default_shape(self):
        report = check_beta_identity(d=50, K=10, samples=20_000, seed=100)
        assert report.passed
        assert report.observed["ks_pvalue"] > 0.01

    def test_single_direction_case(self):
        report = check_beta_identity(d=100, K=1, samples=20_000, seed=101)
        assert report.passed
        assert abs(report.observed["mean"] - 0.01) < 3 * report.observed["mean_se"]

    def test_complete_frame_is_deterministic(self):
        report = check_beta_identity(d=2, K=2, samples=500, seed=102)
        assert report.passed
        assert report.observed["max_deviation_from_one"] <= 1e-9

    def test_deterministic_given_seed(self):
        r1 = check_beta_identity(d=30, K=5, samples=5_000, seed=103)
        r2 = check_beta_identity(d=30, K=5, samples=5_000, seed=103)
        assert r1 == r2


class TestLipschitzTail:
    def test_passes_at_acceptance_shape(self):
        from zodp.params import theta_star

        report = check_lipschitz_tail(
            d=10_000, K=100, c=0.1, theta=theta_star(0.1), samples=20_000, seed=104
        )
        assert report.passed
        assert report.observed["exceedance"] <= report.bound["exceedance_max"] + 1e-12

    def test_vacuous_bound_passes_trivially(self):
        report = check_lipschitz_tail(d=100, K=10, c=1.0, theta=0.0, samples=2_000, seed=105)
        assert report.bound["exceedance_max"] == 2.0
        assert report.passed

    def test_large_theta_threshold_above_one(self):
        report = check_lipschitz_tail(d=100, K=10, c=0.5, theta=5.0, samples=2_000, seed=106)
        assert report.observed["threshold"] > 1.0
        assert report.passed


class TestWinf:
    def test_zero_violations_small(self):
        report = check_winf(None, trials=30, T=60, seed=107)
        assert report.passed
        assert report.observed["violations"] == 0

    def test_identical_datasets_zero_distance(self):
        # replacement equal to the original collapses the pair
        from zodp.params import ConvexityClass, ProblemParams
        from zodp.zogd import make_quadratic_problem, run_adjacent_pair

        p = ProblemParams(
            d=16, n=20, K=4, eta=4.0, sigma=0.2, Delta=1.0, R=1.0, M=1.0, m=0.9,
            xi=1e-4, convexity=ConvexityClass.STRONGLY_CONVEX,
        )
        loss, X = make_quadratic_problem(p.d, p.n, p.M, p.m, 0.05, seed=1)
        ta, tb = run_adjacent_pair(p, loss, X, 0, X[0], 40, seed=2)
        assert np.array_equal(ta.iterates, tb.iterates)


class TestBetaUtilityEquivalence:
    def test_passes_with_noise(self):
        report = check_beta_utility_equivalence(
            None, beta_list=[0.0, 0.5, 1.0], trials=60, T=40, seed=108
        )
        assert report.passed

    def test_noiseless_runs_agree_exactly(self):
        from zodp.verify import _default_sim_params

        report = check_beta_utility_equivalence(
            _default_sim_params(sigma=0.0), beta_list=[0.0, 1.0], trials=5, T=20, seed=109
        )
        means = report.observed["mean_final_loss"]
        assert means[0] == pytest.approx(means[1], abs=1e-12)

    def test_detects_mis_scaled_noise(self, monkeypatch):
        # variance mutation sigma^2 -> sigma on the isotropic component
        # breaks the beta-independence of the injected noise
        def bad_iso(sigma, beta):
            return (1.0 - beta) * sigma

        monkeypatch.setattr(zogd, "_iso_noise_std", bad_iso)
        report = check_beta_utility_equivalence(
            None, beta_list=[0.0, 0.5, 1.0], trials=60, T=40, seed=108
        )
        assert not report.passed


class TestIidVsOrthonormal:
    def test_orthonormal_concentrates_better(self):
        report = check_iid_vs_orthonormal(d=1000, K=50, c=0.5, samples=3_000, seed=110)
        assert report.passed
        assert report.observed["q99_orthonormal"] <= report.observed["q99_iid"]

    def test_reports_both_cdfs(self):
        report = check_iid_vs_orthonormal(d=200, K=10, c=0.5, samples=2_000, seed=111)
        assert len(report.observed["quantiles_orthonormal"]) == 99
        assert len(report.observed["quantiles_iid"]) == 99

    def test_single_direction_modes_agree(self):
        # K = 1: both modes are the same sphere law
        report = check_iid_vs_orthonormal(d=300, K=1, c=0.5, samples=30_000, seed=112)
        q_o = np.array(report.observed["quantiles_orthonormal"])
        q_i = np.array(report.observed["quantiles_iid"])
        assert np.max(np.abs(q_o - q_i)) < 5e-3


def test_report_serializes_to_json():
    report = check_beta_identity(d=20, K=4, samples=2_000, seed=113)
    blob = json.loads(report.to_json())
    assert blob["name"] == "beta_identity"
    assert blob["passed"] is True
    assert blob["seed"] == 113
