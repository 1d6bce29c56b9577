import numpy as np
import pytest

from elfsim.metrics import (
    GaussianLaw,
    divergence_report,
    empirical_moments,
    gaussian_fisher,
    gaussian_kl,
    gaussian_w2,
    grad_second_moment_check,
    grad_second_moment_check_law,
    lmc_gaussian_propagation,
    lmc_gaussian_stationary,
    pinsker_tv_bound,
    psd_sqrt,
    talagrand_w2_bound,
)
from elfsim.potentials import GaussianTarget


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def law1(var, mean=0.0):
    return GaussianLaw(mean=np.array([mean]), cov=np.array([[var]]))


def random_law(d, seed):
    g = rng(seed)
    q, _ = np.linalg.qr(g.standard_normal((d, d)))
    cov = (q * g.uniform(0.5, 2.0, d)) @ q.T
    return GaussianLaw(mean=g.standard_normal(d), cov=0.5 * (cov + cov.T))


class TestPsdSqrt:
    def test_diagonal(self):
        s = psd_sqrt(np.diag([4.0, 9.0]))
        assert np.allclose(s, np.diag([2.0, 3.0]))

    def test_round_trip_random(self):
        for seed in range(4):
            cov = random_law(3, seed).cov
            s = psd_sqrt(cov)
            assert np.allclose(s @ s, cov, atol=1e-10)
            assert np.allclose(s, s.T, atol=1e-12)

    def test_tiny_negative_eigenvalue_clipped(self):
        mat = np.array([[1.0, 1.0], [1.0, 1.0]]) - 1e-15 * np.eye(2)
        s = psd_sqrt(mat)
        assert np.all(np.isfinite(s))

    def test_genuinely_indefinite_rejected(self):
        with pytest.raises(ValueError, match="not PSD"):
            psd_sqrt(np.diag([1.0, -0.5]))


class TestKL:
    def test_frozen_unit_vs_double_variance(self):
        # KL(N(0,1) || N(0,2)) = 0.5*(1/2 - 1 + ln 2)
        expected = 0.5 * (0.5 - 1.0 + np.log(2.0))
        assert gaussian_kl(law1(1.0), law1(2.0)) == pytest.approx(expected, abs=1e-14)

    def test_zero_at_equality(self):
        a = random_law(3, 1)
        assert gaussian_kl(a, a) == pytest.approx(0.0, abs=1e-12)

    def test_nonnegative(self):
        for seed in range(5):
            a, b = random_law(2, seed), random_law(2, seed + 100)
            assert gaussian_kl(a, b) >= 0.0

    def test_mean_shift_term(self):
        # equal covariances: KL = 0.5 * shift^T Sigma^-1 shift
        a = law1(2.0, mean=1.0)
        b = law1(2.0, mean=0.0)
        assert gaussian_kl(a, b) == pytest.approx(0.5 * 1.0 / 2.0, abs=1e-14)


class TestW2:
    def test_mean_shift_only(self):
        a = law1(1.0, mean=3.0)
        b = law1(1.0, mean=0.0)
        assert gaussian_w2(a, b) == pytest.approx(3.0, abs=1e-12)

    def test_commuting_covariances(self):
        a = GaussianLaw(np.zeros(2), np.diag([1.0, 4.0]))
        b = GaussianLaw(np.zeros(2), np.diag([9.0, 1.0]))
        # sqrt((1-3)^2 + (2-1)^2)
        assert gaussian_w2(a, b) == pytest.approx(np.sqrt(5.0), abs=1e-12)

    def test_symmetry(self):
        a, b = random_law(3, 2), random_law(3, 3)
        assert gaussian_w2(a, b) == pytest.approx(gaussian_w2(b, a), abs=1e-10)


class TestFisher:
    def test_one_dimensional_closed_form(self):
        # scores -x/s2 vs -x: E_a[x^2 (1/s2 - 1)^2] = s2*(1/s2-1)^2
        s2 = 1.7
        expected = s2 * (1.0 / s2 - 1.0) ** 2
        assert gaussian_fisher(law1(s2), law1(1.0)) == pytest.approx(expected, abs=1e-12)

    def test_zero_at_equality(self):
        a = random_law(2, 4)
        assert gaussian_fisher(a, a) == pytest.approx(0.0, abs=1e-12)

    def test_matches_monte_carlo(self):
        a, b = random_law(2, 5), random_law(2, 6)
        g = rng(7)
        xs = g.multivariate_normal(a.mean, a.cov, size=200_000, method="cholesky")
        pa = np.linalg.inv(a.cov)
        pb = np.linalg.inv(b.cov)
        diffs = -(xs - a.mean) @ pa.T + (xs - b.mean) @ pb.T
        vals = np.einsum("ij,ij->i", diffs, diffs)
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        assert gaussian_fisher(a, b) == pytest.approx(vals.mean(), abs=4 * se)


class TestBounds:
    def test_pinsker(self):
        assert pinsker_tv_bound(0.08) == pytest.approx(0.2)
        assert pinsker_tv_bound(0.0) == 0.0

    def test_talagrand(self):
        assert talagrand_w2_bound(0.5, mu=4.0) == pytest.approx(0.5)

    def test_bounds_dominate_true_divergences(self):
        a, b = random_law(2, 8), random_law(2, 9)
        kl = gaussian_kl(a, b)
        mu = float(np.linalg.eigvalsh(np.linalg.inv(b.cov))[0])
        assert gaussian_w2(a, b) <= talagrand_w2_bound(kl, mu) + 1e-12


class TestEmpiricalMoments:
    def test_matches_numpy_estimators(self):
        xs = rng(10).standard_normal((500, 3))
        law, regularized = empirical_moments(xs)
        assert not regularized
        assert np.allclose(law.mean, xs.mean(axis=0), atol=1e-12)
        assert np.allclose(law.cov, np.cov(xs, rowvar=False), atol=1e-10)

    def test_degenerate_sample_regularized(self):
        xs = np.zeros((50, 2))
        law, regularized = empirical_moments(xs)
        assert regularized
        assert np.all(np.linalg.eigvalsh(law.cov) > 0)

    def test_needs_enough_rows(self):
        with pytest.raises(ValueError, match="rows"):
            empirical_moments(np.zeros((1, 2)))


class TestDivergenceReport:
    def test_fields_consistent(self):
        a, b = random_law(2, 11), random_law(2, 12)
        rep = divergence_report(a, b, mu=0.7)
        assert rep.kl == pytest.approx(gaussian_kl(a, b))
        assert rep.w2 == pytest.approx(gaussian_w2(a, b))
        assert rep.fisher == pytest.approx(gaussian_fisher(a, b))
        assert rep.tv_bound == pytest.approx(pinsker_tv_bound(rep.kl))
        assert rep.w2_bound == pytest.approx(talagrand_w2_bound(rep.kl, 0.7))

    def test_without_mu_no_w2_bound(self):
        a, b = random_law(2, 13), random_law(2, 14)
        assert divergence_report(a, b).w2_bound is None


class TestLmcGaussianLaw:
    def test_stationary_variance_frozen(self):
        # 1-d unit target, gamma 0.1: stationary variance 1/(1 - gamma/2)
        st = lmc_gaussian_stationary(law1(1.0), gamma=0.1)
        assert st.cov[0, 0] == pytest.approx(1.0 / 0.95, abs=1e-12)
        assert st.mean[0] == pytest.approx(0.0, abs=1e-14)

    def test_propagation_approaches_stationary(self):
        target = random_law(2, 15)
        rho0 = GaussianLaw(np.zeros(2), np.eye(2))
        laws = lmc_gaussian_propagation(target, rho0, gamma=0.05, rounds=2000)
        st = lmc_gaussian_stationary(target, gamma=0.05)
        assert len(laws) == 2001
        assert np.allclose(laws[-1].cov, st.cov, atol=1e-8)
        assert np.allclose(laws[-1].mean, st.mean, atol=1e-8)

    def test_one_step_recursion(self):
        target = law1(1.0, mean=2.0)
        rho0 = law1(4.0, mean=-1.0)
        gamma = 0.2
        laws = lmc_gaussian_propagation(target, rho0, gamma, rounds=1)
        # x' = x - gamma*(x - 2) + sqrt(2 gamma) Z
        assert laws[1].mean[0] == pytest.approx(-1.0 - gamma * (-1.0 - 2.0))
        assert laws[1].cov[0, 0] == pytest.approx((1 - gamma) ** 2 * 4.0 + 2 * gamma)

    def test_stationary_bias_vanishes_with_gamma(self):
        target = random_law(2, 16)
        kls = [gaussian_kl(lmc_gaussian_stationary(target, g), target)
               for g in (0.2, 0.1, 0.05, 0.025)]
        assert all(a > b for a, b in zip(kls, kls[1:]))


class TestGradSecondMoment:
    def test_law_version_matches_sampling(self):
        t = GaussianTarget.random(n=3, d=2, rng=rng(17))
        pot = t.potential()
        law = random_law(2, 18)
        exact = grad_second_moment_check_law(law, pot)
        xs = rng(19).multivariate_normal(law.mean, law.cov, size=400_000,
                                         method="cholesky")
        sampled = grad_second_moment_check(xs, pot)
        assert sampled.lhs == pytest.approx(exact.lhs, rel=0.02)
        assert sampled.rhs == pytest.approx(exact.rhs, rel=0.02)

    def test_holds_for_target_against_itself(self):
        t = GaussianTarget.random(n=2, d=3, rng=rng(20))
        pot = t.potential()
        rep = grad_second_moment_check_law(pot.target_law, pot)
        # at the target the Fisher term vanishes and lhs = E||grad F||^2 <= rhs
        assert rep.fisher == pytest.approx(0.0, abs=1e-10)
        assert rep.holds
