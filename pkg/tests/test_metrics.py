import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from proxlangevin.linops import make_gaussian_blur, make_uniform_blur
from proxlangevin.metrics import (
    BoundParams,
    DownsampledStd,
    FourierModeSelector,
    KStarTracker,
    RunningMoments,
    autocorrelation,
    bound_decreasing_errors,
    bound_dual_wasserstein,
    bound_dual_wasserstein_opt,
    bound_fixed_step,
    fourier_mode_series,
    integrated_autocorr_time,
    k_star,
    moments_merge,
    moments_update,
    psnr,
    std_map_downsampled,
    wasserstein2_sq_1d,
)


def w2_sq_lp_oracle(a, b):
    """Exact squared W2 between two uniform empirical measures via an LP."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = a.size, b.size
    cost = (a[:, None] - b[None, :]) ** 2
    A_eq = []
    b_eq = []
    for i in range(na):
        row = np.zeros((na, nb))
        row[i, :] = 1.0
        A_eq.append(row.ravel())
        b_eq.append(1.0 / na)
    for j in range(nb):
        row = np.zeros((na, nb))
        row[:, j] = 1.0
        A_eq.append(row.ravel())
        b_eq.append(1.0 / nb)
    res = linprog(cost.ravel(), A_eq=np.array(A_eq), b_eq=np.array(b_eq),
                  bounds=(0, None), method="highs")
    assert res.success
    return res.fun


class TestWasserstein1D:
    def test_identical_sets(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal(20)
        assert wasserstein2_sq_1d(a, a.copy()) == 0.0

    def test_single_atoms(self):
        assert wasserstein2_sq_1d([0.0], [3.0]) == pytest.approx(9.0)

    def test_two_atom_shift(self):
        assert wasserstein2_sq_1d([0.0, 1.0], [1.0, 2.0]) == pytest.approx(1.0)

    def test_matches_lp_oracle_small_sets(self):
        rng = np.random.default_rng(1)
        for na, nb in itertools.product(range(1, 7), range(1, 7)):
            a = rng.standard_normal(na)
            b = rng.standard_normal(nb)
            got = wasserstein2_sq_1d(a, b)
            want = w2_sq_lp_oracle(a, b)
            assert got == pytest.approx(want, rel=1e-7, abs=1e-9)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = rng.standard_normal(rng.integers(2, 30))
            b = rng.standard_normal(rng.integers(2, 30))
            c = rng.standard_normal(rng.integers(2, 30))
            dab = np.sqrt(wasserstein2_sq_1d(a, b))
            dbc = np.sqrt(wasserstein2_sq_1d(b, c))
            dac = np.sqrt(wasserstein2_sq_1d(a, c))
            assert dac <= dab + dbc + 1e-9

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            wasserstein2_sq_1d([], [1.0])


TOY = BoundParams(lambda_F=1.0, lambda_Gstar=0.0, L=1.0, d=1, Ctilde=3.0,
                  W0_sq=0.5)


class TestBounds:
    def test_fixed_step_plateau(self):
        gamma, eps = 0.25, 0.1
        plateau = gamma * TOY.Ctilde / TOY.lambda_F + 2 * eps / TOY.lambda_F
        val = bound_fixed_step(TOY, gamma, 10_000, eps)
        assert val == pytest.approx(plateau, rel=1e-10)

    def test_toy_constant_value(self):
        # d=1, L=1, grad of the scalar prior has unit magnitude a.e., so
        # Ctilde = 2*1*1 + 1 = 3; check the bound assembles it correctly
        val = bound_fixed_step(TOY, 0.25, 0, 0.0)
        assert val == pytest.approx(TOY.W0_sq + 0.25 * 3.0)

    def test_eps_zero_recovers_exact_plateau(self):
        val = bound_fixed_step(TOY, 0.1, 10_000, 0.0)
        assert val == pytest.approx(0.1 * 3.0)

    def test_monotonicity(self):
        vals_k = [bound_fixed_step(TOY, 0.2, K, 0.05) for K in (1, 5, 50, 500)]
        assert all(a >= b for a, b in zip(vals_k, vals_k[1:]))
        vals_e = [bound_fixed_step(TOY, 0.2, 10, e) for e in (0.0, 0.05, 0.2)]
        assert all(a <= b for a, b in zip(vals_e, vals_e[1:]))

    def test_requires_strong_convexity_and_small_step(self):
        weak = BoundParams(lambda_F=0.0, lambda_Gstar=0.0, L=1.0, d=1,
                           Ctilde=3.0, W0_sq=0.5)
        with pytest.raises(ValueError):
            bound_fixed_step(weak, 0.25, 10, 0.0)
        with pytest.raises(ValueError):
            bound_fixed_step(TOY, 1.5, 10, 0.0)

    def test_constant_errors_reduce_to_fixed(self):
        K, gamma, eps = 50, 0.2, 0.03
        seq = np.full(K, eps)
        assert bound_decreasing_errors(TOY, gamma, K, seq) == pytest.approx(
            bound_fixed_step(TOY, gamma, K, eps)
        )

    def test_harmonic_errors_vanish(self):
        gamma, c = 0.2, 1.0
        vals = []
        for K in (10, 1000, 100_000):
            seq = c / np.arange(1, K + 1)
            vals.append(
                bound_decreasing_errors(TOY, gamma, K, seq) - gamma * 3.0
            )
        assert vals[0] > vals[1] > vals[2]
        assert vals[2] < 1e-3

    def test_rejects_increasing_sequence(self):
        with pytest.raises(ValueError):
            bound_decreasing_errors(TOY, 0.2, 3, [0.1, 0.2, 0.3])

    def test_dual_bound_theta_zero_formula(self):
        gamma, eps, K = 0.25, 0.1, 100
        val = bound_dual_wasserstein(TOY, gamma, K, eps, theta=0.0)
        want = TOY.W0_sq / (gamma**2 * K) + (3.0 * gamma + 2 * eps) / gamma
        assert val == pytest.approx(want)

    def test_dual_bound_optimal_theta_zero_when_no_dual_convexity(self):
        val, theta = bound_dual_wasserstein_opt(TOY, 0.25, 1_000_000, 0.1)
        assert theta == 0.0
        # plateau value Ctilde + 2 eps / gamma in the K -> inf limit
        assert val == pytest.approx(3.0 + 2 * 0.1 / 0.25, rel=1e-3)

    def test_dual_bound_optimization_never_worse(self):
        params = BoundParams(lambda_F=0.5, lambda_Gstar=2.0, L=1.0, d=4,
                             Ctilde=10.0, W0_sq=1.0)
        for eps in (0.0, 0.01, 1.0):
            opt, _ = bound_dual_wasserstein_opt(params, 0.5, 100, eps)
            assert opt <= bound_dual_wasserstein(params, 0.5, 100, eps, theta=0.0) + 1e-12


class TestPsnr:
    def test_identical_is_inf(self):
        img = np.random.default_rng(3).random((4, 4))
        assert psnr(img, img) == np.inf

    def test_constant_offset(self):
        ref = np.zeros((8, 8))
        img = np.full((8, 8), 0.1)
        assert psnr(img, ref, peak=1.0) == pytest.approx(20.0)

    def test_known_mse(self):
        ref = np.zeros(1000)
        img = np.full(1000, np.sqrt(1e-3))
        assert psnr(img, ref, peak=1.0) == pytest.approx(30.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((2, 2)), np.zeros((3, 3)))


class TestRunningMoments:
    def test_single_sample(self):
        acc = moments_update(RunningMoments(), np.array([2.0, -1.0]))
        np.testing.assert_allclose(acc.mean, [2.0, -1.0])
        with pytest.raises(ValueError):
            acc.variance()

    def test_three_samples(self):
        acc = RunningMoments()
        for v in (1.0, 2.0, 3.0):
            acc.update(np.array([v]))
        assert acc.mean[0] == pytest.approx(2.0)
        assert acc.variance()[0] == pytest.approx(1.0)

    def test_merge_equals_sequential(self):
        a = RunningMoments()
        for v in (1.0, 2.0):
            a.update(np.array([v]))
        b = moments_update(RunningMoments(), np.array([3.0]))
        merged = moments_merge(a, b)
        seq = RunningMoments()
        for v in (1.0, 2.0, 3.0):
            seq.update(np.array([v]))
        assert abs(merged.mean[0] - seq.mean[0]) < 1e-12
        assert abs(merged.variance()[0] - seq.variance()[0]) < 1e-12

    def test_merge_associative_randomized(self):
        rng = np.random.default_rng(4)
        chunks = [rng.standard_normal((rng.integers(1, 8), 3)) for _ in range(3)]
        accs = []
        for chunk in chunks:
            acc = RunningMoments()
            for row in chunk:
                acc.update(row)
            accs.append(acc)
        left = moments_merge(moments_merge(accs[0], accs[1]), accs[2])
        right = moments_merge(accs[0], moments_merge(accs[1], accs[2]))
        np.testing.assert_allclose(left.mean, right.mean, atol=1e-12)
        np.testing.assert_allclose(left.variance(), right.variance(), atol=1e-12)


class TestDownsampledStd:
    def test_factor_one_is_plain_std(self):
        rng = np.random.default_rng(5)
        samples = [rng.random((4, 4)) for _ in range(30)]
        got = std_map_downsampled(samples, 1)
        want = np.std(np.array(samples), axis=0, ddof=1)
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_constant_stream_zero(self):
        img = np.random.default_rng(6).random((4, 4))
        got = std_map_downsampled([img, img.copy(), img.copy()], 2)
        np.testing.assert_allclose(got, 0.0, atol=1e-12)

    def test_iid_noise_pooling_halves_std(self):
        rng = np.random.default_rng(7)
        n = 10_000
        acc = DownsampledStd(2)
        for _ in range(n):
            acc.update(rng.standard_normal((16, 16)))
        stds = acc.result()
        # pooled pixels average 4 iid N(0,1) values: std 1/2; each of the
        # 64 independent estimates has standard error ~ 0.5/sqrt(2n)
        se_mean = 0.5 / np.sqrt(2 * n) / np.sqrt(stds.size)
        assert abs(stds.mean() - 0.5) <= 3 * se_mean

    def test_indivisible_shape_rejected(self):
        with pytest.raises(ValueError):
            std_map_downsampled([np.zeros((5, 5))] * 3, 2)


class TestAutocorrelation:
    def test_constant_series_nan_sentinel(self):
        rho = autocorrelation(np.full(100, 1.5), 10)
        assert np.all(np.isnan(rho))

    def test_white_noise(self):
        rng = np.random.default_rng(8)
        n = 20_000
        rho = autocorrelation(rng.standard_normal(n), 20)
        assert rho[0] == pytest.approx(1.0)
        assert np.max(np.abs(rho[1:])) <= 3.0 / np.sqrt(n)

    def test_ar1_matches_theory(self):
        rng = np.random.default_rng(9)
        a, n = 0.6, 100_000
        x = np.empty(n)
        x[0] = 0.0
        noise = rng.standard_normal(n)
        for t in range(1, n):
            x[t] = a * x[t - 1] + noise[t]
        rho = autocorrelation(x, 10)
        for ell in range(1, 11):
            band = 3 * np.sqrt((1 + 2 * np.sum(rho[1:ell] ** 2)) / n)
            assert abs(rho[ell] - a**ell) <= band + 0.01

    def test_integrated_time_of_ar1(self):
        rng = np.random.default_rng(10)
        a, n = 0.5, 200_000
        x = np.empty(n)
        x[0] = 0.0
        noise = rng.standard_normal(n)
        for t in range(1, n):
            x[t] = a * x[t - 1] + noise[t]
        tau = integrated_autocorr_time(x, 200)
        assert tau == pytest.approx((1 + a) / (1 - a), rel=0.1)

    def test_short_series_rejected(self):
        with pytest.raises(ValueError):
            autocorrelation(np.zeros(5), 10)


class TestFourierModes:
    def test_identity_blur_lexicographic_tiebreak(self):
        sel = FourierModeSelector(make_uniform_blur(1), (4, 4))
        assert sel.frequencies[0] == (0, 0)
        assert sel.frequencies[1] == (2, 0)  # flat index 8 of 16
        assert sel.frequencies[2] == (3, 3)

    def test_gaussian_blur_slowest_is_most_attenuated(self):
        kernel = make_gaussian_blur(5, 1.5)
        shape = (16, 16)
        sel = FourierModeSelector(kernel, shape)
        mags = np.abs(kernel.spectrum(shape)) ** 2
        assert sel.eigenvalues[0] == pytest.approx(mags.min())
        assert sel.eigenvalues[2] == pytest.approx(mags.max())
        assert sel.eigenvalues[0] <= sel.eigenvalues[1] <= sel.eigenvalues[2]

    def test_projection_of_pure_mode(self):
        kernel = make_gaussian_blur(5, 1.5)
        sel = FourierModeSelector(kernel, (16, 16))
        series = fourier_mode_series([sel.modes[0] * 2.5], kernel, (16, 16))
        assert series["slowest"][0] == pytest.approx(2.5)


class TestKStar:
    def test_reference_equals_first_sample(self):
        ref = np.array([1.0, 2.0])
        assert k_star([ref.copy(), ref + 5], ref, delta=1e-6) == 1

    def test_infinite_delta(self):
        ref = np.array([1.0])
        assert k_star([np.array([100.0])], ref, delta=np.inf) == 1

    def test_monotone_in_delta(self):
        ref = np.array([1.0])
        means = [np.array([1.0 + 1.0 / k]) for k in range(1, 200)]
        ks = [k_star(means, ref, d) for d in (0.5, 0.1, 0.01)]
        assert ks[0] <= ks[1] <= ks[2]

    def test_not_reached_is_none(self):
        ref = np.array([1.0])
        assert k_star([np.array([2.0])] * 5, ref, delta=1e-9) is None

    def test_zero_reference_rejected(self):
        with pytest.raises(ValueError):
            k_star([np.array([1.0])], np.zeros(1), 0.1)

    def test_tracker_streams(self):
        ref = np.full((2,), 1.0)
        tracker = KStarTracker(ref, deltas=[0.5, 0.05])
        for k in range(1, 100):
            mean = ref * (1.0 + 1.0 / k)
            tracker.update(k, mean, inner_total=10 * k)
        # relative error is (1/k)*||ref||/||ref|| = 1/k; the 1/20 vs 0.05
        # comparison sits exactly on a float boundary
        assert tracker.reached[0.5] == 2
        assert tracker.reached[0.05] in (20, 21)
        assert tracker.inner_at[0.05] == 10 * tracker.reached[0.05]
