import numpy as np
import pytest

from proxlangevin.linops import (
    BlurOperator,
    IdentityOperator,
    WaveletDomainOperator,
    conv_adjoint,
    conv_apply,
    conv_spectrum_bounds,
    dwt_forward,
    dwt_inverse,
    grad_adjoint,
    grad_apply,
    make_gaussian_blur,
    make_uniform_blur,
)


def direct_periodic_conv(taps, image):
    """Double-loop periodic convolution, the oracle for the FFT path."""
    kh, kw = taps.shape
    h, w = image.shape
    ch, cw = kh // 2, kw // 2
    out = np.zeros_like(image)
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for a in range(kh):
                for b in range(kw):
                    acc += taps[a, b] * image[(i - (a - ch)) % h, (j - (b - cw)) % w]
            out[i, j] = acc
    return out


class TestGaussianKernel:
    def test_size_one_is_identity(self):
        k = make_gaussian_blur(1, 2.7)
        assert k.taps.shape == (1, 1)
        assert k.taps[0, 0] == pytest.approx(1.0)

    def test_5x5_matches_sampled_gaussian(self):
        k = make_gaussian_blur(5, 1.5)
        grid = np.arange(-2, 3)
        ii, jj = np.meshgrid(grid, grid, indexing="ij")
        expected = np.exp(-(ii**2 + jj**2) / (2 * 1.5**2))
        expected /= expected.sum()
        np.testing.assert_allclose(k.taps, expected, rtol=1e-14)
        assert abs(k.taps.sum() - 1.0) < 1e-12
        assert k.taps[2, 2] == k.taps.max()

    def test_even_symmetry(self):
        k = make_gaussian_blur(7, 0.9).taps
        np.testing.assert_allclose(k, k[::-1, ::-1])
        np.testing.assert_allclose(k, k.T)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            make_gaussian_blur(4, 1.0)
        with pytest.raises(ValueError):
            make_gaussian_blur(5, 0.0)
        with pytest.raises(ValueError):
            make_gaussian_blur(5, -1.0)


class TestUniformKernel:
    def test_sizes(self):
        np.testing.assert_allclose(make_uniform_blur(1).taps, [[1.0]])
        np.testing.assert_allclose(make_uniform_blur(3).taps, np.full((3, 3), 1 / 9))
        np.testing.assert_allclose(make_uniform_blur(5).taps, np.full((5, 5), 0.04))

    def test_rejects_even_size(self):
        with pytest.raises(ValueError):
            make_uniform_blur(2)


class TestConvolution:
    def test_identity_kernel(self):
        rng = np.random.default_rng(0)
        img = rng.standard_normal((6, 7))
        k = make_uniform_blur(1)
        np.testing.assert_allclose(conv_apply(k, img), img, atol=1e-13)

    def test_uniform_on_constant(self):
        k = make_uniform_blur(3)
        img = np.full((8, 8), 3.25)
        np.testing.assert_allclose(conv_apply(k, img), img, atol=1e-12)

    def test_matches_direct_convolution(self):
        rng = np.random.default_rng(1)
        img = rng.standard_normal((8, 8))
        k = make_gaussian_blur(5, 1.5)
        np.testing.assert_allclose(
            conv_apply(k, img), direct_periodic_conv(k.taps, img), atol=1e-12
        )

    def test_adjoint_identity_against_direct_oracle(self):
        rng = np.random.default_rng(2)
        k = make_gaussian_blur(3, 0.8)
        # asymmetric kernel exercises the flip in the adjoint
        k = type(k)(k.taps + 0.01 * rng.standard_normal((3, 3)))
        x = rng.standard_normal((8, 8))
        y = rng.standard_normal((8, 8))
        ax = conv_apply(k, x)
        aty = conv_adjoint(k, y)
        lhs = np.sum(ax * y)
        rhs = np.sum(x * aty)
        assert abs(lhs - rhs) <= 1e-10 * np.linalg.norm(x) * np.linalg.norm(y)
        np.testing.assert_allclose(ax, direct_periodic_conv(k.taps, x), atol=1e-12)

    def test_shape_mismatch_rejected(self):
        k = make_gaussian_blur(5, 1.0)
        with pytest.raises(ValueError):
            conv_apply(k, np.zeros((3, 3)))


class TestSpectrumBounds:
    def test_identity(self):
        assert conv_spectrum_bounds(make_uniform_blur(1), (8, 8)) == (1.0, 1.0)

    def test_uniform_dc_mode(self):
        lo, hi = conv_spectrum_bounds(make_uniform_blur(3), (8, 8))
        assert hi == pytest.approx(1.0, abs=1e-12)
        assert 0 <= lo < hi

    def test_matches_dense_circulant_eigenvalues(self):
        k = make_gaussian_blur(5, 1.5)
        shape = (16, 16)
        d = shape[0] * shape[1]
        dense = np.zeros((d, d))
        for col in range(d):
            basis = np.zeros(d)
            basis[col] = 1.0
            dense[:, col] = direct_periodic_conv(k.taps, basis.reshape(shape)).ravel()
        eigs = np.linalg.eigvalsh(dense.T @ dense)
        lo, hi = conv_spectrum_bounds(k, shape)
        assert lo == pytest.approx(eigs.min(), rel=1e-9, abs=1e-12)
        assert hi == pytest.approx(eigs.max(), rel=1e-9)

    def test_kernel_larger_than_image_rejected(self):
        with pytest.raises(ValueError):
            conv_spectrum_bounds(make_gaussian_blur(9, 1.0), (4, 4))


class TestWavelet:
    def test_constant_image_single_coefficient(self):
        img = np.full((16, 16), 0.7)
        c = dwt_forward(img, 4)
        assert abs(c[0, 0] - 0.7 * 16) < 1e-12  # norm-preserving approx coeff
        c[0, 0] = 0.0
        np.testing.assert_allclose(c, 0.0, atol=1e-12)

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        img = rng.standard_normal((16, 16))
        back = dwt_inverse(dwt_forward(img, 4), 4)
        assert np.max(np.abs(back - img)) < 1e-10

    def test_isometry(self):
        rng = np.random.default_rng(4)
        img = rng.standard_normal((32, 32))
        coeffs = dwt_forward(img, 3)
        assert abs(np.linalg.norm(coeffs) - np.linalg.norm(img)) < 1e-10

    def test_indivisible_shape_rejected(self):
        with pytest.raises(ValueError):
            dwt_forward(np.zeros((12, 12)), 3)


class TestGradient:
    def test_constant_image_zero_field(self):
        field = grad_apply(np.full((5, 5), 2.0))
        np.testing.assert_allclose(field, 0.0)

    def test_neumann_boundary(self):
        img = np.arange(12.0).reshape(3, 4)
        field = grad_apply(img)
        np.testing.assert_allclose(field[0][:, -1], 0.0)
        np.testing.assert_allclose(field[1][-1, :], 0.0)

    def test_adjoint_matches_dense_transpose(self):
        rng = np.random.default_rng(5)
        shape = (8, 8)
        d = shape[0] * shape[1]
        rows = []
        for col in range(d):
            basis = np.zeros(d)
            basis[col] = 1.0
            rows.append(grad_apply(basis.reshape(shape)).ravel())
        dense = np.array(rows).T  # (2*d, d) matrix of the gradient map
        x = rng.standard_normal(d)
        p = rng.standard_normal(2 * d)
        np.testing.assert_allclose(
            grad_adjoint(p.reshape((2,) + shape)).ravel(), dense.T @ p, atol=1e-12
        )
        assert abs(np.dot(dense @ x, p) - np.dot(x, dense.T @ p)) < 1e-10

    def test_norm_bound_by_power_iteration(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((16, 16))
        for _ in range(200):
            x = grad_adjoint(grad_apply(x))
            x /= np.linalg.norm(x)
        lam = np.sum(x * grad_adjoint(grad_apply(x)))
        assert lam <= 8.0 + 1e-9

    def test_degenerate_shape_rejected(self):
        with pytest.raises(ValueError):
            grad_apply(np.zeros((1, 5)))


class TestRandomizedAdjointness:
    def test_all_operator_pairs(self):
        rng = np.random.default_rng(7)
        blur = BlurOperator(make_gaussian_blur(5, 1.2), (16, 16))
        wave = WaveletDomainOperator(blur, levels=2)
        ident = IdentityOperator()
        for op in (blur, wave, ident):
            for _ in range(5):
                x = rng.standard_normal((16, 16))
                y = rng.standard_normal((16, 16))
                lhs = np.sum(op.apply(x) * y)
                rhs = np.sum(x * op.adjoint(y))
                assert abs(lhs - rhs) <= 1e-10 * np.linalg.norm(x) * np.linalg.norm(y)

    def test_wavelet_domain_spectrum_equals_blur(self):
        blur = BlurOperator(make_gaussian_blur(5, 1.5), (16, 16))
        wave = WaveletDomainOperator(blur, levels=2)
        assert wave.spectrum_bounds() == blur.spectrum_bounds()
