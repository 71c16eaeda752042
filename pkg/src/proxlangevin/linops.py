"""Linear operators on image grids.

Periodic convolutions (diagonalized by the 2D DFT), the orthogonal Haar
wavelet transform, and the forward-difference gradient / negative
divergence pair used by total-variation solvers. Operators are immutable
after construction and safe to share across concurrently running chains.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ConvolutionKernel",
    "make_gaussian_blur",
    "make_uniform_blur",
    "conv_apply",
    "conv_adjoint",
    "conv_spectrum_bounds",
    "dwt_forward",
    "dwt_inverse",
    "grad_apply",
    "grad_adjoint",
    "LinearOperator",
    "IdentityOperator",
    "BlurOperator",
    "WaveletDomainOperator",
]

GRAD_NORM_SQ_BOUND = 8.0  # operator-norm bound ||B||^2 for the gradient pair


class ConvolutionKernel:
    """Small spatial-domain kernel applied with periodic boundary.

    Parameters
    ----------
    taps : ndarray
        2D array of filter taps, both side lengths odd. The tap at the
        array center multiplies the pixel at the output location.
    """

    def __init__(self, taps):
        taps = np.asarray(taps, dtype=float)
        if taps.ndim != 2:
            raise ValueError("kernel taps must be a 2D array")
        if taps.shape[0] % 2 == 0 or taps.shape[1] % 2 == 0:
            raise ValueError(f"kernel side lengths must be odd, got {taps.shape}")
        if not np.all(np.isfinite(taps)):
            raise ValueError("kernel taps must be finite")
        self.taps = taps
        self._spectra: dict[tuple[int, int], np.ndarray] = {}

    @property
    def shape(self):
        return self.taps.shape

    def spectrum(self, shape):
        """DFT of the kernel embedded into `shape` with its center at (0,0).

        Cached per image shape; the eigenvalues of the periodic
        convolution operator on that grid.
        """
        shape = (int(shape[0]), int(shape[1]))
        if shape not in self._spectra:
            kh, kw = self.taps.shape
            if kh > shape[0] or kw > shape[1]:
                raise ValueError(f"kernel {self.taps.shape} larger than image {shape}")
            embedded = np.zeros(shape)
            embedded[:kh, :kw] = self.taps
            # shift so the central tap sits at index (0, 0)
            embedded = np.roll(embedded, (-(kh // 2), -(kw // 2)), axis=(0, 1))
            self._spectra[shape] = np.fft.fft2(embedded)
        return self._spectra[shape]


def make_gaussian_blur(size, std):
    """Normalized sampled-Gaussian blur kernel.

    Parameters
    ----------
    size : int
        Odd side length of the square kernel.
    std : float
        Standard deviation in pixels, > 0.
    """
    size = int(size)
    if size % 2 == 0 or size < 1:
        raise ValueError(f"kernel size must be odd and positive, got {size}")
    if std <= 0:
        raise ValueError(f"kernel std must be positive, got {std}")
    half = size // 2
    coords = np.arange(-half, half + 1)
    ii, jj = np.meshgrid(coords, coords, indexing="ij")
    taps = np.exp(-(ii**2 + jj**2) / (2.0 * std**2))
    taps /= taps.sum()
    return ConvolutionKernel(taps)


def make_uniform_blur(size):
    """Uniform (box) blur kernel with all taps equal to 1/size**2."""
    size = int(size)
    if size % 2 == 0 or size < 1:
        raise ValueError(f"kernel size must be odd and positive, got {size}")
    return ConvolutionKernel(np.full((size, size), 1.0 / size**2))


def _check_image(image):
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {image.shape}")
    return image


def conv_apply(kernel, image):
    """Periodic (circular) convolution of `image` with `kernel`."""
    image = _check_image(image)
    spec = kernel.spectrum(image.shape)
    return np.real(np.fft.ifft2(spec * np.fft.fft2(image)))


def conv_adjoint(kernel, image):
    """Adjoint of conv_apply: periodic convolution with the flipped kernel."""
    image = _check_image(image)
    spec = kernel.spectrum(image.shape)
    return np.real(np.fft.ifft2(np.conj(spec) * np.fft.fft2(image)))


def conv_spectrum_bounds(kernel, shape):
    """Exact (min, max) of the eigenvalues of A*A on a periodic grid.

    The eigenvalues are |DFT(embedded kernel)|^2 over all frequencies.
    """
    spec = kernel.spectrum(shape)
    mags = np.abs(spec) ** 2
    return float(mags.min()), float(mags.max())


# ---------------------------------------------------------------------------
# Orthogonal Haar wavelet transform
# ---------------------------------------------------------------------------

def _haar_single_level(block):
    """One orthonormal 2D Haar analysis step on an even-sided block.

    Returns the four half-resolution bands (approx, horiz, vert, diag);
    each 2x2 input block maps through an orthonormal 4x4 matrix.
    """
    p00 = block[0::2, 0::2]
    p01 = block[0::2, 1::2]
    p10 = block[1::2, 0::2]
    p11 = block[1::2, 1::2]
    a = (p00 + p01 + p10 + p11) / 2.0
    h = (p00 - p01 + p10 - p11) / 2.0
    v = (p00 + p01 - p10 - p11) / 2.0
    d = (p00 - p01 - p10 + p11) / 2.0
    return a, h, v, d


def _haar_single_level_inverse(a, h, v, d):
    n0, n1 = a.shape
    block = np.empty((2 * n0, 2 * n1))
    block[0::2, 0::2] = (a + h + v + d) / 2.0
    block[0::2, 1::2] = (a - h + v - d) / 2.0
    block[1::2, 0::2] = (a + h - v - d) / 2.0
    block[1::2, 1::2] = (a - h - v + d) / 2.0
    return block


def _check_divisible(shape, levels):
    div = 2**levels
    if shape[0] % div or shape[1] % div:
        raise ValueError(
            f"image sides {shape} must be divisible by 2^levels = {div}"
        )


def dwt_forward(image, levels):
    """Orthogonal 2D Haar transform, `levels` recursive splits.

    Coefficients are stored in-place in a single array of the image's
    shape: approximation in the top-left block, detail bands around it.
    """
    image = _check_image(image)
    _check_divisible(image.shape, levels)
    out = image.copy()
    n0, n1 = image.shape
    for _ in range(levels):
        a, h, v, d = _haar_single_level(out[:n0, :n1])
        half0, half1 = n0 // 2, n1 // 2
        out[:half0, :half1] = a
        out[:half0, half1:n1] = h
        out[half0:n0, :half1] = v
        out[half0:n0, half1:n1] = d
        n0, n1 = half0, half1
    return out


def dwt_inverse(coeffs, levels):
    """Inverse of dwt_forward (exact, by orthogonality)."""
    coeffs = _check_image(coeffs)
    _check_divisible(coeffs.shape, levels)
    out = coeffs.copy()
    sizes = [(coeffs.shape[0] >> k, coeffs.shape[1] >> k) for k in range(levels + 1)]
    for n0, n1 in reversed(sizes[:-1]):
        half0, half1 = n0 // 2, n1 // 2
        a = out[:half0, :half1]
        h = out[:half0, half1:n1]
        v = out[half0:n0, :half1]
        d = out[half0:n0, half1:n1]
        out[:n0, :n1] = _haar_single_level_inverse(a, h, v, d)
    return out


# ---------------------------------------------------------------------------
# Discrete gradient / divergence pair (Neumann boundary)
# ---------------------------------------------------------------------------

def grad_apply(image):
    """Forward differences with Neumann boundary.

    Returns a (2, H, W) field: horizontal differences along axis 1 in
    component 0, vertical differences along axis 0 in component 1; the
    last column/row of each component is zero.
    """
    image = _check_image(image)
    if image.shape[0] < 2 or image.shape[1] < 2:
        raise ValueError(f"image must be at least 2x2, got {image.shape}")
    field = np.zeros((2,) + image.shape)
    field[0, :, :-1] = image[:, 1:] - image[:, :-1]
    field[1, :-1, :] = image[1:, :] - image[:-1, :]
    return field


def grad_adjoint(field):
    """Adjoint of grad_apply (the negative divergence)."""
    field = np.asarray(field, dtype=float)
    if field.ndim != 3 or field.shape[0] != 2:
        raise ValueError(f"expected a (2, H, W) gradient field, got {field.shape}")
    ph, pv = field[0], field[1]
    out = np.zeros(ph.shape)
    out[:, 0] -= ph[:, 0]
    out[:, 1:-1] += ph[:, :-2] - ph[:, 1:-1]
    out[:, -1] += ph[:, -2]
    out[0, :] -= pv[0, :]
    out[1:-1, :] += pv[:-2, :] - pv[1:-1, :]
    out[-1, :] += pv[-2, :]
    return out


# ---------------------------------------------------------------------------
# Operator objects consumed by the potential constructors
# ---------------------------------------------------------------------------

class LinearOperator:
    """Forward/adjoint pair with known extreme eigenvalues of A*A."""

    def apply(self, x):
        raise NotImplementedError

    def adjoint(self, y):
        raise NotImplementedError

    def spectrum_bounds(self):
        """(lambda_min, lambda_max) of A*A."""
        raise NotImplementedError


class IdentityOperator(LinearOperator):
    def apply(self, x):
        return np.asarray(x, dtype=float)

    def adjoint(self, y):
        return np.asarray(y, dtype=float)

    def spectrum_bounds(self):
        return 1.0, 1.0


class BlurOperator(LinearOperator):
    """Periodic convolution with a fixed kernel on a fixed grid."""

    def __init__(self, kernel, shape):
        self.kernel = kernel
        self.shape = (int(shape[0]), int(shape[1]))
        kernel.spectrum(self.shape)  # validates size, warms the cache

    def apply(self, x):
        if x.shape != self.shape:
            raise ValueError(f"expected image of shape {self.shape}, got {x.shape}")
        return conv_apply(self.kernel, x)

    def adjoint(self, y):
        if y.shape != self.shape:
            raise ValueError(f"expected image of shape {self.shape}, got {y.shape}")
        return conv_adjoint(self.kernel, y)

    def spectrum_bounds(self):
        return conv_spectrum_bounds(self.kernel, self.shape)


class WaveletDomainOperator(LinearOperator):
    """Blur composed with wavelet synthesis: z -> blur(inverse DWT z).

    Lets a chain act on wavelet coefficients while the data lives in
    image space. Since the DWT is orthogonal, the eigenvalue extremes of
    A*A are those of the blur alone.
    """

    def __init__(self, blur: BlurOperator, levels: int):
        self.blur = blur
        self.levels = int(levels)
        _check_divisible(blur.shape, self.levels)

    @property
    def shape(self):
        return self.blur.shape

    def apply(self, z):
        return self.blur.apply(dwt_inverse(z, self.levels))

    def adjoint(self, r):
        return dwt_forward(self.blur.adjoint(r), self.levels)

    def spectrum_bounds(self):
        return self.blur.spectrum_bounds()
