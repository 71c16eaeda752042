"""Diagnostics: 1D Wasserstein distances, theoretical bound evaluators,
image quality metrics, streaming moments, multi-scale std maps,
autocorrelation and the k*(delta) convergence marker.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = [
    "wasserstein2_sq_1d",
    "BoundParams",
    "bound_fixed_step",
    "bound_decreasing_errors",
    "bound_dual_wasserstein",
    "bound_dual_wasserstein_opt",
    "psnr",
    "RunningMoments",
    "moments_update",
    "moments_merge",
    "std_map_downsampled",
    "DownsampledStd",
    "autocorrelation",
    "integrated_autocorr_time",
    "FourierModeSelector",
    "fourier_mode_series",
    "k_star",
    "KStarTracker",
]


def wasserstein2_sq_1d(samples_a, samples_b):
    """Squared 2-Wasserstein distance of two empirical 1D measures.

    For equal sample counts this is the mean squared difference of the
    sorted samples. For unequal counts the exact quantile coupling is
    used: both empirical quantile functions are integrated over the
    merged breakpoint grid.
    """
    a = np.sort(np.asarray(samples_a, dtype=float).ravel())
    b = np.sort(np.asarray(samples_b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample set")
    na, nb = a.size, b.size
    if na == nb:
        return float(np.mean((a - b) ** 2))
    t = np.union1d(np.arange(1, na + 1) / na, np.arange(1, nb + 1) / nb)
    left = np.concatenate([[0.0], t[:-1]])
    widths = t - left
    ia = np.minimum((left * na + 1e-9).astype(int), na - 1)
    ib = np.minimum((left * nb + 1e-9).astype(int), nb - 1)
    return float(np.sum(widths * (a[ia] - b[ib]) ** 2))


# ---------------------------------------------------------------------------
# Theoretical bounds on W2^2(mu^K, mu*) and the dual distance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundParams:
    """Constants entering the nonasymptotic convergence bounds.

    Ctilde is the bias constant 2 L d + int ||grad G||^2 dmu*; W0_sq is
    (an estimate of) the squared initial Wasserstein distance to the
    target; theta is the free splitting parameter in [0, 1).
    """

    lambda_F: float
    lambda_Gstar: float
    L: float
    d: int
    Ctilde: float
    W0_sq: float
    theta: float = 0.0

    def __post_init__(self):
        vals = [self.lambda_F, self.lambda_Gstar, self.L, self.Ctilde, self.W0_sq]
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("bound parameters must be finite")
        if self.lambda_F < 0 or self.lambda_Gstar < 0 or self.L <= 0:
            raise ValueError("curvature constants out of range")
        if not 0.0 <= self.theta < 1.0:
            raise ValueError("theta must lie in [0, 1)")
        if self.W0_sq < 0:
            raise ValueError("initial distance must be nonnegative")


def _check_step(params, gamma):
    if gamma <= 0:
        raise ValueError("step size must be positive")
    if gamma > (1.0 / params.L) * (1.0 + 1e-12):
        raise ValueError("fixed-step bounds require gamma <= 1/L")


def bound_fixed_step(params, gamma, K, eps):
    """Bound on W2^2(mu^K, mu*) for fixed step and errors bounded by eps.

    (1 - lambda_F gamma)^K W0_sq + gamma Ctilde / lambda_F
    + 2 eps / lambda_F; requires strong convexity lambda_F > 0.
    """
    if params.lambda_F <= 0:
        raise ValueError("bound requires strong convexity lambda_F > 0")
    _check_step(params, gamma)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    lam = params.lambda_F
    decay = (1.0 - lam * gamma) ** K
    return decay * params.W0_sq + gamma * params.Ctilde / lam + 2.0 * eps / lam


def bound_decreasing_errors(params, gamma, K, eps_sequence):
    """Bound on W2^2(mu^K, mu*) for a monotonically decreasing error sequence.

    Replaces the 2 eps / lambda_F term of the fixed-error bound by
    2 / (K lambda_F) * sum_k eps_k.
    """
    if params.lambda_F <= 0:
        raise ValueError("bound requires strong convexity lambda_F > 0")
    _check_step(params, gamma)
    eps_sequence = np.asarray(eps_sequence, dtype=float)
    if eps_sequence.size != K:
        raise ValueError(f"need K={K} error values, got {eps_sequence.size}")
    if np.any(eps_sequence < 0):
        raise ValueError("errors must be nonnegative")
    if np.any(np.diff(eps_sequence) > 0):
        raise ValueError("error sequence must be monotonically non-increasing")
    lam = params.lambda_F
    decay = (1.0 - lam * gamma) ** K
    return (
        decay * params.W0_sq
        + gamma * params.Ctilde / lam
        + 2.0 / (K * lam) * float(np.sum(eps_sequence))
    )


def _dual_bound_at_theta(params, gamma, K, eps, theta):
    denom = theta * params.lambda_Gstar + gamma
    c_theta = (params.Ctilde * gamma * (1.0 - theta) + 2.0 * eps) / (
        (1.0 - theta) * denom
    )
    return params.W0_sq / (gamma * denom * K) + c_theta


def bound_dual_wasserstein(params, gamma, K, eps, theta=None):
    """Bound on the best dual Wasserstein distance over K iterations.

    W0_sq / (gamma (theta lambda_Gstar + gamma) K) + C_theta(gamma, eps)
    with C_theta = (Ctilde gamma (1-theta) + 2 eps) /
    ((1-theta)(theta lambda_Gstar + gamma)).
    """
    if gamma <= 0 or K < 1 or eps < 0:
        raise ValueError("need gamma > 0, K >= 1 and eps >= 0")
    theta = params.theta if theta is None else theta
    if not 0.0 <= theta < 1.0:
        raise ValueError("theta must lie in [0, 1)")
    return _dual_bound_at_theta(params, gamma, K, eps, theta)


def bound_dual_wasserstein_opt(params, gamma, K, eps):
    """Dual bound minimized over theta in [0, 1); returns (value, theta)."""
    if gamma <= 0 or K < 1 or eps < 0:
        raise ValueError("need gamma > 0, K >= 1 and eps >= 0")
    res = minimize_scalar(
        lambda th: _dual_bound_at_theta(params, gamma, K, eps, th),
        bounds=(0.0, 1.0 - 1e-9),
        method="bounded",
    )
    at_zero = _dual_bound_at_theta(params, gamma, K, eps, 0.0)
    if at_zero <= res.fun:
        return at_zero, 0.0
    return float(res.fun), float(res.x)


def psnr(image, reference, peak=1.0):
    """Peak signal-to-noise ratio in dB; +inf for identical inputs."""
    image = np.asarray(image, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if image.shape != reference.shape:
        raise ValueError(f"shape mismatch {image.shape} vs {reference.shape}")
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((image - reference) ** 2))
    if mse == 0.0:
        return np.inf
    return 10.0 * np.log10(peak**2 / mse)


# ---------------------------------------------------------------------------
# Streaming moments (Welford recurrence, mergeable)
# ---------------------------------------------------------------------------

class RunningMoments:
    """Numerically stable streaming mean and variance of array samples."""

    def __init__(self, shape=None):
        self.count = 0
        self.mean = np.zeros(shape) if shape is not None else None
        self._m2 = np.zeros(shape) if shape is not None else None

    def update(self, sample):
        sample = np.asarray(sample, dtype=float)
        if self.mean is None:
            self.mean = np.zeros(sample.shape)
            self._m2 = np.zeros(sample.shape)
        if sample.shape != self.mean.shape:
            raise ValueError(f"shape mismatch {sample.shape} vs {self.mean.shape}")
        self.count += 1
        delta = sample - self.mean
        self.mean = self.mean + delta / self.count
        self._m2 = self._m2 + delta * (sample - self.mean)
        return self

    def merge(self, other):
        """Combine with another accumulator (associative, order-insensitive)."""
        if self.count == 0:
            return other.copy()
        if other.count == 0:
            return self.copy()
        if other.mean.shape != self.mean.shape:
            raise ValueError("cannot merge accumulators of different shapes")
        out = RunningMoments()
        n = self.count + other.count
        delta = other.mean - self.mean
        out.count = n
        out.mean = self.mean + delta * (other.count / n)
        out._m2 = self._m2 + other._m2 + delta**2 * (self.count * other.count / n)
        return out

    def copy(self):
        out = RunningMoments()
        out.count = self.count
        out.mean = None if self.mean is None else self.mean.copy()
        out._m2 = None if self._m2 is None else self._m2.copy()
        return out

    def variance(self):
        """Sample variance (ddof = 1); requires at least two samples."""
        if self.count < 2:
            raise ValueError("variance needs at least two samples")
        return self._m2 / (self.count - 1)

    def std(self):
        return np.sqrt(self.variance())


def moments_update(acc, sample):
    """Feed one sample into the accumulator and return it."""
    return acc.update(sample)


def moments_merge(a, b):
    """Combine two accumulators; equivalent to having streamed both inputs."""
    return a.merge(b)


def _average_pool(image, factor):
    h, w = image.shape
    if h % factor or w % factor:
        raise ValueError(f"image sides {image.shape} not divisible by {factor}")
    return image.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))


class DownsampledStd:
    """Streaming pixelwise std of average-pooled samples at one scale."""

    def __init__(self, factor):
        if factor < 1:
            raise ValueError("factor must be >= 1")
        self.factor = int(factor)
        self.moments = RunningMoments()

    def update(self, sample):
        sample = np.asarray(sample, dtype=float)
        pooled = sample if self.factor == 1 else _average_pool(sample, self.factor)
        self.moments.update(pooled)
        return self

    def result(self):
        return self.moments.std()


def std_map_downsampled(samples, factor):
    """Pixelwise std map of a sample stream after average-pooling by `factor`."""
    acc = DownsampledStd(factor)
    n = 0
    for sample in samples:
        acc.update(sample)
        n += 1
    if n < 2:
        raise ValueError("need at least two samples for a std map")
    return acc.result()


# ---------------------------------------------------------------------------
# Autocorrelation
# ---------------------------------------------------------------------------

def autocorrelation(series, max_lag):
    """Biased sample autocorrelation rho(0..max_lag); rho(0) = 1.

    A constant series has zero variance; the result is then an
    all-NaN sentinel.
    """
    series = np.asarray(series, dtype=float).ravel()
    n = series.size
    if n <= max_lag:
        raise ValueError(f"series of length {n} too short for lag {max_lag}")
    x = series - series.mean()
    var = float(np.dot(x, x))
    if var == 0.0:
        return np.full(max_lag + 1, np.nan)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1]
    return acov / var


def integrated_autocorr_time(series, max_lag=None):
    """Integrated autocorrelation time 1 + 2 sum rho(l).

    The sum is truncated at the first non-positive autocorrelation
    (initial positive sequence), which is adequate for the
    monotonically mixing chains produced here.
    """
    series = np.asarray(series, dtype=float).ravel()
    if max_lag is None:
        max_lag = min(series.size - 1, 10_000)
    rho = autocorrelation(series, max_lag)
    if np.any(np.isnan(rho)):
        return np.nan
    tau = 1.0
    for ell in range(1, max_lag + 1):
        if rho[ell] <= 0:
            break
        tau += 2.0 * rho[ell]
    return tau


# ---------------------------------------------------------------------------
# Fourier-mode projections ranked by blur eigenvalue
# ---------------------------------------------------------------------------

class FourierModeSelector:
    """Real Fourier modes whose blur eigenvalues are extreme or median.

    The eigenvalues of A*A under periodic boundary are |DFT(kernel)|^2,
    one per frequency; the modes with the smallest / median / largest
    eigenvalue correspond to the slowest / median / fastest mixing
    directions of a likelihood-dominated chain. Ties are broken by
    lexicographic frequency order. Each selected frequency is
    represented by its normalized cosine mode.
    """

    labels = ("slowest", "median", "fastest")

    def __init__(self, kernel, shape):
        mags = np.abs(kernel.spectrum(shape)) ** 2
        order = np.argsort(mags.ravel(), kind="stable")
        picks = [order[0], order[mags.size // 2], order[-1]]
        self.eigenvalues = [float(mags.ravel()[p]) for p in picks]
        self.frequencies = [np.unravel_index(p, shape) for p in picks]
        n0, n1 = shape
        ii, jj = np.meshgrid(np.arange(n0), np.arange(n1), indexing="ij")
        self.modes = []
        for p, q in self.frequencies:
            mode = np.cos(2.0 * np.pi * (p * ii / n0 + q * jj / n1))
            self.modes.append(mode / np.linalg.norm(mode))

    def project(self, image):
        """Coefficients of `image` on the three selected modes."""
        return np.array([float(np.sum(m * image)) for m in self.modes])


def fourier_mode_series(samples, kernel, shape):
    """Project a sample stream onto the slowest/median/fastest blur modes.

    Returns a dict label -> 1D array of mode coefficients over the stream.
    """
    selector = FourierModeSelector(kernel, shape)
    rows = [selector.project(s) for s in samples]
    stacked = np.array(rows)
    return {
        label: stacked[:, i] for i, label in enumerate(selector.labels)
    }


# ---------------------------------------------------------------------------
# k*(delta): first iteration at which the running mean is close to a reference
# ---------------------------------------------------------------------------

def k_star(running_means, reference, delta, cap=None):
    """First index k with ||mean_k - ref|| / ||ref|| <= delta, else None.

    `running_means` is an iterable of running-mean snapshots indexed
    from 1; `cap` optionally stops scanning early.
    """
    reference = np.asarray(reference, dtype=float)
    ref_norm = float(np.linalg.norm(reference))
    if ref_norm == 0.0:
        raise ValueError("reference must be nonzero")
    for k, mean in enumerate(running_means, start=1):
        if cap is not None and k > cap:
            return None
        rel = float(np.linalg.norm(np.asarray(mean) - reference)) / ref_norm
        if rel <= delta:
            return k
    return None


class KStarTracker:
    """Streaming k*(delta) for several thresholds at once.

    Records, for each threshold, the first sample index at which the
    running mean is within relative distance delta of the reference,
    together with the cumulative inner-iteration count at that moment.
    Thresholds never reached stay None.
    """

    def __init__(self, reference, deltas):
        self.reference = np.asarray(reference, dtype=float)
        self.ref_norm = float(np.linalg.norm(self.reference))
        if self.ref_norm == 0.0:
            raise ValueError("reference must be nonzero")
        self.deltas = sorted(deltas, reverse=True)
        self.reached: dict[float, Optional[int]] = {d: None for d in self.deltas}
        self.inner_at: dict[float, Optional[int]] = {d: None for d in self.deltas}
        self._pending = list(self.deltas)

    def update(self, k, running_mean, inner_total=0):
        if not self._pending:
            return
        rel = (
            float(np.linalg.norm(running_mean - self.reference)) / self.ref_norm
        )
        while self._pending and rel <= self._pending[0]:
            d = self._pending.pop(0)
            self.reached[d] = k
            self.inner_at[d] = inner_total

    @property
    def done(self):
        return not self._pending
