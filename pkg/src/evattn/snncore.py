"""Spiking numerical substrate: kernels, LIF grids and 2-D convolution.

The two vision stages share this layer: isotropic Gaussian kernels for
the center/surround motion stage and oriented von Mises ring kernels
for the border-ownership stage, both driven through leaky
integrate-and-fire grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import irfft2, next_fast_len, rfft2
from scipy.signal import fftconvolve
from scipy.special import i0

from .events import GeometryError


@dataclass(frozen=True)
class GaussianKernelSpec:
    size: int = 8
    sigma: float = 1.0

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("size must be >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class VonMisesKernelSpec:
    radius: float = 8.0  # ring radius in pixels
    concentration: float = 0.2
    theta: float = 0.0  # radians
    size: int | None = None  # side length; defaults to 2*radius + 1

    def side(self) -> int:
        if self.size is not None:
            return self.size
        return 2 * int(round(self.radius)) + 1


def gaussian_kernel(spec: GaussianKernelSpec) -> np.ndarray:
    """Isotropic Gaussian weights on a size x size grid, L1-normalized.

    The mean sits at the kernel center ((size-1)/2 for odd sizes,
    between the four central cells for even ones).
    """
    c = (spec.size - 1) / 2.0
    idx = np.arange(spec.size) - c
    yy, xx = np.meshgrid(idx, idx, indexing="ij")
    w = np.exp(-(xx**2 + yy**2) / (2.0 * spec.sigma**2))
    return w / w.sum()


def von_mises_kernel(spec: VonMisesKernelSpec) -> np.ndarray:
    """Oriented ring kernel, L1-normalized.

    weight(x, y) = exp(rho * R0 * cos(atan2(-y, x) - theta))
                   / I0(|sqrt(x^2 + y^2) - R0|)

    x grows rightward, y downward (image convention); the absolute
    value keeps the Bessel argument in the even function's natural
    domain, giving a ring of maximal weight at radius R0 in the
    direction of theta.
    """
    side = spec.side()
    c = (side - 1) / 2.0
    idx = np.arange(side) - c
    yy, xx = np.meshgrid(idx, idx, indexing="ij")
    angle = np.arctan2(-yy, xx)
    r = np.hypot(xx, yy)
    num = np.exp(spec.concentration * spec.radius * np.cos(angle - spec.theta))
    # the angle is undefined at the origin; use the angular mean of the
    # numerator there so the kernel family is closed under rotation
    num[r == 0] = i0(spec.concentration * spec.radius)
    den = i0(np.abs(r - spec.radius))
    w = num / den
    return w / w.sum()


def bessel_i0_series(x: float, terms: int = 60) -> float:
    """Power-series I0 used as an independent oracle for kernel tests."""
    total = 0.0
    term = 1.0
    for k in range(terms):
        if k > 0:
            term *= (x / (2.0 * k)) ** 2
        total += term
    return total


def conv2d_same(grid: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Same-size 2-D correlation with zero padding.

    out[i, j] = sum_{u,v} grid[i + u - cr, j + v - cc] * kernel[u, v]
    with (cr, cc) = ((kh-1)//2, (kw-1)//2); out-of-range samples are 0.
    The kernel is not flipped.
    """
    grid = np.asarray(grid, dtype=np.float64)
    kh, kw = kernel.shape
    if kh > grid.shape[0] or kw > grid.shape[1]:
        raise GeometryError("kernel larger than input")
    cr, cc = (kh - 1) // 2, (kw - 1) // 2
    padded = np.pad(grid, ((cr, kh - 1 - cr), (cc, kw - 1 - cc)))
    # correlation == convolution with the doubly-reversed kernel
    return fftconvolve(padded, kernel[::-1, ::-1], mode="valid")


class FftKernelBank:
    """Correlation of one input against many fixed kernels, FFT-cached.

    Kernel spectra are precomputed per input shape; the per-call cost is
    one forward transform of the input plus one product and inverse
    transform per kernel.  Matches conv2d_same to floating-point
    round-off.
    """

    def __init__(self, kernels: dict):
        self.kernels = {k: np.asarray(v, dtype=np.float64) for k, v in kernels.items()}
        self._cache: dict = {}

    def _plan(self, shape):
        plan = self._cache.get(shape)
        if plan is None:
            kh, kw = next(iter(self.kernels.values())).shape
            fh = next_fast_len(shape[0] + kh - 1)
            fw = next_fast_len(shape[1] + kw - 1)
            spectra = {
                name: rfft2(k[::-1, ::-1], s=(fh, fw))
                for name, k in self.kernels.items()
            }
            plan = (fh, fw, kh, kw, spectra)
            self._cache[shape] = plan
        return plan

    def transform(self, grid: np.ndarray):
        grid = np.asarray(grid, dtype=np.float64)
        fh, fw, kh, kw, _ = self._plan(grid.shape)
        cr, cc = (kh - 1) // 2, (kw - 1) // 2
        padded = np.pad(grid, ((cr, kh - 1 - cr), (cc, kw - 1 - cc)))
        return grid.shape, rfft2(padded, s=(fh, fw))

    def correlate(self, transformed, name) -> np.ndarray:
        shape, spec_in = transformed
        fh, fw, kh, kw, spectra = self._plan(shape)
        full = irfft2(spec_in * spectra[name], s=(fh, fw))
        return full[kh - 1 : kh - 1 + shape[0], kw - 1 : kw - 1 + shape[1]]

    def correlate_grid(self, grid: np.ndarray, name) -> np.ndarray:
        return self.correlate(self.transform(grid), name)


@dataclass
class LifGrid:
    """Grid of leaky integrate-and-fire units with subtract-on-spike reset.

    ``threshold=None`` disables spiking, leaving a pure leaky
    integrator (used where a stage needs the graded response).
    """

    shape: tuple
    tau: float  # seconds
    threshold: float | None = 1.0
    v: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.v is None:
            self.v = np.zeros(self.shape, dtype=np.float64)

    def step(self, input_current: np.ndarray, dt: float) -> np.ndarray:
        """Advance one step; returns the binary spike grid."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        if input_current.shape != self.v.shape:
            raise GeometryError(
                f"input shape {input_current.shape} != grid {self.v.shape}"
            )
        self.v *= np.exp(-dt / self.tau)
        self.v += input_current
        if self.threshold is None:
            return np.zeros(self.v.shape, dtype=bool)
        spikes = self.v >= self.threshold
        self.v[spikes] -= self.threshold
        return spikes


def lif_step(grid: LifGrid, input_current: np.ndarray, dt: float):
    """Functional wrapper around LifGrid.step, returning (spikes, grid)."""
    spikes = grid.step(input_current, dt)
    return spikes, grid
