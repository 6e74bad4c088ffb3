"""Sliding-window polynomial denoising and derivative kernels.

The smoother fits a degree-n polynomial by least squares inside an odd
window of l = 2m+1 samples and replaces the center sample with the fitted
value; the same fit read out at higher polynomial coefficients yields
derivative estimates.  Kernels are precomputed once per (window, order,
derivative) from the normal equations of the fit, so application is a
plain 1-D correlation along each axis.

Window tuning follows an MSE criterion: the candidate (sigma, window)
minimizing the mean squared difference between the windowed-polynomial
output and a Gaussian-filtered reference wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .field import Field

__all__ = [
    "SavgolConfig",
    "SavgolKernel",
    "savgol_kernel",
    "gaussian_kernel",
    "gaussian_smooth",
    "savgol_smooth",
    "savgol_derivative",
    "tune_savgol",
]

DEFAULT_SIGMA_GRID = (1.0, 2.0, 3.0)
DEFAULT_WINDOW_GRID = (5, 7, 9, 11)
DEFAULT_ORDER = 3


@dataclass(frozen=True)
class SavgolConfig:
    """Window length (odd), polynomial order, and pre-smooth width."""

    window: int
    order: int = DEFAULT_ORDER
    sigma: float | None = None  # None means "tune it"

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if not 0 <= self.order < self.window:
            raise ValueError(f"order must satisfy 0 <= order < window, got {self.order}")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive when fixed")


@dataclass(frozen=True, eq=False)
class SavgolKernel:
    """Correlation weights for one (window, order, derivative) triple.

    Weights are ordered by window offset -m..m and include the d!
    factor, so applying them to the monomial offsets k^d gives exactly d!
    and to lower-degree monomials gives 0.  Grid spacing is applied at
    use time as 1/h^d.
    """

    window: int
    order: int
    deriv: int
    weights: np.ndarray


def savgol_kernel(window: int, order: int, deriv: int = 0) -> SavgolKernel:
    """Solve the window's least-squares normal equations for the weights."""
    if deriv > order:
        raise ValueError(f"derivative order {deriv} exceeds polynomial order {order}")
    cfg = SavgolConfig(window, order)  # validates window/order
    m = window // 2
    offsets = np.arange(-m, m + 1, dtype=np.float64)
    design = np.vander(offsets, N=order + 1, increasing=True)
    # row d of the pseudo-inverse maps samples to the d-th fit coefficient
    coeff_map = np.linalg.pinv(design)
    weights = math.factorial(deriv) * coeff_map[deriv]
    weights.flags.writeable = False
    return SavgolKernel(cfg.window, cfg.order, deriv, weights)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Discrete Gaussian truncated at 4*sigma and renormalized to unit mass."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    radius = max(1, int(math.ceil(4.0 * sigma)))
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-0.5 * (k / sigma) ** 2)
    return w / w.sum()


def _apply_all_axes(data: np.ndarray, weights: np.ndarray) -> np.ndarray:
    out = data
    for axis in range(data.ndim):
        out = correlate1d(out, weights, axis=axis, mode="reflect")
    return out


def gaussian_smooth(field: Field, sigma: float) -> Field:
    """Separable Gaussian convolution along every axis, sigma in grid units."""
    w = gaussian_kernel(sigma)
    return field.with_data(_apply_all_axes(field.data, w))


def savgol_smooth(field: Field, cfg: SavgolConfig) -> Field:
    """Windowed-polynomial smoothing applied separably along every axis."""
    for ax in field.axes:
        if cfg.window > len(ax):
            raise ValueError(f"window {cfg.window} exceeds axis {ax.name!r} length {len(ax)}")
    w = savgol_kernel(cfg.window, cfg.order, 0).weights
    return field.with_data(_apply_all_axes(field.data, w))


def savgol_derivative(field: Field, cfg: SavgolConfig, axis: int, deriv_order: int) -> Field:
    """Derivative of the windowed fit along one axis, scaled by 1/h^d.

    Requires uniform spacing on the target axis; other axes are left
    untouched.
    """
    if deriv_order > cfg.order:
        raise ValueError(f"derivative order {deriv_order} exceeds polynomial order {cfg.order}")
    ax = field.axes[axis]
    if cfg.window > len(ax):
        raise ValueError(f"window {cfg.window} exceeds axis {ax.name!r} length {len(ax)}")
    steps = np.diff(ax.values)
    if not np.allclose(steps, steps[0], rtol=1e-8):
        raise ValueError(f"axis {ax.name!r} is not uniformly spaced")
    kern = savgol_kernel(cfg.window, cfg.order, deriv_order)
    out = correlate1d(field.data, kern.weights, axis=axis, mode="reflect")
    return field.with_data(out / ax.spacing**deriv_order)


def tune_savgol(field: Field, sigma_grid=DEFAULT_SIGMA_GRID, window_grid=DEFAULT_WINDOW_GRID,
                order: int = DEFAULT_ORDER) -> tuple[float, int]:
    """Pick (sigma, window) minimizing MSE against the Gaussian reference.

    Every candidate pair is scored exhaustively.  The MSE is taken over
    the common interior untouched by any candidate's boundary padding, so
    the criterion compares the filters themselves rather than padding
    artifacts; near-ties (relative 1e-9) resolve toward the smaller
    window, then the smaller sigma.
    """
    sigmas = sorted(float(s) for s in sigma_grid)
    windows = sorted(int(w) for w in window_grid)
    if not sigmas or not windows:
        raise ValueError("candidate grids must be nonempty")
    trim = max(max(windows) // 2, int(math.ceil(4.0 * max(sigmas))))
    region = tuple(
        slice(trim, n - trim) if n > 2 * trim + 2 else slice(None)
        for n in field.shape
    )
    smoothed = {w: savgol_smooth(field, SavgolConfig(w, order)).data[region] for w in windows}
    scored = []
    for sigma in sigmas:
        ref = gaussian_smooth(field, sigma).data[region]
        for w in windows:
            mse = float(np.mean((smoothed[w] - ref) ** 2))
            scored.append((mse, w, sigma))
    best_mse = min(s[0] for s in scored)
    cutoff = best_mse * (1.0 + 1e-9) + 1e-300
    _, w, sigma = min((s for s in scored if s[0] <= cutoff), key=lambda s: (s[1], s[2]))
    return sigma, w


def denoise_field(field: Field, cfg: SavgolConfig | None = None,
                  sigma_grid=DEFAULT_SIGMA_GRID, window_grid=DEFAULT_WINDOW_GRID,
                  order: int = DEFAULT_ORDER) -> tuple[Field, SavgolConfig]:
    """Full denoising pass: tune if needed, then smooth.

    The Gaussian pre-smooth acts only as the tuning reference; the
    windowed-polynomial output is the denoised field.
    """
    if cfg is not None and cfg.sigma is not None:
        return savgol_smooth(field, cfg), cfg
    if cfg is not None:
        sigma, window = tune_savgol(field, sigma_grid, (cfg.window,), cfg.order)
        chosen = SavgolConfig(window, cfg.order, sigma)
    else:
        sigma, window = tune_savgol(field, sigma_grid, window_grid, order)
        chosen = SavgolConfig(window, order, sigma)
    return savgol_smooth(field, chosen), chosen
