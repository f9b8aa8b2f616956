"""Linear prediction by the modified covariance method and related spectra."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive_int, check_signal
from .model import SignalBlock


@dataclass(frozen=True)
class LPModel:
    """Prediction x_hat[n] = -sum_i a[i] x[n - i]."""

    coefficients: np.ndarray
    residual_power: float
    degenerate: bool = False
    rank: int | None = None

    def __post_init__(self):
        a = np.asarray(self.coefficients, dtype=np.float64).copy()
        a.setflags(write=False)
        object.__setattr__(self, "coefficients", a)

    @property
    def order(self) -> int:
        return self.coefficients.size

    @property
    def pef(self) -> np.ndarray:
        """Prediction-error filter taps ``[1, a1, ..., ap]``."""
        return np.concatenate(([1.0], self.coefficients))


@dataclass(frozen=True)
class SpectrumEstimate:
    grid: np.ndarray
    magnitude: np.ndarray

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def local_maxima(self) -> np.ndarray:
        """Indices of strict interior local maxima of the magnitude."""
        m = self.magnitude
        inner = np.flatnonzero((m[1:-1] > m[:-2]) & (m[1:-1] >= m[2:])) + 1
        return inner


class Root(NamedTuple):
    frequency: float
    radius: float


def _modcov_system(x: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    N = x.size
    rows = N - p
    # forward errors: x[n] + sum a_i x[n-i], n = p..N-1
    fwd = np.column_stack([x[p - i:N - i] for i in range(1, p + 1)])
    # backward errors: x[n-p] + sum a_i x[n-p+i], n = p..N-1
    bwd = np.column_stack([x[i:rows + i] for i in range(1, p + 1)])
    X = np.vstack([fwd, bwd])
    y = np.concatenate([x[p:], x[:rows]])
    return X, y


def modcov_fit(sequence, order: int, rcond: float | None = None) -> LPModel:
    """Fit an order-``order`` LP model minimising forward + backward error.

    No windowing is applied to the record ends.  The least-squares problem
    is solved by SVD; a rank-deficient system gives the minimum-norm
    coefficients with ``degenerate=True``.
    """
    p = check_positive_int(order, "order")
    x = check_signal(sequence, "sequence", min_length=2)
    N = x.size
    if p >= N or 2 * (N - p) < p:
        raise ValueError(
            f"order {p} needs 2 (N - p) >= p with N = {N} samples"
        )
    X, y = _modcov_system(x, p)
    scale = np.max(np.abs(X)) if X.size else 0.0
    if scale == 0.0:
        return LPModel(np.zeros(p), 0.0, degenerate=True, rank=0)
    a, _, rank, _ = np.linalg.lstsq(X / scale, -y / scale, rcond=rcond)
    resid = X @ a + y
    power = float(resid @ resid) / y.size
    return LPModel(a, power, degenerate=bool(rank < p), rank=int(rank))


def pef_roots(model: LPModel) -> list[Root]:
    """Zeros of 1 + sum a_i z^-i from the companion-matrix eigenvalues.

    Conjugate pairs are reported once with a non-negative frequency; the
    list is sorted by descending radius.
    """
    a = model.coefficients
    p = a.size
    companion = np.zeros((p, p))
    companion[0, :] = -a
    if p > 1:
        companion[1:, :-1] = np.eye(p - 1)
    z = np.linalg.eigvals(companion)
    z = z[z.imag >= 0]
    roots = [Root(float(abs(np.angle(r))), float(abs(r))) for r in z]
    roots.sort(key=lambda r: (-r.radius, r.frequency))
    return roots


def lp_spectrum(model: LPModel, grid_size: int) -> SpectrumEstimate:
    """AR magnitude response sqrt(sigma^2) / |A(e^jw)| on [0, pi]."""
    grid_size = check_positive_int(grid_size, "grid_size", minimum=2)
    nfft = 2 * (grid_size - 1)
    pef = model.pef
    if pef.size > nfft:
        # fold taps so the rfft grid stays exact
        pef = np.bincount(np.arange(pef.size) % nfft, weights=pef, minlength=nfft)
    denom = np.abs(np.fft.rfft(pef, n=nfft))
    gain = np.sqrt(model.residual_power) if model.residual_power > 0 else 1.0
    with np.errstate(divide="ignore"):
        mag = gain / denom
    mag[~np.isfinite(mag)] = np.finfo(float).max
    grid = np.linspace(0.0, np.pi, grid_size)
    return SpectrumEstimate(grid, mag)


def line_spectrum(lines, grid_size: int, width: float) -> SpectrumEstimate:
    """Spectrum of ``(frequency, magnitude)`` lines drawn as Gaussian bumps.

    Peak heights follow the line magnitudes, unlike an AR spectrum whose
    peaks are governed by how close each pole sits to the unit circle.
    """
    grid_size = check_positive_int(grid_size, "grid_size", minimum=2)
    if not width > 0:
        raise ValueError(f"width must be positive, got {width}")
    grid = np.linspace(0.0, np.pi, grid_size)
    mag = np.zeros(grid_size)
    reach = 8.0 * width
    for f, m in lines:
        sel = np.abs(grid - f) <= reach
        mag[sel] += abs(m) * np.exp(-0.5 * ((grid[sel] - f) / width) ** 2)
    return SpectrumEstimate(grid, mag)


def dft_magnitude(block, zero_pad_to: int) -> SpectrumEstimate:
    """Magnitude of the zero-padded DFT on the non-negative half grid."""
    x = block.samples if isinstance(block, SignalBlock) else check_signal(block)
    nfft = check_positive_int(zero_pad_to, "zero_pad_to")
    if nfft < x.size:
        raise ValueError(f"zero_pad_to={nfft} is shorter than the record ({x.size})")
    mag = np.abs(np.fft.rfft(x, n=nfft))
    grid = 2.0 * np.pi * np.arange(mag.size) / nfft
    return SpectrumEstimate(grid, mag)


class ModifiedCovarianceLP(BaseEstimator):
    """Estimator wrapper around :func:`modcov_fit`.

    Parameters
    ----------
    order : int
        Prediction order p.
    rcond : float or None
        Relative singular-value cutoff passed to the least-squares solver.

    Attributes
    ----------
    coef_ : ndarray of shape (order,)
    residual_power_ : float
    model_ : LPModel
    """

    def __init__(self, order: int = 2, rcond: float | None = None):
        self.order = order
        self.rcond = rcond

    def fit(self, X, y=None):
        self.model_ = modcov_fit(np.ravel(X), self.order, rcond=self.rcond)
        self.coef_ = np.array(self.model_.coefficients)
        self.residual_power_ = self.model_.residual_power
        return self

    def roots(self) -> list[Root]:
        check_is_fitted(self, "model_")
        return pef_roots(self.model_)

    def frequencies(self, min_radius: float = 0.0) -> np.ndarray:
        return np.array(sorted(r.frequency for r in self.roots() if r.radius >= min_radius))

    def spectrum(self, grid_size: int = 4096) -> SpectrumEstimate:
        check_is_fitted(self, "model_")
        return lp_spectrum(self.model_, grid_size)

    def predict(self, X):
        """One-step forward predictions for samples ``order`` onward."""
        check_is_fitted(self, "model_")
        x = check_signal(np.ravel(X), "X", min_length=self.order + 1)
        a = self.model_.coefficients
        p = a.size
        past = np.column_stack([x[p - i:x.size - i] for i in range(1, p + 1)])
        return -past @ a
