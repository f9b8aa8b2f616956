"""Bessel functions of the first kind and FM-index recovery from their ratios.

``bessel_j`` evaluates J_m(x) for integer orders on the envelope
|m| <= 50, |x| <= 50.  Small arguments use the ascending power series;
larger ones use Miller's backward recurrence normalised with the identity
J_0(x) + 2 * sum_k J_2k(x) = 1.

``invert_kf`` recovers a modulation index from measured ratios
J_p(k) / J_q(k) by searching a precomputed table and interpolating the
least-squares objective between grid points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_ORDER = 50
MAX_ARG = 50.0
SERIES_SWITCH = 12.0
DEFAULT_PAIRS = ((0, 1), (0, 2))
DEFAULT_KMAX = 5.0
DEFAULT_STEP = 0.001


class KfOutOfRange(ValueError):
    """No admissible modulation index inside the lookup table."""


def _check_envelope(m: int, x: np.ndarray) -> None:
    if abs(m) > MAX_ORDER:
        raise ValueError(f"Bessel order {m} outside supported envelope |m| <= {MAX_ORDER}")
    if np.any(~np.isfinite(x)) or np.any(np.abs(x) > MAX_ARG):
        raise ValueError(f"Bessel argument outside supported envelope |x| <= {MAX_ARG}")


def _series(m: int, x: np.ndarray) -> np.ndarray:
    # m >= 0, x >= 0; terms (-1)^k (x/2)^(2k+m) / (k! (k+m)!)
    half = 0.5 * x
    term = half**m / math.factorial(m)
    total = term.copy()
    q = -half * half
    for k in range(1, 200):
        term = term * q / (k * (k + m))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.maximum(np.abs(total), 1e-300)):
            break
    return total


def _miller(max_order: int, x: np.ndarray) -> np.ndarray:
    """J_0..J_max_order at each x > 0 via normalised backward recurrence.

    Returns an array of shape ``(max_order + 1,) + x.shape``.
    """
    top = max(max_order, int(np.max(x))) if x.size else max_order
    start = top + 20 + int(math.sqrt(40.0 * (top + 1)))
    start += start % 2
    out = np.zeros((max_order + 1,) + x.shape)
    j_next = np.zeros_like(x)
    j_cur = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    two_over_x = 2.0 / x
    for n in range(start, 0, -1):
        j_prev = n * two_over_x * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        # j_cur now holds the unnormalised J_{n-1}
        if n - 1 <= max_order:
            out[n - 1] = j_cur
        if (n - 1) % 2 == 0 and n - 1 > 0:
            norm = norm + 2.0 * j_cur
        big = np.abs(j_cur) > 1e200
        if np.any(big):
            scale = np.where(big, 1e-200, 1.0)
            j_cur = j_cur * scale
            j_next = j_next * scale
            norm = norm * scale
            out = out * scale
    norm = norm + j_cur
    return out / norm


def _jn_nonneg(m: int, x: np.ndarray) -> np.ndarray:
    # m >= 0, x >= 0
    result = np.empty_like(x)
    small = x <= SERIES_SWITCH
    if np.any(small):
        result[small] = _series(m, x[small])
    if np.any(~small):
        result[~small] = _miller(m, x[~small])[m]
    return result


def bessel_j(m: int, x):
    """Bessel function of the first kind J_m(x) for integer ``m``.

    ``x`` may be a scalar or an array; the return type follows ``x``.
    """
    m = int(m)
    arr = np.asarray(x, dtype=np.float64)
    _check_envelope(m, arr)
    flat = np.atleast_1d(arr).ravel()
    order = abs(m)
    values = _jn_nonneg(order, np.abs(flat))
    sign = np.ones_like(flat)
    if m < 0 and order % 2:
        sign = -sign
    if order % 2:
        sign = np.where(flat < 0, -sign, sign)
    values = (sign * values).reshape(arr.shape)
    if arr.ndim == 0:
        return float(values)
    return values


def bessel_j_orders(max_order: int, x: float) -> np.ndarray:
    """Return ``[J_0(x), ..., J_max_order(x)]`` for a scalar ``x``."""
    return np.array([bessel_j(m, x) for m in range(max_order + 1)])


@dataclass(frozen=True)
class BesselRatioTable:
    """Tabulated Bessel ratios J_p(k) / J_q(k) on a uniform grid of k."""

    grid: np.ndarray
    pairs: tuple
    entries: dict = field(repr=False)

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def k_max(self) -> float:
        return float(self.grid[-1])

    def ratio(self, pair: tuple) -> np.ndarray:
        return self.entries[tuple(pair)]


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    out[~np.isfinite(out)] = np.inf
    return out


@lru_cache(maxsize=16)
def ratio_table(
    pairs: tuple = DEFAULT_PAIRS,
    k_max: float = DEFAULT_KMAX,
    step: float = DEFAULT_STEP,
) -> BesselRatioTable:
    """Build (and cache) the lookup table for the requested order pairs."""
    if k_max < 5.0 or step > 0.001 or step <= 0:
        raise ValueError("lookup table needs k_max >= 5 and 0 < step <= 0.001")
    n = int(round(k_max / step))
    grid = np.linspace(0.0, n * step, n + 1)
    grid.setflags(write=False)
    orders = {abs(o) for pair in pairs for o in pair}
    values = {o: bessel_j(o, grid) for o in orders}
    entries = {}
    for p, q in pairs:
        num = values[abs(p)] * (-1.0 if p < 0 and p % 2 else 1.0)
        den = values[abs(q)] * (-1.0 if q < 0 and q % 2 else 1.0)
        col = _ratio(num, den)
        col.setflags(write=False)
        entries[(p, q)] = col
    return BesselRatioTable(grid=grid, pairs=tuple(pairs), entries=entries)


def invert_kf(
    ratios: Iterable[Sequence[float]],
    table: BesselRatioTable | None = None,
    return_residual: bool = False,
):
    """Recover k from measured ratios ``(numerator order, denominator order, value)``.

    The returned k minimises the summed squared difference between
    tabulated and measured ratios.  The grid minimum is refined by a
    parabola through the neighbouring objective values.  With
    ``return_residual`` the attained objective is returned alongside k.

    Raises ``ValueError`` for an empty or non-finite ratio list and
    ``KfOutOfRange`` when the minimum sits on the upper table boundary.
    """
    items = [(int(p), int(q), float(v)) for p, q, v in ratios]
    if not items:
        raise ValueError("at least one Bessel ratio is required")
    if not all(math.isfinite(v) for _, _, v in items):
        raise ValueError("measured Bessel ratios must be finite")
    pairs = tuple(sorted({(p, q) for p, q, _ in items}))
    if table is None or not all(pair in table.entries for pair in pairs):
        kwargs = {} if table is None else {"k_max": table.k_max, "step": table.step}
        table = ratio_table(pairs, **kwargs)

    objective = np.zeros_like(table.grid)
    for p, q, v in items:
        with np.errstate(invalid="ignore", over="ignore"):
            objective = objective + (table.ratio((p, q)) - v) ** 2
    objective[~np.isfinite(objective)] = np.inf
    if not np.any(np.isfinite(objective)):
        raise KfOutOfRange("no finite tabulated ratio matches the measurements")

    i = int(np.argmin(objective))
    last = table.grid.size - 1
    if i == last:
        raise KfOutOfRange(
            f"Bessel-ratio objective is minimised at the table boundary k_max={table.k_max}"
        )
    k = float(table.grid[i])
    best = float(objective[i])
    if 0 < i < last:
        f0, f1, f2 = objective[i - 1], objective[i], objective[i + 1]
        curvature = f0 - 2.0 * f1 + f2
        if np.isfinite(curvature) and curvature > 0:
            shift = 0.5 * (f0 - f2) / curvature
            shift = min(max(shift, -1.0), 1.0)
            k = k + shift * table.step
            best = float(f1 - 0.25 * (f0 - f2) * shift)
    k = max(float(k), 0.0)
    if return_residual:
        return k, max(float(best), 0.0)
    return k
