"""AFMS signal model: parameter record, sample containers and synthesis.

The amplitude-and-frequency-modulated sinusoid is

    x[n] = A cos(wc n + kf sin(wf n) + theta)
         + (s A ka / 2) cos((wc + wa) n + kf sin(wf n) + theta + theta_a)
         + (r A ka / 2) cos((wc - wa) n + kf sin(wf n) + theta - theta_a - theta_b)

with r fixed at -1.  All frequencies are angular, in rad/sample, and every
block is indexed symmetrically about its midpoint (n = 0 at the centre).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ._validation import check_odd_length, check_positive_int, check_signal
from .bessel import bessel_j

PARAM_NAMES = (
    "A", "omega_c", "theta", "k_f", "omega_f", "k_a", "omega_a",
    "theta_a", "theta_b", "s", "r",
)


class InadmissibleParameters(ValueError):
    """An AFMSParams invariant is violated.

    ``invariant`` holds a short machine-readable name of the violated rule.
    """

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


@dataclass(frozen=True)
class AFMSParams:
    """Full parameter vector of the AFMS model.

    Modulations that are switched off (``k_f == 0`` or ``k_a == 0``) make the
    corresponding modulating frequency irrelevant; such frequencies are
    exempt from the ordering and Nyquist checks.
    """

    A: float = 1.0
    omega_c: float = 0.3
    theta: float = 0.0
    k_f: float = 0.0
    omega_f: float = 0.0
    k_a: float = 0.0
    omega_a: float = 0.0
    theta_a: float = 0.0
    theta_b: float = 0.0
    s: float = 1.0
    r: float = -1.0

    def violations(self) -> list[tuple[str, str]]:
        """List ``(invariant, message)`` for every broken invariant."""
        out = []
        values = asdict(self)
        bad = [k for k, v in values.items() if not math.isfinite(v)]
        if bad:
            return [("finite", f"non-finite parameters: {', '.join(bad)}")]
        if self.r != -1.0:
            out.append(("r_fixed", f"r must be -1, got {self.r}"))
        if not self.A > 0:
            out.append(("A_positive", f"A must be > 0, got {self.A}"))
        if self.k_f < 0:
            out.append(("k_f_nonnegative", f"k_f must be >= 0, got {self.k_f}"))
        if self.k_a < 0:
            out.append(("k_a_nonnegative", f"k_a must be >= 0, got {self.k_a}"))
        if not self.omega_c > 0:
            out.append(("frequency_order", f"omega_c must be > 0, got {self.omega_c}"))
        fm, am = self.k_f > 0, self.k_a > 0
        if fm and not self.omega_f > 0:
            out.append(("frequency_order", f"omega_f must be > 0, got {self.omega_f}"))
        if am and not 0 < self.omega_a < self.omega_c:
            out.append(("frequency_order", "need 0 < omega_a < omega_c"))
        if fm and am and not self.omega_f < self.omega_a:
            out.append(("frequency_order", "need omega_f < omega_a"))
        reach = self.omega_c
        if am:
            reach += self.omega_a
        if fm:
            reach += (math.ceil(self.k_f) + 2) * self.omega_f
        if not reach < math.pi / 2:
            out.append((
                "nyquist",
                f"omega_c + omega_a + (ceil(k_f)+2) omega_f = {reach:.6g} must be < pi/2",
            ))
        return out

    def validate(self) -> "AFMSParams":
        problems = self.violations()
        if problems:
            raise InadmissibleParameters(*problems[0])
        return self

    @property
    def is_admissible(self) -> bool:
        return not self.violations()

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "AFMSParams":
        unknown = set(data) - set(PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown parameter names: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def scaled(self, c: float) -> "AFMSParams":
        return replace(self, A=self.A * c)


@dataclass(frozen=True)
class SignalBlock:
    """A finite real sample record; sample ``j`` sits at time ``j - center_offset``."""

    samples: np.ndarray
    center_offset: int
    sample_rate_hz: float = 1.0
    start: int = field(default=0, compare=False)

    def __post_init__(self):
        arr = check_signal(self.samples, "samples").copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")

    @classmethod
    def centered(cls, samples, sample_rate_hz: float = 1.0, start: int = 0) -> "SignalBlock":
        arr = check_signal(samples, "samples")
        return cls(arr, (arr.size - 1) // 2, float(sample_rate_hz), start)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def n(self) -> np.ndarray:
        return np.arange(self.samples.size) - self.center_offset

    def __eq__(self, other):
        if not isinstance(other, SignalBlock):
            return NotImplemented
        return (
            self.center_offset == other.center_offset
            and self.sample_rate_hz == other.sample_rate_hz
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None


def time_index(length: int) -> np.ndarray:
    length = check_odd_length(length)
    half = (length - 1) // 2
    return np.arange(-half, half + 1, dtype=np.float64)


def evaluate(params: AFMSParams, n) -> np.ndarray:
    """Evaluate the AFMS model at arbitrary times ``n`` (no validation)."""
    return _evaluate_theta(params, np.asarray(n, dtype=np.float64), params.theta)


def _evaluate_theta(params: AFMSParams, n: np.ndarray, theta) -> np.ndarray:
    p = params
    phase = p.omega_c * n + p.k_f * np.sin(p.omega_f * n) + theta
    side = 0.5 * p.A * p.k_a
    return (
        p.A * np.cos(phase)
        + p.s * side * np.cos(phase + p.omega_a * n + p.theta_a)
        + p.r * side * np.cos(phase - p.omega_a * n - p.theta_a - p.theta_b)
    )


def synthesize(
    params: AFMSParams,
    length: int,
    sample_rate_hz: float = 1.0,
    noise_var: float = 0.0,
    seed=None,
    check: bool = True,
) -> SignalBlock:
    """Sample the AFMS model on a centered block of odd ``length``.

    ``noise_var > 0`` adds white Gaussian noise drawn from
    ``numpy.random.default_rng(seed)``.
    """
    n = time_index(length)
    if check:
        params.validate()
    x = evaluate(params, n)
    if noise_var < 0:
        raise ValueError(f"noise_var must be >= 0, got {noise_var}")
    if noise_var > 0:
        rng = np.random.default_rng(seed)
        x = x + rng.normal(0.0, math.sqrt(noise_var), size=x.size)
    return SignalBlock(x, (length - 1) // 2, float(sample_rate_hz))


def analytic_amplitudes(params: AFMSParams) -> tuple[complex, complex, complex]:
    """Complex amplitudes of the carrier, upper and lower sideband.

    Their conjugates are the amplitudes of the mirrored negative-frequency
    terms, so ``x = 2 Re(sum_i A_ci exp(j w_i n) exp(j kf sin(wf n)))``.
    """
    p = params
    ac1 = 0.5 * p.A * np.exp(1j * p.theta)
    ac3 = 0.25 * p.s * p.A * p.k_a * np.exp(1j * (p.theta + p.theta_a))
    ac5 = 0.25 * p.r * p.A * p.k_a * np.exp(1j * (p.theta - p.theta_a - p.theta_b))
    return complex(ac1), complex(ac3), complex(ac5)


def default_truncation(k_f: float) -> int:
    return math.ceil(k_f) + 15


def synthesize_bessel(
    params: AFMSParams,
    length: int,
    truncation: int | None = None,
    sample_rate_hz: float = 1.0,
    check: bool = True,
) -> SignalBlock:
    """Sample the model through its truncated Bessel-series expansion.

    Each of the six complex exponential families is summed over
    m in [-M, M]; conjugate families use J_m(-kf) = (-1)^m J_m(kf).
    """
    n = time_index(length)
    if check:
        params.validate()
    M = default_truncation(params.k_f) if truncation is None else truncation
    M = check_positive_int(M, "truncation")
    p = params
    m = np.arange(-M, M + 1)
    jm = np.array([bessel_j(int(i), p.k_f) for i in m])
    jm_neg = np.where(m % 2, -jm, jm)
    ac1, ac3, ac5 = analytic_amplitudes(p)
    fm = np.exp(1j * np.outer(n, m) * p.omega_f)

    def family(amp, weights, omega):
        return amp * np.exp(1j * omega * n) * (fm @ weights)

    total = (
        family(ac1, jm, p.omega_c)
        + family(np.conj(ac1), jm_neg, -p.omega_c)
        + family(ac3, jm, p.omega_c + p.omega_a)
        + family(np.conj(ac3), jm_neg, -p.omega_c - p.omega_a)
        + family(ac5, jm, p.omega_c - p.omega_a)
        + family(np.conj(ac5), jm_neg, -p.omega_c + p.omega_a)
    )
    return SignalBlock(total.real, (length - 1) // 2, float(sample_rate_hz))


def ensemble_acf(
    params: AFMSParams,
    n: int,
    l: int,
    draws: int,
    seed=None,
    return_stderr: bool = False,
):
    """Monte Carlo estimate of E{x[n] x[n+l]} over a uniform carrier phase.

    Every parameter except ``theta`` is held fixed; ``theta`` is redrawn
    on [0, 2 pi) for each of ``draws`` realisations.  With
    ``return_stderr`` the standard error of the mean is also returned.
    """
    params.validate()
    draws = check_positive_int(draws, "draws")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=draws)
    prod = _evaluate_theta(params, float(n), theta) * _evaluate_theta(params, float(n + l), theta)
    mean = float(np.mean(prod))
    if not return_stderr:
        return mean
    stderr = float(np.std(prod, ddof=1) / math.sqrt(draws)) if draws > 1 else math.inf
    return mean, stderr
