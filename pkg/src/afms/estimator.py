"""Block-wise AFMS parameter estimation.

Pipeline for one odd-length block:

1. product function p[k] = x[-k] x[k] (optionally mean-removed);
2. modified-covariance LP fit of p and prediction-error-filter roots;
3. near-unit-circle roots become spectral lines, grouped into clusters;
4. the two highest clusters sit at 2wc + 2wa and 2wc + wa, located by
   spectral symmetry; wf is the mean line spacing of the clusters at and
   above 2wc.  When a block is too short to resolve those sidelines the
   FM is switched off and the lines are instead labelled 2wc + j wa by a
   least-squares search over line pairs;
5. a linear least-squares fit of the Bessel expansion on the original
   block gives A_ci J_m(kf); Bessel ratios give kf, the A_ci give the rest;
6. the block is regenerated from the recovered parameters.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_odd_length, check_positive_int, check_signal, wrap_phase
from .bessel import KfOutOfRange, bessel_j, invert_kf
from .model import PARAM_NAMES, AFMSParams, InadmissibleParameters, SignalBlock, synthesize
from .pf import product_function
from .spectral import SpectrumEstimate, line_spectrum, modcov_fit, pef_roots


class EstimationError(RuntimeError):
    """A pipeline stage could not produce a usable result.

    ``stage`` names the failing step; ``diagnostics`` carries whatever the
    pipeline had computed up to that point.
    """

    def __init__(self, stage: str, message: str, diagnostics: dict | None = None):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.reason = message
        self.diagnostics = diagnostics or {}


@dataclass
class Cluster:
    lines: list
    center: float | None = None

    def __post_init__(self):
        if not self.lines:
            raise ValueError("a cluster needs at least one line")
        self.lines = sorted((float(f), float(m)) for f, m in self.lines)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([f for f, _ in self.lines])

    @property
    def magnitudes(self) -> np.ndarray:
        return np.array([m for _, m in self.lines])

    @property
    def centroid(self) -> float:
        w = self.magnitudes
        f = self.frequencies
        return float(np.sum(w * f) / np.sum(w)) if np.sum(w) > 0 else float(np.mean(f))

    @property
    def span(self) -> tuple[float, float]:
        return self.lines[0][0], self.lines[-1][0]


@dataclass(frozen=True)
class ComplexAmplitudes:
    """Least-squares Bessel-weighted amplitudes of the three analytic groups.

    ``bessel_terms[i, j]`` estimates A_c(i) J_m(kf) with m = ``orders[j]``;
    rows are carrier, upper sideband, lower sideband.
    """

    A_c: np.ndarray
    bessel_terms: np.ndarray
    orders: np.ndarray
    omegas: tuple
    residual_norm: float
    condition: float
    ill_conditioned: bool = False

    def term(self, group: int, m: int) -> complex:
        j = int(np.flatnonzero(self.orders == m)[0])
        return complex(self.bessel_terms[group, j])

    def reconstruct(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=np.float64)
        total = np.zeros(n.shape, dtype=complex)
        wc, wa, wf = self.omegas
        for i, base in enumerate((wc, wc + wa, wc - wa)):
            freqs = base + self.orders * wf
            total += np.exp(1j * np.outer(n, freqs)) @ self.bessel_terms[i]
        return 2.0 * total.real


@dataclass(frozen=True)
class FitConfig:
    """Tuning knobs for :func:`fit_block`.  ``None`` selects the automatic rule."""

    lp_order: int | None = None
    radius_threshold: float = 0.95
    gap: float | None = None
    truncation: int | None = None
    symmetry_half_width: float | None = None
    remove_dc: bool = True
    noise_floor: float = 1e-4
    core_fraction: float = 0.01
    cluster_floor: float = 1e-3
    spectrum_grid: int = 16384
    condition_limit: float = 1e8

    def __post_init__(self):
        if self.lp_order is not None and self.lp_order < 1:
            raise ValueError("lp_order must be positive")
        if not 0 < self.radius_threshold < 1:
            raise ValueError("radius_threshold must lie in (0, 1)")
        if self.gap is not None and not self.gap > 0:
            raise ValueError("gap must be positive")
        if self.truncation is not None and self.truncation < 0:
            raise ValueError("truncation must be >= 0")
        if self.symmetry_half_width is not None and not self.symmetry_half_width > 0:
            raise ValueError("symmetry_half_width must be positive")
        if not 0 <= self.cluster_floor < 1:
            raise ValueError("cluster_floor must lie in [0, 1)")
        if not 0 <= self.core_fraction <= 1:
            raise ValueError("core_fraction must lie in [0, 1]")
        if not 0 <= self.noise_floor < 1:
            raise ValueError("noise_floor must lie in [0, 1)")
        if self.spectrum_grid < 16:
            raise ValueError("spectrum_grid must be >= 16")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "FitConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class FitResult:
    params: AFMSParams
    regenerated: SignalBlock
    nrmse: float
    diagnostics: dict = field(default_factory=dict)


def nrmse(original, regenerated) -> float:
    x = np.asarray(original, dtype=np.float64)
    y = np.asarray(regenerated, dtype=np.float64)
    ref = math.sqrt(float(np.mean(x * x)))
    err = math.sqrt(float(np.mean((x - y) ** 2)))
    if ref == 0.0:
        return 0.0 if err == 0.0 else math.inf
    return err / ref


# ---------------------------------------------------------------------------
# line extraction and clustering


def group_clusters(lines, gap: float) -> list[Cluster]:
    """Split frequency-sorted lines wherever neighbours are more than ``gap`` apart."""
    if not gap > 0:
        raise ValueError(f"gap must be positive, got {gap}")
    items = sorted((float(f), float(m)) for f, m in lines)
    if not items:
        raise ValueError("cannot group an empty line list")
    runs = [[items[0]]]
    for prev, cur in zip(items, items[1:]):
        if cur[0] - prev[0] > gap:
            runs.append([cur])
        else:
            runs[-1].append(cur)
    clusters = [Cluster(run) for run in runs]
    clusters.sort(key=lambda c: c.centroid)
    return clusters


def line_magnitudes(sequence, frequencies) -> np.ndarray:
    """Cosine amplitudes of an even sequence at the given frequencies (least squares)."""
    p = np.asarray(sequence, dtype=np.float64)
    K = (p.size - 1) // 2
    k = np.arange(-K, K + 1)
    f = np.asarray(frequencies, dtype=np.float64)
    if f.size == 0:
        return np.zeros(0)
    design = np.cos(np.outer(k, f))
    coef, *_ = np.linalg.lstsq(design, p, rcond=None)
    return np.abs(coef)


def extract_lines(sequence, model, radius_threshold: float, noise_floor: float):
    roots = pef_roots(model)
    hi = 1.0 / radius_threshold
    kept = [r for r in roots if radius_threshold <= r.radius <= hi]
    if not kept:
        return [], roots
    freqs = np.array([r.frequency for r in kept])
    mags = line_magnitudes(sequence, freqs)
    peak = float(np.max(mags)) if mags.size else 0.0
    if peak == 0.0:
        return [], roots
    lines = [(f, m) for f, m in zip(freqs, mags) if m >= noise_floor * peak]
    return sorted(lines), roots


def _symmetry_score(spectrum: SpectrumEstimate, values: np.ndarray, c: float, w: float) -> float:
    step = spectrum.step
    u = np.arange(1, max(int(round(w / step)), 1) + 1) * step
    upper = np.interp(c + u, spectrum.grid, values)
    lower = np.interp(c - u, spectrum.grid, values)
    return -float(np.sum(np.abs(upper - lower)) * step)


def cluster_center(
    cluster: Cluster,
    spectrum: SpectrumEstimate,
    half_width: float | None = None,
) -> float:
    """Frequency about which the magnitude spectrum is most nearly even.

    Candidates are the cluster's line frequencies and the spectrum grid
    points between its extreme lines.  The score compares magnitudes
    mirrored about each candidate over ``half_width`` (default: half the
    cluster span plus one mean line spacing).  Sets ``cluster.center``.
    """
    lo, hi = cluster.span
    if len(cluster.lines) == 1:
        cluster.center = lo
        return lo
    if half_width is None:
        half_width = 0.5 * (hi - lo) + (hi - lo) / (len(cluster.lines) - 1)
    if lo - half_width < spectrum.grid[0] - 1e-12 and lo > spectrum.grid[0]:
        half_width = lo - spectrum.grid[0]
    if lo < spectrum.grid[0] or hi > spectrum.grid[-1]:
        raise ValueError("spectrum does not cover the cluster span")
    values = spectrum.magnitude
    grid_pts = spectrum.grid[(spectrum.grid > lo) & (spectrum.grid < hi)]
    candidates = np.concatenate([cluster.frequencies, grid_pts])
    scores = np.array([_symmetry_score(spectrum, values, c, half_width) for c in candidates])
    best = float(candidates[int(np.argmax(scores))])
    cluster.center = best
    return best


def derive_center_frequencies(c_top: float, c_second: float) -> tuple[float, float]:
    """Carrier and AM frequency from the 2wc + 2wa and 2wc + wa cluster centres."""
    if not c_top > c_second > 0:
        raise ValueError(f"need c_top > c_second > 0, got {c_top}, {c_second}")
    omega_a = c_top - c_second
    omega_c = (2.0 * c_second - c_top) / 2.0
    if not (omega_a > 0 and omega_c > 0):
        raise ValueError(
            f"derived omega_c={omega_c:.6g}, omega_a={omega_a:.6g} not positive; "
            "clusters misidentified"
        )
    return omega_c, omega_a


def estimate_omega_f(*clusters: Cluster, tolerance: float = 0.1) -> float:
    """Mean spacing of adjacent lines pooled over one or more clusters.

    Spacings further than ``tolerance`` (relative) from the pooled median
    are treated as outliers, e.g. a foreign line merged into a cluster or a
    missing weak line, and ignored.
    """
    diffs = [np.diff(c.frequencies) for c in clusters if len(c.lines) >= 2]
    if not diffs:
        raise ValueError("a singleton cluster carries no line spacing")
    d = np.concatenate(diffs)
    med = np.median(d)
    keep = np.abs(d - med) <= tolerance * med
    return float(np.mean(d[keep]))


# ---------------------------------------------------------------------------
# amplitudes and parameter recovery


def core_lines(cluster: Cluster, fraction: float) -> Cluster:
    """Sub-cluster of lines at least ``fraction`` of the strongest line."""
    peak = float(np.max(cluster.magnitudes))
    kept = [(f, m) for f, m in cluster.lines if m >= fraction * peak]
    return Cluster(kept)


def max_truncation(
    length: int,
    omega_c: float | None = None,
    omega_a: float | None = None,
    omega_f: float | None = None,
) -> int:
    """Largest Bessel truncation M a block supports.

    The 6 (2M + 1) real unknowns must not exceed the sample count.  Given
    the frequencies, the three families must also keep distinct,
    non-negative frequencies: 2 M wf stays half a line spacing below wa and
    the lower family wc - wa - M wf stays half a spacing above zero.
    """
    cap = max((length // 6 - 1) // 2, 0)
    if omega_f is not None and omega_f > 0:
        if omega_a is not None and omega_a > 0:
            cap = min(cap, max(math.ceil((omega_a / omega_f - 0.5) / 2.0) - 1, 0))
        if omega_c is not None and omega_a is not None and omega_a > 0:
            cap = min(cap, max(math.ceil((omega_c - omega_a) / omega_f - 0.5) - 1, 0))
    return cap


def solve_amplitudes(
    block: SignalBlock,
    omega_c: float,
    omega_a: float,
    omega_f: float,
    M: int,
    condition_limit: float = 1e8,
) -> ComplexAmplitudes:
    """Least-squares fit of the truncated Bessel expansion with known frequencies.

    Unknowns are the complex terms A_ci J_m(kf) of the carrier and both
    sidebands for m in [-M, M]; the conjugate families are tied to them so
    the system stays real.
    """
    x = block.samples
    n = block.n.astype(np.float64)
    M = int(M)
    if M < 0:
        raise ValueError("M must be >= 0")
    unknowns = 2 * 3 * (2 * M + 1)
    if x.size < unknowns:
        raise ValueError(f"{unknowns} real unknowns need at least as many samples, got {x.size}")
    orders = np.arange(-M, M + 1)
    bases = (omega_c, omega_c + omega_a, omega_c - omega_a)
    freqs = np.concatenate([b + orders * omega_f for b in bases])
    phase = np.outer(n, freqs)
    design = np.hstack([2.0 * np.cos(phase), -2.0 * np.sin(phase)])
    col_norm = np.linalg.norm(design, axis=0)
    col_norm[col_norm == 0] = 1.0
    sol, _, _, sv = np.linalg.lstsq(design / col_norm, x, rcond=None)
    sol = sol / col_norm
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else math.inf
    resid = float(np.linalg.norm(design @ sol - x))
    half = freqs.size
    terms = (sol[:half] + 1j * sol[half:]).reshape(3, orders.size)
    return ComplexAmplitudes(
        A_c=terms[:, M].copy(),
        bessel_terms=terms,
        orders=orders,
        omegas=(float(omega_c), float(omega_a), float(omega_f)),
        residual_norm=resid,
        condition=cond,
        ill_conditioned=bool(cond > condition_limit),
    )


def _signed_ratio(num: complex, den: complex) -> float:
    return float((num * np.conj(den)).real / (abs(den) ** 2))


def estimate_kf(amps: ComplexAmplitudes, return_details: bool = False):
    """FM index from Bessel ratios of the carrier group's terms.

    Positive and negative orders are combined using J_-m = (-1)^m J_m; the
    sign agreement of the two halves is reported as a consistency check.
    """
    if amps.orders.max(initial=0) < 2:
        raise ValueError("Bessel terms up to |m| = 2 are needed to invert kf")
    b = {int(m): amps.term(0, int(m)) for m in amps.orders if abs(m) <= 2}
    j0 = b[0]
    j1 = 0.5 * (b[1] - b[-1])
    j2 = 0.5 * (b[2] + b[-2])
    scale = max(abs(j0), abs(j1), abs(j2))
    details = {"sign_consistent": True, "ratios": [], "residual": 0.0}
    if scale == 0.0:
        raise ValueError("carrier Bessel terms vanish; kf is undetermined")
    for m, pos, neg in ((1, b[1], b[-1]), (2, b[2], b[-2])):
        want = -1.0 if m % 2 else 1.0
        if abs(neg) > 1e-12 * scale and abs(pos) > 1e-12 * scale:
            if np.sign(_signed_ratio(neg, pos)) != want:
                details["sign_consistent"] = False
    if abs(j1) <= 1e-9 * scale and abs(j2) <= 1e-9 * scale:
        k = 0.0
    else:
        if abs(j0) > 0.05 * scale:
            ratios = []
            if abs(j1) > 1e-12 * scale:
                ratios.append((0, 1, _signed_ratio(j0, j1)))
            if abs(j2) > 1e-12 * scale:
                ratios.append((0, 2, _signed_ratio(j0, j2)))
        else:
            if abs(j2) == 0.0:
                raise ValueError("all Bessel ratios are degenerate")
            ratios = [(1, 2, _signed_ratio(j1, j2))]
        details["ratios"] = ratios
        k, details["residual"] = invert_kf(ratios, return_residual=True)
    if return_details:
        return k, details
    return k


def _project_amplitude(terms: np.ndarray, orders: np.ndarray, k_f: float) -> complex:
    jm = np.array([bessel_j(int(m), k_f) for m in orders])
    return complex(np.sum(terms * jm) / np.sum(jm * jm))


def recover_parameters(amps, k_f: float, frequencies) -> AFMSParams:
    """Turn analytic amplitudes into AFMS parameters (r fixed at -1).

    ``amps`` is a :class:`ComplexAmplitudes` (the A_ci are re-estimated by
    projecting each group's Bessel terms onto J_m(kf)) or a plain triple
    ``(A_c1, A_c3, A_c5)``.
    """
    if k_f < 0:
        raise ValueError("k_f must be >= 0")
    omega_c, omega_a, omega_f = frequencies
    if isinstance(amps, ComplexAmplitudes):
        ac1, ac3, ac5 = (
            _project_amplitude(amps.bessel_terms[i], amps.orders, k_f) for i in range(3)
        )
    else:
        ac1, ac3, ac5 = (complex(a) for a in amps)
    if ac1 == 0:
        raise ValueError("carrier amplitude A_c1 vanishes")
    A = 2.0 * abs(ac1)
    theta = float(np.angle(ac1))
    if abs(ac5) == 0.0:
        if abs(ac3) != 0.0:
            raise ValueError("upper sideband present without lower sideband; inconsistent with r = -1")
        return AFMSParams(
            A=A, omega_c=omega_c, theta=wrap_phase(theta), k_f=k_f, omega_f=omega_f,
            k_a=0.0, omega_a=omega_a, theta_a=0.0, theta_b=0.0, s=1.0,
        )
    k_a = 4.0 * abs(ac5) / A
    s = abs(ac3) / abs(ac5)
    theta_a = wrap_phase(np.angle(ac3) - theta) if abs(ac3) > 0 else 0.0
    theta_b = wrap_phase(theta - theta_a - np.angle(ac5) - np.pi)
    return AFMSParams(
        A=A, omega_c=omega_c, theta=wrap_phase(theta), k_f=k_f, omega_f=omega_f,
        k_a=k_a, omega_a=omega_a, theta_a=theta_a, theta_b=theta_b, s=s,
    )


# ---------------------------------------------------------------------------
# full pipeline


def auto_lp_order(length: int) -> int:
    # p[k] is even, so backward-error rows repeat the forward ones and only
    # N - p rows are independent; stay a little below p = N / 2.
    return max(int(0.44 * length), 1)


def default_gap(lines) -> float:
    """Grouping threshold: 1.5x the median spacing of adjacent lines."""
    freqs = np.sort(np.array([f for f, _ in lines]))
    spacing = np.diff(freqs)
    if spacing.size == 0:
        return 1.0
    return max(1.5 * float(np.median(spacing)), 1e-9)


def _high_clusters(lines, gap: float, config: FitConfig) -> tuple[list, list, float]:
    clusters = group_clusters(lines, gap)
    # isolated FM tail lines far from their parent cluster are discarded
    strongest = max(float(np.max(c.magnitudes)) for c in clusters)
    clusters = [
        c for c in clusters if np.max(c.magnitudes) >= config.cluster_floor * strongest
    ]
    if len(clusters) < 2:
        return clusters, [], math.inf
    separation = clusters[-1].centroid - clusters[-2].centroid
    low_cutoff = 2.0 * separation + gap
    return clusters, [c for c in clusters if c.centroid > low_cutoff], low_cutoff


def _top_clusters(lines, config: FitConfig, diag: dict):
    """Clusters above the low-frequency band, lowest first."""
    gap = config.gap if config.gap is not None else default_gap(lines)
    clusters, high, low_cutoff = _high_clusters(lines, gap, config)
    diag["gap"] = gap
    diag["low_band_cutoff"] = low_cutoff
    diag["n_clusters"] = len(clusters)
    diag["n_high_clusters"] = len(high)
    if len(clusters) < 2:
        raise EstimationError("group_clusters", "fewer than two line clusters", diag)
    if len(high) < 2:
        raise EstimationError(
            "group_clusters",
            "fewer than two clusters above the low-frequency band (model mismatch)",
            diag,
        )
    return high


def search_line_labels(block: SignalBlock, lines, min_frequency: float = 1e-3):
    """Carrier and AM frequency for blocks whose FM sidelines are unresolved.

    Every pair of product-function lines, read as 2wc + i wa and
    2wc + j wa with -2 <= i < j <= 2, proposes a (wc, wa); the admissible
    proposal whose FM-free least-squares fit leaves the smallest residual
    on the block wins.  Returns ``(wc, wa, residual, n_hypotheses)`` or
    ``None`` when no pair gives an admissible proposal.
    """
    freqs = sorted({round(float(f), 12) for f, _ in lines if f > min_frequency})
    best = None
    tried = 0
    for ia, fa in enumerate(freqs):
        for fb in freqs[ia + 1:]:
            for i in range(-2, 3):
                for j in range(i + 1, 3):
                    wa = (fb - fa) / (j - i)
                    wc = 0.5 * (fb - j * wa)
                    if not 0 < wa < wc or wc + wa >= 0.5 * math.pi:
                        continue
                    tried += 1
                    amps = solve_amplitudes(block, wc, wa, 0.0, 0)
                    if best is None or amps.residual_norm < best[2]:
                        best = (wc, wa, amps.residual_norm)
    if best is None:
        return None
    return best + (tried,)


def fit_block(block, config: FitConfig | None = None) -> FitResult:
    """Estimate AFMS parameters for one block and regenerate it.

    Raises :class:`EstimationError` naming the failing stage.
    """
    config = config or FitConfig()
    if not isinstance(block, SignalBlock):
        block = SignalBlock.centered(block)
    L = check_odd_length(len(block), "block length")
    diag: dict = {}

    pf = product_function(block).values
    seq = pf - pf.mean() if config.remove_dc else pf
    order = config.lp_order or auto_lp_order(L)
    diag["lp_order"] = order
    try:
        model = modcov_fit(seq, order)
    except ValueError as exc:
        raise EstimationError("modcov_fit", str(exc), diag) from exc
    diag["lp_degenerate"] = model.degenerate

    lines, roots = extract_lines(seq, model, config.radius_threshold, config.noise_floor)
    diag["root_radii"] = [r.radius for r in roots]
    diag["n_lines"] = len(lines)
    if len(lines) < 2:
        raise EstimationError("pef_roots", "fewer than two spectral lines near the unit circle", diag)

    try:
        high = _top_clusters(lines, config, diag)
    except EstimationError as exc:
        high, cluster_error = None, exc

    pool = []
    if high is not None:
        spectrum = line_spectrum(lines, config.spectrum_grid, diag["gap"] / 9.0)
        top, second = high[-1], high[-2]
        c_top = cluster_center(top, spectrum, config.symmetry_half_width)
        c_second = cluster_center(second, spectrum, config.symmetry_half_width)
        diag["cluster_centers"] = [c_second, c_top]
        try:
            omega_c, omega_a = derive_center_frequencies(c_top, c_second)
        except ValueError as exc:
            raise EstimationError("derive_center_frequencies", str(exc), diag) from exc

        # wf from the line spacing of the clusters at and above 2 wc
        central = None
        if len(high) >= 3:
            cand = high[-3]
            if abs(cand.centroid - 2.0 * omega_c) < 0.5 * omega_a:
                central = cand
        pool = [core_lines(c, config.core_fraction) for c in (central, second, top) if c is not None]
        pool = [c for c in pool if len(c.lines) >= 2]
    diag["omega_f_clusters"] = len(pool)
    fm_resolved = bool(pool)
    diag["fm_resolved"] = fm_resolved

    if fm_resolved:
        omega_f = estimate_omega_f(*pool)
    else:
        # short block: FM sidelines unresolved, clusters collapse onto single
        # lines; label the lines by least squares and switch the FM off
        found = search_line_labels(block, lines)
        if found is None:
            reason = "no admissible labelling of the spectral lines (model mismatch)"
            if high is None:
                reason = f"{cluster_error.reason}; {reason}"
            raise EstimationError("group_clusters", reason, diag)
        omega_c, omega_a, _, diag["label_hypotheses"] = found
        omega_f = 0.0

    m_cap = max_truncation(L, omega_c, omega_a, omega_f)
    diag["truncation_cap"] = m_cap
    M = config.truncation if fm_resolved else 0
    try:
        if M is None:
            first = solve_amplitudes(block, omega_c, omega_a, omega_f, min(3, m_cap), config.condition_limit)
            kf0 = estimate_kf(first) if min(3, m_cap) >= 2 else 0.0
            M = math.ceil(kf0) + 4
        M = min(M, m_cap)
        amps = solve_amplitudes(block, omega_c, omega_a, omega_f, M, config.condition_limit)
    except (ValueError, KfOutOfRange) as exc:
        raise EstimationError("solve_amplitudes", str(exc), diag) from exc
    diag["truncation"] = M
    diag["condition"] = amps.condition
    diag["ill_conditioned"] = amps.ill_conditioned

    if fm_resolved:
        try:
            k_f, kf_details = estimate_kf(amps, return_details=True)
        except (ValueError, KfOutOfRange) as exc:
            raise EstimationError("estimate_kf", str(exc), diag) from exc
        diag["kf_residual"] = kf_details["residual"]
        diag["kf_sign_consistent"] = kf_details["sign_consistent"]
    else:
        k_f = 0.0

    try:
        params = recover_parameters(amps, k_f, (omega_c, omega_a, omega_f))
        params.validate()
    except InadmissibleParameters as exc:
        raise EstimationError("recover_parameters", str(exc), diag) from exc
    except ValueError as exc:
        raise EstimationError("recover_parameters", str(exc), diag) from exc

    regenerated = synthesize(params, L, block.sample_rate_hz)
    return FitResult(
        params=params,
        regenerated=regenerated,
        nrmse=nrmse(block.samples, regenerated.samples),
        diagnostics=diag,
    )


# ---------------------------------------------------------------------------
# record-level estimator


def tile_blocks(length: int, block_len: int, stride: int | None = None) -> list[int]:
    """Start indices of full blocks tiling a record (default: no overlap)."""
    block_len = check_odd_length(block_len, "block_len")
    stride = block_len if stride is None else check_positive_int(stride, "stride")
    if length < block_len:
        return []
    return list(range(0, length - block_len + 1, stride))


class AFMSEstimator(BaseEstimator, TransformerMixin):
    """Block-wise AFMS fitting of a one-dimensional record.

    The record is cut into blocks of ``block_len`` samples every ``stride``
    samples and each block is fitted independently with :func:`fit_block`.
    The remaining parameters mirror :class:`FitConfig`.

    ``transform`` maps a record to its per-block parameter matrix (one row
    per block, columns in ``afms.model.PARAM_NAMES`` order, NaN for blocks
    whose fit failed); ``inverse_transform`` regenerates a record from such a
    matrix.

    Attributes
    ----------
    results_ : list of FitResult or EstimationError
    params_ : list of AFMSParams or None
    block_starts_ : list of int
    n_blocks_ : int
    """

    def __init__(
        self,
        block_len: int = 41,
        stride: int | None = None,
        sample_rate_hz: float = 1.0,
        lp_order: int | None = None,
        radius_threshold: float = 0.95,
        gap: float | None = None,
        truncation: int | None = None,
        symmetry_half_width: float | None = None,
        remove_dc: bool = True,
        noise_floor: float = 1e-4,
        core_fraction: float = 0.01,
        cluster_floor: float = 1e-3,
        spectrum_grid: int = 16384,
        condition_limit: float = 1e8,
    ):
        self.block_len = block_len
        self.stride = stride
        self.sample_rate_hz = sample_rate_hz
        self.lp_order = lp_order
        self.radius_threshold = radius_threshold
        self.gap = gap
        self.truncation = truncation
        self.symmetry_half_width = symmetry_half_width
        self.remove_dc = remove_dc
        self.noise_floor = noise_floor
        self.core_fraction = core_fraction
        self.cluster_floor = cluster_floor
        self.spectrum_grid = spectrum_grid
        self.condition_limit = condition_limit

    def _config(self) -> FitConfig:
        names = {f.name for f in fields(FitConfig)}
        return FitConfig(**{k: v for k, v in self.get_params().items() if k in names})

    def _fit_record(self, X):
        x = check_signal(np.ravel(X), "X", min_length=self.block_len)
        config = self._config()
        starts = tile_blocks(x.size, self.block_len, self.stride)
        results = []
        for start in starts:
            block = SignalBlock.centered(
                x[start:start + self.block_len], self.sample_rate_hz, start
            )
            try:
                results.append(fit_block(block, config))
            except EstimationError as exc:
                results.append(exc)
        return starts, results

    def fit(self, X, y=None):
        self.block_starts_, self.results_ = self._fit_record(X)
        self.params_ = [r.params if isinstance(r, FitResult) else None for r in self.results_]
        self.n_blocks_ = len(self.results_)
        self.record_length_ = int(np.size(X))
        return self

    @staticmethod
    def _matrix(params) -> np.ndarray:
        out = np.full((len(params), len(PARAM_NAMES)), np.nan)
        for i, p in enumerate(params):
            if p is not None:
                out[i] = [getattr(p, name) for name in PARAM_NAMES]
        return out

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "results_")
        _, results = self._fit_record(X)
        return self._matrix([r.params if isinstance(r, FitResult) else None for r in results])

    def fit_transform(self, X, y=None, **fit_params) -> np.ndarray:
        return self.fit(X)._matrix(self.params_)

    def inverse_transform(self, P) -> np.ndarray:
        """Regenerated record; samples not covered by a fitted block are NaN."""
        check_is_fitted(self, "results_")
        P = np.atleast_2d(np.asarray(P, dtype=np.float64))
        if P.shape != (self.n_blocks_, len(PARAM_NAMES)):
            raise ValueError(
                f"expected a ({self.n_blocks_}, {len(PARAM_NAMES)}) parameter matrix, got {P.shape}"
            )
        out = np.full(self.record_length_, np.nan)
        for start, row in zip(self.block_starts_, P):
            if np.all(np.isfinite(row)):
                params = AFMSParams(**dict(zip(PARAM_NAMES, map(float, row))))
                out[start:start + self.block_len] = synthesize(
                    params, self.block_len, check=False
                ).samples
        return out

    def regenerate(self) -> np.ndarray:
        """Regenerated version of the record passed to :meth:`fit`."""
        check_is_fitted(self, "results_")
        return self.inverse_transform(self._matrix(self.params_))

    def score(self, X, y=None) -> float:
        """Negative mean block nrmse (failed blocks count as nrmse 1)."""
        check_is_fitted(self, "results_")
        _, results = self._fit_record(X)
        if not results:
            return float("nan")
        errs = [min(r.nrmse, 1.0) if isinstance(r, FitResult) else 1.0 for r in results]
        return -float(np.mean(errs))
