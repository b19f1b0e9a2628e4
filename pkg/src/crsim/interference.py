"""Spectral-leakage computations in both directions.

Two leakage mechanisms couple the primary and secondary systems:

* PU -> CR: each occupied primary subchannel leaks power into a CR
  subcarrier's band.  The received spectrum is modeled as the expected
  periodogram of the primary PSD, i.e. the PSD smoothed by the Fejer
  kernel of the FFT size, integrated over the subcarrier window.
* CR -> PU: a secondary transmission with an ideal Nyquist pulse leaks a
  sinc^2-shaped density into each primary subchannel band.

The per-pair effective factors combine the CR -> PU densities with the
power-split fractions of the relay/direct equivalence so the two
interference constraints become linear in the equivalent pair powers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PuSubchannel",
    "SpectralGeometry",
    "InterferenceFactors",
    "fejer_cumulative",
    "expected_periodogram",
    "pu_to_cr_interference",
    "cr_to_pu_factor",
    "sinc_sq_window_integral",
    "periodogram_window_integral",
    "periodogram_window_integrals",
    "sinc_sq_window_integrals",
    "effective_factors",
]


@dataclass(frozen=True)
class PuSubchannel:
    """One occupied primary subchannel on the shared spectral axis."""

    index: int
    center: float          # Hz, on the common axis with the CR subcarriers
    bandwidth: float       # Hz
    power: float           # total PSD power in the band (flat PSD assumed)
    gain_ps: float = 0.0   # |h^(ps)|^2, PU -> SU receiver
    gain_pr: float = 0.0   # |h^(pr)|^2, PU -> relay receiver
    gain_sp: float = 0.0   # |h^(sp)|^2, SU TX -> PU
    gain_rp: float = 0.0   # |h^(rp)|^2, relay -> PU

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("subchannel bandwidth must be positive")
        if self.power < 0 or min(
            self.gain_ps, self.gain_pr, self.gain_sp, self.gain_rp
        ) < 0:
            raise ValueError("PSD power and gains must be nonnegative")


@dataclass(frozen=True)
class SpectralGeometry:
    """Subcarrier / subchannel layout on a common frequency axis."""

    delta_f: float            # CR subcarrier spacing, Hz
    symbol_duration: float    # OFDM symbol duration, s
    fft_size: int             # periodogram FFT size K
    cr_centers: np.ndarray    # Hz, one per CR subcarrier
    pu_subchannels: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.delta_f <= 0 or self.symbol_duration <= 0:
            raise ValueError("delta_f and symbol_duration must be positive")
        if self.fft_size < 1:
            raise ValueError("fft_size must be >= 1")
        object.__setattr__(
            self, "cr_centers", np.asarray(self.cr_centers, dtype=float)
        )
        object.__setattr__(self, "pu_subchannels", tuple(self.pu_subchannels))

    @property
    def n_cr(self) -> int:
        return self.cr_centers.size

    def spectral_distance(self, i: int, l: int) -> float:
        """|center(i) - center(l)| between CR subcarrier i and subchannel l."""
        return abs(float(self.cr_centers[i]) - self.pu_subchannels[l].center)

    def to_normalized(self, f_hz) -> np.ndarray:
        """Map Hz to normalized radian frequency (period = K * delta_f)."""
        return 2.0 * np.pi * np.asarray(f_hz, dtype=float) / (
            self.fft_size * self.delta_f
        )


@dataclass(frozen=True)
class InterferenceFactors:
    """Precomputed leakage factors for one channel realization.

    ``j_relay`` / ``j_su`` are the summed PU -> CR interference powers seen
    at the relay and the SU receiver.  ``phi_s`` / ``phi_r`` are the N x L
    leakage densities of the SU TX and relay toward each subchannel, and
    ``eff_s`` / ``eff_r`` the N x N per-pair effective factors (already
    summed over subchannels).
    """

    j_relay: np.ndarray
    j_su: np.ndarray
    phi_s: np.ndarray
    phi_r: np.ndarray
    eff_s: np.ndarray
    eff_r: np.ndarray


def fejer_cumulative(theta, k: int):
    """Exact antiderivative of the Fejer kernel sum_{|m|<K} (K-|m|) e^{imu}.

    integral_0^theta (sin(K u / 2) / sin(u / 2))^2 du
        = K theta + 2 sum_{m=1}^{K-1} ((K - m) / m) sin(m theta)
    """
    theta = np.asarray(theta, dtype=float)
    if k == 1:
        return theta.copy()
    m = np.arange(1, k)
    coef = (k - m) / m
    return k * theta + 2.0 * np.sin(np.multiply.outer(theta, m)) @ coef


def expected_periodogram(w, band: tuple, k: int, psd_height: float):
    """Fejer-smoothed flat PSD evaluated at normalized frequency ``w``.

    ``band`` is the (a, b) normalized support of the flat PSD of height
    ``psd_height``.  A PSD flat over the whole period is returned
    unchanged (the Fejer kernel integrates to 2 pi K).
    """
    a, b = band
    if b < a:
        raise ValueError("band must be ordered")
    w = np.asarray(w, dtype=float)
    g = fejer_cumulative(w - a, k) - fejer_cumulative(w - b, k)
    return psd_height * g / (2.0 * np.pi * k)


def _gauss_legendre(a, b, nodes: int):
    x, wts = np.polynomial.legendre.leggauss(nodes)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return mid + half * x, half * wts


def periodogram_window_integral(
    delta: float,
    window: float,
    pu_bandwidth: float,
    geom: SpectralGeometry,
    nodes: int = 32,
) -> float:
    """Integral of the unit-power expected periodogram over a CR window.

    The subchannel carries a flat PSD of total power 1 centered at spectral
    distance ``delta`` (Hz) from the window center; the window is
    ``window`` Hz wide.  Gauss-Legendre quadrature; the integrand is the
    smooth Fejer-convolved PSD, so convergence is spectral.
    """
    k = geom.fft_size
    dw = geom.to_normalized(delta)
    half_win = geom.to_normalized(window) / 2.0
    half_band = geom.to_normalized(pu_bandwidth) / 2.0
    height = 1.0 / (2.0 * half_band)  # unit total power over the band
    x, wts = _gauss_legendre(dw - half_win, dw + half_win, nodes)
    vals = expected_periodogram(x, (-half_band, half_band), k, height)
    return float(vals @ wts)


def pu_to_cr_interference(
    l: int,
    i: int,
    geom: SpectralGeometry,
    gain: float,
    nodes: int = 32,
) -> float:
    """Interference power from PU subchannel ``l`` into CR subcarrier ``i``."""
    if gain < 0:
        raise ValueError("gain must be nonnegative")
    sub = geom.pu_subchannels[l]
    if sub.power == 0.0 or gain == 0.0:
        return 0.0
    base = periodogram_window_integral(
        geom.spectral_distance(i, l), geom.delta_f, sub.bandwidth, geom, nodes
    )
    return gain * sub.power * base


def sinc_sq_window_integral(
    delta: float,
    bandwidth: float,
    symbol_duration: float,
    nodes: int = 64,
) -> float:
    """T_s * integral of sinc^2(f T_s) over [delta - B/2, delta + B/2].

    np.sinc handles the removable singularity at f = 0 exactly.  The
    integrand has one oscillation lobe per 1/T_s of bandwidth; the node
    count is sized for the default geometry and exposed for the
    resolution-doubling self check.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    ts = symbol_duration
    x, wts = _gauss_legendre(delta - bandwidth / 2.0, delta + bandwidth / 2.0, nodes)
    vals = np.sinc(x * ts) ** 2
    return float(ts * (vals @ wts))


def cr_to_pu_factor(
    i: int,
    l: int,
    geom: SpectralGeometry,
    gain: float,
    nodes: int = 64,
) -> float:
    """Leakage density of CR subcarrier ``i`` into PU subchannel ``l``."""
    if gain < 0:
        raise ValueError("gain must be nonnegative")
    if gain == 0.0:
        return 0.0
    sub = geom.pu_subchannels[l]
    base = sinc_sq_window_integral(
        geom.spectral_distance(i, l), sub.bandwidth, geom.symbol_duration, nodes
    )
    return gain * base


def periodogram_window_integrals(
    deltas,
    window: float,
    pu_bandwidth: float,
    geom: SpectralGeometry,
    nodes: int = 32,
) -> np.ndarray:
    """Vectorized :func:`periodogram_window_integral` over many distances."""
    deltas = np.asarray(deltas, dtype=float)
    k = geom.fft_size
    dw = geom.to_normalized(deltas)
    half_win = geom.to_normalized(window) / 2.0
    half_band = geom.to_normalized(pu_bandwidth) / 2.0
    height = 1.0 / (2.0 * half_band)
    x, wts = np.polynomial.legendre.leggauss(nodes)
    pts = dw[..., None] + half_win * x  # (..., nodes)
    vals = expected_periodogram(pts, (-half_band, half_band), k, height)
    return half_win * (vals @ wts)


def sinc_sq_window_integrals(
    deltas,
    bandwidth: float,
    symbol_duration: float,
    nodes: int = 64,
) -> np.ndarray:
    """Vectorized :func:`sinc_sq_window_integral` over many distances."""
    deltas = np.asarray(deltas, dtype=float)
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    x, wts = np.polynomial.legendre.leggauss(nodes)
    pts = deltas[..., None] + (bandwidth / 2.0) * x
    vals = np.sinc(pts * symbol_duration) ** 2
    return symbol_duration * (bandwidth / 2.0) * (vals @ wts)


def effective_factors(ratios, phi_s: np.ndarray, phi_r: np.ndarray):
    """Per-pair effective interference factors (eff_s, eff_r), N x N.

    Relay-mode pairs split each pair watt between the SU TX and the relay;
    the two coefficients are the split fractions and sum to one.  Direct
    pairs put the whole watt on the SU TX side, so the relay factor
    vanishes.  ``phi_s`` and ``phi_r`` are N x L leakage densities; the
    result is already summed over the L subchannels.
    """
    from .channel import link_table  # local import to avoid a cycle

    split_first, split_second, _, relay = link_table(ratios)
    phi_s_sum = np.asarray(phi_s, dtype=float).sum(axis=1)
    phi_r_sum = np.asarray(phi_r, dtype=float).sum(axis=1)

    eff_s = split_first * phi_s_sum[:, None]
    eff_r = split_second * phi_r_sum[None, :]
    if np.any(~np.isfinite(eff_s)) or np.any(~np.isfinite(eff_r)):
        raise AssertionError("nonfinite effective factor: mode classification bug")
    # relay-mode coefficients are power-split fractions and must sum to 1
    if np.any(np.abs((split_first + split_second)[relay] - 1.0) > 1e-12):
        raise AssertionError("relay split fractions do not sum to one")
    return eff_s, eff_r
