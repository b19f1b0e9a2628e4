"""Energy-detector statistics and closed-form sensing threshold updates.

The cognitive relay senses each OFDM subcarrier with an energy detector
over ``M`` samples.  False-alarm and detection probabilities are Gaussian
tail probabilities of the normalized test statistic; the optimal threshold
per subcarrier has a closed form (root of the stationarity condition of
the per-subcarrier Lagrangian term) which is clamped from below so the
false-alarm constraint stays feasible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, ndtri

__all__ = [
    "SensingParams",
    "DetectorThresholds",
    "DegenerateThresholdError",
    "gaussian_q",
    "inverse_gaussian_q",
    "false_alarm_prob",
    "detection_prob",
    "threshold_floor",
    "detection_bound_threshold",
    "closed_form_threshold",
    "update_thresholds",
]

# Convexity-region bounds for the sensing constraints: the objective is
# only concave in the thresholds for miss bound <= 0.5 and false-alarm
# bound <= 0.3061 (tail value of the standard normal at 0.507).
MAX_MISS_BOUND = 0.5
MAX_FALSE_ALARM_BOUND = 0.3061


class DegenerateThresholdError(ValueError):
    """Raised when the closed-form threshold is undefined for a subcarrier."""

    def __init__(self, index: int, message: str):
        self.index = index
        super().__init__(f"subcarrier {index}: {message}")


@dataclass(frozen=True)
class SensingParams:
    """Energy-detector configuration shared by all subcarriers."""

    sample_count: int
    noise_var: float
    miss_bound: float = 0.2
    false_alarm_bound: float = 0.3061

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if self.noise_var <= 0:
            raise ValueError("noise_var must be positive")
        if not 0 < self.miss_bound <= MAX_MISS_BOUND:
            raise ValueError(f"miss_bound must be in (0, {MAX_MISS_BOUND}]")
        if not 0 < self.false_alarm_bound <= MAX_FALSE_ALARM_BOUND + 1e-12:
            raise ValueError(
                f"false_alarm_bound must be in (0, {MAX_FALSE_ALARM_BOUND}]"
            )


@dataclass(frozen=True)
class DetectorThresholds:
    """Per-subcarrier energy thresholds (nonnegative)."""

    lam: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if np.any(lam < 0):
            raise ValueError("thresholds must be nonnegative")
        object.__setattr__(self, "lam", lam)


def gaussian_q(x):
    """Standard normal tail probability Q(x) = P[Z > x].

    Evaluated through the complementary error function so the deep tail
    keeps full relative accuracy (thresholds live far in the tail).
    """
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def inverse_gaussian_q(p):
    """Functional inverse of :func:`gaussian_q`, defined on (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("inverse_gaussian_q requires p in (0, 1)")
    return -ndtri(p)


def false_alarm_prob(lam, params: SensingParams):
    """False-alarm probability of the energy detector at threshold ``lam``."""
    m = params.sample_count
    sn2 = params.noise_var
    x = (np.asarray(lam, dtype=float) - m * sn2) / (np.sqrt(2.0 * m) * sn2)
    return gaussian_q(x)


def detection_prob(lam, params: SensingParams, pu_rx_power):
    """Detection probability at threshold ``lam`` given the received PU power.

    ``pu_rx_power`` is the mean received primary-user power on the
    subcarrier (transmit power times channel power gain).  With zero PU
    power this coincides with :func:`false_alarm_prob`.
    """
    m = params.sample_count
    sn2 = params.noise_var
    s = np.asarray(pu_rx_power, dtype=float)
    if np.any(s < 0):
        raise ValueError("pu_rx_power must be nonnegative")
    y = (np.asarray(lam, dtype=float) - m * (sn2 + s)) / np.sqrt(
        2.0 * m * sn2 * (sn2 + 2.0 * s)
    )
    return gaussian_q(y)


def threshold_floor(params: SensingParams) -> float:
    """Smallest threshold that keeps the false alarm at or below its bound."""
    m = params.sample_count
    return float(
        (inverse_gaussian_q(params.false_alarm_bound) * np.sqrt(2.0 * m) + m)
        * params.noise_var
    )


def detection_bound_threshold(params: SensingParams, pu_rx_power):
    """Largest threshold keeping the miss probability at or below its bound.

    The throughput objective is increasing in the threshold (smaller false
    alarm) until the detection constraint binds, so this is the
    per-subcarrier optimum whenever it clears the false-alarm floor.
    """
    m = params.sample_count
    sn2 = params.noise_var
    s = np.asarray(pu_rx_power, dtype=float)
    if np.any(s < 0):
        raise ValueError("pu_rx_power must be nonnegative")
    return m * (sn2 + s) + inverse_gaussian_q(1.0 - params.miss_bound) * np.sqrt(
        2.0 * m * sn2 * (sn2 + 2.0 * s)
    )


def closed_form_threshold(xi, pu_rx_power, params: SensingParams):
    """Stationary-point threshold for one subcarrier (closed form).

    ``xi`` is the ratio of the detection multiplier to the sum of the
    false-alarm multiplier and the normalized rate.  Returns ``nan`` where
    the stationarity condition has no root (the per-subcarrier objective
    is then decreasing everywhere and the floor is optimal).
    """
    xi = np.asarray(xi, dtype=float)
    s = np.asarray(pu_rx_power, dtype=float)
    m = params.sample_count
    sn2 = params.noise_var

    if np.any(xi <= 0):
        bad = int(np.argmax(np.atleast_1d(xi <= 0)))
        raise DegenerateThresholdError(bad, "nonpositive multiplier ratio")
    if np.any(s <= 0):
        bad = int(np.argmax(np.atleast_1d(s <= 0)))
        raise DegenerateThresholdError(bad, "zero received PU power")

    # Larger root of the quadratic stationarity condition; the smaller
    # root is a minimum (and may be negative).
    log_term = np.log(np.sqrt(sn2) * xi / np.sqrt(sn2 + 2.0 * s))
    radicand = (sn2 + 2.0 * s) * (m * s - 8.0 * sn2 * log_term)
    lam = np.where(
        radicand >= 0.0,
        0.5 * m * sn2
        + 0.5 * np.sqrt(sn2 * m / s) * np.sqrt(np.maximum(radicand, 0.0)),
        np.nan,
    )
    return lam


def update_thresholds(
    rate_tilde,
    delta,
    mu,
    pu_rx_power,
    params: SensingParams,
) -> DetectorThresholds:
    """Per-subcarrier optimal thresholds, clamped to the false-alarm floor.

    ``rate_tilde`` is the vector of normalized subcarrier rates, ``delta``
    and ``mu`` the detection / false-alarm multiplier vectors.  Subcarriers
    with a zero detection multiplier, or whose stationarity condition has
    no root, fall back to the floor directly.
    """
    rate_tilde = np.asarray(rate_tilde, dtype=float)
    delta = np.asarray(delta, dtype=float)
    mu = np.asarray(mu, dtype=float)
    s = np.asarray(pu_rx_power, dtype=float)
    if np.any(rate_tilde < 0):
        raise ValueError("rate_tilde must be nonnegative")

    floor = threshold_floor(params)
    lam = np.full(rate_tilde.shape, floor)

    active = (delta > 0.0) & (s > 0.0)
    if np.any(active):
        xi = delta[active] / (mu[active] + rate_tilde[active])
        lam_o = closed_form_threshold(xi, s[active], params)
        lam_o = np.where(np.isnan(lam_o), floor, lam_o)
        lam[active] = np.maximum(lam_o, floor)
    return DetectorThresholds(lam=lam)
