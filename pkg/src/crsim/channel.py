"""Channel-state generation and the relay/direct equivalence transform.

Each subcarrier pair (i, j) uses either the decode-and-forward relay path
or the direct path, depending on whether both relay hops beat the direct
link.  The relay case collapses to a single equivalent gain with a fixed
power split between the SU transmitter and the relay; the direct case is
the degenerate split (1, 0).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "LinkMode",
    "GainRatios",
    "EquivalentLink",
    "compute_ratios",
    "equivalent_link",
    "link_table",
    "sample_rayleigh",
]


class LinkMode(Enum):
    RELAY = "relay"
    DIRECT = "direct"


@dataclass(frozen=True)
class GainRatios:
    """Channel-gain to noise-plus-interference ratios, per subcarrier."""

    gamma_ss: np.ndarray   # SU TX -> SU RX on subcarrier i
    gamma_sr: np.ndarray   # SU TX -> relay on subcarrier i
    gamma_rs: np.ndarray   # relay -> SU RX on subcarrier j

    def __post_init__(self):
        for name in ("gamma_ss", "gamma_sr", "gamma_rs"):
            v = np.asarray(getattr(self, name), dtype=float)
            if np.any(v < 0) or np.any(~np.isfinite(v)):
                raise ValueError(f"{name} must be finite and nonnegative")
            object.__setattr__(self, name, v)

    @property
    def n(self) -> int:
        return self.gamma_ss.size


@dataclass(frozen=True)
class EquivalentLink:
    """Equivalent single-hop view of one subcarrier pair."""

    mode: LinkMode
    gamma_eq: float
    split_first: float    # fraction of the pair power on the SU TX
    split_second: float   # fraction of the pair power on the relay


def compute_ratios(
    gain_ss,
    gain_sr,
    gain_rs,
    noise_var: float,
    j_at_su,
    j_at_relay,
) -> GainRatios:
    """Gain ratios from raw link gains, noise and PU interference.

    ``j_at_relay`` enters the SU TX -> relay ratio; the two links ending
    at the SU receiver see ``j_at_su``.
    """
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    j_su = np.asarray(j_at_su, dtype=float)
    j_rel = np.asarray(j_at_relay, dtype=float)
    if np.any(j_su < 0) or np.any(j_rel < 0):
        raise ValueError("interference powers must be nonnegative")
    return GainRatios(
        gamma_ss=np.asarray(gain_ss, dtype=float) / (noise_var + j_su),
        gamma_sr=np.asarray(gain_sr, dtype=float) / (noise_var + j_rel),
        gamma_rs=np.asarray(gain_rs, dtype=float) / (noise_var + j_su),
    )


def link_table(ratios: GainRatios):
    """Vectorized relay/direct classification over all N x N pairs.

    Returns (split_first, split_second, gamma_eq, relay_mask), each N x N
    with rows indexed by the first-slot subcarrier i and columns by the
    second-slot subcarrier j.
    """
    g_ss = ratios.gamma_ss[:, None]
    g_sr = ratios.gamma_sr[:, None]
    g_rs = ratios.gamma_rs[None, :]

    relay = (g_sr >= g_ss) & (g_rs >= g_ss) & (g_rs > 0)
    denom = np.where(relay, g_sr + g_rs - g_ss, 1.0)
    if np.any(denom[relay] <= 0):
        raise AssertionError("nonpositive relay denominator: classification bug")

    n = ratios.n
    split_first = np.where(relay, g_rs / denom, 1.0) * np.ones((n, n))
    split_second = np.where(relay, (g_sr - g_ss) / denom, 0.0) * np.ones((n, n))
    gamma_eq = np.where(relay, g_sr * g_rs / denom, g_ss) * np.ones((n, n))
    return split_first, split_second, gamma_eq, relay


def equivalent_link(i: int, j: int, ratios: GainRatios) -> EquivalentLink:
    """Relay/direct decision and equivalent gain for one pair."""
    g_ss = float(ratios.gamma_ss[i])
    g_sr = float(ratios.gamma_sr[i])
    g_rs = float(ratios.gamma_rs[j])
    if g_sr >= g_ss and g_rs >= g_ss and g_rs > 0:
        denom = g_sr + g_rs - g_ss
        return EquivalentLink(
            mode=LinkMode.RELAY,
            gamma_eq=g_sr * g_rs / denom,
            split_first=g_rs / denom,
            split_second=(g_sr - g_ss) / denom,
        )
    return EquivalentLink(
        mode=LinkMode.DIRECT, gamma_eq=g_ss, split_first=1.0, split_second=0.0
    )


def sample_rayleigh(avg_gain: float, count: int, rng) -> np.ndarray:
    """Power gains |h|^2 of Rayleigh-faded links: exponential with given mean.

    ``rng`` is a ``numpy.random.Generator`` (or a seed accepted by
    ``default_rng``); sampling is deterministic for a fixed generator
    state.
    """
    if avg_gain <= 0:
        raise ValueError("avg_gain must be positive")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return rng.exponential(scale=avg_gain, size=count)
