"""Shared builders for hand-crafted problem instances."""

from __future__ import annotations

import numpy as np
import pytest

from crsim.allocator import ProblemInstance
from crsim.channel import GainRatios
from crsim.interference import InterferenceFactors, effective_factors
from crsim.sensing import SensingParams


def make_instance(
    gamma_ss,
    gamma_sr=None,
    gamma_rs=None,
    phi_s=None,
    phi_r=None,
    rho=None,
    interference_limit=1.0,
    sensing=None,
    pu_rx_power=None,
):
    """Small instance from explicit ratios and leakage densities.

    Defaults give a direct-mode-only instance (relay hops at zero gain)
    with one pseudo-subchannel whose leakage density is 1 for every
    subcarrier.
    """
    gamma_ss = np.asarray(gamma_ss, dtype=float)
    n = gamma_ss.size
    if gamma_sr is None:
        gamma_sr = np.zeros(n)
    if gamma_rs is None:
        gamma_rs = np.zeros(n)
    ratios = GainRatios(
        gamma_ss=gamma_ss,
        gamma_sr=np.asarray(gamma_sr, float),
        gamma_rs=np.asarray(gamma_rs, float),
    )
    if phi_s is None:
        phi_s = np.ones((n, 1))
    if phi_r is None:
        phi_r = np.ones((n, 1))
    phi_s = np.asarray(phi_s, dtype=float)
    phi_r = np.asarray(phi_r, dtype=float)
    eff_s, eff_r = effective_factors(ratios, phi_s, phi_r)
    # direct-mode pairs have a zero relay factor; keep the water level
    # bounded by charging the relay side the same density it would see
    factors = InterferenceFactors(
        j_relay=np.zeros(n),
        j_su=np.zeros(n),
        phi_s=phi_s,
        phi_r=phi_r,
        eff_s=eff_s,
        eff_r=eff_r,
    )
    if sensing is None:
        sensing = SensingParams(sample_count=32, noise_var=1e-5)
    if pu_rx_power is None:
        pu_rx_power = np.full(n, 5e-3)
    return ProblemInstance(
        ratios=ratios,
        factors=factors,
        rho=np.ones(n) if rho is None else np.asarray(rho, float),
        interference_limit=interference_limit,
        sensing=sensing,
        pu_rx_power=np.asarray(pu_rx_power, float),
    )


@pytest.fixture
def default_sensing():
    return SensingParams(sample_count=32, noise_var=1e-5)
