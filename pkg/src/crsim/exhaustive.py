"""Exhaustive-search reference for small instances.

Enumerates all N! pairings; for each one the pair powers are optimized
exactly by a two-multiplier dual search written independently of the
solver's machinery (scipy root bracketing on each constraint).  Intended
for N <= 4; the factorial cost is the point.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import brentq

from .allocator import CONCAVITY_MARGIN, Allocation
from .sensing import DetectorThresholds, false_alarm_prob

__all__ = ["best_pairing_throughput", "exhaustive_search"]


def _pairing_arrays(instance, perm, lam):
    rows = np.arange(len(perm))
    cols = np.asarray(perm)
    pf = false_alarm_prob(lam, instance.sensing)
    w = (instance.rho[rows] / 2.0) * (1.0 - pf[rows]) * (1.0 - pf[cols])
    g = instance.gamma[rows, cols]
    nu = CONCAVITY_MARGIN / g
    a = instance.factors.eff_s[rows, cols]
    b = instance.factors.eff_r[rows, cols]
    return w, g, nu, a, b


def _optimal_powers(w, g, nu, a, b, th):
    """Water-filling powers under two linear budgets, or None if infeasible."""
    if a @ nu > th * (1.0 + 1e-9) or b @ nu > th * (1.0 + 1e-9):
        return None

    def powers(eta, kappa):
        den = eta * a + kappa * b
        with np.errstate(divide="ignore"):
            interior = np.where(den > 0.0, w / np.where(den > 0.0, den, 1.0), np.inf)
        return np.maximum(nu, interior - 1.0 / g)

    def excess(eta, kappa, coef):
        p = powers(eta, kappa)
        mask = coef > 0.0
        return float(coef[mask] @ p[mask]) - th

    def bind(coef, fixed_other, is_first):
        if not np.any(coef > 0.0):
            return 0.0

        def f(m):
            return (
                excess(m, fixed_other, coef)
                if is_first
                else excess(fixed_other, m, coef)
            )

        if f(0.0) <= 0.0:
            return 0.0
        lo = 1e-30  # smallest bracket with a finite water level
        if f(lo) <= 0.0:
            return lo
        hi = 1.0
        while f(hi) > 0.0:
            hi *= 10.0
            if hi > 1e30:
                return None
        return brentq(f, lo, hi, rtol=1e-15)

    eta, kappa = 0.0, 0.0
    for _ in range(300):
        eta_new = bind(a, kappa, True)
        if eta_new is None:
            return None
        kappa_new = bind(b, eta_new, False)
        if kappa_new is None:
            return None
        if (
            abs(eta_new - eta) <= 1e-13 * max(1.0, eta)
            and abs(kappa_new - kappa) <= 1e-13 * max(1.0, kappa)
        ):
            eta, kappa = eta_new, kappa_new
            break
        eta, kappa = eta_new, kappa_new
    return powers(eta, kappa)


def best_pairing_throughput(instance, lam):
    """(best throughput, best permutation) over all N! pairings."""
    n = instance.n
    lam = np.asarray(lam, dtype=float)
    th = instance.interference_limit
    best_val, best_perm, best_p = -np.inf, None, None
    for perm in itertools.permutations(range(n)):
        w, g, nu, a, b = _pairing_arrays(instance, perm, lam)
        p = _optimal_powers(w, g, nu, a, b, th)
        if p is None:
            continue
        val = float(w @ np.log2(1.0 + g * p))
        if val > best_val:
            best_val, best_perm, best_p = val, perm, p
    return best_val, best_perm, best_p


def exhaustive_search(instance, lam):
    """Best allocation over all pairings with thresholds fixed at ``lam``."""
    val, perm, p = best_pairing_throughput(instance, lam)
    if perm is None:
        return None, val
    n = instance.n
    q = np.zeros((n, n), dtype=int)
    q[np.arange(n), list(perm)] = 1
    power = np.zeros((n, n))
    power[np.arange(n), list(perm)] = p
    alloc = Allocation(
        power=power, pairs=q, thresholds=DetectorThresholds(lam=np.asarray(lam, float))
    )
    return alloc, val
