"""Comparison schemes: the joint solver plus four alternatives.

* Proposed  - full joint optimization (allocator.solve_joint).
* Alternate - sensing decoupled from allocation: interference multipliers
  from a uniform-power boundary system, one allocation pass, one
  multiplier update, thresholds recomputed once.
* FixedSCP  - identity pairing with per-subcarrier water-filling and
  threshold/multiplier alternation.
* ISS       - thresholds frozen at the initial-sensing false-alarm level;
  pairing and power still jointly optimized.
* WCR       - no relay: classical water-filling on the direct links under
  the SU-side interference budget only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .allocator import (
    Allocation,
    SolverConfig,
    _init_dual,
    assign_pairs,
    evaluate_metrics,
    greedy_repair,
    normalized_rate,
    omega_matrix,
    pair_power_polish,
    solve_joint,
    subgradient_step,
    _water_argument,
    _MULT_FLOOR,
)
from .sensing import (
    DetectorThresholds,
    false_alarm_prob,
    inverse_gaussian_q,
    threshold_floor,
    update_thresholds,
)

__all__ = [
    "SchemeId",
    "SchemeResult",
    "solve_scheme",
    "solve_proposed",
    "solve_alternate",
    "solve_fixed_scp",
    "solve_iss",
    "solve_wcr",
    "boundary_multipliers",
    "fixed_pf_thresholds",
]

DEFAULT_FIXED_PF = 0.2


class SchemeId(Enum):
    PROPOSED = "proposed"
    ALTERNATE = "alternate"
    FIXED_SCP = "fixed_scp"
    ISS = "iss"
    WCR = "wcr"


@dataclass(frozen=True)
class SchemeResult:
    scheme: SchemeId
    allocation: Allocation
    metrics: dict
    diagnostics: dict


def fixed_pf_thresholds(instance, pf: float) -> np.ndarray:
    """Threshold vector putting every detector at false-alarm level ``pf``."""
    m = instance.sensing.sample_count
    sn2 = instance.sensing.noise_var
    lam = (inverse_gaussian_q(pf) * np.sqrt(2.0 * m) + m) * sn2
    return np.full(instance.n, lam)


def solve_proposed(instance, config=None) -> SchemeResult:
    alloc, diag = solve_joint(instance, config)
    return SchemeResult(SchemeId.PROPOSED, alloc, diag["metrics"], diag)


# ---------------------------------------------------------------------------
# Alternate suboptimal scheme


def boundary_multipliers(instance, tol=1e-8, max_alternations=400):
    """Interference multipliers from the uniform-power boundary system.

    Solves the pair of budget equalities obtained by substituting the
    unclamped water-filling power (with zero false alarm) into both
    interference constraints, summing over every pair with a positive
    gain.  Alternating bisection; each residual is strictly decreasing in
    both multipliers.  Falls back to a single shared multiplier when the
    coupled system has no positive solution.
    """
    eff_s = instance.factors.eff_s
    eff_r = instance.factors.eff_r
    gamma = instance.gamma
    rho = instance.rho[:, None]
    th = instance.interference_limit
    screen = gamma > 0.0

    def residual(eta, kappa, side):
        den = eta * eff_s + kappa * eff_r
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(den > 0.0, rho / 2.0 / np.where(den > 0, den, 1.0), np.inf)
        p = p - 1.0 / gamma
        coef = eff_s if side == 0 else eff_r
        mask = screen & (coef > 0.0)
        return float(np.sum(p[mask] * coef[mask])) - th

    def bind(side, other):
        coef = eff_s if side == 0 else eff_r
        if not np.any(coef > 0.0):
            return 0.0

        def f(m):
            return residual(m, other, side) if side == 0 else residual(other, m, side)

        lo = 1e-30
        if f(lo) <= 0.0:
            return 0.0
        hi = 1.0
        while f(hi) > 0.0:
            hi *= 10.0
            if hi > 1e30:
                return None
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(mid) > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= tol * max(1.0, hi):
                break
        return 0.5 * (lo + hi)

    eta, kappa = 0.0, 0.0
    fallback = False
    for _ in range(max_alternations):
        eta_new = bind(0, kappa)
        kappa_new = bind(1, eta_new if eta_new is not None else 0.0)
        if eta_new is None or kappa_new is None:
            fallback = True
            break
        done = abs(eta_new - eta) <= tol * max(1.0, eta_new) and abs(
            kappa_new - kappa
        ) <= tol * max(1.0, kappa_new)
        eta, kappa = eta_new, kappa_new
        if done:
            break
    if fallback or (eta == 0.0 and kappa == 0.0):
        # shared multiplier on the dominant constraint
        def g(m):
            return max(residual(m, m, 0), residual(m, m, 1))

        lo, hi = 1e-30, 1.0
        while g(hi) > 0.0 and hi < 1e30:
            hi *= 10.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(mid) > 0.0:
                lo = mid
            else:
                hi = mid
        eta = kappa = 0.5 * (lo + hi)
        fallback = True
    return eta, kappa, fallback


def solve_alternate(instance, config=None) -> SchemeResult:
    config = config or SolverConfig()
    n = instance.n
    eta_p, kappa_p, fallback = boundary_multipliers(instance)
    dual = _init_dual(n, config)
    dual = replace(
        dual, eta=max(eta_p, _MULT_FLOOR), kappa=max(kappa_p, _MULT_FLOOR)
    )

    # one pass of the joint loop at the boundary multipliers
    r_tilde = normalized_rate(dual, instance)
    thresholds = update_thresholds(
        r_tilde, dual.delta, dual.mu, instance.pu_rx_power, instance.sensing
    )
    omega = omega_matrix(thresholds, dual, instance)
    q_raw = assign_pairs(omega.T).T
    q = greedy_repair(q_raw, omega, dual.tau)
    pf = false_alarm_prob(thresholds.lam, instance.sensing)
    power = q * _water_argument(instance, pf, dual.eta, dual.kappa)
    alloc = Allocation(power=power, pairs=q, thresholds=thresholds)

    # one multiplier update, then thresholds recomputed at the new duals
    dual2 = subgradient_step(
        dual, alloc, instance, 1, config,
        pairing_slack=1.0 - q_raw.sum(axis=0),
    )
    dual2 = replace(
        dual2,
        eta=max(dual2.eta, _MULT_FLOOR),
        kappa=max(dual2.kappa, _MULT_FLOOR),
    )
    thresholds = update_thresholds(
        normalized_rate(dual2, instance),
        dual2.delta,
        dual2.mu,
        instance.pu_rx_power,
        instance.sensing,
    )

    # enforce the interference budget exactly on the chosen pairing
    power, eta_f, kappa_f = pair_power_polish(q, thresholds.lam, instance)
    alloc = Allocation(power=power, pairs=q, thresholds=thresholds)
    metrics = evaluate_metrics(alloc, instance)
    diag = {
        "eta_prime": eta_p,
        "kappa_prime": kappa_p,
        "boundary_fallback": fallback,
        "eta": eta_f,
        "kappa": kappa_f,
        "metrics": metrics,
    }
    return SchemeResult(SchemeId.ALTERNATE, alloc, metrics, diag)


# ---------------------------------------------------------------------------
# Fixed subcarrier pairing


def solve_fixed_scp(instance, config=None, max_rounds=30) -> SchemeResult:
    config = config or SolverConfig()
    n = instance.n
    q = np.eye(n, dtype=int)
    dual = _init_dual(n, config)
    lam = np.full(n, threshold_floor(instance.sensing))
    eta_f = kappa_f = None
    for _ in range(max_rounds):
        power, eta_f, kappa_f = pair_power_polish(q, lam, instance)
        work = replace(
            dual, eta=max(eta_f, _MULT_FLOOR), kappa=max(kappa_f, _MULT_FLOOR)
        )
        new_lam = update_thresholds(
            normalized_rate(work, instance),
            work.delta,
            work.mu,
            instance.pu_rx_power,
            instance.sensing,
        ).lam
        if np.max(np.abs(new_lam - lam)) <= 1e-12 + 1e-9 * np.max(np.abs(lam)):
            lam = new_lam
            break
        lam = new_lam
    power, eta_f, kappa_f = pair_power_polish(q, lam, instance)
    alloc = Allocation(
        power=power, pairs=q, thresholds=DetectorThresholds(lam=lam)
    )
    metrics = evaluate_metrics(alloc, instance)
    diag = {"eta": eta_f, "kappa": kappa_f, "metrics": metrics}
    return SchemeResult(SchemeId.FIXED_SCP, alloc, metrics, diag)


# ---------------------------------------------------------------------------
# Initial spectrum sensing


def solve_iss(instance, config=None, fixed_pf=DEFAULT_FIXED_PF) -> SchemeResult:
    lam = fixed_pf_thresholds(instance, fixed_pf)
    alloc, diag = solve_joint(instance, config, fixed_thresholds=lam)
    return SchemeResult(SchemeId.ISS, alloc, diag["metrics"], diag)


# ---------------------------------------------------------------------------
# Without cognitive relay


def solve_wcr(
    instance, config=None, fixed_pf=DEFAULT_FIXED_PF, rtol=1e-10
) -> SchemeResult:
    """Direct-link water-filling under the SU-side budget; relay silent."""
    n = instance.n
    gamma = instance.ratios.gamma_ss
    phi = instance.factors.phi_s.sum(axis=1)
    th = instance.interference_limit
    lam = fixed_pf_thresholds(instance, fixed_pf)
    pf = false_alarm_prob(lam, instance.sensing)

    active = gamma > 0.0
    if not np.any(active):
        p = np.zeros(n)
        level = 0.0
    else:

        def alloc_power(varpi):
            with np.errstate(divide="ignore"):
                p = 1.0 / varpi - np.where(active, 1.0 / gamma, np.inf)
            return np.maximum(0.0, p)

        def residual(varpi):
            return float(alloc_power(varpi) @ phi) - th

        hi = float(np.max(gamma[active]))  # above this, nothing transmits
        lo = hi
        while residual(lo) < 0.0:
            lo /= 2.0
            if lo < 1e-300:
                break
        # bisect varpi in [lo, hi]: residual decreasing in varpi
        for _ in range(400):
            mid = 0.5 * (lo + hi)
            r = residual(mid)
            if r > 0.0:
                lo = mid
            else:
                hi = mid
            if abs(r) <= rtol * th:
                hi = lo = mid
                break
        level = 0.5 * (lo + hi)
        p = alloc_power(level)

    power = np.zeros((n, n))
    np.fill_diagonal(power, p)
    q = np.eye(n, dtype=int)
    alloc = Allocation(power=power, pairs=q, thresholds=DetectorThresholds(lam=lam))

    # direct-link metrics: diagonal gamma_ss, no relay, no nu floor
    rate = 0.5 * instance.rho * np.log2(1.0 + gamma * p)
    metrics = {
        "throughput_capacity": float(np.sum((1.0 - pf) ** 2 * rate)),
        "sum_rate": float(np.sum(rate)),
        "relay_power": 0.0,
    }
    diag = {"water_level": level, "interference": float(p @ phi), "metrics": metrics}
    return SchemeResult(SchemeId.WCR, alloc, metrics, diag)


_SOLVERS = {
    SchemeId.PROPOSED: solve_proposed,
    SchemeId.ALTERNATE: solve_alternate,
    SchemeId.FIXED_SCP: solve_fixed_scp,
    SchemeId.ISS: solve_iss,
    SchemeId.WCR: solve_wcr,
}


def solve_scheme(scheme: SchemeId, instance, config=None) -> SchemeResult:
    return _SOLVERS[scheme](instance, config)
