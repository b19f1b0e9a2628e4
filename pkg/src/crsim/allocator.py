"""Joint sensing, subcarrier-pairing and power-allocation solver.

Dual decomposition with subgradient multiplier updates: each iteration
computes closed-form sensing thresholds, a pairing score matrix, a raw
per-subcarrier pairing, a greedy repair to a permutation, and modified
water-filling powers; the five multiplier groups then take a projected
subgradient step with a 1/sqrt(k) schedule.  After the loop a final
exact refinement of the two interference multipliers (with pairing and
thresholds frozen) restores primal feasibility and complementary
slackness on the returned allocation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .channel import GainRatios, link_table
from .interference import InterferenceFactors
from .sensing import (
    DetectorThresholds,
    SensingParams,
    detection_bound_threshold,
    detection_prob,
    false_alarm_prob,
    threshold_floor,
    update_thresholds,
)

__all__ = [
    "CONCAVITY_MARGIN",
    "ProblemInstance",
    "DualState",
    "Allocation",
    "SolverConfig",
    "UnboundedWaterLevelError",
    "InfeasibleInstanceError",
    "power_update",
    "normalized_rate",
    "omega_matrix",
    "assign_pairs",
    "greedy_repair",
    "subgradient_step",
    "solve_joint",
    "evaluate_metrics",
    "check_allocation",
    "pair_power_polish",
]

# Smallest gamma * P product that keeps the rate term concave; the power
# floor on every active pair is this margin divided by the pair gain.
CONCAVITY_MARGIN = 1.7183


class UnboundedWaterLevelError(RuntimeError):
    def __init__(self, i: int, j: int):
        super().__init__(
            f"pair ({i}, {j}): zero interference-weighted denominator, "
            "water level unbounded"
        )
        self.pair = (i, j)


class InfeasibleInstanceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProblemInstance:
    """One solvable snapshot of the link: gains, factors, weights, limits."""

    ratios: GainRatios
    factors: InterferenceFactors
    rho: np.ndarray
    interference_limit: float
    sensing: SensingParams
    pu_rx_power: np.ndarray
    delta_f: float = 1.0

    # derived pair tables, filled in __post_init__
    gamma: np.ndarray = field(init=False)
    split_first: np.ndarray = field(init=False)
    split_second: np.ndarray = field(init=False)
    relay_mask: np.ndarray = field(init=False)
    nu: np.ndarray = field(init=False)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        if np.any(rho <= 0):
            raise ValueError("weights rho must be positive")
        if self.interference_limit <= 0:
            raise ValueError("interference_limit must be positive")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(
            self, "pu_rx_power", np.asarray(self.pu_rx_power, dtype=float)
        )
        s1, s2, gamma, relay = link_table(self.ratios)
        if np.any(gamma <= 0):
            raise ValueError("every pair needs a positive equivalent gain")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "split_first", s1)
        object.__setattr__(self, "split_second", s2)
        object.__setattr__(self, "relay_mask", relay)
        object.__setattr__(self, "nu", CONCAVITY_MARGIN / gamma)

    @property
    def n(self) -> int:
        return self.ratios.n


@dataclass(frozen=True)
class DualState:
    """The five multiplier groups plus the iteration index."""

    eta: float
    kappa: float
    tau: np.ndarray
    mu: np.ndarray
    delta: np.ndarray
    k: int = 1

    def __post_init__(self):
        if self.eta < 0 or self.kappa < 0:
            raise ValueError("eta and kappa must be nonnegative")
        for name in ("tau", "mu", "delta"):
            object.__setattr__(
                self, name, np.asarray(getattr(self, name), dtype=float)
            )
        if np.any(self.mu < 0) or np.any(self.delta < 0):
            raise ValueError("mu and delta must be nonnegative")


@dataclass(frozen=True)
class Allocation:
    """Decision variables: pair powers, pairing matrix, thresholds."""

    power: np.ndarray
    pairs: np.ndarray
    thresholds: DetectorThresholds


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 1e-5
    max_iters: int = 5000
    step_eta: float = 10.0
    step_tau: float = 0.05
    step_mu: float = 0.05
    step_delta: float = 0.05
    eta_range: tuple = (100.0, 200.0)
    kappa_range: tuple = (100.0, 200.0)
    tau_range: tuple = (0.01, 2.0)
    delta_range: tuple = (0.01, 2.0)
    seed: int = 0
    candidate_every: int = 50
    polish: bool = True

    def __post_init__(self):
        if self.epsilon <= 0 or self.max_iters < 1:
            raise ValueError("epsilon must be positive and max_iters >= 1")


_MULT_FLOOR = 1e-10


def _denominator(inst: ProblemInstance, eta: float, kappa: float) -> np.ndarray:
    return eta * inst.factors.eff_s + kappa * inst.factors.eff_r


def _water_argument(inst, pf, eta, kappa):
    """max(nu, water level - 1/gamma), elementwise over all pairs."""
    den = _denominator(inst, eta, kappa)
    if np.any(den <= 0):
        i, j = np.unravel_index(int(np.argmax(den <= 0)), den.shape)
        raise UnboundedWaterLevelError(int(i), int(j))
    level = (inst.rho[:, None] / 2.0) * np.outer(1.0 - pf, 1.0 - pf) / den
    return np.maximum(inst.nu, level - 1.0 / inst.gamma)


def power_update(i, j, thresholds, dual, instance, q_ij=1.0):
    """Modified water-filling power for one pair (zero when unpaired)."""
    if q_ij == 0:
        return 0.0
    pf = false_alarm_prob(thresholds.lam, instance.sensing)
    den = (
        dual.eta * instance.factors.eff_s[i, j]
        + dual.kappa * instance.factors.eff_r[i, j]
    )
    if den <= 0:
        raise UnboundedWaterLevelError(i, j)
    level = (instance.rho[i] / 2.0) * (1.0 - pf[i]) * (1.0 - pf[j]) / den
    return float(q_ij * max(instance.nu[i, j], level - 1.0 / instance.gamma[i, j]))


def normalized_rate(dual, instance) -> np.ndarray:
    """Diagonal normalized rate vector feeding the threshold update.

    Floored at log2(e)/2 through the (e - 1)/gamma clamp on the
    water-filling argument.
    """
    g = np.diag(instance.gamma)
    den = 2.0 * (
        dual.eta * np.diag(instance.factors.eff_s)
        + dual.kappa * np.diag(instance.factors.eff_r)
    )
    if np.any(den <= 0):
        i = int(np.argmax(den <= 0))
        raise UnboundedWaterLevelError(i, i)
    arg = np.maximum((np.e - 1.0) / g, 1.0 / den - 1.0 / g)
    return 0.5 * np.log2(1.0 + g * arg)


def omega_matrix(thresholds, dual, instance) -> np.ndarray:
    """Pairing score: clamped rate gain minus the pairing and interference
    prices, all three terms sharing the same water-filling argument."""
    pf = false_alarm_prob(thresholds.lam, instance.sensing)
    arg = _water_argument(instance, pf, dual.eta, dual.kappa)
    rate = (instance.rho[:, None] / 2.0) * np.log2(1.0 + instance.gamma * arg)
    return (
        rate
        - dual.tau[None, :]
        - dual.eta * instance.factors.eff_s * arg
        - dual.kappa * instance.factors.eff_r * arg
    )


def assign_pairs(omega: np.ndarray) -> np.ndarray:
    """One entry per column at the row argmax (lowest row wins ties)."""
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise ValueError("omega must be finite")
    q = np.zeros_like(omega, dtype=int)
    q[np.argmax(omega, axis=0), np.arange(omega.shape[1])] = 1
    return q


def greedy_repair(q: np.ndarray, omega: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Repair a one-entry-per-row pairing into a permutation matrix.

    Overloaded columns keep their best-scoring row; each surplus row moves
    to the empty column whose pairing price is closest to the overloaded
    column's, choosing among the surplus rows the one scoring highest at
    the destination.  Every move reduces total overload by one, so the
    loop terminates with all row and column sums equal to one.
    """
    q = np.array(q, dtype=int)
    n = q.shape[0]
    if not np.all(q.sum(axis=1) == 1):
        raise ValueError("repair expects exactly one assignment per row")
    t = q.sum(axis=0)
    for u in range(n):
        if t[u] <= 1:
            continue
        rows_u = np.flatnonzero(q[:, u] == 1)
        b = rows_u[int(np.argmax(omega[rows_u, u]))]
        while t[u] > 1:
            empty = np.flatnonzero(t == 0)
            j = empty[int(np.argmin(np.abs(tau[u] - tau[empty])))]
            movable = np.flatnonzero((q[:, u] == 1) & (np.arange(n) != b))
            c = movable[int(np.argmax(omega[movable, j]))]
            q[c, u] = 0
            q[c, j] = 1
            t[u] -= 1
            t[j] += 1
    return q


def subgradient_step(dual, allocation, instance, k, config, pairing_slack=None):
    """One projected multiplier update with the 1/sqrt(k) step schedule.

    ``pairing_slack`` is the per-column slack of the raw (pre-repair)
    pairing; the repaired permutation always has zero slack.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    lam = allocation.thresholds.lam
    pf = false_alarm_prob(lam, instance.sensing)
    pd = detection_prob(lam, instance.sensing, instance.pu_rx_power)
    th = instance.interference_limit
    i_s = float(np.sum(allocation.power * instance.factors.eff_s))
    i_r = float(np.sum(allocation.power * instance.factors.eff_r))
    if pairing_slack is None:
        pairing_slack = 1.0 - allocation.pairs.sum(axis=0)

    root_k = np.sqrt(k)
    eta = max(0.0, dual.eta - (config.step_eta / root_k) * (th - i_s))
    kappa = max(0.0, dual.kappa - (config.step_eta / root_k) * (th - i_r))
    tau = dual.tau - (config.step_tau / root_k) * np.asarray(pairing_slack, float)
    beta = instance.sensing.false_alarm_bound
    alpha = instance.sensing.miss_bound
    mu = np.maximum(0.0, dual.mu - (config.step_mu / root_k) * (beta - pf))
    delta = np.maximum(
        0.0, dual.delta - (config.step_delta / root_k) * (pd - 1.0 + alpha)
    )
    return DualState(eta=eta, kappa=kappa, tau=tau, mu=mu, delta=delta, k=k + 1)


def _init_dual(n, config) -> DualState:
    rng = np.random.default_rng(config.seed)
    return DualState(
        eta=float(rng.uniform(*config.eta_range)),
        kappa=float(rng.uniform(*config.kappa_range)),
        tau=rng.uniform(*config.tau_range, size=n),
        mu=np.zeros(n),
        delta=rng.uniform(*config.delta_range, size=n),
        k=1,
    )


def _rel_change(new: DualState, old: DualState) -> float:
    parts = [
        abs(new.eta - old.eta) / (1.0 + abs(old.eta)),
        abs(new.kappa - old.kappa) / (1.0 + abs(old.kappa)),
        float(np.max(np.abs(new.tau - old.tau) / (1.0 + np.abs(old.tau)))),
        float(np.max(np.abs(new.mu - old.mu) / (1.0 + np.abs(old.mu)))),
        float(np.max(np.abs(new.delta - old.delta) / (1.0 + np.abs(old.delta)))),
    ]
    return max(parts)


def _active_pairs(q: np.ndarray):
    rows = np.arange(q.shape[0])
    cols = np.argmax(q, axis=1)
    return rows, cols


def pair_power_polish(q, lam, instance, rtol=1e-12, max_alternations=200):
    """Exact pair powers for a fixed permutation and fixed thresholds.

    Alternating bisection on the two interference multipliers: each step
    makes one constraint bind (or drops its multiplier to zero) with the
    other multiplier held; the scheme is monotone and converges to the
    water-filling optimum with complementary slackness.  Raises
    ``InfeasibleInstanceError`` when even the floor powers exceed a
    budget.
    """
    rows, cols = _active_pairs(q)
    pf = false_alarm_prob(lam, instance.sensing)
    w = (instance.rho[rows] / 2.0) * (1.0 - pf[rows]) * (1.0 - pf[cols])
    g = instance.gamma[rows, cols]
    nu = instance.nu[rows, cols]
    a = instance.factors.eff_s[rows, cols]
    b = instance.factors.eff_r[rows, cols]
    th = instance.interference_limit

    if float(a @ nu) > th * (1.0 + 1e-9) or float(b @ nu) > th * (1.0 + 1e-9):
        raise InfeasibleInstanceError(
            "floor powers alone exceed the interference budget"
        )
    if np.any((a == 0.0) & (b == 0.0) & (w > 0.0)):
        i = int(np.argmax((a == 0.0) & (b == 0.0)))
        raise UnboundedWaterLevelError(int(rows[i]), int(cols[i]))

    def powers(eta, kappa):
        den = eta * a + kappa * b
        with np.errstate(divide="ignore"):
            interior = np.where(den > 0.0, w / np.where(den > 0, den, 1.0), np.inf)
        return np.maximum(nu, interior - 1.0 / g)

    def load(eta, kappa, coef):
        p = powers(eta, kappa)
        mask = coef > 0.0
        return float(coef[mask] @ p[mask])

    def solve_axis(coef, other_coef, other_val):
        # multiplier >= 0 making `coef @ P <= th`, binding when positive
        def f(m):
            return load(m, other_val, coef) if coef is a else load(other_val, m, coef)

        if not np.any(coef > 0.0):
            return 0.0
        if f(0.0) <= th:
            return 0.0
        hi = 1.0
        while f(hi) > th:
            hi *= 4.0
            if hi > 1e30:
                raise InfeasibleInstanceError("interference budget unreachable")
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(mid) > th:
                lo = mid
            else:
                hi = mid
            if hi - lo <= rtol * max(1.0, hi):
                break
        return hi

    eta, kappa = 0.0, 0.0
    for _ in range(max_alternations):
        eta_new = solve_axis(a, b, kappa)
        kappa_new = solve_axis(b, a, eta_new) if np.any(b > 0.0) else 0.0
        done = abs(eta_new - eta) <= rtol * max(1.0, eta) and abs(
            kappa_new - kappa
        ) <= rtol * max(1.0, kappa)
        eta, kappa = eta_new, kappa_new
        if done:
            break

    p = powers(eta, kappa)
    power = np.zeros_like(instance.gamma)
    power[rows, cols] = p
    return power, eta, kappa


def evaluate_metrics(allocation, instance, normalized=True):
    """Throughput capacity, sensing-free sum rate, and total relay power."""
    q = allocation.pairs
    rows, cols = np.nonzero(q)
    p = allocation.power[rows, cols]
    pf = false_alarm_prob(allocation.thresholds.lam, instance.sensing)
    scale = 1.0 if normalized else instance.delta_f
    rate = (
        scale
        * (instance.rho[rows] / 2.0)
        * np.log2(1.0 + instance.gamma[rows, cols] * p)
    )
    throughput = float(np.sum((1.0 - pf[rows]) * (1.0 - pf[cols]) * rate))
    sum_rate = float(np.sum(rate))
    relay_power = float(np.sum(instance.split_second[rows, cols] * p))
    return {
        "throughput_capacity": throughput,
        "sum_rate": sum_rate,
        "relay_power": relay_power,
    }


def check_allocation(allocation, instance, rtol=1e-6, nu_floor=True):
    """List of violated allocation invariants (empty when feasible)."""
    problems = []
    q = np.asarray(allocation.pairs)
    if not (np.all(q.sum(axis=0) == 1) and np.all(q.sum(axis=1) == 1)):
        problems.append("pairing matrix is not a permutation")
    p = allocation.power
    if np.any(p < 0):
        problems.append("negative pair power")
    if np.any((q == 0) & (p > 0)):
        problems.append("power on an unpaired entry")
    active = q == 1
    if nu_floor and np.any(
        (p[active] > 0)
        & (instance.gamma[active] * p[active] < CONCAVITY_MARGIN - 1e-9)
    ):
        problems.append("active pair below the concavity power floor")
    th = instance.interference_limit
    i_s = float(np.sum(p * instance.factors.eff_s))
    i_r = float(np.sum(p * instance.factors.eff_r))
    if i_s > th * (1.0 + rtol):
        problems.append(f"SU-side interference {i_s:.3e} exceeds limit {th:.3e}")
    if i_r > th * (1.0 + rtol):
        problems.append(f"relay-side interference {i_r:.3e} exceeds limit {th:.3e}")
    lam = allocation.thresholds.lam
    pf = false_alarm_prob(lam, instance.sensing)
    pd = detection_prob(lam, instance.sensing, instance.pu_rx_power)
    if np.any(pf > instance.sensing.false_alarm_bound + 1e-9):
        problems.append("false-alarm probability above its bound")
    if np.any(1.0 - pd > instance.sensing.miss_bound + 1e-9):
        problems.append("miss-detection probability above its bound")
    return problems


def _sensing_feasible(instance) -> bool:
    floor = threshold_floor(instance.sensing)
    pd = detection_prob(
        np.full(instance.n, floor), instance.sensing, instance.pu_rx_power
    )
    return bool(np.all(1.0 - pd <= instance.sensing.miss_bound + 1e-12))


def solve_joint(instance, config=None, fixed_thresholds=None):
    """Run the full joint optimization; returns (Allocation, diagnostics).

    ``fixed_thresholds`` freezes sensing (no threshold or sensing
    multiplier updates), as used by the initial-sensing baseline and by
    oracle comparisons.
    """
    config = config or SolverConfig()
    n = instance.n
    if fixed_thresholds is None and not _sensing_feasible(instance):
        raise InfeasibleInstanceError(
            "no threshold satisfies both sensing bounds on this instance"
        )

    dual = _init_dual(n, config)
    floor = threshold_floor(instance.sensing)
    trace = []
    best = None  # (throughput, q, lam)
    candidates = {}
    converged = False
    iterations = 0
    q = np.eye(n, dtype=int)
    lam_vec = np.full(n, floor)

    def remember(q, lam):
        key = tuple(np.argmax(q, axis=1))
        if key not in candidates:
            candidates[key] = (q.copy(), lam.copy())

    for k in range(1, config.max_iters + 1):
        iterations = k
        eta = max(dual.eta, _MULT_FLOOR)
        kappa = max(dual.kappa, _MULT_FLOOR)
        work = replace(dual, eta=eta, kappa=kappa)

        if fixed_thresholds is not None:
            lam_vec = np.asarray(fixed_thresholds, dtype=float)
            thresholds = DetectorThresholds(lam=lam_vec)
        else:
            r_tilde = normalized_rate(work, instance)
            thresholds = update_thresholds(
                r_tilde, work.delta, work.mu, instance.pu_rx_power,
                instance.sensing,
            )
            lam_vec = thresholds.lam

        omega = omega_matrix(thresholds, work, instance)
        q_raw = assign_pairs(omega.T).T
        q = greedy_repair(q_raw, omega, work.tau)

        pf = false_alarm_prob(lam_vec, instance.sensing)
        power = q * _water_argument(instance, pf, eta, kappa)
        allocation = Allocation(power=power, pairs=q, thresholds=thresholds)

        feasible = not check_allocation(allocation, instance)
        metrics = evaluate_metrics(allocation, instance)
        if feasible and (best is None or metrics["throughput_capacity"] > best[0]):
            best = (metrics["throughput_capacity"], q.copy(), lam_vec.copy())
        if k % config.candidate_every == 0 or k == 1:
            remember(q, lam_vec)

        pairing_slack = 1.0 - q_raw.sum(axis=0)
        new_dual = subgradient_step(
            work, allocation, instance, k, config, pairing_slack=pairing_slack
        )
        change = _rel_change(new_dual, work)
        trace.append(
            {
                "k": k,
                "eta": work.eta,
                "kappa": work.kappa,
                "interference_s": float(np.sum(power * instance.factors.eff_s)),
                "interference_r": float(np.sum(power * instance.factors.eff_r)),
                "throughput": metrics["throughput_capacity"],
                "feasible": feasible,
                "rel_change": change,
            }
        )
        dual = new_dual
        if change < config.epsilon:
            converged = True
            break

    # candidate pool for the final exact power refinement
    remember(q, lam_vec)
    if best is not None:
        remember(best[1], best[2])
    remember(np.eye(n, dtype=int), lam_vec)
    if n <= 4:
        # tiny instances: the subgradient trajectory may never score some
        # pairings, and polishing all n! of them costs next to nothing
        import itertools

        for perm in itertools.permutations(range(n)):
            q_c = np.zeros((n, n), dtype=int)
            q_c[np.arange(n), perm] = 1
            remember(q_c, lam_vec)
    if fixed_thresholds is None:
        # two fixed-threshold variants per pairing: the false-alarm floor
        # (always sensing-feasible) and the detection bound (minimal false
        # alarm, hence maximal sensing factor in the objective)
        lam_det = np.maximum(
            floor,
            detection_bound_threshold(instance.sensing, instance.pu_rx_power),
        )
        for key in list(candidates):
            q_c, _ = candidates[key]
            candidates[key + ("floor",)] = (q_c, np.full(n, floor))
            candidates[key + ("det",)] = (q_c, lam_det)

    chosen = None
    if config.polish:
        for q_c, lam_c in candidates.values():
            lam_c = np.asarray(lam_c, dtype=float)
            thr = DetectorThresholds(lam=lam_c)
            try:
                power, eta_p, kappa_p = pair_power_polish(q_c, lam_c, instance)
            except InfeasibleInstanceError:
                continue
            alloc = Allocation(power=power, pairs=q_c, thresholds=thr)
            if check_allocation(alloc, instance):
                continue
            m = evaluate_metrics(alloc, instance)
            if chosen is None or m["throughput_capacity"] > chosen[0]:
                chosen = (m["throughput_capacity"], alloc, eta_p, kappa_p)
    if chosen is None and best is not None:
        # fall back to the best raw subgradient iterate
        thr = DetectorThresholds(lam=best[2])
        pf = false_alarm_prob(best[2], instance.sensing)
        power = best[1] * _water_argument(
            instance, pf, max(dual.eta, _MULT_FLOOR), max(dual.kappa, _MULT_FLOOR)
        )
        alloc = Allocation(power=power, pairs=best[1], thresholds=thr)
        if not check_allocation(alloc, instance):
            chosen = (
                evaluate_metrics(alloc, instance)["throughput_capacity"],
                alloc,
                dual.eta,
                dual.kappa,
            )
    if chosen is None:
        raise InfeasibleInstanceError(
            "no feasible allocation found for any candidate pairing"
        )

    _, alloc, eta_f, kappa_f = chosen
    th = instance.interference_limit
    i_s = float(np.sum(alloc.power * instance.factors.eff_s))
    i_r = float(np.sum(alloc.power * instance.factors.eff_r))
    diagnostics = {
        "iterations": iterations,
        "converged": converged,
        "warning": None if converged else "max_iters reached",
        "eta": eta_f,
        "kappa": kappa_f,
        "slack_s": th - i_s,
        "slack_r": th - i_r,
        "kkt_residual_s": abs(eta_f * (th - i_s)),
        "kkt_residual_r": abs(kappa_f * (th - i_r)),
        "trace": trace,
        "metrics": evaluate_metrics(alloc, instance),
    }
    return alloc, diagnostics


def trace_to_csv(trace, path):
    """Write a solver trace (list of per-iteration dicts) as CSV."""
    import csv

    if not trace:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(trace[0].keys()))
        writer.writeheader()
        writer.writerows(trace)
