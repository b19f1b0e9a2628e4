"""Monte Carlo experiment engine: scenario generation, sweeps, aggregation.

Each trial draws one channel realization (Rayleigh link gains plus a
random placement of the three primary blocks on the shared spectral
axis), builds the interference factors once, and runs the selected
schemes at every sweep point with common random numbers: channel draws
depend only on (root seed, trial index), never on the sweep point or the
scheme, so comparisons are paired.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .allocator import InfeasibleInstanceError, ProblemInstance, SolverConfig
from .channel import compute_ratios, sample_rayleigh
from .interference import (
    InterferenceFactors,
    PuSubchannel,
    SpectralGeometry,
    effective_factors,
    periodogram_window_integrals,
    sinc_sq_window_integrals,
)
from .schemes import SchemeId, solve_scheme
from .sensing import SensingParams

__all__ = [
    "Scenario",
    "Aggregate",
    "build_instance",
    "random_instance",
    "run_trial",
    "sweep",
    "METRICS",
]

METRICS = ("throughput_capacity", "sum_rate", "relay_power")


@dataclass(frozen=True)
class Scenario:
    """Simulation scenario; defaults match the reference setup."""

    n: int = 16
    l_total: int = 48
    sample_count: int = 32
    pu_block_sizes: tuple = (20, 12, 16)
    avg_gain_sr: float = 8.0
    avg_gain_ss: float = 3.0
    avg_gain_rs: float = 8.0
    avg_gain_other: float = 3.0
    noise_var: float = 1e-5
    pu_power: float = 5e-3
    delta_f: float = 0.15625e6
    symbol_duration: float = 7e-6
    fft_size: int = 0  # 0 -> one FFT bin per slot (n + l_total)
    alpha: float = 0.2
    beta: float = 0.3061
    interference_limit: float = 1e-3
    weight_profile: str = "uniform"
    trials: int = 200
    seed: int = 0
    solver_max_iters: int = 200

    def __post_init__(self):
        if sum(self.pu_block_sizes) > self.l_total:
            raise ValueError("PU blocks do not fit in l_total subchannels")
        if self.weight_profile not in ("uniform", "linear"):
            raise ValueError("weight_profile must be 'uniform' or 'linear'")
        for name in (
            "avg_gain_sr", "avg_gain_ss", "avg_gain_rs", "avg_gain_other",
            "noise_var", "pu_power", "delta_f", "symbol_duration",
            "interference_limit",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def total_slots(self) -> int:
        return self.n + sum(self.pu_block_sizes)

    @property
    def effective_fft_size(self) -> int:
        return self.fft_size if self.fft_size > 0 else self.total_slots

    def weights(self) -> np.ndarray:
        if self.weight_profile == "linear" and self.n > 1:
            return 1.0 + np.arange(self.n) / (self.n - 1)
        return np.ones(self.n)


def _rng(scenario, trial, purpose):
    return np.random.default_rng([scenario.seed, trial, purpose])


def _place_blocks(scenario, rng):
    """Random interleaving of CR slots and the contiguous PU blocks.

    Returns the CR slot indices, the PU slot indices, and each PU slot's
    owning-block size (the block's total power is spread flat over its
    subchannels).
    """
    items = ["cr"] * scenario.n + list(range(len(scenario.pu_block_sizes)))
    rng.shuffle(items)
    cr_slots, pu_slots, block_sizes = [], [], []
    cursor = 0
    for item in items:
        if item == "cr":
            cr_slots.append(cursor)
            cursor += 1
        else:
            size = scenario.pu_block_sizes[item]
            pu_slots.extend(range(cursor, cursor + size))
            block_sizes.extend([size] * size)
            cursor += size
    return np.array(cr_slots), np.array(pu_slots), np.array(block_sizes)


def build_instance(
    scenario: Scenario,
    trial: int,
    interference_limit=None,
    beta=None,
) -> ProblemInstance:
    """One deterministic channel snapshot for (scenario seed, trial)."""
    th = interference_limit or scenario.interference_limit
    beta = beta if beta is not None else scenario.beta
    n, ts = scenario.n, scenario.symbol_duration
    df = scenario.delta_f

    cr_slots, pu_slots, block_sizes = _place_blocks(scenario, _rng(scenario, trial, 0))
    cr_centers = cr_slots * df
    pu_centers = pu_slots * df
    n_pu = pu_centers.size
    # each block's total power, spread flat over its subchannels
    sub_power = scenario.pu_power / block_sizes

    rng = _rng(scenario, trial, 1)
    g_sr = sample_rayleigh(scenario.avg_gain_sr, n, rng)
    g_ss = sample_rayleigh(scenario.avg_gain_ss, n, rng)
    g_rs = sample_rayleigh(scenario.avg_gain_rs, n, rng)
    other = scenario.avg_gain_other
    g_ps = sample_rayleigh(other, n_pu, rng)   # PU -> SU RX
    g_pr = sample_rayleigh(other, n_pu, rng)   # PU -> relay RX
    g_sp = sample_rayleigh(other, n_pu, rng)   # SU TX -> PU
    g_rp = sample_rayleigh(other, n_pu, rng)   # relay -> PU
    g_pr_sense = sample_rayleigh(other, n, rng)  # PU -> relay, sensing side

    subchannels = tuple(
        PuSubchannel(
            index=l,
            center=float(pu_centers[l]),
            bandwidth=df,
            power=float(sub_power[l]),
            gain_ps=float(g_ps[l]),
            gain_pr=float(g_pr[l]),
            gain_sp=float(g_sp[l]),
            gain_rp=float(g_rp[l]),
        )
        for l in range(n_pu)
    )
    geom = SpectralGeometry(
        delta_f=df,
        symbol_duration=ts,
        fft_size=scenario.effective_fft_size,
        cr_centers=cr_centers,
        pu_subchannels=subchannels,
    )

    dist = np.abs(cr_centers[:, None] - pu_centers[None, :])  # (n, L)
    base_j = periodogram_window_integrals(dist, df, df, geom)
    base_phi = sinc_sq_window_integrals(dist, df, ts)

    j_su = (base_j * g_ps[None, :] * sub_power[None, :]).sum(axis=1)
    j_relay = (base_j * g_pr[None, :] * sub_power[None, :]).sum(axis=1)
    ratios = compute_ratios(
        g_ss, g_sr, g_rs, scenario.noise_var, j_su, j_relay
    )
    phi_s = base_phi * g_sp[None, :]
    phi_r = base_phi * g_rp[None, :]
    eff_s, eff_r = effective_factors(ratios, phi_s, phi_r)
    factors = InterferenceFactors(
        j_relay=j_relay, j_su=j_su, phi_s=phi_s, phi_r=phi_r,
        eff_s=eff_s, eff_r=eff_r,
    )
    sensing = SensingParams(
        sample_count=scenario.sample_count,
        noise_var=scenario.noise_var,
        miss_bound=scenario.alpha,
        false_alarm_bound=beta,
    )
    return ProblemInstance(
        ratios=ratios,
        factors=factors,
        rho=scenario.weights(),
        interference_limit=th,
        sensing=sensing,
        pu_rx_power=scenario.pu_power * g_pr_sense,
        delta_f=df,
    )


def random_instance(n: int, seed: int, **overrides) -> ProblemInstance:
    """A scaled scenario snapshot for small-n tests and oracle runs."""
    b1 = max(1, round(1.25 * n))
    b2 = max(1, round(0.75 * n))
    b3 = max(1, 3 * n - b1 - b2)
    scenario = Scenario(
        n=n,
        l_total=b1 + b2 + b3,
        pu_block_sizes=(b1, b2, b3),
        seed=seed,
        **overrides,
    )
    return build_instance(scenario, 0)


def _solver_config(scenario, trial, scheme_index) -> SolverConfig:
    return SolverConfig(
        max_iters=scenario.solver_max_iters,
        seed=[scenario.seed, trial, 100 + scheme_index],
    )


def run_trial(
    scenario: Scenario,
    trial: int,
    schemes=tuple(SchemeId),
    interference_limit=None,
    beta=None,
):
    """Per-scheme metrics for one trial, or None if any scheme is infeasible.

    Infeasibility is symmetric across schemes so paired comparisons stay
    valid: a trial dropped for one scheme is dropped for all.
    """
    instance = build_instance(scenario, trial, interference_limit, beta)
    out = {}
    for idx, scheme in enumerate(schemes):
        try:
            result = solve_scheme(scheme, instance, _solver_config(scenario, trial, idx))
        except InfeasibleInstanceError:
            return None
        out[scheme] = result.metrics
    return out


def _trial_job(args):
    """Picklable wrapper for process-pool trial execution."""
    scenario, trial, schemes, kwargs = args
    return run_trial(scenario, trial, schemes, **kwargs)


@dataclass
class Aggregate:
    """Long-format summary rows plus per-sweep-point feasibility."""

    rows: list = field(default_factory=list)
    feasibility: dict = field(default_factory=dict)

    CSV_FIELDS = (
        "scheme", "sweep_axis", "sweep_value", "metric",
        "mean", "stderr", "n_trials", "feasibility_rate",
    )

    def to_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            writer = csv.DictWriter(fh, fieldnames=list(self.CSV_FIELDS))
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: _fmt(row[k]) for k in self.CSV_FIELDS})

    def to_json(self, path, header=None):
        payload = {"header": header or {}, "rows": self.rows,
                   "feasibility": {str(k): v for k, v in self.feasibility.items()}}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def mean(self, scheme, sweep_value, metric):
        for row in self.rows:
            if (
                row["scheme"] == scheme.value
                and row["sweep_value"] == sweep_value
                and row["metric"] == metric
            ):
                return row["mean"]
        raise KeyError((scheme, sweep_value, metric))

    def stderr(self, scheme, sweep_value, metric):
        for row in self.rows:
            if (
                row["scheme"] == scheme.value
                and row["sweep_value"] == sweep_value
                and row["metric"] == metric
            ):
                return row["stderr"]
        raise KeyError((scheme, sweep_value, metric))


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return v


def sweep(
    scenario: Scenario,
    axis: str,
    grid,
    schemes=tuple(SchemeId),
    trials=None,
    workers: int = 1,
) -> Aggregate:
    """Run ``trials`` paired trials at each grid point and aggregate."""
    if axis not in ("interference_limit", "beta"):
        raise ValueError("axis must be 'interference_limit' or 'beta'")
    grid = [float(g) for g in grid]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be nonempty and strictly increasing")
    trials = trials if trials is not None else scenario.trials

    agg = Aggregate()
    for value in grid:
        kwargs = {axis: value}
        samples = {s: {m: [] for m in METRICS} for s in schemes}
        feasible = 0
        if workers > 1:
            import concurrent.futures as cf

            with cf.ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(
                    pool.map(
                        _trial_job,
                        ((scenario, t, tuple(schemes), kwargs) for t in range(trials)),
                    )
                )
        else:
            results = [
                run_trial(scenario, t, schemes, **kwargs) for t in range(trials)
            ]
        for result in results:
            if result is None:
                continue
            feasible += 1
            for s in schemes:
                for m in METRICS:
                    samples[s][m].append(result[s][m])
        rate = feasible / trials if trials else 0.0
        agg.feasibility[value] = rate
        for s in schemes:
            for m in METRICS:
                vals = np.asarray(samples[s][m])
                mean = float(vals.mean()) if vals.size else float("nan")
                stderr = (
                    float(vals.std(ddof=1) / np.sqrt(vals.size))
                    if vals.size >= 2
                    else float("nan")
                )
                agg.rows.append(
                    {
                        "scheme": s.value,
                        "sweep_axis": axis,
                        "sweep_value": value,
                        "metric": m,
                        "mean": mean,
                        "stderr": stderr,
                        "n_trials": int(vals.size),
                        "feasibility_rate": rate,
                    }
                )
    return agg
