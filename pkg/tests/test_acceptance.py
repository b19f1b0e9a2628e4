"""Acceptance gate: end-to-end behavior, statistics, and performance.

One test per criterion.  The expensive Monte Carlo artifacts (the
10-point interference-limit sweep, the beta sweep, and the relay
placement comparison) are computed once per module and shared.
"""

import time

import numpy as np
import pytest

from crsim.allocator import (
    CONCAVITY_MARGIN,
    InfeasibleInstanceError,
    SolverConfig,
    solve_joint,
)
from crsim.exhaustive import exhaustive_search
from crsim.interference import (
    periodogram_window_integral,
    sinc_sq_window_integral,
)
from crsim.schemes import SchemeId
from crsim.sensing import (
    SensingParams,
    closed_form_threshold,
    detection_prob,
    false_alarm_prob,
    gaussian_q,
    threshold_floor,
)
from crsim.simharness import (
    Scenario,
    build_instance,
    random_instance,
    sweep,
)
from crsim.simharness import _solver_config

from test_sensing import q_oracle, stationary_point_oracle

# Desk-scale sweep scenario: 8 secondary subcarriers with the primary
# blocks shrunk proportionally, everything else at defaults.
SCALED = Scenario(n=8, l_total=24, pu_block_sizes=(10, 6, 8))
GRID = [float(v) for v in np.logspace(-4, -3, 10)]
BETA_GRID = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3061]
TRIALS = 200

TC = "throughput_capacity"
SR = "sum_rate"
RP = "relay_power"


@pytest.fixture(scope="module")
def grid_sweep():
    """All five schemes over the interference-limit grid, with timing."""
    t0 = time.perf_counter()
    agg = sweep(SCALED, "interference_limit", GRID, trials=TRIALS)
    return agg, time.perf_counter() - t0


@pytest.fixture(scope="module")
def beta_sweep():
    return sweep(
        SCALED, "beta", BETA_GRID, schemes=(SchemeId.PROPOSED,), trials=TRIALS
    )


@pytest.fixture(scope="module")
def placement_results():
    """Mean proposed throughput for the three relay-placement scenarios."""
    out = {}
    for gains in ((8.0, 3.0, 8.0), (8.0, 3.0, 3.0), (3.0, 3.0, 8.0)):
        sr_gain, ss_gain, rs_gain = gains
        scenario = Scenario(
            n=8,
            l_total=24,
            pu_block_sizes=(10, 6, 8),
            avg_gain_sr=sr_gain,
            avg_gain_ss=ss_gain,
            avg_gain_rs=rs_gain,
        )
        agg = sweep(
            scenario,
            "interference_limit",
            [1e-3],
            schemes=(SchemeId.PROPOSED,),
            trials=TRIALS,
        )
        out[gains] = (
            agg.mean(SchemeId.PROPOSED, 1e-3, TC),
            agg.stderr(SchemeId.PROPOSED, 1e-3, TC),
        )
    return out


def test_criterion_1_oracle_equivalence_small_instances():
    t0 = time.perf_counter()
    compared = 0
    for n in (2, 3, 4):
        for seed in range(50):
            inst = random_instance(n, seed=seed)
            lam = np.full(n, threshold_floor(inst.sensing))
            ref_alloc, ref_val = exhaustive_search(inst, lam)
            if ref_alloc is None:
                continue  # infeasible draw: no optimum to compare against
            _, diag = solve_joint(
                inst,
                SolverConfig(max_iters=200, seed=[n, seed]),
                fixed_thresholds=lam,
            )
            assert diag["metrics"][TC] >= 0.98 * ref_val, (n, seed)
            compared += 1
    assert compared >= 100
    assert time.perf_counter() - t0 < 300.0


def test_criterion_2_feasibility_and_kkt():
    scenario = Scenario()
    th = scenario.interference_limit
    converged = 0
    slack_ok = 0
    for trial in range(500):
        inst = build_instance(scenario, trial)
        try:
            alloc, diag = solve_joint(inst, _solver_config(scenario, trial, 0))
        except InfeasibleInstanceError:
            continue
        converged += 1
        p, q = alloc.power, alloc.pairs

        i_s = float(np.sum(p * inst.factors.eff_s))
        i_r = float(np.sum(p * inst.factors.eff_r))
        assert i_s <= th * (1.0 + 1e-6), trial
        assert i_r <= th * (1.0 + 1e-6), trial

        pf = false_alarm_prob(alloc.thresholds.lam, inst.sensing)
        pd = detection_prob(alloc.thresholds.lam, inst.sensing, inst.pu_rx_power)
        assert np.all(pf <= 0.3061 + 1e-9), trial
        assert np.all(1.0 - pd <= 0.2 + 1e-9), trial

        assert np.all(q.sum(axis=0) == 1) and np.all(q.sum(axis=1) == 1), trial

        active = (q == 1) & (p > 0)
        assert np.all(
            inst.gamma[active] * p[active] >= CONCAVITY_MARGIN * (1.0 - 1e-9)
        ), trial

        scale_s = th * max(1.0, diag["eta"])
        scale_r = th * max(1.0, diag["kappa"])
        if (
            diag["kkt_residual_s"] <= 1e-3 * scale_s
            and diag["kkt_residual_r"] <= 1e-3 * scale_r
        ):
            slack_ok += 1
    assert converged > 0
    assert slack_ok / converged >= 0.95


def test_criterion_3_scheme_ordering(grid_sweep):
    agg, _ = grid_sweep
    for v in GRID:
        tc = {s: agg.mean(s, v, TC) for s in SchemeId}
        slack = 0.99
        assert tc[SchemeId.PROPOSED] >= slack * tc[SchemeId.ALTERNATE], v
        best_single = max(tc[SchemeId.FIXED_SCP], tc[SchemeId.ISS])
        assert tc[SchemeId.ALTERNATE] >= slack * best_single, v
        assert best_single >= slack * tc[SchemeId.WCR], v
    top = GRID[-1]
    ratio = agg.mean(SchemeId.PROPOSED, top, TC) / agg.mean(SchemeId.WCR, top, TC)
    assert ratio > 2.5, f"Proposed/WCR mean ratio {ratio:.3f} at the top grid point"


def test_criterion_4_sum_rate_closeness(grid_sweep):
    agg, _ = grid_sweep
    for v in GRID:
        sr_p = agg.mean(SchemeId.PROPOSED, v, SR)
        sr_i = agg.mean(SchemeId.ISS, v, SR)
        sr_f = agg.mean(SchemeId.FIXED_SCP, v, SR)
        sr_w = agg.mean(SchemeId.WCR, v, SR)
        assert abs(sr_p - sr_i) <= 0.05 * sr_p, v
        assert sr_w <= 0.90 * sr_p, v
        assert sr_f <= 0.90 * sr_p, (
            f"FixedSCP sum rate {sr_f:.3f} is only "
            f"{100 * (1 - sr_f / sr_p):.1f}% below Proposed {sr_p:.3f} at {v:g}"
        )


def _monotone(values, errors, direction):
    """Trend check allowing violations within one standard error."""
    for (v1, e1), (v2, e2) in zip(
        zip(values, errors), zip(values[1:], errors[1:])
    ):
        allowed = np.sqrt(e1**2 + e2**2)
        if direction > 0:
            assert v2 >= v1 - allowed, (v1, v2, allowed)
        else:
            assert v2 <= v1 + allowed, (v1, v2, allowed)


def test_criterion_5_monotone_trends(grid_sweep, beta_sweep):
    agg, _ = grid_sweep
    tc = [agg.mean(SchemeId.PROPOSED, v, TC) for v in GRID]
    se = [agg.stderr(SchemeId.PROPOSED, v, TC) for v in GRID]
    _monotone(tc, se, direction=+1)

    tc_b = [beta_sweep.mean(SchemeId.PROPOSED, b, TC) for b in BETA_GRID]
    se_b = [beta_sweep.stderr(SchemeId.PROPOSED, b, TC) for b in BETA_GRID]
    _monotone(tc_b, se_b, direction=-1)


def test_criterion_6_relay_placement(placement_results):
    sym_mean, sym_se = placement_results[(8.0, 3.0, 8.0)]
    for gains in ((8.0, 3.0, 3.0), (3.0, 3.0, 8.0)):
        asym_mean, asym_se = placement_results[gains]
        margin = np.sqrt(sym_se**2 + asym_se**2)
        assert sym_mean - asym_mean > margin, (gains, sym_mean, asym_mean)


def test_criterion_7_relay_power(grid_sweep):
    agg, _ = grid_sweep
    for v in GRID:
        rp_p = agg.mean(SchemeId.PROPOSED, v, RP)
        rp_f = agg.mean(SchemeId.FIXED_SCP, v, RP)
        assert rp_p >= rp_f, (
            f"Proposed relay power {rp_p:.5f} < FixedSCP {rp_f:.5f} at {v:g}"
        )


def test_criterion_8_numeric_kernels(default_sensing):
    # Q function against the high-precision oracle
    xs = np.linspace(-8.0, 8.0, 2001)
    got = gaussian_q(xs)
    want = np.array([q_oracle(float(x)) for x in xs])
    assert np.max(np.abs(got - want)) <= 1e-12

    # quadrature self-consistency under node doubling
    df, ts = 0.15625e6, 7e-6
    from test_interference import make_geometry

    geom = make_geometry()
    for k in (0, 1, 3, 9):
        a = periodogram_window_integral(k * df, df, df, geom, nodes=32)
        b = periodogram_window_integral(k * df, df, df, geom, nodes=64)
        assert a == pytest.approx(b, rel=1e-6)
        c = sinc_sq_window_integral(k * df, df, ts, nodes=64)
        d = sinc_sq_window_integral(k * df, df, ts, nodes=128)
        assert c == pytest.approx(d, rel=1e-6)

    # closed-form sensing threshold against the stationary-point oracle
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 100:
        xi = float(rng.uniform(0.05, 20.0))
        s = float(rng.uniform(5e-6, 8e-5))
        lam = float(closed_form_threshold(xi, s, default_sensing))
        if not np.isfinite(lam) or lam <= threshold_floor(default_sensing):
            continue
        m = default_sensing.sample_count
        sn2 = default_sensing.noise_var
        hi = m * (sn2 + s) + 8.0 * np.sqrt(2 * m * sn2 * (sn2 + 2 * s))
        oracle = stationary_point_oracle(xi, s, default_sensing, 0.0, hi)
        assert oracle is not None
        assert lam == pytest.approx(oracle, rel=1e-6)
        checked += 1


def test_criterion_9_deterministic_sweep_csv(tmp_path):
    scenario = Scenario(
        n=4, l_total=12, pu_block_sizes=(5, 3, 4), solver_max_iters=60
    )
    paths = []
    for name in ("a.csv", "b.csv"):
        agg = sweep(
            scenario, "interference_limit", [3e-4, 1e-3], trials=10
        )
        path = tmp_path / name
        agg.to_csv(path, header_lines=("determinism check",))
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_criterion_10_performance_envelope(grid_sweep):
    scenario = Scenario()
    times = []
    for trial in range(11):
        inst = build_instance(scenario, trial)
        t0 = time.perf_counter()
        try:
            solve_joint(inst, _solver_config(scenario, trial, 0))
        except InfeasibleInstanceError:
            pass
        times.append(time.perf_counter() - t0)
    assert np.median(times) <= 1.0, f"median solve {np.median(times):.3f}s"

    _, sweep_elapsed = grid_sweep
    assert sweep_elapsed <= 600.0, f"full sweep took {sweep_elapsed:.1f}s"
