"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are
printed straight to the terminal, bypassing capture.
"""

import json
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest
from oracles import bounded_min, server_obj, server_oracle
from scipy.special import lambertw

from ibedge.gaussian_ib import (
    GaussianSource,
    compute_nmse,
    encoder_matrix,
    make_synthetic_source,
    relevance_complexity_curve,
    solve_gib,
)
from ibedge.numerics import lambert_w0
from ibedge.scheduler import optimal_device_freq, optimal_rate, optimal_server_allocation
from ibedge.simulator import default_scenario, run, sweep
from ibedge.system_models import DeviceConfig, ServerConfig, max_rate, tx_power

pytestmark = pytest.mark.slow


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
    assert ok, detail


def test_criterion_1_gib_analytic(capsys, big_sol):
    sol = solve_gib(GaussianSource([[1.0]], [[1.0]], [[0.5]]))
    err_lam = abs(sol.lambdas[0] - 0.75)
    err_bc = abs(sol.beta_crit[0] - 4.0)
    counts = []
    for seed in range(3):
        s = big_sol if seed == 0 else solve_gib(make_synthetic_source(750, 8, 0.05, seed))
        counts.append(int(np.count_nonzero(s.lambdas < 1 - 1e-8)))
    ok = err_lam <= 1e-8 and err_bc <= 1e-8 and counts == [8, 8, 8]
    report(capsys, 1, ok, f"scalar |lambda-0.75|={err_lam:.1e}, |beta_c-4|={err_bc:.1e}; "
                          f"750x8 eigenvalues<1 per source: {counts}")


def test_criterion_2_mi_continuity_monotonicity(capsys, big_sol):
    sols = [big_sol] + [solve_gib(make_synthetic_source(d, 3, snr, s))
                        for d, snr, s in ((6, 1.0, 1), (12, 0.3, 2), (4, 5.0, 3))]
    worst_jump = 0.0
    ok = True
    for sol in sols:
        bc = sol.beta_crit[np.isfinite(sol.beta_crit)]
        for b in bc:
            lo, hi = relevance_complexity_curve(sol, [b - 1e-6, b + 1e-6])
            worst_jump = max(worst_jump, abs(hi.complexity_bits - lo.complexity_bits),
                             abs(hi.relevance_bits - lo.relevance_bits))
        grid = np.unique(np.concatenate([np.geomspace(0.5, 50 * bc[-1], 3000), bc, bc * (1 + 1e-9)]))
        pts = relevance_complexity_curve(sol, grid)
        cx = np.array([p.complexity_bits for p in pts])
        rel = np.array([p.relevance_bits for p in pts])
        ok &= bool(np.all(np.diff(cx) >= -1e-12) and np.all(np.diff(rel) >= -1e-12))
        ok &= bool(np.all(rel <= cx + 1e-12) and np.all(rel <= sol.source.mutual_information_bits() + 1e-9))
    ok &= worst_jump < 1e-4
    report(capsys, 2, ok, f"max jump at beta_c +- 1e-6 = {worst_jump:.2e} bits over {len(sols)} sources; "
                          "monotone, rel <= cx, rel <= I(X;Y)")


def test_criterion_3_mse_monte_carlo(capsys):
    rng = np.random.default_rng(2024)
    n = 100_000
    worst = 0.0
    cases = 0
    for seed, (d_x, d_y, snr) in enumerate([(6, 2, 1.0), (10, 3, 0.5), (20, 4, 0.2), (8, 4, 3.0), (30, 2, 0.1)]):
        src = make_synthetic_source(d_x, d_y, snr, 100 + seed)
        sol = solve_gib(src)
        joint = np.block([[src.C_X, src.C_XY], [src.C_XY.T, src.C_Y]])
        chol = np.linalg.cholesky(joint)
        bc = sol.beta_crit[np.isfinite(sol.beta_crit)]
        for beta in (1.05 * bc[0], 0.5 * (bc[0] + bc[-1]), 2 * bc[-1], 20 * bc[-1]):
            A = encoder_matrix(sol, beta)

            def draw():
                Z = rng.standard_normal((n, d_x + d_y)) @ chol.T
                X, Y = Z[:, :d_x], Z[:, d_x:]
                return X @ A.T + rng.standard_normal((n, A.shape[0])), Y

            T_fit, Y_fit = draw()
            coef, *_ = np.linalg.lstsq(T_fit, Y_fit, rcond=None)
            T_ev, Y_ev = draw()
            mc = np.mean(np.sum((Y_ev - T_ev @ coef) ** 2, axis=1)) / np.trace(src.C_Y)
            worst = max(worst, abs(compute_nmse(sol, beta) - mc) / mc)
            cases += 1
    report(capsys, 3, worst < 0.02, f"max relative gap closed-form vs Monte-Carlo NMSE = {worst:.2%} "
                                    f"over {cases} (source, beta) cases, 1e5 samples each")


def test_criterion_4_closed_form_oracles(capsys):
    rng = np.random.default_rng(77)
    dev = DeviceConfig()
    srv_gap = rate_gap = freq_gap = 0.0
    clamps = [0, 0, 0]
    N = 120
    for _ in range(N):
        Z, eps, bits = 10 ** rng.uniform(-3, 4), 10 ** rng.uniform(-1, 1), rng.uniform(0.1, 20)
        h, V = 10 ** rng.uniform(-13, -8), 10 ** rng.uniform(-6, 5)
        R_max = max_rate(dev.bandwidth, dev.noise_psd, h, dev.p_max)
        R = optimal_rate(Z, eps, bits, h, dev, V)
        f_r = lambda r: eps * Z * bits / r + V * tx_power(dev.bandwidth, dev.noise_psd, h, r)
        rate_gap = max(rate_gap, f_r(R) / bounded_min(f_r, R_max) - 1)
        clamps[0] += R == R_max

        C, Vf = rng.uniform(10, 6000), 10 ** rng.uniform(-9, 4)
        f = optimal_device_freq(Z, eps, C, dev, Vf)
        f_f = lambda x: eps * Z * C / x + Vf * dev.eta_d * x**3
        freq_gap = max(freq_gap, f_f(f) / bounded_min(f_f, dev.f_d_max) - 1)
        clamps[1] += f == dev.f_d_max

        K = int(rng.integers(1, 6))
        srv = ServerConfig(f_max=10 ** rng.uniform(7, 9.3))
        Zs, es, Cs = 10 ** rng.uniform(-2, 4, K), 10 ** rng.uniform(-1, 1, K), rng.uniform(1, 64, K)
        Vs = 10 ** rng.uniform(-3, 3)
        f_c, split = optimal_server_allocation(Zs, es, Cs, srv, Vs)
        a = es * Zs * Cs
        srv_gap = max(srv_gap, server_obj(a, split, srv.eta_s, Vs) / server_oracle(a, srv, Vs) - 1)
        clamps[2] += f_c == srv.f_max
    ok = max(rate_gap, freq_gap, srv_gap) <= 1e-3 and min(clamps) > 0
    report(capsys, 4, ok, f"{N} instances each; worst excess over oracle: rate {rate_gap:.1e}, "
                          f"device clock {freq_gap:.1e}, server {srv_gap:.1e}; clamped cases {clamps}")


def test_criterion_5_lambert_w(capsys):
    x = np.concatenate([[0.0], np.logspace(-12, 9, 10_000 - 1)])
    w = lambert_w0(x)
    resid = np.abs(w * np.exp(w) - x) / np.maximum(1.0, x)
    ref = np.max(np.abs(w - lambertw(x).real) / np.maximum(1.0, np.abs(w)))
    report(capsys, 5, resid.max() <= 1e-10, f"max scaled residual {resid.max():.1e} over 1e4 points "
                                            f"in [0, 1e9]; max rel. diff to scipy {ref:.1e}")


def test_criterion_6_closed_loop(capsys):
    L_avg, G_avg = 2e-3, 0.25
    sc = default_scenario(num_devices=5, horizon=20000, seed=0, L_avg=L_avg, G_avg=G_avg)
    t0 = time.perf_counter()
    r = run(replace(sc, record_traces=True))
    elapsed = time.perf_counter() - t0
    T = sc.horizon
    t = np.arange(1, T + 1)[:, None]
    tail = slice(int(0.9 * T), T)
    growth = float(np.max(r.queue_traces["Z"][tail] / t[tail]))
    lat = float(np.max(r.avg_latency / L_avg))
    acc = float(np.max(r.avg_nmse / G_avg))
    ok = lat <= 1.05 and acc <= 1.05 and growth < 0.01 and elapsed < 120
    report(capsys, 6, ok, f"K=5 T=20000: max L/L_avg={lat:.4f}, max NMSE/G_avg={acc:.4f}, "
                          f"max Z/t (last 10%)={growth:.1e}, {elapsed:.1f} s")


def test_criterion_7_tradeoff_shape(capsys):
    Gs = [0.2, 0.3, 0.4, 0.6]
    Ls = [2e-3, 5e-3]
    base = default_scenario(num_devices=5, horizon=5000, seed=0)
    t0 = time.perf_counter()
    pts = sweep(base, {"G_avg": Gs, "L_avg": Ls})
    elapsed = time.perf_counter() - t0
    P = {(p.G_avg, p.L_avg): p.device_power for p in pts}
    strict = [P[(g, Ls[0])] for g in Gs]
    loose = [P[(g, Ls[1])] for g in Gs]
    ordered = all(s >= 0.98 * lo for s, lo in zip(strict, loose))
    monotone = all(b <= 1.02 * a for curve in (strict, loose) for a, b in zip(curve, curve[1:]))
    ok = ordered and monotone and elapsed < 300
    fmt = lambda c: ", ".join(f"{x:.2e}" for x in c)
    report(capsys, 7, ok, f"device power vs G_avg {Gs}: L=2 ms [{fmt(strict)}] W, L=5 ms [{fmt(loose)}] W; "
                          f"strict>=loose: {ordered}, nonincreasing: {monotone}, {elapsed:.0f} s")


def test_criterion_8_determinism(capsys, tmp_path):
    cfg = {
        "scenario": {"horizon": 300, "seed": 11, "num_devices": 3,
                     "source": {"synthetic": {"d_x": 30, "d_y": 4, "snr": 0.3, "seed": 1}}},
        "sweep": {"G_avg": [0.4, 0.6]},
        "curve": {"betas": [1.0, 2.0, 5.0, 50.0]},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    outputs = []
    for rep in range(2):
        prefix = str(tmp_path / f"run{rep}")
        for cmd in (["gib-curve"], ["simulate", "--log-slots"], ["sweep"]):
            proc = subprocess.run([sys.executable, "-m", "ibedge.cli", *cmd, "--config", str(path), "--out", prefix],
                                  capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
        outputs.append([(tmp_path / f"run{rep}{suffix}").read_bytes()
                        for suffix in ("_curve.csv", "_summary.csv", "_slots.jsonl", "_sweep.csv")])
    same = outputs[0] == outputs[1]
    report(capsys, 8, same, "two separate processes, same seed: curve, summary, slot log and sweep "
                            f"files byte-identical = {same}")
