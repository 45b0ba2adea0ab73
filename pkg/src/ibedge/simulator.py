"""Closed-loop time-slotted simulation and parameter sweeps."""

from __future__ import annotations

import csv
import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .gaussian_ib import GaussianSource, GibSolution, make_synthetic_source, solve_gib
from .scheduler import ControlParams, SlotSolver, VirtualQueues, update_queues
from .system_models import (
    AccuracyModel,
    ChannelModel,
    DeviceConfig,
    DeviceProfile,
    ServerConfig,
    channel_gains,
    delays,
    device_profile,
    evaluate_slot,
    max_rate,
)

log = logging.getLogger(__name__)

SLOT_LOG_FIELDS = ("slot", "k", "h", "beta", "R", "f_d", "f_k", "f_c", "Z", "S", "L_tot", "G", "P_tot")
SUMMARY_FIELDS = ("scope", "avg_power", "avg_device_power", "avg_latency", "avg_nmse", "L_avg", "G_avg")


@dataclass(frozen=True)
class Scenario:
    devices: tuple[DeviceConfig, ...]
    server: ServerConfig
    channel: ChannelModel
    sources: GaussianSource | tuple[GaussianSource, ...]
    ctrl: ControlParams = ControlParams()
    horizon: int = 1000
    seed: int = 0
    burn_in: int = 0
    accuracy: tuple[AccuracyModel, ...] | None = None
    record_traces: bool = False
    record_slots: bool = False

    def __post_init__(self):
        object.__setattr__(self, "devices", tuple(self.devices))
        if not isinstance(self.sources, GaussianSource):
            object.__setattr__(self, "sources", tuple(self.sources))
            if len(self.sources) != len(self.devices):
                raise ValueError("need one source per device (or a single shared source)")
        if not self.devices:
            raise ValueError("scenario needs at least one device")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0 <= self.burn_in < self.horizon:
            raise ValueError("burn_in must lie in [0, horizon)")
        if self.accuracy is not None and len(self.accuracy) != len(self.devices):
            raise ValueError("need one accuracy model per device")

    @property
    def K(self) -> int:
        return len(self.devices)

    def source_of(self, k: int) -> GaussianSource:
        return self.sources if isinstance(self.sources, GaussianSource) else self.sources[k]


@dataclass
class RunResult:
    avg_power: float
    avg_device_power: NDArray
    avg_server_power: float
    avg_latency: NDArray
    avg_nmse: NDArray
    final_queues: VirtualQueues
    horizon: int
    seed: int
    queue_traces: dict | None = None
    slot_log: list[dict] | None = None
    warnings: list[str] = field(default_factory=list)


@dataclass
class DeviceFeasibility:
    id: int
    min_nmse: float
    min_latency: float
    compute_latency_bound: float
    accuracy_ok: bool
    latency_ok: bool

    @property
    def feasible(self) -> bool:
        return self.accuracy_ok and self.latency_ok


@lru_cache(maxsize=16)
def _solution(source: GaussianSource) -> GibSolution:
    return solve_gib(source)


def build_profiles(scenario: Scenario) -> list[DeviceProfile]:
    out = []
    for k, dev in enumerate(scenario.devices):
        acc = scenario.accuracy[k] if scenario.accuracy is not None else None
        out.append(device_profile(dev, _solution(scenario.source_of(k)), acc))
    return out


def feasibility_check(scenario: Scenario, profiles: Sequence[DeviceProfile] | None = None) -> list[DeviceFeasibility]:
    """Per-device bounds on reachable accuracy and latency.

    Latency is bounded with every resource at its maximum, the whole server
    devoted to the device and the fading gain at its mean. Only betas that
    meet the device's accuracy target are considered (all of them if none do).
    """
    profiles = profiles or build_profiles(scenario)
    fading_off = replace(scenario.channel, fading=False)
    report = []
    for k, (dev, prof) in enumerate(zip(scenario.devices, profiles)):
        h = float(channel_gains(fading_off, [dev.distance], 0)[0])
        R_max = max_rate(dev.bandwidth, dev.noise_psd, h, dev.p_max)
        ok = prof.G <= dev.G_avg + 1e-12
        pick = ok if ok.any() else np.ones_like(ok)
        L = delays(dev, prof.d_t, prof.bits, dev.f_d_max, R_max, scenario.server.f_max)[3]
        L = np.atleast_1d(L)[pick]
        compute = (prof.C_d / dev.f_d_max)[pick]
        min_nmse = float(prof.G.min())
        report.append(DeviceFeasibility(
            id=dev.id,
            min_nmse=min_nmse,
            min_latency=float(L.min()),
            compute_latency_bound=float(compute.min()),
            accuracy_ok=bool(dev.G_avg >= min_nmse - 1e-12),
            latency_ok=bool(dev.L_avg >= L.min()),
        ))
    return report


def run(scenario: Scenario) -> RunResult:
    """Simulate `scenario.horizon` slots with queues starting at zero."""
    devs = scenario.devices
    K = scenario.K
    profiles = build_profiles(scenario)
    notes = []
    for rep in feasibility_check(scenario, profiles):
        if not rep.accuracy_ok:
            notes.append(f"device {rep.id}: G_avg below best achievable NMSE {rep.min_nmse:.4g}")
        if not rep.latency_ok:
            notes.append(f"device {rep.id}: L_avg below minimum achievable latency {rep.min_latency:.4g} s")
    for msg in notes:
        log.warning(msg)

    channel = replace(scenario.channel, seed=scenario.seed)
    distances = np.array([d.distance for d in devs])
    L_avg = np.array([d.L_avg for d in devs])
    G_avg = np.array([d.G_avg for d in devs])
    eps = np.array([d.eps_step for d in devs])
    nu = np.array([d.nu_step for d in devs])

    q = VirtualQueues.zeros(K)
    sum_ptot = 0.0
    sum_pdev = np.zeros(K)
    sum_psrv = 0.0
    sum_L = np.zeros(K)
    sum_G = np.zeros(K)
    T = scenario.horizon
    traces = {"Z": np.zeros((T, K)), "S": np.zeros((T, K))} if scenario.record_traces else None
    slot_log = [] if scenario.record_slots else None

    solver = SlotSolver(profiles, devs, scenario.server, scenario.ctrl)
    for t in range(T):
        h = channel_gains(channel, distances, t)
        dec = solver.decide(q, h)
        d_t, bits, G = solver.chosen(dec)
        m = evaluate_slot(devs, scenario.server, h, d_t, bits, G, dec.f_d, dec.R, dec.f_split, dec.f_c)
        if traces is not None:
            traces["Z"][t] = q.Z
            traces["S"][t] = q.S
        if slot_log is not None:
            for k in range(K):
                slot_log.append({
                    "slot": t, "k": k, "h": float(h[k]), "beta": float(dec.beta[k]),
                    "R": float(dec.R[k]), "f_d": float(dec.f_d[k]), "f_k": float(dec.f_split[k]),
                    "f_c": float(dec.f_c), "Z": float(q.Z[k]), "S": float(q.S[k]),
                    "L_tot": float(m.L_tot[k]), "G": float(m.G[k]), "P_tot": m.p_tot,
                })
        if t >= scenario.burn_in:
            sum_ptot += m.p_tot
            sum_pdev += m.p_tx + m.p_dev
            sum_psrv += m.p_srv
            sum_L += m.L_tot
            sum_G += m.G
        q = update_queues(q, m, (L_avg, G_avg), (eps, nu))

    n = T - scenario.burn_in
    return RunResult(
        avg_power=sum_ptot / n,
        avg_device_power=sum_pdev / n,
        avg_server_power=sum_psrv / n,
        avg_latency=sum_L / n,
        avg_nmse=sum_G / n,
        final_queues=q,
        horizon=T,
        seed=scenario.seed,
        queue_traces=traces,
        slot_log=slot_log,
        warnings=notes,
    )


# ---------------------------------------------------------------- sweeps


@dataclass
class SweepPoint:
    V: float
    G_avg: float
    L_avg: float
    result: RunResult

    @property
    def device_power(self) -> float:
        return float(np.sum(self.result.avg_device_power))


def sweep_scenarios(base: Scenario, grid: dict) -> list[tuple[float, float, float, Scenario]]:
    keys = ("V", "G_avg", "L_avg")
    unknown = set(grid) - set(keys)
    if unknown:
        raise ValueError(f"unknown sweep grid key(s): {sorted(unknown)}")
    axes = []
    for key in keys:
        vals = grid.get(key)
        if vals is None:
            vals = [base.ctrl.V] if key == "V" else [getattr(base.devices[0], key)]
        if len(vals) == 0:
            raise ValueError(f"sweep grid axis {key!r} is empty")
        axes.append([float(v) for v in vals])
    out = []
    for i, (V, g, L) in enumerate(itertools.product(*axes)):
        devs = tuple(replace(d, G_avg=g, L_avg=L) for d in base.devices)
        sc = replace(base, devices=devs, ctrl=replace(base.ctrl, V=V), seed=base.seed + i)
        out.append((V, g, L, sc))
    return out


def sweep(base: Scenario, grid: dict, parallel: int = 1) -> list[SweepPoint]:
    """One independent run per (V, G_avg, L_avg) point, in grid order.

    Point ``i`` uses seed ``base.seed + i``.
    """
    jobs = sweep_scenarios(base, grid)
    scenarios = [sc for *_, sc in jobs]
    if parallel > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(run, scenarios))
    else:
        results = [run(sc) for sc in scenarios]
    return [SweepPoint(V, g, L, r) for (V, g, L, _), r in zip(jobs, results)]


# ---------------------------------------------------------------- scenarios


def default_scenario(num_devices: int = 5, horizon: int = 20000, seed: int = 0, *,
                     V: float = 1e3, L_avg: float = 5e-3, G_avg: float = 0.3,
                     snr: float = 0.05, d_x: int = 750, d_y: int = 8,
                     source_seed: int = 0, eps_step: float = 3.0, nu_step: float = 1.0,
                     beta_grid: Sequence[float] | None = None) -> Scenario:
    """Desk-scale Gaussian experiment: devices evenly spaced over 5-150 m."""
    distances = np.linspace(5.0, 150.0, num_devices) if num_devices > 1 else np.array([5.0])
    extra = {} if beta_grid is None else {"beta_grid": tuple(beta_grid)}
    devices = tuple(
        DeviceConfig(id=k, distance=float(d), L_avg=L_avg, G_avg=G_avg, eps_step=eps_step,
                     nu_step=nu_step, C_d_per_dt=float(d_x), C_s_per_dt=float(d_y), **extra)
        for k, d in enumerate(distances)
    )
    return Scenario(
        devices=devices,
        server=ServerConfig(),
        channel=ChannelModel(seed=seed),
        sources=make_synthetic_source(d_x, d_y, snr, source_seed),
        ctrl=ControlParams(V=V),
        horizon=horizon,
        seed=seed,
    )


# ---------------------------------------------------------------- output


def _fmt(x) -> str:
    return repr(float(x))


def summary_rows(result: RunResult, devices: Sequence[DeviceConfig]) -> list[dict]:
    rows = []
    for k, dev in enumerate(devices):
        rows.append({
            "scope": str(dev.id),
            "avg_power": _fmt(result.avg_device_power[k]),
            "avg_device_power": _fmt(result.avg_device_power[k]),
            "avg_latency": _fmt(result.avg_latency[k]),
            "avg_nmse": _fmt(result.avg_nmse[k]),
            "L_avg": _fmt(dev.L_avg),
            "G_avg": _fmt(dev.G_avg),
        })
    rows.append({
        "scope": "all",
        "avg_power": _fmt(result.avg_power),
        "avg_device_power": _fmt(np.sum(result.avg_device_power)),
        "avg_latency": _fmt(np.mean(result.avg_latency)),
        "avg_nmse": _fmt(np.mean(result.avg_nmse)),
        "L_avg": _fmt(np.mean([d.L_avg for d in devices])),
        "G_avg": _fmt(np.mean([d.G_avg for d in devices])),
    })
    return rows


def write_summary_csv(result: RunResult, devices: Sequence[DeviceConfig], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        w.writeheader()
        w.writerows(summary_rows(result, devices))
    return path


def sweep_fields(K: int) -> list[str]:
    return (["V", "G_avg", "L_avg", "seed", "avg_power", "avg_device_power"]
            + [f"latency_{k}" for k in range(K)] + [f"nmse_{k}" for k in range(K)])


def write_sweep_csv(points: Sequence[SweepPoint], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    K = len(points[0].result.avg_latency) if points else 0
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(sweep_fields(K))
        for p in points:
            r = p.result
            w.writerow([_fmt(p.V), _fmt(p.G_avg), _fmt(p.L_avg), r.seed, _fmt(r.avg_power),
                        _fmt(p.device_power)]
                       + [_fmt(x) for x in r.avg_latency] + [_fmt(x) for x in r.avg_nmse])
    return path


def write_slot_log(result: RunResult, path: str | Path) -> Path:
    if result.slot_log is None:
        raise ValueError("run was not recorded with record_slots=True")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for rec in result.slot_log:
            fh.write(json.dumps({k: rec[k] for k in SLOT_LOG_FIELDS}) + "\n")
    return path
