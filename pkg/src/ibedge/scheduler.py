"""Drift-plus-penalty controller with closed-form per-slot optimizers.

Each slot the controller minimizes

    sum_k [eps_k Z_k L_k + nu_k S_k G_k(beta_k)] + V * P_tot

over rates, CPU frequencies, server shares and the IB trade-off parameters,
then the virtual queues ``Z`` (latency) and ``S`` (accuracy) absorb the
constraint violations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .numerics import lambert_w0
from .system_models import (
    LN2,
    DeviceConfig,
    DeviceProfile,
    ServerConfig,
    SlotMetrics,
    device_profile,
    evaluate_slot,
    max_rate,
)


@dataclass
class VirtualQueues:
    Z: NDArray
    S: NDArray

    @classmethod
    def zeros(cls, K: int) -> "VirtualQueues":
        return cls(np.zeros(K), np.zeros(K))

    def copy(self) -> "VirtualQueues":
        return VirtualQueues(self.Z.copy(), self.S.copy())


@dataclass(frozen=True)
class ControlParams:
    """Controller knobs.

    `latency_weight_floor` lower-bounds ``eps_k Z_k / V`` for any device that
    has something to compute or send. With an empty latency queue the
    closed forms would otherwise return zero resources for a nonzero
    payload, i.e. an infinite delay. Set to 0 for the bare closed forms.
    """

    V: float = 1e3
    latency_weight_floor: float = 1e-6
    server_reactive: bool = False

    def __post_init__(self):
        if not self.V >= 0:
            raise ValueError("V must be >= 0")
        if not self.latency_weight_floor >= 0:
            raise ValueError("latency_weight_floor must be >= 0")


@dataclass
class SlotDecision:
    f_d: NDArray
    R: NDArray
    beta: NDArray
    f_split: NDArray
    f_c: float
    beta_index: NDArray


def update_queues(q: VirtualQueues, metrics: SlotMetrics, targets, steps) -> VirtualQueues:
    """One queue step; `targets` is ``(L_avg, G_avg)`` and `steps` is ``(eps, nu)``."""
    L_avg, G_avg = (np.asarray(t, dtype=float) for t in targets)
    eps, nu = (np.asarray(s, dtype=float) for s in steps)
    Z = np.maximum(0.0, q.Z + eps * (np.asarray(metrics.L_tot) - L_avg))
    S = np.maximum(0.0, q.S + nu * (np.asarray(metrics.G) - G_avg))
    return VirtualQueues(Z, S)


# ---------------------------------------------------------------- closed forms
# The helpers below take the latency weight w = eps * Z directly and are
# vectorized over the payload arguments.


def _rate(w, bits, h, B, N0, V, R_max):
    w = np.asarray(w, dtype=float)
    bits = np.asarray(bits, dtype=float)
    drive = w * bits
    if V == 0:
        return np.where(drive > 0, R_max, 0.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        arg = np.sqrt(np.where(drive > 0, drive * LN2 * h / (4.0 * B * B * V * N0), 0.0))
    # a vanishing V can overflow the argument; the clamp then applies anyway
    big = ~np.isfinite(arg)
    R = 2.0 * B / LN2 * lambert_w0(np.where(big, 0.0, arg))
    return np.clip(np.where(big, np.inf, R), 0.0, R_max)


def _freq(w, C, eta, V, f_max):
    drive = np.asarray(w, dtype=float) * np.asarray(C, dtype=float)
    if V == 0:
        return np.where(drive > 0, f_max, 0.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f = np.where(drive > 0, (drive / (3.0 * V * eta)) ** 0.25, 0.0)
    return np.clip(np.nan_to_num(f, nan=np.inf), 0.0, f_max)


def optimal_rate(Z: float, eps: float, relevance_bits: float, h: float, dev: DeviceConfig, V: float) -> float:
    """Minimizer over ``[0, R_max]`` of ``eps Z bits / R + V p_tx(R)``."""
    if h <= 0:
        raise ValueError("channel gain must be positive")
    R_max = max_rate(dev.bandwidth, dev.noise_psd, h, dev.p_max)
    return float(_rate(eps * Z, relevance_bits, h, dev.bandwidth, dev.noise_psd, V, R_max))


def optimal_device_freq(Z: float, eps: float, C_d: float, dev: DeviceConfig, V: float) -> float:
    """Minimizer over ``[0, f_max]`` of ``eps Z C_d / f + V eta f^3``."""
    return float(_freq(eps * Z, C_d, dev.eta_d, V, dev.f_d_max))


def _server_split(a: NDArray, srv: ServerConfig, V: float) -> tuple[float, NDArray]:
    a = np.maximum(np.asarray(a, dtype=float), 0.0)
    root = np.sqrt(a)
    total = float(root.sum())
    if total == 0:
        return 0.0, np.zeros_like(a)
    if V == 0:
        f_c = srv.f_max
    else:
        denom = (3.0 * V * srv.eta_s) ** 0.25
        f_c = srv.f_max if denom == 0 else min(math.sqrt(total) / denom, srv.f_max)
    return f_c, f_c * root / total


def optimal_server_allocation(Z, eps, C_s, srv: ServerConfig, V: float) -> tuple[float, NDArray]:
    """Server clock and its split minimizing ``sum eps Z C_s / f_k + V eta f_c^3``.

    Above ``f_max`` the clock is clamped and the shares rescaled by the
    same factor, so the shares always sum to the clock.
    """
    a = np.asarray(eps, dtype=float) * np.asarray(Z, dtype=float) * np.asarray(C_s, dtype=float)
    return _server_split(a, srv, V)


# ---------------------------------------------------------------- per-slot problem


def _weighted(w, L):
    # 0 * inf := 0, the limit of the closed forms as the weight vanishes
    with np.errstate(invalid="ignore"):
        return np.where(w > 0, w * L, 0.0)


def _ratio(work, res):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(work > 0, np.where(res > 0, work / np.where(res > 0, res, 1.0), np.inf), 0.0)


def _as_profiles(sols, devs) -> list[DeviceProfile]:
    out = []
    for s, d in zip(sols, devs):
        out.append(s if isinstance(s, DeviceProfile) else device_profile(d, s))
    return out


class SlotSolver:
    """Per-slot problem for a fixed device population.

    Device parameters and per-beta tables are stacked once into (K, M)
    arrays, padded with +inf objective where a device has fewer than M betas,
    so each slot is solved with a handful of vectorized operations.
    """

    def __init__(self, profiles: Sequence[DeviceProfile], devs: Sequence[DeviceConfig],
                 srv: ServerConfig, ctrl: ControlParams):
        self.profiles = list(profiles)
        self.devs = list(devs)
        self.srv = srv
        self.ctrl = ctrl
        K = len(self.devs)
        M = max(len(p.betas) for p in self.profiles)
        self.mask = np.zeros((K, M), dtype=bool)

        def stack(attr):
            out = np.zeros((K, M))
            for k, p in enumerate(self.profiles):
                v = getattr(p, attr)
                out[k, : len(v)] = v
            return out

        for k, p in enumerate(self.profiles):
            self.mask[k, : len(p.betas)] = True
        self.betas = stack("betas")
        self.bits = stack("bits")
        self.C_d = stack("C_d")
        self.C_s = stack("C_s")
        self.G = stack("G")
        self.d_t = stack("d_t")
        self.workload = self.C_d + self.bits + self.C_s
        self.C_s_max = np.array([p.C_s_max for p in self.profiles])

        def col(attr):
            return np.array([getattr(d, attr) for d in self.devs], dtype=float)[:, None]

        self.B = col("bandwidth")
        self.N0 = col("noise_psd")
        self.eta = col("eta_d")
        self.f_d_max = col("f_d_max")
        self.p_max = col("p_max")
        self.eps = col("eps_step")[:, 0]
        self.nu = col("nu_step")[:, 0]

    def _weights(self, w_raw, workload):
        V = self.ctrl.V
        floor = self.ctrl.latency_weight_floor
        w_raw = np.broadcast_to(w_raw, np.shape(workload))
        if floor == 0:
            boosted = w_raw
        elif V > 0:
            boosted = np.maximum(w_raw, floor * V)
        else:
            boosted = np.where(w_raw > 0, w_raw, 1.0)
        return np.where(workload > 0, boosted, w_raw)

    def server(self, w_raw, C_s) -> tuple[float, NDArray]:
        w = self._weights(w_raw, C_s)
        return _server_split(w * C_s, self.srv, self.ctrl.V)

    def candidates(self, q: VirtualQueues, h, f_split) -> dict:
        """Closed-form resources and objective of every (device, beta) pair."""
        V = self.ctrl.V
        h = np.asarray(h, dtype=float)[:, None]
        w = self._weights((self.eps * q.Z)[:, None], self.workload)
        R_max = self.B * np.log1p(h * self.p_max / (self.B * self.N0)) / LN2
        R = _rate(w, self.bits, h, self.B, self.N0, V, R_max)
        f_d = _freq(w, self.C_d, self.eta, V, self.f_d_max)
        L = _ratio(self.C_d, f_d) + _ratio(self.bits, R) + _ratio(self.C_s, np.asarray(f_split)[:, None])
        p_tx = (self.B * self.N0 / h) * np.expm1(R * LN2 / self.B)
        p_dev = self.eta * f_d**3
        obj = _weighted(w, L) + (self.nu * q.S)[:, None] * self.G + V * (p_tx + p_dev)
        obj = np.where(self.mask, obj, np.inf)
        return {"R": R, "f_d": f_d, "L": L, "objective": obj}

    def decide(self, q: VirtualQueues, h) -> SlotDecision:
        K = len(self.devs)
        rows = np.arange(K)
        w_raw = self.eps * q.Z
        f_c, f_split = self.server(w_raw, self.C_s_max)
        cand = self.candidates(q, h, f_split)
        idx = np.argmin(cand["objective"], axis=1)
        chosen_C_s = self.C_s[rows, idx]
        if self.ctrl.server_reactive:
            f_c, f_split = self.server(w_raw, chosen_C_s)
        elif np.any((chosen_C_s == 0) & (w_raw == 0) & (self.C_s_max > 0)):
            # idle devices with empty queues need no floored server share
            C = np.where((chosen_C_s == 0) & (w_raw == 0), 0.0, self.C_s_max)
            f_c, f_split = self.server(w_raw, C)
        return SlotDecision(
            f_d=cand["f_d"][rows, idx].copy(),
            R=cand["R"][rows, idx].copy(),
            beta=self.betas[rows, idx].copy(),
            f_split=f_split,
            f_c=f_c,
            beta_index=idx,
        )

    def chosen(self, decision: SlotDecision) -> tuple[NDArray, NDArray, NDArray]:
        """(d_t, payload bits, G) of the chosen betas."""
        rows = np.arange(len(self.devs))
        idx = decision.beta_index
        return self.d_t[rows, idx], self.bits[rows, idx], self.G[rows, idx]


def per_slot_decision(q: VirtualQueues, channel, sols: Sequence, devs: Sequence[DeviceConfig],
                      srv: ServerConfig, ctrl: ControlParams) -> SlotDecision:
    """Solve the per-slot drift-plus-penalty problem.

    `sols` holds a `GibSolution` or a precomputed `DeviceProfile` per device.
    The server split is solved first on the worst-case workload of each
    beta grid, which makes it independent of the chosen betas; each device
    then picks the beta (smallest on ties) whose closed-form rate and clock
    minimize its share of the objective, server delay included.
    """
    return SlotSolver(_as_profiles(sols, devs), devs, srv, ctrl).decide(q, channel)


def slot_objective(decision: SlotDecision, q: VirtualQueues, channel, sols: Sequence,
                   devs: Sequence[DeviceConfig], srv: ServerConfig, ctrl: ControlParams) -> float:
    """Per-slot drift-plus-penalty objective of `decision`, with unfloored queue weights."""
    solver = SlotSolver(_as_profiles(sols, devs), devs, srv, ctrl)
    d_t, bits, G = solver.chosen(decision)
    m = evaluate_slot(devs, srv, channel, d_t, bits, G, decision.f_d, decision.R, decision.f_split, decision.f_c)
    return float(np.sum(_weighted(solver.eps * q.Z, m.L_tot) + solver.nu * q.S * G) + ctrl.V * m.p_tot)
