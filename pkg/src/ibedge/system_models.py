"""Power, delay, channel and accuracy models for one edge-learning slot."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol, Sequence, runtime_checkable

import numpy as np
from numpy.typing import NDArray

from .gaussian_ib import GibSolution, compute_nmse, operating_point

LN2 = math.log(2.0)

# -174 dBm/Hz expressed in W/Hz
NOISE_PSD_W_HZ = 10 ** (-174 / 10) * 1e-3
# W s^3; the negative exponent is what gives watt-scale CPU power at GHz clocks
DEFAULT_ETA = 2.57e-27


class ChannelWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DeviceConfig:
    id: int = 0
    eta_d: float = DEFAULT_ETA
    f_d_max: float = 1.8e9
    bandwidth: float = 1e3
    noise_psd: float = NOISE_PSD_W_HZ
    p_max: float = 0.1
    distance: float = 50.0
    beta_grid: tuple[float, ...] = (1.1, 1.2, 1.3, 1.5, 2.0, 3.0, 5.0, 10.0)
    L_avg: float = 5e-3
    G_avg: float = 0.3
    eps_step: float = 1.0
    nu_step: float = 1.0
    C_d_per_dt: float = 750.0
    C_s_per_dt: float = 8.0
    ceil_bits: bool = False

    def __post_init__(self):
        object.__setattr__(self, "beta_grid", tuple(float(b) for b in self.beta_grid))
        for name in ("eta_d", "f_d_max", "bandwidth", "noise_psd", "p_max", "distance",
                     "L_avg", "eps_step", "nu_step", "C_d_per_dt", "C_s_per_dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"DeviceConfig.{name} must be > 0")
        if not self.beta_grid:
            raise ValueError("DeviceConfig.beta_grid must be nonempty")
        if any(b <= 0 for b in self.beta_grid) or any(
            b2 <= b1 for b1, b2 in zip(self.beta_grid, self.beta_grid[1:])
        ):
            raise ValueError("DeviceConfig.beta_grid must be positive and strictly ascending")
        if not 0 < self.G_avg <= 1:
            raise ValueError("DeviceConfig.G_avg must lie in (0, 1]")


@dataclass(frozen=True)
class ServerConfig:
    eta_s: float = DEFAULT_ETA
    f_max: float = 1.8e9

    def __post_init__(self):
        if not (self.eta_s > 0 and self.f_max > 0):
            raise ValueError("ServerConfig fields must be > 0")


@dataclass(frozen=True)
class ChannelModel:
    """Alpha-beta-gamma path loss with optional Rayleigh block fading.

    Defaults are the NLOS urban micro-cell fit (alpha=3.4, beta=19.2 dB,
    gamma=2.3).
    """

    carrier_hz: float = 1e9
    abg_alpha: float = 3.4
    abg_beta_db: float = 19.2
    abg_gamma: float = 2.3
    fading: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.carrier_hz > 0:
            raise ValueError("carrier_hz must be > 0")
        if not self.abg_alpha > 0:
            raise ValueError("abg_alpha must be > 0")

    def path_loss_db(self, distance) -> NDArray:
        d = np.asarray(distance, dtype=float)
        return (10 * self.abg_alpha * np.log10(d) + self.abg_beta_db
                + 10 * self.abg_gamma * np.log10(self.carrier_hz / 1e9))


@dataclass
class SlotMetrics:
    p_tx: NDArray
    p_dev: NDArray
    p_srv: float
    p_tot: float
    L_tot: NDArray
    L_parts: NDArray  # shape (K, 3): compute, transmit, server delay
    G: NDArray


# ---------------------------------------------------------------- power


def device_compute_power(eta_d: float, f):
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("CPU frequency must be nonnegative")
    p = eta_d * f**3
    return float(p) if p.ndim == 0 else p


def server_power(eta_s: float, f_c):
    return device_compute_power(eta_s, f_c)


def tx_power(B: float, N0: float, h, R):
    """Transmit power that sustains rate `R` over a channel of gain `h`."""
    h = np.asarray(h, dtype=float)
    R = np.asarray(R, dtype=float)
    if np.any(h <= 0):
        raise ValueError("channel gain must be positive")
    if np.any(R < 0):
        raise ValueError("rate must be nonnegative")
    p = (B * N0 / h) * np.expm1(R * LN2 / B)
    return float(p) if p.ndim == 0 else p


def rate_from_power(B: float, N0: float, h, p):
    r = B * np.log1p(np.asarray(h, dtype=float) * np.asarray(p, dtype=float) / (B * N0)) / LN2
    return float(r) if np.ndim(r) == 0 else r


def max_rate(B: float, N0: float, h, p_max: float):
    return rate_from_power(B, N0, h, p_max)


# ---------------------------------------------------------------- delay


def _ratio(work, resource):
    """work / resource with 0/x = 0 and x/0 = inf for x > 0."""
    work = np.asarray(work, dtype=float)
    resource = np.asarray(resource, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(work > 0, np.where(resource > 0, work / np.where(resource > 0, resource, 1.0), np.inf), 0.0)
    return out


def delays(dev: DeviceConfig, d_t, relevance_bits, f_d, R, f_k):
    """Compute, transmit and server delay plus their sum.

    A positive workload on a zero resource yields ``inf`` rather than raising.
    """
    d_t = np.asarray(d_t, dtype=float)
    L_p = _ratio(dev.C_d_per_dt * d_t, f_d)
    L_t = _ratio(relevance_bits, R)
    L_s = _ratio(dev.C_s_per_dt * d_t, f_k)
    L_tot = L_p + L_t + L_s
    if L_tot.ndim == 0:
        return float(L_p), float(L_t), float(L_s), float(L_tot)
    return L_p, L_t, L_s, L_tot


# ---------------------------------------------------------------- channel


def _fading_draws(model: ChannelModel, slot: int, n: int) -> NDArray:
    if not model.fading:
        return np.ones(n)
    rng = np.random.default_rng([model.seed, slot])
    return np.maximum(rng.standard_exponential(n), 1e-300)


def channel_gains(model: ChannelModel, distances, slot: int) -> NDArray:
    """Gains for devices ``0..K-1`` in `slot`; entry k equals ``channel_gain(..., device=k)``."""
    d = np.asarray(distances, dtype=float)
    if np.any(d < 1.0):
        warnings.warn("distance below 1 m clamped to 1 m", ChannelWarning, stacklevel=2)
        d = np.maximum(d, 1.0)
    g = _fading_draws(model, slot, d.size)
    h = 10 ** (-model.path_loss_db(d) / 10) * g
    return np.minimum(h, 1.0)


def channel_gain(model: ChannelModel, distance: float, slot: int, device: int) -> float:
    if distance < 1.0:
        warnings.warn(f"distance {distance} m clamped to 1 m", ChannelWarning, stacklevel=2)
        distance = 1.0
    g = _fading_draws(model, slot, device + 1)[device]
    h = 10 ** (-float(model.path_loss_db(distance)) / 10) * g
    return float(min(h, 1.0))


# ---------------------------------------------------------------- accuracy


@runtime_checkable
class AccuracyModel(Protocol):
    def nmse(self, beta: float) -> float: ...


@dataclass(frozen=True, eq=False)
class GaussianAccuracy:
    sol: GibSolution

    def nmse(self, beta: float) -> float:
        return compute_nmse(self.sol, beta)


@dataclass(frozen=True)
class TableAccuracy:
    """Accuracy looked up from a table, linearly interpolated in beta.

    Lets an empirically measured accuracy curve (e.g. from a split neural
    network) stand in for the Gaussian closed form.
    """

    betas: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.betas) != len(self.values) or not self.betas:
            raise ValueError("betas and values must be nonempty and of equal length")

    @classmethod
    def constant(cls, value: float) -> "TableAccuracy":
        return cls((1.0,), (value,))

    def nmse(self, beta: float) -> float:
        return float(np.interp(beta, self.betas, self.values))


def accuracy_metric(sol: GibSolution, beta: float) -> float:
    return GaussianAccuracy(sol).nmse(beta)


# ---------------------------------------------------------------- per-beta tables


@dataclass(frozen=True, eq=False)
class DeviceProfile:
    """Workloads and accuracy of every admissible beta for one device."""

    betas: NDArray
    d_t: NDArray
    bits: NDArray
    G: NDArray
    C_d: NDArray
    C_s: NDArray

    @property
    def C_s_max(self) -> float:
        return float(self.C_s.max())


def device_profile(dev: DeviceConfig, sol: GibSolution, accuracy: AccuracyModel | None = None) -> DeviceProfile:
    betas = np.asarray(dev.beta_grid, dtype=float)
    pts = [operating_point(sol, b) for b in betas]
    d_t = np.array([p.n_beta for p in pts], dtype=float)
    bits = np.array([p.relevance_bits for p in pts])
    if dev.ceil_bits:
        bits = np.ceil(bits - 1e-12)
    if accuracy is None:
        G = np.array([p.nmse for p in pts])
    else:
        G = np.array([accuracy.nmse(b) for b in betas])
    return DeviceProfile(
        betas=betas, d_t=d_t, bits=bits, G=G,
        C_d=dev.C_d_per_dt * d_t, C_s=dev.C_s_per_dt * d_t,
    )


def evaluate_slot(devs: Sequence[DeviceConfig], srv: ServerConfig, gains, d_t, bits, G,
                  f_d, R, f_split, f_c) -> SlotMetrics:
    """Realized powers, delays and accuracies of a slot decision."""
    B, N0, eta, C_d, C_s = _device_columns(tuple(devs))
    h = np.asarray(gains, dtype=float)
    d_t = np.asarray(d_t, dtype=float)
    p_tx = (B * N0 / h) * np.expm1(np.asarray(R, dtype=float) * LN2 / B)
    p_dev = eta * np.asarray(f_d, dtype=float) ** 3
    parts = np.stack([_ratio(C_d * d_t, f_d), _ratio(bits, R), _ratio(C_s * d_t, f_split)], axis=1)
    p_srv = server_power(srv.eta_s, f_c)
    p_tot = float(np.sum(p_tx + p_dev) + p_srv)
    return SlotMetrics(
        p_tx=p_tx, p_dev=p_dev, p_srv=p_srv, p_tot=p_tot,
        L_tot=parts[:, 0] + parts[:, 1] + parts[:, 2], L_parts=parts,
        G=np.array(G, dtype=float),
    )


@lru_cache(maxsize=64)
def _device_columns(devs: tuple[DeviceConfig, ...]):
    cols = np.array([[d.bandwidth, d.noise_psd, d.eta_d, d.C_d_per_dt, d.C_s_per_dt] for d in devs])
    return tuple(cols.T.copy())
