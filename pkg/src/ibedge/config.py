"""JSON configuration schema.

Every block rejects unknown keys. Device, server and channel blocks use the
same field names as the corresponding dataclasses.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .gaussian_ib import GaussianSource, make_synthetic_source
from .scheduler import ControlParams
from .simulator import Scenario
from .system_models import ChannelModel, DeviceConfig, ServerConfig

__all__ = ["ConfigError", "ConfigFile", "load_config", "parse_config"]

Pos = Annotated[float, Field(gt=0)]


class ConfigError(ValueError):
    """Configuration failed schema or invariant validation."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SyntheticSourceSpec(_Strict):
    d_x: Annotated[int, Field(ge=1)] = 750
    d_y: Annotated[int, Field(ge=1)] = 8
    snr: Pos = 0.05
    seed: int = 0

    @model_validator(mode="after")
    def _dims(self):
        if self.d_y > self.d_x:
            raise ValueError(f"d_y={self.d_y} must not exceed d_x={self.d_x}")
        return self


class CovarianceSpec(_Strict):
    C_X: list[list[float]]
    C_Y: list[list[float]]
    C_XY: list[list[float]]


class SourceSpec(_Strict):
    synthetic: Optional[SyntheticSourceSpec] = None
    covariance: Optional[CovarianceSpec] = None

    @model_validator(mode="after")
    def _one_of(self):
        if (self.synthetic is None) == (self.covariance is None):
            raise ValueError("source needs exactly one of 'synthetic' or 'covariance'")
        return self

    def build(self) -> GaussianSource:
        if self.synthetic is not None:
            s = self.synthetic
            return make_synthetic_source(s.d_x, s.d_y, s.snr, s.seed)
        c = self.covariance
        return GaussianSource(np.array(c.C_X), np.array(c.C_Y), np.array(c.C_XY))


class DeviceSpec(_Strict):
    id: Optional[int] = None
    eta_d: Optional[Pos] = None
    f_d_max: Optional[Pos] = None
    bandwidth: Optional[Pos] = None
    noise_psd: Optional[Pos] = None
    p_max: Optional[Pos] = None
    distance: Optional[Pos] = None
    beta_grid: Optional[list[Pos]] = None
    L_avg: Optional[Pos] = None
    G_avg: Optional[Annotated[float, Field(gt=0, le=1)]] = None
    eps_step: Optional[Pos] = None
    nu_step: Optional[Pos] = None
    C_d_per_dt: Optional[Pos] = None
    C_s_per_dt: Optional[Pos] = None
    ceil_bits: Optional[bool] = None

    def values(self) -> dict:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class ServerSpec(_Strict):
    eta_s: Pos = ServerConfig.eta_s
    f_max: Pos = ServerConfig.f_max


class ChannelSpec(_Strict):
    carrier_hz: Pos = ChannelModel.carrier_hz
    abg_alpha: Pos = ChannelModel.abg_alpha
    abg_beta_db: float = ChannelModel.abg_beta_db
    abg_gamma: float = ChannelModel.abg_gamma
    fading: bool = ChannelModel.fading
    seed: int = ChannelModel.seed


class ControlSpec(_Strict):
    V: Annotated[float, Field(ge=0)] = ControlParams.V
    latency_weight_floor: Annotated[float, Field(ge=0)] = ControlParams.latency_weight_floor
    server_reactive: bool = ControlParams.server_reactive


class ScenarioSpec(_Strict):
    horizon: Annotated[int, Field(ge=1)] = 1000
    seed: int = 0
    burn_in: Annotated[int, Field(ge=0)] = 0
    control: ControlSpec = ControlSpec()
    server: ServerSpec = ServerSpec()
    channel: ChannelSpec = ChannelSpec()
    source: Optional[SourceSpec] = None
    sources: Optional[list[SourceSpec]] = None
    device_defaults: DeviceSpec = DeviceSpec()
    devices: Optional[list[DeviceSpec]] = None
    num_devices: Optional[Annotated[int, Field(ge=1)]] = None
    distance_range: Optional[tuple[Pos, Pos]] = None

    @model_validator(mode="after")
    def _shape(self):
        if (self.source is None) == (self.sources is None):
            raise ValueError("scenario needs exactly one of 'source' or 'sources'")
        if self.devices is None and self.num_devices is None:
            raise ValueError("scenario needs 'devices' or 'num_devices'")
        if self.devices is not None and self.num_devices is not None and len(self.devices) != self.num_devices:
            raise ValueError("'num_devices' disagrees with the length of 'devices'")
        n = len(self.devices) if self.devices is not None else self.num_devices
        if self.sources is not None and len(self.sources) != n:
            raise ValueError(f"'sources' has {len(self.sources)} entries for {n} devices")
        if self.burn_in >= self.horizon:
            raise ValueError("burn_in must be smaller than horizon")
        return self


class SweepSpec(_Strict):
    V: Optional[list[Annotated[float, Field(ge=0)]]] = None
    G_avg: Optional[list[Annotated[float, Field(gt=0, le=1)]]] = None
    L_avg: Optional[list[Pos]] = None

    @model_validator(mode="after")
    def _nonempty(self):
        for key in ("V", "G_avg", "L_avg"):
            vals = getattr(self, key)
            if vals is not None and len(vals) == 0:
                raise ValueError(f"sweep axis '{key}' is empty")
        return self

    def grid(self) -> dict:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class CurveSpec(_Strict):
    betas: list[Pos]

    @model_validator(mode="after")
    def _grid(self):
        if not self.betas:
            raise ValueError("curve.betas is empty")
        if any(b2 <= b1 for b1, b2 in zip(self.betas, self.betas[1:])):
            raise ValueError("curve.betas must be strictly increasing")
        return self


class ConfigFile(_Strict):
    scenario: Optional[ScenarioSpec] = None
    source: Optional[SourceSpec] = None
    output: str = "out/ibedge"
    sweep: Optional[SweepSpec] = None
    curve: Optional[CurveSpec] = None

    def scenario_spec(self) -> ScenarioSpec:
        if self.scenario is None:
            raise ConfigError("config has no 'scenario' block")
        return self.scenario

    def curve_source(self) -> GaussianSource:
        if self.source is not None:
            return self.source.build()
        if self.scenario is not None:
            spec = self.scenario.source or self.scenario.sources[0]
            return spec.build()
        raise ConfigError("config has no 'source' block (top level or inside 'scenario')")

    def build_scenario(self, seed: int | None = None, horizon: int | None = None,
                       record_slots: bool = False) -> Scenario:
        spec = self.scenario_spec()
        if horizon is not None and horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {horizon}")
        if spec.sources is not None:
            sources = tuple(s.build() for s in spec.sources)
            first = sources[0]
        else:
            sources = spec.source.build()
            first = sources
        base = {"C_d_per_dt": float(first.d_x), "C_s_per_dt": float(first.d_y)}
        base.update(spec.device_defaults.values())
        if spec.devices is not None:
            entries = [d.values() for d in spec.devices]
        else:
            lo, hi = spec.distance_range or (5.0, 150.0)
            n = spec.num_devices
            dists = np.linspace(lo, hi, n) if n > 1 else np.array([lo])
            entries = [{"distance": float(d)} for d in dists]
        devices = []
        for k, entry in enumerate(entries):
            fields = {**base, "id": k, **entry}
            if isinstance(sources, tuple) and "C_d_per_dt" not in entry:
                fields["C_d_per_dt"] = float(sources[k].d_x)
                fields["C_s_per_dt"] = float(sources[k].d_y)
            if "beta_grid" in fields:
                fields["beta_grid"] = tuple(fields["beta_grid"])
            try:
                devices.append(DeviceConfig(**fields))
            except ValueError as exc:
                raise ConfigError(f"scenario.devices[{k}]: {exc}") from exc
        return Scenario(
            devices=tuple(devices),
            server=ServerConfig(**spec.server.model_dump()),
            channel=ChannelModel(**spec.channel.model_dump()),
            sources=sources,
            ctrl=ControlParams(**spec.control.model_dump()),
            horizon=horizon if horizon is not None else spec.horizon,
            seed=seed if seed is not None else spec.seed,
            burn_in=spec.burn_in,
            record_slots=record_slots,
        )


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_config(data: dict) -> ConfigFile:
    try:
        return ConfigFile.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path: str | Path) -> ConfigFile:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(data)
