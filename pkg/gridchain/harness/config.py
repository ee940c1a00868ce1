"""
Scenario Configuration
The JSON document a run is built from: scenario, chain shape, network
behaviour, prosumers, congestion events and VPP service requests
"""

import logging
from pathlib import Path
from typing import Any, Literal

import orjson
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from gridchain.agents.dso_agent import CongestionSignal
from gridchain.agents.prosumer_agent import ProsumerConfig
from gridchain.agents.traces import TraceSeries, load_traces, synthesize_traces
from gridchain.contracts.models import ServiceSpec
from gridchain.errors import ConfigError, TraceFormatError
from gridchain.ledger.crypto import seed_from_label
from gridchain.oracle.baseline import CLEAN_DAYS
from gridchain.utils.config import get_settings

logger = logging.getLogger(__name__)

# Ticks between a request and the slot its outcome must be visible to prosumers,
# on a network without delay
MIN_LEAD_TICKS = 8


class NetworkConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    delay_ticks: int = Field(default=0, ge=0)
    jitter_ticks: int = Field(default=0, ge=0)
    drop_probability: float = Field(default=0.0, ge=0.0, lt=1.0)
    # Re-announce tips every N ticks; 0 disables
    heartbeat_ticks: int = Field(default=0, ge=0)

    @property
    def lead_ticks(self) -> int:
        # Each of the four hops of request/answer/order/visibility may wait a full delay
        return MIN_LEAD_TICKS + 4 * (self.delay_ticks + self.jitter_ticks)


class VPPServiceRequest(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tick: int = Field(ge=0)
    window_start: int = Field(ge=0)
    service: ServiceSpec


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: Literal["dr", "p2p", "vpp", "all"]
    chain_id: str = "gridchain-sim"
    slots_per_day: int = Field(default=24, gt=0)
    days: int = Field(gt=0)
    validators: int = Field(default=4, ge=1)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    # CSV path, relative to the config file; synthesized from the seed when absent
    traces: Path | None = None
    prosumers: list[ProsumerConfig] = Field(min_length=1)
    congestion_events: list[CongestionSignal] = Field(default_factory=list)
    vpp_services: list[VPPServiceRequest] = Field(default_factory=list)
    baseline_days: int = Field(default=CLEAN_DAYS, ge=CLEAN_DAYS)
    drain_ticks: int = Field(default=8, ge=0)
    seed: int = Field(default_factory=lambda: get_settings().default_seed, ge=0)

    @property
    def slots(self) -> int:
        return self.days * self.slots_per_day

    @property
    def runs_dr(self) -> bool:
        return self.scenario in ("dr", "all")

    @property
    def runs_p2p(self) -> bool:
        return self.scenario in ("p2p", "all")

    @property
    def runs_vpp(self) -> bool:
        return self.scenario in ("vpp", "all")

    @property
    def baseline_tick(self) -> int:
        """Tick at which baselines are requested, or -1 when no scenario needs them"""
        if not (self.runs_dr or self.runs_vpp):
            return -1
        return self.baseline_days * self.slots_per_day

    @model_validator(mode="after")
    def _check(self) -> "ScenarioConfig":
        ids = [p.id for p in self.prosumers]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise ValueError(f"duplicate prosumer ids: {', '.join(duplicates)}")

        if (self.runs_dr or self.runs_vpp) and self.baseline_days >= self.days:
            raise ValueError(
                f"a {self.scenario} run needs more than {self.baseline_days} days of data"
            )

        lead = self.network.lead_ticks
        for event in self.congestion_events:
            if event.tick < self.baseline_tick:
                raise ValueError(
                    f"congestion event at tick {event.tick} precedes baselines at "
                    f"tick {self.baseline_tick}"
                )
            if event.window_start < event.tick + lead:
                raise ValueError(
                    f"congestion window at {event.window_start} needs {lead} ticks of lead "
                    f"after tick {event.tick}"
                )
            if event.window_end > self.slots:
                raise ValueError(f"congestion window ends after slot {self.slots}")

        for request in self.vpp_services:
            if request.tick <= self.baseline_tick:
                raise ValueError(
                    f"service {request.service.service_id} requested before baselines exist"
                )
            if request.window_start < request.tick + lead:
                raise ValueError(
                    f"service {request.service.service_id} window needs {lead} ticks of lead"
                )
            if request.window_start + request.service.dispatch_slots > self.slots:
                raise ValueError(f"service {request.service.service_id} runs past the last slot")
        return self

    @classmethod
    def load(cls, path: str | Path, seed: int | None = None) -> "ScenarioConfig":
        """Read and validate a config file; ``seed`` overrides the file's seed"""
        path = Path(path)
        try:
            data: dict[str, Any] = orjson.loads(path.read_bytes())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except orjson.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        if seed is not None:
            data["seed"] = seed
        if data.get("traces") is not None:
            data["traces"] = str((path.parent / data["traces"]).resolve())
        try:
            config = cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"invalid config {path}:\n{e}") from e
        logger.info(
            f"Loaded {config.scenario} scenario: {len(config.prosumers)} prosumers, "
            f"{config.days} days, {config.validators} validators"
        )
        return config

    def load_prosumer_traces(self) -> dict[str, TraceSeries]:
        ids = [p.id for p in self.prosumers]
        if self.traces is None:
            return synthesize_traces(ids, self.slots, self.slots_per_day, self.seed)
        traces = load_traces(self.traces)
        for prosumer_id in ids:
            series = traces.get(prosumer_id)
            if series is None:
                raise TraceFormatError(f"no traces for prosumer {prosumer_id}")
            if len(series) != self.slots:
                raise TraceFormatError(
                    f"prosumer {prosumer_id} has {len(series)} slots, expected {self.slots}"
                )
        return traces

    def resolved_prosumers(self) -> list[ProsumerConfig]:
        """Prosumer configs with traces attached and account seeds derived"""
        traces = self.load_prosumer_traces()
        resolved = []
        for prosumer in self.prosumers:
            series = traces[prosumer.id]
            seed = prosumer.account_seed or seed_from_label(f"prosumer:{prosumer.id}", self.seed).hex()
            data = prosumer.model_dump()
            data.update(
                account_seed=seed,
                consumption_trace=series.consumption_wh,
                generation_trace=series.generation_wh,
            )
            try:
                resolved.append(ProsumerConfig.model_validate(data))
            except ValidationError as e:
                raise ConfigError(f"invalid prosumer {prosumer.id}:\n{e}") from e
        return resolved


def scenario_schema() -> dict[str, Any]:
    return ScenarioConfig.model_json_schema()
