"""
Configuration models

Physical parameters, annealing schedules and whole-run configuration are
frozen pydantic models; field constraints carry the range invariants so an
instance that exists is an instance that is valid.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from cavity_spin.errors import InvalidInstanceError, InvalidParameterError

STABILITY_LIMIT = 0.1

Mode = Literal["xy", "ising"]
PumpStrategy = Literal["uniform", "compensated"]
Homogenization = Literal["dangling", "pump", "both", "none"]


class SimParams(BaseModel):
    """Rates in units of the spin-site nonlinear loss; times in its inverse."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    p: float = 14.0
    gamma: float = Field(4.0, gt=0)
    gamma_nl: float = Field(1.0, gt=0)
    gamma_nl_prime: float = Field(0.0, ge=0)
    j: float = Field(0.5, ge=0)
    dt: float = Field(0.005, gt=0)
    noise_amp: float = Field(1e-3, ge=0)
    duration: float = Field(1000.0, gt=0)

    @model_validator(mode="after")
    def _check_stability(self) -> SimParams:
        fastest = max(abs(self.p), self.gamma, 4.0 * self.j)
        if self.dt * fastest >= STABILITY_LIMIT:
            raise ValueError(
                f"dt={self.dt} too large: dt*max(p, gamma, 4j)={self.dt * fastest:.3g} "
                f"must stay below {STABILITY_LIMIT}"
            )
        return self

    @property
    def is_ising(self) -> bool:
        return self.gamma_nl_prime > 0

    def with_pump(self, p: float) -> SimParams:
        """Copy with a different base pump, re-validated."""
        return SimParams(**{**self.model_dump(), "p": p})


def check_physical(params: SimParams) -> None:
    """Re-check ranges for instances built without validation (model_construct)."""
    problems = []
    if not params.gamma > 0:
        problems.append(f"gamma={params.gamma} must be > 0")
    if not params.gamma_nl > 0:
        problems.append(f"gamma_nl={params.gamma_nl} must be > 0")
    if params.gamma_nl_prime < 0:
        problems.append(f"gamma_nl_prime={params.gamma_nl_prime} must be >= 0")
    if params.j < 0:
        problems.append(f"j={params.j} must be >= 0")
    if not params.dt > 0:
        problems.append(f"dt={params.dt} must be > 0")
    if not all(math.isfinite(v) for v in params.model_dump().values()):
        problems.append("parameters must be finite")
    if problems:
        raise InvalidParameterError("; ".join(problems))


class Schedule(BaseModel):
    """Feedback gain ramp mu(j) = mu0 + mu_slope * j and pulse layout."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mu0: float = Field(0.0, ge=0)
    mu_slope: Optional[float] = Field(None, ge=0)
    n_pulses: int = Field(100, ge=1)
    pulse_duration: float = Field(1000.0, gt=0)
    reset_noise_amp: Optional[float] = Field(None, ge=0)

    def mu(self, pulse_index: int) -> float:
        if self.mu_slope is None:
            raise InvalidParameterError("Schedule slope has not been resolved")
        return self.mu0 + self.mu_slope * pulse_index

    def resolved(self, mu_slope: float, reset_noise_amp: float) -> Schedule:
        """Fill unset fields, keeping any value the caller chose."""
        return self.model_copy(
            update={
                "mu_slope": self.mu_slope if self.mu_slope is not None else mu_slope,
                "reset_noise_amp": (
                    self.reset_noise_amp
                    if self.reset_noise_amp is not None
                    else reset_noise_amp
                ),
            }
        )


class GraphSource(BaseModel):
    """Either a graph file or the parameters of the random ensemble."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    file: Optional[Path] = None
    n_sites: Optional[int] = Field(None, ge=2)
    connectivity: float = Field(0.5, ge=0, le=1)
    fm_fraction: float = Field(0.5, ge=0, le=1)
    seed: int = 0

    @model_validator(mode="after")
    def _check_source(self) -> GraphSource:
        if (self.file is None) == (self.n_sites is None):
            raise ValueError("Give exactly one of 'file' or 'n_sites'")
        if self.file is not None and not self.file.exists():
            raise ValueError(f"Graph file {self.file} does not exist")
        return self


class RunConfig(BaseModel):
    """Everything a CLI command needs; loaded from JSON, overridden by flags."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Mode = "xy"
    graph: Optional[GraphSource] = None
    params: SimParams = SimParams()
    schedule: Schedule = Schedule()
    p_r: Optional[float] = None
    pump_strategy: Optional[PumpStrategy] = None
    homogenization: Homogenization = "pump"
    output_dir: Path = Path("runs")
    seed: int = 0
    sizes: List[int] = Field(default_factory=list)
    graphs_per_size: int = Field(30, ge=1)
    connectivity: float = Field(0.5, ge=0, le=1)
    fm_fraction: float = Field(0.5, ge=0, le=1)
    threads: Optional[int] = Field(None, ge=1)
    trajectory_stride: int = Field(0, ge=0)
    oracle_restarts: Optional[int] = Field(None, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _force_xy_loss(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("mode", "xy") == "xy":
            params = data.get("params", {})
            if isinstance(params, SimParams):
                params = params.model_dump()
            data = {**data, "params": {**params, "gamma_nl_prime": 0.0}}
        return data

    @model_validator(mode="after")
    def _check_mode(self) -> RunConfig:
        if self.mode == "ising" and not self.params.gamma_nl_prime > 0:
            raise ValueError("mode 'ising' requires params.gamma_nl_prime > 0")
        return self

    @property
    def extend_graph(self) -> bool:
        return self.homogenization in ("dangling", "both")

    @property
    def effective_pump_strategy(self) -> PumpStrategy:
        if self.pump_strategy is not None:
            return self.pump_strategy
        return "compensated" if self.homogenization in ("pump", "both") else "uniform"

    @property
    def readout_pump(self) -> float:
        return self.p_r if self.p_r is not None else self.params.p

    @classmethod
    def load(
        cls, path: Optional[Path], overrides: Optional[Dict[str, Any]] = None
    ) -> RunConfig:
        """Read a JSON config and apply flag overrides (flags win)."""
        data: Dict[str, Any] = {}
        if path is not None:
            try:
                with open(path, "r", encoding="utf-8") as f:
                    data = json.load(f)
            except FileNotFoundError as e:
                raise InvalidInstanceError(f"Config file {path} does not exist") from e
            except json.JSONDecodeError as e:
                raise InvalidInstanceError(f"Invalid JSON in {path}: {e}") from e
            if not isinstance(data, dict):
                raise InvalidInstanceError(f"Config {path} must hold a JSON object")

        for key, value in (overrides or {}).items():
            if value is None:
                continue
            if key == "pulses":
                data["schedule"] = {**data.get("schedule", {}), "n_pulses": value}
            elif key == "graph_file":
                data["graph"] = {"file": value}
            else:
                data[key] = value

        return cls.model_validate(data)
