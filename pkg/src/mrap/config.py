"""Run configuration for the command line, validated before any computation."""

from __future__ import annotations

import json
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from .dynamics import MIN_STEPS
from .protocols import ProtocolSpec

Complex = tuple[float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MeasureConfig(_Strict):
    operator: Literal["XX", "ZZ"] = "ZZ"
    register_state: str | list[Complex] = "00"
    targets: tuple[int, int] = (1, 2)
    outcome: Literal[1, -1] | None = None
    deterministic_return: bool = True
    sample: bool = False


class GHZConfig(_Strict):
    n_qubits: int = 4
    outcomes: list[Literal[1, -1]] | None = None
    sample: bool = False


class SweepConfig(_Strict):
    axis: str = "t_max"
    values: list[float] = Field(default_factory=list)
    workers: int = Field(1, ge=1)


class UnitsConfig(_Strict):
    omega_max_hz: float = 100e9
    gamma2_hz: float = 0.0
    t_tot_s: float = 2e-9
    omega_s_hz: float | None = None


class RunConfig(_Strict):
    n_bobs: int = 2
    cyclic: bool = False
    omega_s: float = 10.0
    width_s: float | None = None
    t_max: float = 200.0
    receivers: list[int] | None = None
    alice_active: bool = True
    qubit: tuple[Complex, Complex] = ((1.0, 0.0), (0.0, 0.0))
    direction: Literal["forward", "reverse"] = "forward"
    source: int | dict[str, Complex] | None = None
    gamma2: float = 0.0
    backend: Literal["ideal", "physical"] = "physical"
    steps: int = Field(2000, ge=MIN_STEPS)
    n_samples: int = Field(201, ge=10)
    seed: int = 0
    out: str | None = None
    measure: MeasureConfig = Field(default_factory=MeasureConfig)
    ghz: GHZConfig = Field(default_factory=GHZConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    units: UnitsConfig = Field(default_factory=UnitsConfig)

    def protocol_spec(self, **overrides) -> ProtocolSpec:
        doc = {
            "n_bobs": self.n_bobs,
            "cyclic": self.cyclic,
            "omega_s": self.omega_s,
            "t_max": self.t_max,
            "width_s": self.width_s,
            "receivers": self.receivers,
            "alice_active": self.alice_active,
            "qubit": [list(q) for q in self.qubit],
            "direction": self.direction,
            "source": self.source,
            "gamma2": self.gamma2,
            "n_steps": self.steps,
            "n_samples": self.n_samples,
        }
        doc.update(overrides)
        return ProtocolSpec.from_dict(doc)


def load_config(text: str | None) -> RunConfig:
    if text is None or not text.strip():
        return RunConfig()
    return RunConfig.model_validate_json(text)


def dump_config(cfg: RunConfig) -> str:
    """Canonical text: only the fields that were set, keys sorted."""
    return json.dumps(cfg.model_dump(mode="json", exclude_unset=True), sort_keys=True, indent=2)
