"""Pipeline configuration: one JSON-serializable bag of tunables."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .diffusion import DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_TIMESTEPS
from .pathology import HYPOPLASIA_MAX_SHRINK, MICRO_MAX_SHRINK, VM_BUDGET, VM_CLEARANCE


@dataclass
class PipelineConfig:
    target_dims: tuple[int, int, int] = (160, 160, 160)
    crop_margin: int = 0
    clean_min_size: int = 20
    clean_connectivity: int = 26
    vm_budget: float = VM_BUDGET
    vm_clearance: float = VM_CLEARANCE
    hypoplasia_max_shrink: float = HYPOPLASIA_MAX_SHRINK
    hypoplasia_reading: str = "linear"
    micro_max_shrink: float = MICRO_MAX_SHRINK
    timesteps: int = DEFAULT_TIMESTEPS
    beta_start: float = DEFAULT_BETA_START
    beta_end: float = DEFAULT_BETA_END
    variance_mode: str = "stochastic"

    def __post_init__(self):
        self.target_dims = tuple(int(d) for d in self.target_dims)
        if len(self.target_dims) != 3 or any(d < 1 for d in self.target_dims):
            raise ValueError(f"target_dims must be three positive ints, got {self.target_dims}")
        if self.crop_margin < 0 or self.clean_min_size < 0:
            raise ValueError("crop_margin and clean_min_size must be >= 0")
        if self.clean_connectivity not in (6, 18, 26):
            raise ValueError("clean_connectivity must be 6, 18 or 26")
        if not 0.0 < self.vm_budget <= 1.0:
            raise ValueError("vm_budget must be in (0, 1]")
        if self.vm_clearance < 0:
            raise ValueError("vm_clearance must be >= 0")
        for name in ("hypoplasia_max_shrink", "micro_max_shrink"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {value}")
        if self.hypoplasia_reading not in ("linear", "volumetric"):
            raise ValueError("hypoplasia_reading must be 'linear' or 'volumetric'")
        if self.variance_mode not in ("stochastic", "zero"):
            raise ValueError("variance_mode must be 'stochastic' or 'zero'")
        if self.timesteps < 1:
            raise ValueError("timesteps must be >= 1")

    def to_dict(self) -> dict:
        payload = dataclasses.asdict(self)
        payload["target_dims"] = list(self.target_dims)
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)

    def synthesis_overrides(self) -> dict:
        return {
            "vm_budget": self.vm_budget,
            "vm_clearance": self.vm_clearance,
            "hypoplasia_max_shrink": self.hypoplasia_max_shrink,
            "hypoplasia_reading": self.hypoplasia_reading,
            "micro_max_shrink": self.micro_max_shrink,
        }


def load_config(path) -> PipelineConfig:
    return PipelineConfig.from_dict(json.loads(Path(path).read_text()))


def save_config(config: PipelineConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")
