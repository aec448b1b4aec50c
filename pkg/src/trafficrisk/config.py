"""Model configuration: metric weights, positional weights, engine knobs.

A full model is named by a two-character id like ``2a``: positional-weight
configuration (1-3) followed by the metric-combination configuration (a-g).
Configurations a-e combine category values with fixed weights; f and g score
vehicles with an autoencoder (linear and squashed output variants).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from enum import Enum
from pathlib import Path


class AeVariant(Enum):
    LINEAR = "Linear"
    TANH = "Tanh"


@dataclass(frozen=True, slots=True)
class SsmWeights:
    """Per-metric weights (configs a-e) or autoencoder variant (f-g)."""

    config_id: str
    w_pet: float = 0.0
    w_drac: float = 0.0
    w_ittc: float = 0.0
    ae_variant: AeVariant | None = None

    def __post_init__(self):
        if self.ae_variant is None:
            total = self.w_pet + self.w_drac + self.w_ittc
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"grid weights must sum to 1, got {total}")
        elif self.w_pet or self.w_drac or self.w_ittc:
            raise ValueError("autoencoder configs take no grid weights")

    @property
    def uses_ae(self) -> bool:
        return self.ae_variant is not None

    @property
    def evaluates_parallel(self) -> bool:
        """Single-metric configs without the PET column cannot score PL/PF."""
        return self.uses_ae or self.w_pet > 0.0


SSM_CONFIGS: dict[str, SsmWeights] = {
    "a": SsmWeights("a", 1 / 3, 1 / 3, 1 / 3),
    "b": SsmWeights("b", 2 / 3, 1 / 6, 1 / 6),
    "c": SsmWeights("c", 1.0, 0.0, 0.0),
    "d": SsmWeights("d", 0.0, 1.0, 0.0),
    "e": SsmWeights("e", 0.0, 0.0, 1.0),
    "f": SsmWeights("f", ae_variant=AeVariant.LINEAR),
    "g": SsmWeights("g", ae_variant=AeVariant.TANH),
}


@dataclass(frozen=True, slots=True)
class PositionalWeights:
    """Contribution of each neighbor position to the ego's overall risk."""

    config_id: str
    w_lv: float
    w_fv: float
    w_pl: float
    w_pf: float

    def as_array(self):
        import numpy as np

        return np.array([self.w_lv, self.w_fv, self.w_pl, self.w_pf])


POSITIONAL_CONFIGS: dict[str, PositionalWeights] = {
    "1": PositionalWeights("1", 1.0, 1.0, 0.0, 0.0),
    "2": PositionalWeights("2", 1.0, 1.0, 1.0, 1.0),
    "3": PositionalWeights("3", 1.0, 1.0, 2.0, 2.0),
}


def parse_model_id(model_id: str) -> tuple[PositionalWeights, SsmWeights]:
    """Split a model id like '2a' into its two weight configurations."""
    model_id = model_id.strip().lower()
    if len(model_id) != 2 or model_id[0] not in POSITIONAL_CONFIGS or model_id[1] not in SSM_CONFIGS:
        raise ValueError(
            f"invalid model id {model_id!r}: expected <1-3><a-g>, e.g. '2a'"
        )
    return POSITIONAL_CONFIGS[model_id[0]], SSM_CONFIGS[model_id[1]]


@dataclass(frozen=True, slots=True)
class ModelConfig:
    """Every tunable of the pipeline, with defaults used throughout."""

    ssm_config: str = "a"
    positional_config: str = "2"
    # squashing scales mapping each metric into [0, 1)
    pet_scale: float = 1.0  # s
    drac_scale: float = 5.0  # m/s^2
    ittc_scale: float = 1.0  # 1/s
    # autoencoder training
    ae_epochs: int = 200
    ae_learning_rate: float = 0.01
    ae_batch_size: int = 32
    ae_seed: int = 7
    ae_max_samples: int = 100_000
    # neighbor geometry
    vy_min: float = 0.05  # m/s
    horizon: float = 10.0  # s
    eps_gap: float = 0.1  # m
    # evaluation
    min_series_seconds: float = 3.0
    min_overlap: int = 75
    max_lag_seconds: float = 2.0
    alpha: float = 0.05

    @property
    def ssm_weights(self) -> SsmWeights:
        return SSM_CONFIGS[self.ssm_config]

    @property
    def positional_weights(self) -> PositionalWeights:
        return POSITIONAL_CONFIGS[self.positional_config]

    def with_model(self, model_id: str) -> "ModelConfig":
        pos, ssm = parse_model_id(model_id)
        return replace(self, ssm_config=ssm.config_id, positional_config=pos.config_id)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_file(cls, path: str | Path) -> "ModelConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")
