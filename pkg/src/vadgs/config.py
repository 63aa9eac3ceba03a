"""Pipeline configuration.

All thresholds the pipeline uses live here with their defaults. A config is
built from defaults, then a `.env` file / environment variables, then dotted
overrides coming from a scene manifest or the command line.
"""
import logging
import os
from typing import Any, Dict, Literal, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

logger = logging.getLogger(__name__)


class VoxelConfig(BaseModel):
    """Voxel visibility reasoning"""
    model_config = ConfigDict(extra="forbid")

    resolution: float = Field(0.3, gt=0)
    tau_rel: float = Field(0.1, ge=0)
    tau_frac: float = Field(0.3, gt=0, le=1)
    padding: int = Field(1, ge=0)  # cells added around the point-cloud bounds


class RenderConfig(BaseModel):
    """Forward splatting renderer"""
    model_config = ConfigDict(extra="forbid")

    tile_size: int = Field(16, ge=1)
    lowpass: float = Field(0.3, ge=0)
    min_transmittance: float = Field(1e-4, gt=0, lt=1)
    hard_depth_threshold: float = Field(0.5, gt=0, lt=1)
    cutoff_sigma: float = Field(3.0, gt=0)
    znear: float = Field(0.2, gt=0)  # primitives closer than this are culled
    frustum_margin: float = Field(1.3, ge=1)  # Jacobian x/z, y/z clamp in units of the half-FOV tangent


class LossWeights(BaseModel):
    """Weights of the four-term evaluation loss"""
    model_config = ConfigDict(extra="forbid")

    normal: float = Field(0.1, ge=0)
    hard: float = Field(0.05, ge=0)
    soft: float = Field(0.05, ge=0)
    ssim: float = Field(0.2, ge=0, le=1)


class SelectionConfig(BaseModel):
    """Supporting view subset sampling"""
    model_config = ConfigDict(extra="forbid")

    k: int = Field(4, ge=1)
    lam: float = Field(1.0, ge=0)
    epsilon: float = Field(0.0, ge=0)
    seed: int = 0
    strategy: Literal["diverse", "consecutive"] = "diverse"
    swap_refine: bool = True


class PatchMatchConfig(BaseModel):
    """Patch-match multi-view stereo"""
    model_config = ConfigDict(extra="forbid")

    window: int = 11
    window_step: int = Field(2, ge=1)  # sample every n-th pixel of the window (border kept); 1 is exact, 2 about 3x faster
    iterations: int = Field(8, ge=0)
    cost_max: float = Field(0.6, ge=0, le=2)
    geo_max_px: float = Field(1.0, ge=0)
    geo_max_rel: float = Field(0.02, ge=0)
    geo_max_deg: float = Field(10.0, ge=0)
    min_consistent: int = Field(2, ge=0)
    depth_range: Tuple[float, float] = (0.5, 80.0)
    perturbation: float = Field(0.5, gt=0)
    seed: int = 0

    @field_validator("window")
    @classmethod
    def _odd_window(cls, value: int) -> int:
        if value < 3 or value % 2 == 0:
            raise ValueError("window must be odd and at least 3")
        return value

    @field_validator("depth_range")
    @classmethod
    def _positive_range(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if not 0 < value[0] < value[1]:
            raise ValueError("depth_range must satisfy 0 < z_min < z_max")
        return value


class DensifyConfig(BaseModel):
    """Point spawning, primitive initialization and pipeline cadence"""
    model_config = ConfigDict(extra="forbid")

    stride: int = Field(2, ge=1)
    neighbor_k: int = Field(4, ge=1)
    opacity: float = Field(0.5, gt=0, le=1)
    scale_min: float = Field(0.01, gt=0)
    scale_max: float = Field(1.0, gt=0)
    init_scale_min: float = Field(0.005, gt=0)
    init_scale_max: float = Field(0.05, gt=0)
    init_opacity: float = Field(0.9, gt=0, le=1)
    redundancy_factor: float = Field(2.0, gt=1)
    redundancy_fraction: float = Field(0.5, gt=0, le=1)
    reference_views: int = Field(1, ge=1)
    repeats: int = Field(1, ge=1)
    holdout_every: int = Field(4, ge=0)  # 0 disables held-out frames

    @model_validator(mode="after")
    def _ordered_clamps(self) -> "DensifyConfig":
        if self.scale_min > self.scale_max or self.init_scale_min > self.init_scale_max:
            raise ValueError("scale clamps must satisfy min <= max")
        return self


class PipelineConfig(BaseModel):
    """Complete configuration of a densification run"""
    model_config = ConfigDict(extra="forbid")

    voxel: VoxelConfig = VoxelConfig()
    render: RenderConfig = RenderConfig()
    loss: LossWeights = LossWeights()
    selection: SelectionConfig = SelectionConfig()
    patchmatch: PatchMatchConfig = PatchMatchConfig()
    densify: DensifyConfig = DensifyConfig()
    seed: int = 0
    threads: Optional[int] = Field(None, ge=1)

    def with_overrides(self, overrides: Dict[str, Any]) -> "PipelineConfig":
        """Return a copy with dotted-key overrides applied (``patchmatch.iterations=4``)"""
        data = self.model_dump()
        for key, value in overrides.items():
            target = data
            parts = key.replace("-", "_").split(".")
            for part in parts[:-1]:
                if not isinstance(target.get(part), dict):
                    raise ConfigError(f"unknown config key '{key}'")
                target = target[part]
            if parts[-1] not in target:
                raise ConfigError(f"unknown config key '{key}'")
            if isinstance(target[parts[-1]], (list, tuple)) and isinstance(value, str):
                value = [float(v) for v in value.split(",")]
            target[parts[-1]] = value
        try:
            return PipelineConfig.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(str(exc)) from exc

    def flat_items(self) -> Dict[str, Any]:
        """Every config key in dotted form with its current value"""
        flat: Dict[str, Any] = {}
        for section, values in self.model_dump().items():
            if isinstance(values, dict):
                for key, value in values.items():
                    flat[f"{section}.{key}"] = value
            else:
                flat[section] = values
        return flat


SEEDED_SECTIONS = ("selection", "patchmatch")


def _with_section_seeds(overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Copy a top-level ``seed`` into every seeded section not set explicitly"""
    if "seed" not in overrides:
        return overrides
    overrides = dict(overrides)
    for section in SEEDED_SECTIONS:
        overrides.setdefault(f"{section}.seed", overrides["seed"])
    return overrides


def load_config(overrides: Optional[Dict[str, Any]] = None, env_file: Optional[str] = None) -> PipelineConfig:
    """Build the run configuration from defaults, environment and overrides.

    A top-level ``seed`` (from ``VADGS_SEED`` or an override) also seeds the
    selection and patch-match streams unless those are given their own.
    """
    load_dotenv(env_file)
    env_overrides: Dict[str, Any] = {}
    if os.environ.get("VADGS_SEED"):
        env_overrides["seed"] = int(os.environ["VADGS_SEED"])
    if os.environ.get("VADGS_THREADS"):
        env_overrides["threads"] = int(os.environ["VADGS_THREADS"])

    config = PipelineConfig().with_overrides(_with_section_seeds(env_overrides))
    if overrides:
        config = config.with_overrides(_with_section_seeds(overrides))
    logger.debug("Loaded configuration: %s", config.flat_items())
    return config
