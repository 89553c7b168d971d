"""
Run Configuration
Nested dataclasses loaded from config.json (or any JSON file with the same
schema). CLI flags override file values.

Schema (version 1):
    {
      "version": 1,
      "workspace": "data/workspace",
      "seed": 0,
      "deterministic": false,
      "style_profile": "cartoon",
      "generator": {...GeneratorConfig...},
      "dataset": {...DatasetConfig...},
      "training": {"base": {...}, "encoder": {...}, ..., "adapter_lab": {...}}
    }
"""

import hashlib
import json
import logging
import math
import random
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import torch

from .errors import ContractViolation, EnvironmentFailure, require

logger = logging.getLogger(__name__)

CONFIG_VERSION = 1
DEFAULT_CONFIG_PATH = Path(__file__).parent.parent / "config.json"


def _known(cls, data: Dict[str, Any]) -> Dict[str, Any]:
    """Keep the keys a dataclass declares, warning about the rest."""
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            logger.warning("Ignoring unknown %s key '%s'", cls.__name__, key)
            continue
        kwargs[key] = value
    return kwargs


def _build(cls, data: Optional[Dict[str, Any]]):
    """Instantiate a dataclass from a dict, warning about keys it does not know."""
    if data is None:
        return cls()
    return cls(**_known(cls, data))


@dataclass
class GeneratorConfig:
    """
    Shape of the base generator g.

    L = 2·(log2(R) − 1) style slots: the constant-input AdaIN plus one AdaIN per
    trunk conv. Trunk convs at resolutions ≤ R_s carry a ModRes unit each (n_s);
    the others carry a color block, plus one color block for ToRGB (n_c).
    """
    resolution: int = 32
    latent_dim: int = 64
    structure_cutoff: int = 8
    channel_base: int = 512
    channel_max: int = 128
    channel_min: int = 8
    mapping_layers: int = 3

    def __post_init__(self):
        require(self.resolution >= 8 and self.resolution & (self.resolution - 1) == 0,
                f"resolution must be a power of two ≥ 8, got {self.resolution}")
        require(4 <= self.structure_cutoff <= self.resolution
                and self.structure_cutoff & (self.structure_cutoff - 1) == 0,
                f"structure cutoff must be a power of two in [4, R], got {self.structure_cutoff}")
        require(self.latent_dim >= 1, "latent_dim must be positive")
        require(self.mapping_layers >= 1, "mapping_layers must be positive")

    @property
    def num_slots(self) -> int:
        return 2 * (int(math.log2(self.resolution)) - 1)

    @property
    def resolutions(self) -> List[int]:
        return [2 ** k for k in range(2, int(math.log2(self.resolution)) + 1)]

    def channels(self, res: int) -> int:
        return int(max(self.channel_min, min(self.channel_max, self.channel_base // res)))

    @property
    def trunk_convs(self) -> List[int]:
        """Resolution of every trunk conv, in order (one at 4×4, two per higher level)."""
        convs = [4]
        for res in self.resolutions[1:]:
            convs.extend([res, res])
        return convs

    @property
    def n_structure(self) -> int:
        return sum(1 for res in self.trunk_convs if res <= self.structure_cutoff)

    @property
    def n_color(self) -> int:
        return self.num_slots - self.n_structure


@dataclass
class StyleProfile:
    """Per-style defaults: weight preset, content-loss weights, budgets, refinement lrs."""
    name: str
    structure_weight: float
    # Anime-like profiles zero the first share of structure units.
    zero_fraction: float
    lambda_id: float
    lambda_reg: float
    stage3_iterations: int
    refine_lr_structure: float
    refine_lr_color: float


# Stage-III budgets keep the 1400 : 1000 : 2100 ratio around a desk cartoon run of 800.
STYLE_PROFILES: Dict[str, StyleProfile] = {
    "cartoon": StyleProfile("cartoon", 0.75, 0.0, 1.0, 0.015, 800, 0.005, 0.1),
    "caricature": StyleProfile("caricature", 1.0, 0.0, 4.0, 0.005, 571, 0.005, 0.01),
    "anime": StyleProfile("anime", 0.75, 4 / 7, 1.0, 0.02, 1200, 0.0005, 0.005),
    "custom": StyleProfile("custom", 0.75, 0.0, 1.0, 0.015, 800, 0.005, 0.1),
}


def get_profile(name: str) -> StyleProfile:
    if name not in STYLE_PROFILES:
        raise ContractViolation(
            f"unknown style profile '{name}', expected one of {sorted(STYLE_PROFILES)}")
    return STYLE_PROFILES[name]


REFERENCE_NUM_SLOTS = 18
REFERENCE_L_SCHEDULE: List[Tuple[int, int]] = [(7, 300), (6, 300), (5, 3000)]


def scale_l_schedule(num_slots: int, total_iterations: int,
                     reference_schedule: List[Tuple[int, int]] = REFERENCE_L_SCHEDULE
                     ) -> List[Tuple[int, int]]:
    """
    Map the 18-slot style-mixing schedule onto another slot count.

    l/18 is carried over to l/L and rounded down; entries that collapse onto the
    same l are merged so the schedule stays strictly decreasing. Iterations keep
    their original proportions.
    """
    reference_total = sum(it for _, it in reference_schedule)
    scaled: List[Tuple[int, int]] = []
    for l, iterations in reference_schedule:
        mapped = max(1, int(l * num_slots / REFERENCE_NUM_SLOTS))
        share = int(round(total_iterations * iterations / reference_total))
        if scaled and scaled[-1][0] == mapped:
            scaled[-1] = (mapped, scaled[-1][1] + share)
        else:
            scaled.append((mapped, share))
    drift = total_iterations - sum(it for _, it in scaled)
    scaled[-1] = (scaled[-1][0], scaled[-1][1] + drift)
    return scaled


@dataclass
class StageConfig:
    """Loss weights, budgets and optimizer settings for one fine-tuning stage."""
    stage: int = 2
    iterations: int = 700
    lambda_adv: float = 0.1
    lambda_perc: float = 0.5
    lambda_cx: float = 0.0
    lambda_fm: float = 0.0
    lambda_id: float = 0.0
    lambda_reg: float = 0.0
    l_schedule: List[List[int]] = field(default_factory=lambda: [[3, 100], [2, 600]])
    lr_extrinsic: float = 2e-3
    lr_discriminator: float = 1e-3
    batch_size: int = 8
    r1_gamma: float = 1.0
    perc_taps: Dict[str, float] = field(
        default_factory=lambda: {"level1": 1.0, "level2": 1.0, "level3": 1.0})
    encoded_probability: float = 0.5
    checkpoint_every: int = 100
    seed: int = 0

    def __post_init__(self):
        levels = [l for l, _ in self.l_schedule]
        require(all(a > b for a, b in zip(levels, levels[1:])),
                f"l schedule must be strictly decreasing, got {levels}")
        for name in ("lambda_adv", "lambda_perc", "lambda_cx", "lambda_fm",
                     "lambda_id", "lambda_reg"):
            require(getattr(self, name) >= 0, f"{name} must be ≥ 0")
        require(self.batch_size >= 1, "batch_size must be positive")

    @classmethod
    def stage2_defaults(cls, **overrides) -> "StageConfig":
        return cls(**overrides)

    @classmethod
    def stage3_defaults(cls, profile: StyleProfile, **overrides) -> "StageConfig":
        values = dict(stage=3, iterations=profile.stage3_iterations,
                      lambda_adv=1.0, lambda_perc=1.0, lambda_cx=0.25, lambda_fm=0.25,
                      lambda_id=profile.lambda_id, lambda_reg=profile.lambda_reg,
                      l_schedule=[], perc_taps={"level2": 0.5, "level3": 1.0})
        values.update(overrides)
        return cls(**values)


@dataclass
class DatasetConfig:
    n_identities: int = 1000
    n_styles: int = 200
    seed: int = 0


@dataclass
class BaseTrainingConfig:
    iterations: int = 2000
    batch_size: int = 16
    lr_generator: float = 2e-3
    lr_discriminator: float = 2e-3
    r1_gamma: float = 1.0
    checkpoint_every: int = 500


@dataclass
class EncoderTrainingConfig:
    steps: int = 5000
    batch_size: int = 16
    lr: float = 1e-3
    lambda_perc: float = 1.0
    lambda_row: float = 1.0
    lambda_id: float = 0.1


@dataclass
class EmbedderTrainingConfig:
    n_identities: int = 64
    samples_per_identity: int = 8
    steps: int = 400
    batch_size: int = 64
    lr: float = 2e-3
    embedding_dim: int = 32


@dataclass
class UncondConfig:
    iterations: int = 900
    batch_size: int = 8
    lr_generator: float = 1e-3
    lr_discriminator: float = 1e-3
    r1_gamma: float = 1.0
    checkpoint_every: int = 300


@dataclass
class DestylizeConfig:
    steps: int = 150
    lr: float = 0.05
    lambda_id: float = 0.1
    use_dispersion: bool = True


@dataclass
class RefineConfig:
    steps: int = 100
    lambda_cx: float = 0.25


@dataclass
class SamplerConfig:
    steps: int = 2000
    noise_batch: int = 16
    codes_per_step: int = 16
    hidden: int = 128
    noise_dim: int = 64
    lr: float = 1e-3
    min_codes: int = 10


@dataclass
class AdapterLabConfig:
    iterations: int = 900
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2])
    batch_size: int = 8
    lr: float = 1e-3
    eval_samples: int = 16
    r1_gamma: float = 1.0


def _stage3_overrides(data: Optional[Dict[str, Any]]) -> Optional[Dict[str, Any]]:
    """Filter and validate a training.stage3 section; values are applied per profile later."""
    if not data:
        return None
    overrides = _known(StageConfig, data)
    StageConfig.stage3_defaults(get_profile("custom"), **overrides)
    return overrides


@dataclass
class TrainingConfig:
    base: BaseTrainingConfig = field(default_factory=BaseTrainingConfig)
    encoder: EncoderTrainingConfig = field(default_factory=EncoderTrainingConfig)
    embedder: EmbedderTrainingConfig = field(default_factory=EmbedderTrainingConfig)
    uncond: UncondConfig = field(default_factory=UncondConfig)
    stage2: StageConfig = field(default_factory=StageConfig.stage2_defaults)
    # Stage-III overrides on top of the style profile's defaults
    stage3: Optional[Dict[str, Any]] = None
    destylize: DestylizeConfig = field(default_factory=DestylizeConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    adapter_lab: AdapterLabConfig = field(default_factory=AdapterLabConfig)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "TrainingConfig":
        data = data or {}
        stage3 = data.get("stage3")
        return cls(
            base=_build(BaseTrainingConfig, data.get("base")),
            encoder=_build(EncoderTrainingConfig, data.get("encoder")),
            embedder=_build(EmbedderTrainingConfig, data.get("embedder")),
            uncond=_build(UncondConfig, data.get("uncond")),
            stage2=_build(StageConfig, data.get("stage2")),
            stage3=_stage3_overrides(stage3),
            destylize=_build(DestylizeConfig, data.get("destylize")),
            refine=_build(RefineConfig, data.get("refine")),
            sampler=_build(SamplerConfig, data.get("sampler")),
            adapter_lab=_build(AdapterLabConfig, data.get("adapter_lab")),
        )


@dataclass
class RunConfig:
    """Everything needed to re-execute a command."""
    version: int = CONFIG_VERSION
    workspace: str = "data/workspace"
    seed: int = 0
    deterministic: bool = False
    style_profile: str = "cartoon"
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)

    @property
    def profile(self) -> StyleProfile:
        return get_profile(self.style_profile)

    @property
    def workspace_path(self) -> Path:
        return Path(self.workspace)

    def stage3_config(self) -> StageConfig:
        """Stage-III settings: the style profile's defaults with training.stage3 on top."""
        overrides = {"seed": self.seed}
        overrides.update(self.training.stage3 or {})
        return StageConfig.stage3_defaults(self.profile, **overrides)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        version = data.get("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ContractViolation(f"unsupported config version {version}")
        config = cls(
            version=version,
            workspace=data.get("workspace", cls.workspace),
            seed=int(data.get("seed", 0)),
            deterministic=bool(data.get("deterministic", False)),
            style_profile=data.get("style_profile", "cartoon"),
            generator=_build(GeneratorConfig, data.get("generator")),
            dataset=_build(DatasetConfig, data.get("dataset")),
            training=TrainingConfig.from_dict(data.get("training")),
        )
        get_profile(config.style_profile)
        return config

    @classmethod
    def load(cls, path: Optional[str] = None) -> "RunConfig":
        """Load from a JSON file; the repository config.json when path is None."""
        config_path = Path(path) if path else DEFAULT_CONFIG_PATH
        if not config_path.exists():
            if path:
                raise EnvironmentFailure(f"config file not found: {config_path}")
            logger.warning("No config.json found, using built-in defaults")
            return cls()
        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ContractViolation(f"config file {config_path} is not valid JSON: {e}")
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def save(self, path: Path):
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def seed_everything(seed: int, deterministic: bool = False):
    """Seed python, numpy and torch; optionally force deterministic kernels."""
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    if deterministic:
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)
