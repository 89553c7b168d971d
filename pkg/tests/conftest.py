"""
Shared fixtures: a tiny R=16 generator stack with fixed seeds, and a RunConfig
small enough to push every command through in seconds.
"""

import sys
from pathlib import Path

import pytest
import torch

# Add parent to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import GeneratorConfig, RunConfig
from src.losses.extractor import FeatureExtractor, IdentityEmbedder
from src.losses.objectives import LossSuite
from src.models.encoder import LatentEncoder
from src.models.extrinsic import DualStyleGenerator
from src.models.synthesis import BaseGenerator, Discriminator

# R=16 gives L=6 with n_s=3 structure and n_c=3 color units
TINY_GENERATOR = {
    "resolution": 16,
    "latent_dim": 16,
    "structure_cutoff": 8,
    "channel_base": 128,
    "channel_max": 32,
    "channel_min": 8,
    "mapping_layers": 2,
}


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="also run the long training checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long training check, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def tiny_config() -> GeneratorConfig:
    return GeneratorConfig(**TINY_GENERATOR)


@pytest.fixture
def base(tiny_config) -> BaseGenerator:
    torch.manual_seed(0)
    g = BaseGenerator(tiny_config)
    g.requires_grad_(False)
    return g


@pytest.fixture
def discriminator(tiny_config) -> Discriminator:
    torch.manual_seed(1)
    return Discriminator(tiny_config)


@pytest.fixture
def dual(base) -> DualStyleGenerator:
    torch.manual_seed(2)
    return DualStyleGenerator(base)


@pytest.fixture
def losses() -> LossSuite:
    torch.manual_seed(3)
    return LossSuite(FeatureExtractor(seed=0), IdentityEmbedder(32), allow_untrained_embedder=True)


@pytest.fixture
def encoder(tiny_config) -> LatentEncoder:
    """Randomly initialized encoder marked as trained."""
    torch.manual_seed(4)
    model = LatentEncoder(tiny_config, hidden=64)
    model.mark_trained()
    model.requires_grad_(False)
    return model


@pytest.fixture
def images():
    """Four deterministic images in [-1, 1] at R=16."""
    rng = torch.Generator().manual_seed(5)
    return torch.rand(4, 3, 16, 16, generator=rng) * 2 - 1


def tiny_run_dict(workspace: Path) -> dict:
    """Every budget cut down to a handful of steps."""
    return {
        "version": 1,
        "workspace": str(workspace),
        "seed": 0,
        "deterministic": False,
        "style_profile": "cartoon",
        "generator": dict(TINY_GENERATOR),
        "dataset": {"n_identities": 12, "n_styles": 12, "seed": 0},
        "training": {
            "base": {"iterations": 2, "batch_size": 4, "checkpoint_every": 1},
            "encoder": {"steps": 2, "batch_size": 4},
            "embedder": {"n_identities": 2, "samples_per_identity": 2, "steps": 2,
                         "batch_size": 4},
            "uncond": {"iterations": 2, "batch_size": 4, "checkpoint_every": 1},
            "stage2": {"iterations": 4, "l_schedule": [[3, 2], [2, 2]], "batch_size": 2,
                       "checkpoint_every": 2},
            "stage3": {"stage": 3, "iterations": 2, "lambda_adv": 1.0, "lambda_perc": 1.0,
                       "lambda_cx": 0.25, "lambda_fm": 0.25, "lambda_id": 1.0,
                       "lambda_reg": 0.015, "l_schedule": [],
                       "perc_taps": {"level2": 0.5, "level3": 1.0}, "batch_size": 2},
            "destylize": {"steps": 2},
            "refine": {"steps": 2},
            "sampler": {"steps": 2, "noise_batch": 4, "codes_per_step": 4, "hidden": 16,
                        "noise_dim": 8, "min_codes": 4},
            "adapter_lab": {"iterations": 1, "seeds": [0], "batch_size": 2, "eval_samples": 4},
        },
    }


@pytest.fixture
def run_config(tmp_path) -> RunConfig:
    return RunConfig.from_dict(tiny_run_dict(tmp_path / "workspace"))
