"""
Long training checks. Skipped unless pytest runs with --runslow.
Run with: pytest tests/test_acceptance.py --runslow

Most checks share one desk-scale workspace (R=32, built-in budgets) that is
trained once per module.
"""

import dataclasses
import json

import pytest
import torch

from conftest import tiny_run_dict
from src.codec import CheckpointReader
from src.config import EncoderTrainingConfig, RunConfig, SamplerConfig
from src.losses import code_dispersion, perceptual_per_sample
from src.models import WeightVector
from src.models.encoder import LatentEncoder
from src.pipeline import DualStylePipeline
from src.synth import hue_histogram_distance, load_images, measure_shape
from src.training import (destylize, load_records, sample_extrinsic, train_encoder,
                          train_sampler)

pytestmark = pytest.mark.slow

DESK_COMMANDS = ("dataset", "train-base", "train-encoder", "finetune-uncond", "destylize",
                 "pretrain", "finetune", "refine")
SMOKE_COMMANDS = [
    ("dataset", {}), ("train-base", {}), ("train-encoder", {}), ("finetune-uncond", {}),
    ("destylize", {}), ("pretrain", {}), ("finetune", {}), ("refine", {}),
    ("train-sampler", {}), ("transfer", {"content": "0", "exemplar": "1"}),
    ("sample", {"count": 4}), ("grid", {}), ("adapter-lab", {}),
]
EXEMPLARS = 20
TRIALS = 50


def _manifest(workspace, command):
    return json.loads((workspace / "manifests" / f"{command}.json").read_text())


@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    """Desk workspace after the full training chain; yields (pipeline, manifests)."""
    workspace = tmp_path_factory.mktemp("desk") / "workspace"
    pipeline = DualStylePipeline(RunConfig.from_dict({"workspace": str(workspace)}))
    manifests = {}
    for command in DESK_COMMANDS:
        assert pipeline.run_command(command) == 0, command
        manifests[command] = _manifest(workspace, command)
    return pipeline, manifests


# ==================== ENCODER ====================

def test_encoder_reconstructs_better_than_untrained(desk):
    pipeline, manifests = desk
    g, _, losses = pipeline.store.load_base()
    trained = pipeline.store.load_encoder()
    torch.manual_seed(pipeline.config.seed)
    untrained = LatentEncoder(g.config)

    z = g.sample_z(TRIALS, torch.Generator().manual_seed(99))
    with torch.no_grad():
        images = g(z)
        after = perceptual_per_sample(losses.extractor, g(trained(images)), images)
        before = perceptual_per_sample(losses.extractor, g(untrained(images)), images)
    assert (after < before).float().mean() >= 0.9

    metrics = manifests["train-encoder"]["metrics"]
    assert metrics["row_error_trained"] <= 0.5 * metrics["row_error_untrained"]


def test_encoder_loss_decreases(base, losses):
    torch.manual_seed(0)
    encoder = LatentEncoder(base.config, hidden=64)
    cfg = EncoderTrainingConfig(steps=150, batch_size=8, lr=1e-3, lambda_id=0.0)
    _, curve = train_encoder(encoder, base, losses, cfg, seed=0)
    head = sum(curve[:10]) / 10
    tail = sum(curve[-10:]) / 10
    assert tail < head


# ==================== DESTYLIZATION ====================

def test_dispersion_term_keeps_rows_together(desk):
    """Paired runs from the same start: the regularized code ends less dispersed."""
    pipeline, _ = desk
    g, _, losses = pipeline.store.load_base()
    encoder = pipeline.store.load_encoder()
    g_prime = pipeline.store.load_uncond()
    exemplars = load_images(pipeline.config.workspace_path, "style", EXEMPLARS)
    cfg = pipeline.config.training.destylize

    wins = 0
    for exemplar in exemplars:
        spread = {}
        for use_dispersion in (False, True):
            run = dataclasses.replace(cfg, use_dispersion=use_dispersion)
            result = destylize(exemplar, encoder, g, g_prime, losses, run)
            spread[use_dispersion] = code_dispersion(result.z_destylized[0]).item()
        wins += spread[True] < spread[False]
    assert wins >= 0.9 * EXEMPLARS


def test_encoded_start_beats_mean_code_start(desk):
    pipeline, _ = desk
    g, _, losses = pipeline.store.load_base()
    encoder = pipeline.store.load_encoder()
    g_prime = pipeline.store.load_uncond()
    exemplars = load_images(pipeline.config.workspace_path, "style", EXEMPLARS)
    cfg = pipeline.config.training.destylize
    with torch.no_grad():
        mean_code = encoder.encode(exemplars).mean(dim=0, keepdim=True)

    wins = 0
    for exemplar in exemplars:
        encoded = destylize(exemplar, encoder, g, g_prime, losses, cfg)
        averaged = destylize(exemplar, encoder, g, g_prime, losses, cfg, init=mean_code)
        wins += min(encoded.traces["stage2"]) < min(averaged.traces["stage2"])
    assert wins >= 0.8 * EXEMPLARS


# ==================== STAGES ====================

def test_stage2_halves_style_mix_gap(desk):
    _, manifests = desk
    metrics = manifests["pretrain"]["metrics"]
    assert metrics["style_mix_gap_final"] <= 0.5 * metrics["style_mix_gap_init"]


def test_stage3_acquires_style_and_keeps_identity(desk):
    _, manifests = desk
    metrics = manifests["finetune"]["metrics"]
    assert metrics["contextual_after"] < metrics["contextual_before"]
    assert metrics["identity_after"] < 0.5


def test_color_and_structure_rows_are_disentangled(desk):
    """w_c = 0 keeps the content's hues; w_s = 0 keeps the content's eyes."""
    pipeline, _ = desk
    g, _, _ = pipeline.store.load_base()
    G, _ = pipeline.store.load_stage("stage3", g)
    encoder = pipeline.store.load_encoder()
    contents = load_images(pipeline.config.workspace_path, "source", TRIALS)
    records = load_records(pipeline.config.workspace_path, TRIALS)
    n_s, n_c = G.n_structure, G.num_slots - G.n_structure
    keep_color = WeightVector(torch.tensor([1.0] * n_s + [0.0] * n_c), n_s)
    keep_structure = WeightVector(torch.tensor([0.0] * n_s + [1.0] * n_c), n_s)

    hue_wins = shape_wins = 0
    with torch.no_grad():
        for i in range(TRIALS):
            content = contents[i % len(contents)]
            record = records[i % len(records)]
            z_i = encoder.encode(content.unsqueeze(0))
            z_e = record.z_extrinsic.unsqueeze(0)

            out = G(z_i, z_e, keep_color)[0]
            hue_wins += (hue_histogram_distance(out, content)
                         < hue_histogram_distance(out, record.image))

            out = G(z_i, z_e, keep_structure)[0]
            shapes = [measure_shape(x) for x in (out, content, record.image)]
            if all(s.measurable for s in shapes):
                shape_wins += (abs(shapes[0].eye_area - shapes[1].eye_area)
                               < abs(shapes[0].eye_area - shapes[2].eye_area))
    assert hue_wins >= 0.8 * TRIALS
    assert shape_wins >= 0.8 * TRIALS


def test_resblock_adapter_tracks_finetuning_best(desk):
    pipeline, _ = desk
    assert pipeline.run_command("adapter-lab") == 0
    metrics = _manifest(pipeline.config.workspace_path, "adapter-lab")["metrics"]
    assert metrics["resblock_wins"] >= 2
    assert metrics["verdict"] is True


# ==================== CODEBOOK ====================

def test_refinement_improves_every_record(desk):
    pipeline, manifests = desk
    metrics = manifests["refine"]["metrics"]
    assert metrics["improved_loss"] == metrics["records"]
    assert metrics["improved_color"] >= 0.8 * metrics["records"]
    assert all(r.z_refined is not None for r in load_records(pipeline.config.workspace_path))


def test_sampler_matches_code_moments(tiny_config):
    """Each network's per-dimension sample mean sits within half a code std of the data."""
    rng = torch.Generator().manual_seed(0)
    offset = torch.randn(1, tiny_config.num_slots, tiny_config.latent_dim, generator=rng)
    codes = offset + 0.5 * torch.randn(40, tiny_config.num_slots, tiny_config.latent_dim,
                                       generator=rng)
    cfg = SamplerConfig(steps=1500, noise_batch=16, codes_per_step=16, hidden=64,
                        noise_dim=16, lr=1e-3, min_codes=10)
    sampler = train_sampler(codes, tiny_config, cfg, seed=0)
    drawn = sample_extrinsic(sampler, 0, 1000)
    gap = (drawn.mean(dim=0) - codes.mean(dim=0)).abs() / codes.std(dim=0, unbiased=False)

    n_s = tiny_config.n_structure
    for rows in (gap[:n_s], gap[n_s:]):
        assert (rows < 0.5).float().mean() >= 0.95


# ==================== DETERMINISM ====================

def test_base_training_is_repeatable(tmp_path):
    stores = []
    for name in ("a", "b"):
        data = tiny_run_dict(tmp_path / name)
        data["training"]["base"]["iterations"] = 20
        pipeline = DualStylePipeline(RunConfig.from_dict(data))
        assert pipeline.run_command("dataset") == 0
        assert pipeline.run_command("train-base") == 0
        stores.append(CheckpointReader(pipeline.store.path("base")).store())
    assert stores[0] == stores[1]


def test_smoke_run_is_bit_identical(tmp_path):
    """Two deterministic runs of every command write identical artifacts."""
    runs = []
    for name in ("a", "b"):
        data = tiny_run_dict(tmp_path / name)
        data["deterministic"] = True
        pipeline = DualStylePipeline(RunConfig.from_dict(data))
        for command, options in SMOKE_COMMANDS:
            assert pipeline.run_command(command, **options) == 0, command
        runs.append(pipeline)

    first, second = (p.config.workspace_path for p in runs)
    for name in ("base", "encoder", "uncond", "stage2", "stage3", "sampler"):
        assert (CheckpointReader(runs[0].store.path(name)).store()
                == CheckpointReader(runs[1].store.path(name)).store()), name

    pictures = sorted(p.relative_to(first) for p in first.glob("**/*.png"))
    assert pictures == sorted(p.relative_to(second) for p in second.glob("**/*.png"))
    for picture in pictures:
        assert (first / picture).read_bytes() == (second / picture).read_bytes(), picture

    records = load_records(first), load_records(second)
    assert len(records[0]) == len(records[1])
    for a, b in zip(*records):
        for field in ("image", "z_extrinsic", "z_destylized", "z_intrinsic", "z_refined"):
            assert torch.equal(getattr(a, field), getattr(b, field)), field
    assert ((first / "reports" / "adapter_lab.txt").read_text()
            == (second / "reports" / "adapter_lab.txt").read_text())
