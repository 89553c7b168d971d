"""
Tests for the training loops: latent optimization, destylization, encoder and
embedder training, progressive stages, the style codebook and the adapter lab.
Run with: pytest tests/test_training.py
"""

import pytest
import torch

from src.config import (AdapterLabConfig, BaseTrainingConfig, DestylizeConfig,
                        EmbedderTrainingConfig, EncoderTrainingConfig, RefineConfig,
                        SamplerConfig, StageConfig, UncondConfig, get_profile)
from src.errors import ContractViolation, NumericFailure, RefusalError
from src.models import BaseGenerator, Discriminator, LatentEncoder
from src.numerics import module_digest
from src.training import (STAGE2_MARKER, AdapterReport, LearningRateSchedule, StyleRecord,
                          destylize, destylize_all, ensure_finite, finetune_stage3,
                          finetune_unconditional, level_per_step, load_records, optimize_code,
                          pretrain_stage2, ramp_factor, refine_codes, run_adapter_experiment,
                          sample_extrinsic, save_records, train_base, train_embedder,
                          train_encoder, train_sampler)


def _z(batch: int, dim: int, seed: int) -> torch.Tensor:
    return torch.randn(batch, dim, generator=torch.Generator().manual_seed(seed))


def _records(count: int, seed: int = 0):
    generator = torch.Generator().manual_seed(seed)
    return [StyleRecord(index=i,
                        image=torch.rand(3, 16, 16, generator=generator) * 2 - 1,
                        z_extrinsic=torch.randn(6, 16, generator=generator),
                        z_destylized=torch.randn(6, 16, generator=generator),
                        z_intrinsic=torch.randn(6, 16, generator=generator))
            for i in range(count)]


def _perceptual_only(losses):
    return lambda rendered, target, code: {"perc": losses.perceptual(rendered, target)}


# ==================== HELPERS ====================

def test_ensure_finite_raises_with_diagnostics():
    with pytest.raises(NumericFailure) as info:
        ensure_finite(7, "stage2", {"perc": torch.tensor(float("nan"))}, "extrinsic")
    assert info.value.diagnostics["step"] == 7
    assert info.value.diagnostics["parameters"] == "extrinsic"
    assert info.value.exit_code == 3


def test_ramp_factor_bounds():
    values = [ramp_factor(step, 100) for step in range(101)]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert values[0] == 0.0 and values[-1] == 0.0
    assert max(values) == 1.0
    schedule = LearningRateSchedule(0.1)
    assert schedule.factor(0, 10) > 0 and schedule.factor(9, 10) > 0


# ==================== LATENT OPTIMIZATION ====================

def test_optimize_code_rejects_zero_steps(base, losses):
    target = base(_z(1, 16, 0))
    with pytest.raises(ContractViolation):
        optimize_code(target, base, base.extend(_z(1, 16, 1)), _perceptual_only(losses), 0,
                      LearningRateSchedule(0.05))


def test_optimize_code_keeps_best_code(base, losses):
    """best ≤ initial, monotone trace, and the model is never touched."""
    digest = module_digest(base)
    target = base(_z(1, 16, 2))
    init = base.extend(_z(1, 16, 3)).clone()
    for steps in (1, 5):
        result = optimize_code(target, base, init, _perceptual_only(losses), steps,
                               LearningRateSchedule(0.05))
        assert result.best_loss <= result.initial_loss
        assert len(result.trace) == steps + 1
        assert all(a >= b for a, b in zip(result.trace, result.trace[1:]))
        assert result.code.shape == init.shape
    assert module_digest(base) == digest
    assert all(p.grad is None for p in base.parameters())


def test_optimize_code_structure_rows_frozen_at_zero_lr(base, losses):
    target = base(_z(1, 16, 4))
    init = base.extend(_z(1, 16, 5)).clone()
    schedule = LearningRateSchedule(0.05, split=3, structure_lr=0.0)
    result = optimize_code(target, base, init, _perceptual_only(losses), 4, schedule)
    assert torch.equal(result.code[:, :3], init[:, :3])


def test_optimize_code_rejects_flat_codes(base, losses):
    with pytest.raises(ContractViolation):
        optimize_code(base(_z(1, 16, 0)), base, _z(1, 16, 1), _perceptual_only(losses), 2,
                      LearningRateSchedule(0.05))


# ==================== DESTYLIZATION ====================

def test_unconditional_finetune_without_iterations_is_a_copy(base, discriminator, images):
    g_prime, d_prime = finetune_unconditional(base, discriminator, images, UncondConfig(iterations=0))
    assert g_prime is not base and d_prime is not discriminator
    assert module_digest(g_prime) == module_digest(base)


def test_unconditional_finetune_leaves_inputs_untouched(base, discriminator, images):
    digests = module_digest(base), module_digest(discriminator)
    g_prime, _ = finetune_unconditional(base, discriminator, images,
                                        UncondConfig(iterations=2, batch_size=2))
    assert (module_digest(base), module_digest(discriminator)) == digests
    assert module_digest(g_prime) != digests[0]


def test_unconditional_finetune_checkpoints_the_copies(base, discriminator, images):
    saved = []

    def checkpoint(step, g_prime, d_prime):
        saved.append((step, module_digest(g_prime)))

    g_prime, d_prime = finetune_unconditional(
        base, discriminator, images, UncondConfig(iterations=4, batch_size=2, checkpoint_every=2),
        checkpoint=checkpoint)
    assert [step for step, _ in saved] == [2, 4]
    assert saved[-1][1] == module_digest(g_prime)
    assert saved[0][1] != module_digest(base)


def test_base_training_checkpoints_on_schedule(tiny_config, images):
    torch.manual_seed(0)
    g, D = BaseGenerator(tiny_config), Discriminator(tiny_config)
    steps = []
    trace = train_base(g, D, images, BaseTrainingConfig(iterations=3, batch_size=2,
                                                        checkpoint_every=1),
                       checkpoint=steps.append)
    assert len(trace) == 3
    assert steps == [1, 2, 3]


def test_destylize_outputs(base, encoder, losses, images):
    digests = module_digest(base), module_digest(encoder)
    result = destylize(images[0], encoder, base, base, losses, DestylizeConfig(steps=3))
    assert result.z_extrinsic.shape == (1, 6, 16)
    assert result.z_destylized.shape == (1, 6, 16)
    assert result.z_intrinsic.shape == (1, 6, 16)
    assert set(result.images) == {"exemplar", "stage1", "stage2", "stage3"}
    trace = result.traces["stage2"]
    assert len(trace) == 4
    assert all(a >= b for a, b in zip(trace, trace[1:]))
    assert (module_digest(base), module_digest(encoder)) == digests


def test_destylize_refuses_untrained_encoder(base, tiny_config, losses, images):
    untrained = LatentEncoder(tiny_config, hidden=32)
    with pytest.raises(RefusalError):
        destylize(images[0], untrained, base, base, losses, DestylizeConfig(steps=1))


def test_destylize_all_builds_records(base, encoder, losses, images, tmp_path):
    records = destylize_all(images[:2], encoder, base, base, losses, DestylizeConfig(steps=1))
    assert [r.index for r in records] == [0, 1]
    assert records[0].image.shape == (3, 16, 16)
    assert records[0].z_intrinsic.shape == (6, 16)
    save_records(tmp_path, records)
    loaded = load_records(tmp_path)
    assert torch.equal(loaded[1].z_extrinsic, records[1].z_extrinsic)
    assert loaded[0].extrinsic_code is loaded[0].z_extrinsic


def test_load_records_refuses_empty_workspace(tmp_path):
    with pytest.raises(RefusalError):
        load_records(tmp_path)


# ==================== ENCODER / EMBEDDER ====================

def test_encoder_training_without_steps_changes_nothing(base, tiny_config, losses):
    torch.manual_seed(0)
    encoder = LatentEncoder(tiny_config, hidden=32)
    digest = module_digest(encoder)
    encoder, curve = train_encoder(encoder, base, losses, EncoderTrainingConfig(steps=0))
    assert curve == []
    assert module_digest(encoder) == digest
    assert not bool(encoder.trained)


def test_encoder_training_marks_trained(base, tiny_config, losses):
    torch.manual_seed(0)
    encoder = LatentEncoder(tiny_config, hidden=32)
    digest = module_digest(base)
    encoder, curve = train_encoder(encoder, base, losses,
                                   EncoderTrainingConfig(steps=3, batch_size=2))
    assert len(curve) == 3
    assert bool(encoder.trained)
    assert module_digest(base) == digest


def test_embedder_training():
    cfg = EmbedderTrainingConfig(n_identities=2, samples_per_identity=2, steps=2, batch_size=4,
                                 embedding_dim=8)
    embedder = train_embedder(cfg, resolution=16, seed=0)
    assert bool(embedder.trained)
    out = embedder.embed(torch.zeros(1, 3, 16, 16))
    assert out.shape == (1, 8)
    with pytest.raises(ContractViolation):
        train_embedder(EmbedderTrainingConfig(n_identities=1), resolution=16)


# ==================== PROGRESSIVE STAGES ====================

def test_level_per_step():
    cfg = StageConfig(iterations=5, l_schedule=[[3, 2], [2, 3]])
    assert level_per_step(cfg, 6) == [3, 3, 2, 2, 2]
    scaled = level_per_step(StageConfig(iterations=20, l_schedule=[]), 18)
    assert len(scaled) == 20 and scaled[0] == 7 and scaled[-1] == 5


def test_pretrain_stage2_keeps_base_frozen(base, dual, discriminator, encoder, losses):
    digest = module_digest(base)
    cfg = StageConfig(iterations=3, l_schedule=[[4, 1], [3, 2]], batch_size=2,
                      checkpoint_every=0)
    trace = pretrain_stage2(dual, discriminator, cfg, encoder, losses)
    assert [record["l"] for record in trace] == [4.0, 3.0, 3.0]
    assert module_digest(base) == digest
    z_i, z_e = _z(3, 16, 6), _z(3, 16, 7)
    assert (dual(z_i, z_e, 0.0) - base(z_i)).abs().max() < 1e-5


def test_pretrain_stage2_checkpoints(dual, discriminator, encoder, losses, tmp_path):
    written = []
    cfg = StageConfig(iterations=4, l_schedule=[[3, 4]], batch_size=2, checkpoint_every=2)
    pretrain_stage2(dual, discriminator, cfg, encoder, losses,
                    checkpoint=lambda step: written.append(step) or tmp_path / f"{step}.pt")
    assert written == [2, 4]


def _stage3_config(**overrides) -> StageConfig:
    return StageConfig.stage3_defaults(get_profile("cartoon"), iterations=2, batch_size=2,
                                       **overrides)


def test_stage3_refusals(dual, discriminator, losses):
    with pytest.raises(RefusalError):
        finetune_stage3(dual, discriminator, _records(2), _stage3_config(), losses, markers=[])
    with pytest.raises(RefusalError):
        finetune_stage3(dual, discriminator, [], _stage3_config(), losses,
                        markers=[STAGE2_MARKER])


def test_stage3_trains_extrinsic_path_only(base, dual, discriminator, losses):
    digest = module_digest(base)
    before = module_digest(dual.extrinsic)
    trace = finetune_stage3(dual, discriminator, _records(3), _stage3_config(), losses,
                            markers=[STAGE2_MARKER])
    assert len(trace) == 2
    assert {"adv", "perc", "cx", "fm", "id", "reg", "d", "total"} <= set(trace[0])
    assert module_digest(base) == digest
    assert module_digest(dual.extrinsic) != before
    z_i, z_e = _z(2, 16, 8), _z(2, 16, 9)
    assert (dual(z_i, z_e, 0.0) - base(z_i)).abs().max() < 1e-5


# ==================== CODEBOOK ====================

def test_refine_codes_keeps_intrinsic_codes(dual, losses):
    records = _records(2, seed=1)
    refined, results = refine_codes(dual, records, RefineConfig(steps=2), get_profile("cartoon"),
                                    losses)
    for original, updated, result in zip(records, refined, results):
        assert torch.equal(updated.z_intrinsic, original.z_intrinsic)
        assert updated.z_refined is not None and updated.z_refined.shape == (6, 16)
        assert updated.extrinsic_code is updated.z_refined
        assert result.best_loss <= result.initial_loss
    with pytest.raises(RefusalError):
        refine_codes(dual, [], RefineConfig(), get_profile("cartoon"), losses)


def test_sampler_refuses_small_codebooks(tiny_config):
    with pytest.raises(RefusalError):
        train_sampler(torch.randn(3, 6, 16), tiny_config, SamplerConfig(min_codes=10))
    with pytest.raises(ContractViolation):
        train_sampler(torch.randn(12, 5, 16), tiny_config, SamplerConfig())


def test_sampler_is_seeded(tiny_config):
    cfg = SamplerConfig(steps=3, noise_batch=4, codes_per_step=4, hidden=16, noise_dim=8,
                        min_codes=4)
    sampler = train_sampler(torch.randn(6, 6, 16, generator=torch.Generator().manual_seed(0)),
                            tiny_config, cfg)
    a = sample_extrinsic(sampler, seed=5, batch=3)
    assert a.shape == (3, 6, 16)
    assert torch.equal(a, sample_extrinsic(sampler, seed=5, batch=3))
    assert not torch.equal(a, sample_extrinsic(sampler, seed=6, batch=3))


def test_sampler_collapses_onto_single_code(tiny_config):
    code = torch.randn(1, 6, 16, generator=torch.Generator().manual_seed(1))
    cfg = SamplerConfig(steps=200, noise_batch=4, codes_per_step=4, hidden=32, noise_dim=8,
                        lr=1e-2, min_codes=1)
    sampler = train_sampler(code, tiny_config, cfg)
    samples = sample_extrinsic(sampler, seed=0, batch=8)
    distance = (samples - code).flatten(1).norm(dim=1).mean()
    assert distance < code.norm()


def test_sampled_rows_mix_into_generator(dual, tiny_config):
    cfg = SamplerConfig(steps=2, noise_batch=2, codes_per_step=2, hidden=16, noise_dim=8,
                        min_codes=2)
    sampler = train_sampler(torch.randn(4, 6, 16), tiny_config, cfg)
    a, b = sample_extrinsic(sampler, 0, 2), sample_extrinsic(sampler, 1, 2)
    mixed = torch.cat([a[:, :3], b[:, 3:]], dim=1)
    assert dual(_z(2, 16, 0), mixed, 1.0).shape == (2, 3, 16, 16)


# ==================== ADAPTER LAB ====================

def test_adapter_report_verdict():
    report = AdapterReport(seeds=[0, 1, 2], parameter_counts={}, distances=[
        {"resblock": 0.1, "adain_channel": 0.2, "dat_spatial": 0.3},
        {"resblock": 0.1, "adain_channel": 0.05, "dat_spatial": 0.3},
        {"resblock": 0.1, "adain_channel": 0.2, "dat_spatial": 0.15},
    ])
    assert report.resblock_wins() == 2
    assert report.verdict
    report.distances[2]["dat_spatial"] = None
    assert report.resblock_wins() == 1
    assert not report.verdict
    assert "failed" in report.to_text()
    assert report.to_dict()["mean_distances"]["dat_spatial"] == pytest.approx(0.3)


def test_adapter_experiment_without_training(base, discriminator, images, losses):
    digest = module_digest(base)
    cfg = AdapterLabConfig(iterations=0, seeds=[0], batch_size=2, eval_samples=4)
    report = run_adapter_experiment(base, discriminator, images, cfg, losses.extractor)
    distances = report.distances[0]
    assert distances["resblock"] == 0.0
    assert all(value >= 0.0 for value in distances.values())
    assert report.panels.shape == (20, 3, 16, 16)
    assert module_digest(base) == digest
    assert set(report.parameter_counts) == {"resblock", "adain_channel", "dat_spatial"}
