"""
Training Module - Base/unconditional training, encoder and embedder training,
destylization, progressive stages, codebook refinement and the adapter lab
"""

from .common import ensure_finite, train_adversarial, ramp_factor
from .base import train_base, finetune_unconditional
from .embedder_training import train_embedder, mild_style
from .encoder_training import train_encoder, row_error
from .records import StyleRecord, save_records, load_records
from .destylize import (
    LearningRateSchedule, OptimizationResult, DestylizeResult,
    optimize_code, destylize, destylize_all, destylization_loss
)
from .progressive import (
    init_stage1, pretrain_stage2, finetune_stage3, level_per_step,
    style_mix_gap, style_gap, STAGE2_MARKER, STAGE3_MARKER
)
from .codebook import refine_codes, train_sampler, sample_extrinsic
from .adapter_lab import AdapterReport, run_adapter_experiment

__all__ = [
    'ensure_finite', 'train_adversarial', 'ramp_factor',
    'train_base', 'finetune_unconditional',
    'train_embedder', 'mild_style',
    'train_encoder', 'row_error',
    'StyleRecord', 'save_records', 'load_records',
    'LearningRateSchedule', 'OptimizationResult', 'DestylizeResult',
    'optimize_code', 'destylize', 'destylize_all', 'destylization_loss',
    'init_stage1', 'pretrain_stage2', 'finetune_stage3', 'level_per_step',
    'style_mix_gap', 'style_gap', 'STAGE2_MARKER', 'STAGE3_MARKER',
    'refine_codes', 'train_sampler', 'sample_extrinsic',
    'AdapterReport', 'run_adapter_experiment'
]
