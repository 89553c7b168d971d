"""
Losses Module - Feature extractor, identity embedder and training objectives
"""

from .extractor import FeatureExtractor, IdentityEmbedder, TAPS
from .objectives import (
    LossSuite, adv_losses, discriminator_loss, generator_loss, r1_penalty,
    perceptual, perceptual_per_sample, identity_loss,
    contextual, contextual_from_vectors, feature_matching, statistics_distance,
    code_dispersion, modres_l2, DEFAULT_TAPS
)

__all__ = [
    'FeatureExtractor', 'IdentityEmbedder', 'TAPS',
    'LossSuite', 'adv_losses', 'discriminator_loss', 'generator_loss', 'r1_penalty',
    'perceptual', 'perceptual_per_sample', 'identity_loss',
    'contextual', 'contextual_from_vectors', 'feature_matching', 'statistics_distance',
    'code_dispersion', 'modres_l2', 'DEFAULT_TAPS'
]
