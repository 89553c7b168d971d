"""
Numerics Module - AdaIN, parameter stores and gradient checking
"""

from .adain import adain, channel_stats, TRAIN_EPS, EXACT_EPS
from .store import ParameterStore, module_digest
from .gradcheck import grad_check, GradReport

__all__ = [
    'adain', 'channel_stats', 'TRAIN_EPS', 'EXACT_EPS',
    'ParameterStore', 'module_digest',
    'grad_check', 'GradReport'
]
