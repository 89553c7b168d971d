"""
Codec Module - Run-length weight strings and checkpoint archives
"""

from .encoder import RunLengthEncoder, CheckpointWriter, FORMAT_VERSION
from .decoder import RunLengthDecoder, CheckpointReader

__all__ = [
    'RunLengthEncoder', 'CheckpointWriter', 'FORMAT_VERSION',
    'RunLengthDecoder', 'CheckpointReader'
]
