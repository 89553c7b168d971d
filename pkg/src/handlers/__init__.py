"""
Handlers Module - Dataset, model, stage, style and lab command handlers
"""

from .workspace import WorkspaceStore
from .data_handler import DataHandler
from .model_handler import ModelHandler
from .stage_handler import StageHandler
from .style_handler import StyleHandler
from .lab_handler import LabHandler

__all__ = ['WorkspaceStore', 'DataHandler', 'ModelHandler', 'StageHandler',
           'StyleHandler', 'LabHandler']
