"""
DualStyle Pipeline - Command Dispatch
Routes CLI commands to their handlers, seeds the run and maps failures to
exit codes.

Architecture:
1. Command + options -> seed everything, open a RunReporter
2. Command -> handler method (DataHandler, ModelHandler, StageHandler, ...)
3. Handler summary -> log; manifest written to <workspace>/manifests
4. DualStyleError -> failure manifest, logged, exit code returned
"""

import logging
from typing import Any, Callable, Dict

from .config import RunConfig, seed_everything
from .errors import ContractViolation, DualStyleError, NumericFailure
from .handlers.data_handler import DataHandler
from .handlers.lab_handler import LabHandler
from .handlers.model_handler import ModelHandler
from .handlers.stage_handler import StageHandler
from .handlers.style_handler import StyleHandler
from .handlers.workspace import WorkspaceStore
from .reporting import RunReporter

logger = logging.getLogger(__name__)

EXIT_OK = 0

COMMANDS = (
    "dataset", "train-base", "train-encoder", "finetune-uncond", "destylize",
    "pretrain", "finetune", "refine", "train-sampler", "transfer", "sample",
    "adapter-lab", "grid",
)


class DualStylePipeline:
    """
    Main dispatcher for one process.

    Example:
        pipeline = DualStylePipeline(RunConfig.load("config.json"))
        exit_code = pipeline.run_command("transfer", content="3", exemplar="7",
                                         weight_string="3*0.75,5*1.0")
    """

    def __init__(self, config: RunConfig, progress: bool = False):
        """
        Args:
            config: Run configuration with CLI overrides applied
            progress: Show tqdm bars in long loops
        """
        self.config = config
        self.progress = progress
        self.store = WorkspaceStore(config.workspace_path, config.seed)
        self.last_summary = ""

    def _route(self, command: str, reporter: RunReporter) -> Callable[..., str]:
        args = (self.config, self.store, reporter, self.progress)
        routes: Dict[str, Callable[..., str]] = {
            "dataset": DataHandler(self.config, reporter, self.progress).generate,
            "train-base": lambda: ModelHandler(*args).train_base(),
            "train-encoder": lambda: ModelHandler(*args).train_encoder(),
            "finetune-uncond": lambda: ModelHandler(*args).finetune_uncond(),
            "destylize": lambda **kw: StageHandler(*args).destylize(**kw),
            "pretrain": lambda: StageHandler(*args).pretrain(),
            "finetune": lambda: StageHandler(*args).finetune(),
            "refine": lambda: StageHandler(*args).refine(),
            "train-sampler": lambda: StyleHandler(*args).train_sampler(),
            "transfer": lambda **kw: StyleHandler(*args).transfer(**kw),
            "sample": lambda **kw: StyleHandler(*args).sample(**kw),
            "grid": lambda **kw: StyleHandler(*args).grid(**kw),
            "adapter-lab": lambda: LabHandler(*args).adapter_lab(),
        }
        return routes[command]

    def execute(self, command: str, **options: Any) -> str:
        """
        Run one command and write its manifest; errors propagate after a
        failure manifest is written.

        Returns:
            The handler's summary
        """
        if command not in COMMANDS:
            raise ContractViolation(f"unknown command '{command}', expected one of {COMMANDS}")
        seed_everything(self.config.seed, self.config.deterministic)
        reporter = RunReporter(self.config.workspace_path, command,
                               self.config.config_hash(), self.config.seed)
        reporter.add_input("style_profile", self.config.style_profile)
        try:
            summary = self._route(command, reporter)(**options)
        except DualStyleError as e:
            reporter.fail(e)
            raise
        reporter.finish()
        self.last_summary = summary
        return summary

    def run_command(self, command: str, **options: Any) -> int:
        """
        Run one command and map failures to exit codes.

        Returns:
            0 on success, otherwise the exit code of the DualStyleError raised
        """
        try:
            summary = self.execute(command, **options)
        except NumericFailure as e:
            logger.error("%s diverged: %s", command, e)
            return e.exit_code
        except DualStyleError as e:
            logger.error("%s failed: %s", command, e)
            return e.exit_code
        logger.info("%s", summary)
        return EXIT_OK
