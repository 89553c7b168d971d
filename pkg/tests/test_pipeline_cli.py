"""
Tests for command dispatch, exit codes and a tiny end-to-end run of every command.
Run with: pytest tests/test_pipeline_cli.py
"""

import json

import pytest
import torch

from conftest import tiny_run_dict
from src.cli import build_parser, command_options, main
from src.codec import CheckpointReader
from src.config import RunConfig
from src.errors import ContractViolation
from src.handlers.style_handler import StyleHandler
from src.handlers.workspace import WorkspaceStore
from src.pipeline import COMMANDS, DualStylePipeline
from src.reporting import RunReporter
from src.synth import load_images

END_TO_END = [
    ("dataset", {}),
    ("train-base", {}),
    ("train-encoder", {}),
    ("finetune-uncond", {}),
    ("destylize", {}),
    ("pretrain", {}),
    ("finetune", {}),
    ("refine", {}),
    ("train-sampler", {}),
    ("transfer", {"content": "0", "exemplar": "0"}),
    ("sample", {"count": 4}),
    ("grid", {}),
    ("adapter-lab", {}),
]


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """Workspace pushed through every command once; yields (config, exit codes)."""
    config = RunConfig.from_dict(tiny_run_dict(tmp_path_factory.mktemp("e2e") / "workspace"))
    pipeline = DualStylePipeline(config)
    codes = {command: pipeline.run_command(command, **options) for command, options in END_TO_END}
    return config, codes


# ==================== PARSER ====================

def test_parser_reads_globals_and_command_options():
    args = build_parser().parse_args(["--seed", "3", "--style-profile", "anime",
                                      "transfer", "1", "2", "--w", "3*0.75,5*1", "--preserve-color"])
    assert args.seed == 3 and args.style_profile == "anime"
    assert args.command == "transfer"
    assert command_options(args) == {"content": "1", "exemplar": "2",
                                     "weight_string": "3*0.75,5*1", "preserve_color": True}


def test_command_options_drop_unset_values():
    args = build_parser().parse_args(["destylize"])
    assert command_options(args) == {}


def test_every_command_has_a_subparser():
    parser = build_parser()
    for command in COMMANDS:
        extra = ["0", "0"] if command == "transfer" else []
        assert parser.parse_args([command, *extra]).command == command


# ==================== EXIT CODES ====================

def test_bad_flag_exits_2():
    assert main(["--bogus"]) == 2
    assert main([]) == 2


def test_missing_config_file_exits_4(tmp_path):
    assert main(["--config", str(tmp_path / "absent.json"), "dataset"]) == 4


def test_unknown_command_exits_2(run_config):
    assert DualStylePipeline(run_config).run_command("paint") == 2
    with pytest.raises(ContractViolation):
        DualStylePipeline(run_config).execute("paint")


def test_missing_checkpoint_exits_4(run_config):
    assert DualStylePipeline(run_config).run_command("train-encoder") == 4
    manifest = json.loads((run_config.workspace_path / "manifests" / "train-encoder.json").read_text())
    assert manifest["status"] == "failed"
    assert manifest["exit_code"] == 4
    assert "train-base" in manifest["error"]
    assert manifest["config_hash"] == run_config.config_hash()


def test_dataset_through_main(tmp_path):
    path = tmp_path / "run.json"
    RunConfig.from_dict(tiny_run_dict(tmp_path / "ws")).save(path)
    assert main(["--config", str(path), "--seed", "5", "dataset", "--n-identities", "3",
                 "--n-styles", "2"]) == 0
    manifest = json.loads((tmp_path / "ws" / "manifests" / "dataset.json").read_text())
    assert manifest["seed"] == 5
    assert manifest["metrics"]["n_source"] == 3
    assert load_images(tmp_path / "ws", "style").shape == (2, 3, 16, 16)


# ==================== END TO END ====================

def test_every_command_succeeds(trained):
    config, codes = trained
    assert codes == {command: 0 for command, _ in END_TO_END}
    for command, _ in END_TO_END:
        manifest = json.loads((config.workspace_path / "manifests" / f"{command}.json").read_text())
        assert manifest["command"] == command
        assert manifest["config_hash"] == config.config_hash()
        assert (manifest["status"], manifest["exit_code"]) == ("ok", 0)
        assert "error" not in manifest


def test_end_to_end_artifacts(trained):
    config, _ = trained
    workspace = config.workspace_path
    store = WorkspaceStore(workspace, config.seed)
    for name in ("base", "encoder", "uncond", "stage2", "stage3", "sampler"):
        assert store.exists(name)
    for name in ("base", "uncond"):
        assert CheckpointReader(store.path(name)).metadata["step"] is None
    assert len(list((workspace / "records").glob("*.pt"))) == 12
    for name in ("transfer.png", "transfer_panel.png", "sample.png", "grid.png", "adapter_lab.png"):
        assert (workspace / "outputs" / name).exists()
    assert "resblock" in (workspace / "reports" / "adapter_lab.txt").read_text()
    assert (workspace / "metrics" / "pretrain.jsonl").exists()


def test_stage_markers(trained):
    config, _ = trained
    store = WorkspaceStore(config.workspace_path, config.seed)
    g, _, _ = store.load_base()
    _, markers = store.load_stage("stage3", g)
    assert markers == ["stage2_complete", "stage3_complete"]
    _, markers = store.load_stage("stage2", g)
    assert markers == ["stage2_complete"]


def test_blend_strip(trained):
    config, _ = trained
    pipeline = DualStylePipeline(config)
    assert pipeline.run_command("grid", blend="both", steps=3) == 0
    assert (config.workspace_path / "outputs" / "grid_blend_both.png").exists()


def test_zero_weights_reproduce_reconstruction(trained):
    """With w = 0 the transfer is g(E(I)) whatever the exemplar."""
    config, _ = trained
    store = WorkspaceStore(config.workspace_path, config.seed)
    reporter = RunReporter(config.workspace_path, "transfer", config.config_hash(), config.seed)
    handler = StyleHandler(config, store, reporter)
    content, _, output = handler.stylize("0", "0", "6*0")

    g, _, _ = store.load_base()
    encoder = store.load_encoder()
    with torch.no_grad():
        expected = g(encoder.encode(content))
    assert torch.allclose(output, expected, atol=1e-5)


def test_color_preserving_transfer(trained):
    config, _ = trained
    assert DualStylePipeline(config).run_command("transfer", content="1", exemplar="2",
                                                 preserve_color=True) == 0
    manifest = json.loads((config.workspace_path / "manifests" / "transfer.json").read_text())
    assert manifest["inputs"]["preserve_color"] is True


def test_bad_weight_string_exits_2(trained, tmp_path):
    config, _ = trained
    path = tmp_path / "run.json"
    config.save(path)
    assert main(["--config", str(path), "transfer", "0", "0", "--w", "5*1"]) == 2
    manifest = json.loads((config.workspace_path / "manifests" / "transfer.json").read_text())
    assert (manifest["status"], manifest["exit_code"]) == ("failed", 2)


def test_sample_is_seeded(trained):
    config, _ = trained
    pipeline = DualStylePipeline(config)
    pipeline.run_command("sample", count=2)
    first = (config.workspace_path / "outputs" / "sample.png").read_bytes()
    pipeline.run_command("sample", count=2)
    assert (config.workspace_path / "outputs" / "sample.png").read_bytes() == first
