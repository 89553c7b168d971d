"""
Tests for run-length weight strings, checkpoint archives and run configuration.
Run with: pytest tests/test_codec_config.py
"""

import json
import logging

import pytest
import torch
from hypothesis import given, settings, strategies as st

from src.codec import (FORMAT_VERSION, CheckpointReader, CheckpointWriter, RunLengthDecoder,
                       RunLengthEncoder)
from src.config import (GeneratorConfig, RunConfig, StageConfig, get_profile, scale_l_schedule)
from src.errors import ContractViolation, EnvironmentFailure
from src.numerics import ParameterStore


# ==================== RUN-LENGTH CODES ====================

def test_rle_encode():
    """Test RLE encoding"""
    values = [0.75, 0.75, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0]
    assert RunLengthEncoder.encode(values) == [(0.75, 3), (1.0, 5)]
    assert RunLengthEncoder.encode_to_string(values) == "3*0.75,5*1"
    assert RunLengthEncoder.encode([]) == []


def test_rle_decode_string():
    """Test RLE decoding of the --w notation"""
    assert RunLengthDecoder.decode_string("3*0.75,5*1.0") == [0.75] * 3 + [1.0] * 5
    assert RunLengthDecoder.decode_string("0, 0,1") == [0.0, 0.0, 1.0]
    assert RunLengthDecoder.decode_string(" 2 * .5 ") == [0.5, 0.5]


@pytest.mark.parametrize("text", ["", "  ", "3*", "*0.5", "abc", "0*1", "3*0.5,,1", "2*1*1"])
def test_rle_rejects_malformed_strings(text):
    with pytest.raises(ContractViolation):
        RunLengthDecoder.parse(text)


def test_rle_decode_pairs():
    assert RunLengthDecoder.decode([(0.5, 2), [1, 1]]) == [0.5, 0.5, 1.0]


@pytest.mark.parametrize("item", [(0.5,), (0.5, 2, 1), 0.5, (0.5, 0), (0.5, -1), ("x", 2), (1.0, None)])
def test_rle_decode_rejects_malformed_items(item):
    with pytest.raises(ContractViolation):
        RunLengthDecoder.decode([(1.0, 1), item])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]), min_size=1, max_size=30))
def test_rle_string_reproduces_weights(values):
    assert RunLengthDecoder.decode_string(RunLengthEncoder.encode_to_string(values)) == values


# ==================== CHECKPOINTS ====================

def test_checkpoint_write_and_read(tmp_path):
    """Test archive round trip with namespaces and markers"""
    store = ParameterStore({"generator/w": torch.arange(6.0).view(2, 3),
                            "extrinsic/b": torch.ones(4)})
    path = CheckpointWriter(tmp_path / "ckpt" / "stage2.pt").write(
        store, {"markers": ["stage2_complete"], "seed": 7})

    assert path.with_suffix(".json").exists()
    header = json.loads(path.with_suffix(".json").read_text())
    assert header["format_version"] == FORMAT_VERSION
    assert header["namespaces"] == ["extrinsic", "generator"]

    reader = CheckpointReader(path)
    assert reader.has_marker("stage2_complete")
    assert not reader.has_marker("stage3_complete")
    assert reader.has_namespace("generator")
    assert reader.metadata["seed"] == 7
    assert reader.store() == store
    assert torch.equal(reader.store("extrinsic")["b"], torch.ones(4))


def test_checkpoint_missing_file_raises(tmp_path):
    with pytest.raises(EnvironmentFailure):
        CheckpointReader(tmp_path / "absent.pt").metadata


def test_checkpoint_version_mismatch_raises(tmp_path):
    path = tmp_path / "old.pt"
    torch.save({"metadata": {"format_version": FORMAT_VERSION + 1}, "tensors": {}}, path)
    with pytest.raises(ContractViolation):
        CheckpointReader(path).store()


def test_checkpoint_unwritable_directory_raises(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    with pytest.raises(EnvironmentFailure):
        CheckpointWriter(blocker / "ckpt.pt").write(ParameterStore({"a/x": torch.zeros(1)}), {})


# ==================== CONFIGURATION ====================

def test_repository_config_matches_builtin_defaults():
    """config.json spells out the built-in defaults."""
    assert RunConfig.load() == RunConfig()


def test_config_dict_round_trip(tmp_path):
    config = RunConfig(seed=11, style_profile="anime")
    path = tmp_path / "run.json"
    config.save(path)
    loaded = RunConfig.load(str(path))
    assert loaded == config
    assert loaded.config_hash() == config.config_hash()


def test_config_hash_changes_with_values():
    assert RunConfig(seed=1).config_hash() != RunConfig(seed=2).config_hash()


def test_config_rejects_bad_version():
    with pytest.raises(ContractViolation):
        RunConfig.from_dict({"version": 2})


def test_config_rejects_unknown_profile():
    with pytest.raises(ContractViolation):
        RunConfig.from_dict({"style_profile": "watercolor"})


def test_config_missing_explicit_file_raises(tmp_path):
    with pytest.raises(EnvironmentFailure):
        RunConfig.load(str(tmp_path / "missing.json"))


def test_config_invalid_json_raises(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ContractViolation):
        RunConfig.load(str(path))


def test_config_warns_on_unknown_keys(caplog):
    with caplog.at_level(logging.WARNING):
        config = RunConfig.from_dict({"dataset": {"n_identities": 5, "colour": "red"}})
    assert config.dataset.n_identities == 5
    assert "colour" in caplog.text


def test_generator_config_slot_bookkeeping():
    """Desk shape has 8 slots (3 structure, 5 color); 1024 px has 18 (7, 11)."""
    desk = GeneratorConfig()
    assert (desk.num_slots, desk.n_structure, desk.n_color) == (8, 3, 5)
    full = GeneratorConfig(resolution=1024, structure_cutoff=32)
    assert (full.num_slots, full.n_structure, full.n_color) == (18, 7, 11)


@pytest.mark.parametrize("kwargs", [{"resolution": 24}, {"resolution": 4},
                                    {"structure_cutoff": 64}, {"latent_dim": 0}])
def test_generator_config_rejects_bad_shapes(kwargs):
    with pytest.raises(ContractViolation):
        GeneratorConfig(**kwargs)


def test_stage_config_validation():
    with pytest.raises(ContractViolation):
        StageConfig(l_schedule=[[2, 10], [3, 10]])
    with pytest.raises(ContractViolation):
        StageConfig(lambda_perc=-1.0)


def test_stage3_defaults_follow_profile():
    config = RunConfig(style_profile="caricature")
    stage3 = config.stage3_config()
    assert stage3.stage == 3
    assert stage3.lambda_id == 4.0
    assert stage3.lambda_reg == 0.005
    assert stage3.iterations == get_profile("caricature").stage3_iterations
    assert stage3.l_schedule == []


def test_partial_stage3_section_keeps_profile_objective():
    """A training.stage3 section only overrides the keys it names."""
    config = RunConfig.from_dict({"training": {"stage3": {"iterations": 5}}})
    stage3 = config.stage3_config()
    expected = StageConfig.stage3_defaults(get_profile("cartoon"), iterations=5)
    assert stage3 == expected
    assert (stage3.stage, stage3.lambda_cx, stage3.lambda_fm, stage3.lambda_id) == (3, 0.25, 0.25, 1.0)
    assert stage3.perc_taps == {"level2": 0.5, "level3": 1.0}


def test_stage3_overrides_follow_profile_changes():
    config = RunConfig.from_dict({"style_profile": "cartoon",
                                  "training": {"stage3": {"lambda_cx": 0.5}}})
    config.style_profile = "caricature"
    stage3 = config.stage3_config()
    assert stage3.lambda_cx == 0.5
    assert stage3.lambda_id == 4.0
    assert stage3.iterations == get_profile("caricature").stage3_iterations


def test_stage3_section_is_validated_on_load():
    with pytest.raises(ContractViolation):
        RunConfig.from_dict({"training": {"stage3": {"lambda_fm": -1.0}}})


def test_stage3_overrides_survive_save_and_load(tmp_path):
    config = RunConfig.from_dict({"training": {"stage3": {"iterations": 7, "batch_size": 2}}})
    path = tmp_path / "run.json"
    config.save(path)
    loaded = RunConfig.load(str(path))
    assert loaded.stage3_config() == config.stage3_config()
    assert loaded.stage3_config().lambda_cx == 0.25


def test_scale_l_schedule():
    """The 18-slot schedule maps onto itself and collapses for smaller L."""
    assert scale_l_schedule(18, 3600) == [(7, 300), (6, 300), (5, 3000)]
    desk = scale_l_schedule(8, 700)
    levels = [l for l, _ in desk]
    assert levels[0] == 3
    assert all(a > b for a, b in zip(levels, levels[1:]))
    assert sum(it for _, it in desk) == 700
