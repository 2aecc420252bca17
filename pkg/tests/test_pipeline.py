import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from attnforge.cli import main as cli_main
from attnforge.container import write_attention_stack
from attnforge.crf import DcrfParams
from attnforge.errors import ConfigError
from attnforge.pipeline import PipelineConfig, dataset_stats, run_pipeline
from attnforge.vocpng import decode_voc_mask

from conftest import make_stack


def write_fixture_containers(path, n, seed=0, words=("a", "cat", "and", "dog")):
    rng = np.random.default_rng(seed)
    for i in range(n):
        stack = make_stack(rng, img_hw=(16, 16), grids=((8, 8),), words=words,
                           seed=i)
        write_attention_stack(stack, os.path.join(path, f"sample{i:03d}"))


def small_config(in_dir, out_dir, classes_file, **kw):
    return PipelineConfig(
        input_dir=str(in_dir), output_dir=str(out_dir),
        classes_file=classes_file,
        dcrf=DcrfParams(iterations=3), **kw)


def test_pipeline_happy_path(tmp_path, classes_file):
    in_dir, out_dir = tmp_path / "in", tmp_path / "out"
    in_dir.mkdir()
    write_fixture_containers(in_dir, 3)
    manifest = run_pipeline(small_config(in_dir, out_dir, classes_file))
    assert len(manifest["samples"]) == 3
    assert manifest["failures"] == []
    for sample in manifest["samples"]:
        for key in ("image_file", "mask_file", "reliability_file"):
            assert (out_dir / sample[key]).is_file()
        assert 0.0 <= sample["reliable_fraction"] <= 1.0
        assert sample["present_classes"] == [1, 2]
        mask = decode_voc_mask(out_dir / sample["mask_file"])
        assert set(np.unique(mask.s)) <= {0, 1, 2}
    assert (out_dir / "manifest.json").is_file()


def test_pipeline_corrupt_container_recorded(tmp_path, classes_file):
    in_dir, out_dir = tmp_path / "in", tmp_path / "out"
    in_dir.mkdir()
    write_fixture_containers(in_dir, 3)
    bad = in_dir / "sample001" / "manifest.json"
    bad.write_text("{ not json")
    manifest = run_pipeline(small_config(in_dir, out_dir, classes_file))
    assert len(manifest["samples"]) == 2
    assert len(manifest["failures"]) == 1
    assert manifest["failures"][0]["container_id"] == "sample001"


def test_pipeline_deterministic(tmp_path, classes_file):
    in_dir = tmp_path / "in"
    in_dir.mkdir()
    write_fixture_containers(in_dir, 2)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    run_pipeline(small_config(in_dir, out1, classes_file))
    run_pipeline(small_config(in_dir, out2, classes_file))
    for name in sorted(os.listdir(out1)):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_pipeline_missing_input_dir(tmp_path, classes_file):
    with pytest.raises(ConfigError):
        run_pipeline(small_config(tmp_path / "nope", tmp_path / "o",
                                  classes_file))


def test_dataset_stats_report(tmp_path, classes_file):
    in_dir, out_dir = tmp_path / "in", tmp_path / "out"
    in_dir.mkdir()
    write_fixture_containers(in_dir, 2)
    manifest = run_pipeline(small_config(in_dir, out_dir, classes_file))
    report = dataset_stats(manifest)
    assert "samples: 2" in report
    assert "failures: 0" in report
    assert "mean reliable fraction:" in report
    empty = dataset_stats({"samples": [], "class_histogram": {},
                           "failures": []})
    assert "samples: 0" in empty


def test_cli_synth_and_stats(tmp_path, classes_file):
    in_dir, out_dir = tmp_path / "in", tmp_path / "out"
    in_dir.mkdir()
    write_fixture_containers(in_dir, 2)
    runner = CliRunner()
    result = runner.invoke(cli_main, [
        "synth", "--input", str(in_dir), "--output", str(out_dir),
        "--classes", classes_file, "--dcrf-iters", "2"])
    assert result.exit_code == 0, result.output
    assert "2 samples written, 0 failures" in result.output
    result = runner.invoke(cli_main,
                           ["stats", str(out_dir / "manifest.json")])
    assert result.exit_code == 0
    assert "samples: 2" in result.output


def test_cli_partial_failure_exit_code(tmp_path, classes_file):
    in_dir, out_dir = tmp_path / "in", tmp_path / "out"
    in_dir.mkdir()
    write_fixture_containers(in_dir, 2)
    (in_dir / "sample000" / "manifest.json").unlink()
    result = CliRunner().invoke(cli_main, [
        "synth", "--input", str(in_dir), "--output", str(out_dir),
        "--classes", classes_file, "--dcrf-iters", "1"])
    assert result.exit_code == 2
    assert "1 failures" in result.output


def test_cli_config_file_with_flag_override(tmp_path, classes_file):
    in_dir, out_dir = tmp_path / "in", tmp_path / "out"
    in_dir.mkdir()
    write_fixture_containers(in_dir, 1)
    conf = tmp_path / "conf.toml"
    conf.write_text(
        f'input = "{in_dir}"\noutput = "{tmp_path / "ignored"}"\n'
        f'classes = "{classes_file}"\ndcrf-iters = 1\n')
    result = CliRunner().invoke(cli_main, [
        "synth", "--config", str(conf), "--output", str(out_dir)])
    assert result.exit_code == 0, result.output
    assert (out_dir / "manifest.json").is_file()
    assert not (tmp_path / "ignored").exists()


def test_cli_prompts_round_trip(tmp_path, classes_file):
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("a cat sits\nno match here\na dog runs\n")
    synonyms = tmp_path / "synonyms.json"
    synonyms.write_text(json.dumps({"cat": ["kitten"], "dog": ["puppy"]}))
    curated = tmp_path / "curated.jsonl"
    augmented = tmp_path / "augmented.jsonl"
    filtered = tmp_path / "filtered.jsonl"
    runner = CliRunner()
    r = runner.invoke(cli_main, ["prompts", "curate", "--corpus", str(corpus),
                                 "--classes", classes_file,
                                 "--output", str(curated)])
    assert r.exit_code == 0 and "2 records" in r.output
    r = runner.invoke(cli_main, ["prompts", "augment",
                                 "--records", str(curated),
                                 "--synonyms", str(synonyms),
                                 "--classes", classes_file,
                                 "--output", str(augmented)])
    assert r.exit_code == 0 and "4 records" in r.output
    scores = tmp_path / "scores.tsv"
    scores.write_text("index\tscore\n0\t0.9\n1\t0.2\n2\t0.8\n3\t0.5\n")
    r = runner.invoke(cli_main, ["prompts", "filter",
                                 "--records", str(augmented),
                                 "--scores", str(scores),
                                 "--top-k", "2",
                                 "--output", str(filtered)])
    assert r.exit_code == 0 and "2 of 4" in r.output
