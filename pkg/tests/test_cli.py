import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from povshift import cli

MINI = Path(__file__).parent / "data"
SMALL = ["--n-tokens", "8", "--k-mentions", "3", "--lstm-hidden", "8", "--mlp-hidden", "8", "--max-epochs", "2",
         "--provider", "hash:8"]


def run(args, capsys):
    code = cli.main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_usage_errors_exit_2(capsys, tmp_path):
    assert run([], capsys)[0] == cli.USAGE
    assert run(["frobnicate"], capsys)[0] == cli.USAGE
    code, _, err = run(["convert", tmp_path / "missing.json", "--baseline", "random"], capsys)
    assert code == cli.USAGE and "no such input file" in err
    code, _, err = run(["stats", tmp_path / "nothing"], capsys)
    assert code == cli.USAGE
    code, _, err = run(["convert", tmp_path / "missing.json"], capsys)
    assert code == cli.USAGE


def test_help_exits_zero(capsys):
    assert run(["convert", "--help"], capsys)[0] == 0


def test_raw_text_needs_annotations(capsys, tmp_path):
    raw = tmp_path / "story.txt"
    raw.write_text("I left .\n", encoding="utf-8")
    code, _, err = run(["convert", raw, "--baseline", "random", "--focus-gender", "feminine"], capsys)
    assert code == cli.USAGE and "needs --gold-annotations or --adapters" in err


def test_convert_with_a_baseline(capsys, data_dir, tmp_path):
    code, out, _ = run(["convert", data_dir / "running_example_excerpt.json", "--baseline", "pronouns",
                        "--out-dir", tmp_path], capsys)
    assert code == cli.OK
    assert out == "Phil returns to Boston, to his job. He drives to the city every other week, " \
                  "to work a night or two at Pine Street, to see Emily.\n"
    saved = json.loads((tmp_path / "running-example-excerpt.json").read_text(encoding="utf-8"))
    assert saved["focus_chain"] == "2" and saved["confounders"] == ["1"]


def test_raw_text_with_gold_annotations_matches_json_input(capsys, data_dir, tmp_path):
    bundle = json.loads((data_dir / "running_example_excerpt.json").read_text(encoding="utf-8"))
    raw = tmp_path / "excerpt.txt"
    raw.write_text(bundle["text"] + "\n", encoding="utf-8")
    _, from_json, _ = run(["convert", data_dir / "running_example_excerpt.json", "--baseline", "pronouns"], capsys)
    code, from_raw, _ = run(["convert", raw, "--baseline", "pronouns",
                             "--gold-annotations", data_dir / "running_example_excerpt.json"], capsys)
    assert code == cli.OK and from_raw == from_json


def test_bad_adapters_spec(capsys, data_dir, tmp_path):
    raw = tmp_path / "s.txt"
    raw.write_text("I left .", encoding="utf-8")
    code, _, err = run(["convert", raw, "--baseline", "random", "--focus-gender", "masculine",
                        "--adapters", "no_such_module:make"], capsys)
    assert code == cli.USAGE and "cannot load adapters" in err


def test_config_overlay(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# synthetic corpus\ndocs = 2\nprefix = cfg\n", encoding="utf-8")
    out = tmp_path / "c.jsonl"
    code, text, _ = run(["synth", "--config", cfg, "--out", out], capsys)
    assert code == cli.OK and text.startswith("2 synthetic documents")
    assert json.loads(out.read_text().splitlines()[0])["doc_id"].startswith("cfg-")
    # flags on the command line win over the file
    code, text, _ = run(["synth", "--config", cfg, "--docs", "3", "--out", out], capsys)
    assert text.startswith("3 synthetic documents")


def test_config_json_and_errors(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"docs": 1}), encoding="utf-8")
    assert run(["synth", "--config", cfg, "--out", tmp_path / "o.jsonl"], capsys)[1].startswith("1 synthetic")
    cfg.write_text(json.dumps({"docs": 1, "colour": "red"}), encoding="utf-8")
    code, _, err = run(["synth", "--config", cfg, "--out", tmp_path / "o.jsonl"], capsys)
    assert code == cli.USAGE and "unknown config keys: colour" in err
    bad = tmp_path / "bad.cfg"
    bad.write_text("docs 3\n", encoding="utf-8")
    code, _, err = run(["synth", "--config", bad, "--out", tmp_path / "o.jsonl"], capsys)
    assert code == cli.USAGE and "bad.cfg:1" in err
    code, _, err = run(["synth", "--config", tmp_path / "absent.cfg", "--out", tmp_path / "o.jsonl"], capsys)
    assert code == cli.USAGE


@pytest.fixture(scope="module")
def small_examples(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert cli.main(["synth", "--docs", "2", "--out", str(d / "c.jsonl"), "--examples", str(d / "ex.jsonl"),
                     "--n-tokens", "8", "--k-mentions", "3"]) == cli.OK
    return d / "ex.jsonl"


def test_train_gate(capsys, small_examples, tmp_path):
    code, out, _ = run(["train", small_examples, "--out", tmp_path / "m.povm", *SMALL], capsys)
    assert code == cli.OK and json.loads(out)["model"] == "ranker"
    code, _, _ = run(["train", small_examples, "--out", tmp_path / "m.povm", "--min-train-accuracy", "1.01",
                      *SMALL], capsys)
    assert code == cli.GATE_FAILED


def test_train_tree_and_missing_examples(capsys, small_examples, tmp_path):
    code, out, _ = run(["train", small_examples, "--out", tmp_path / "t.povm", "--baseline", "tree"], capsys)
    assert code == cli.OK and json.loads(out)["model"] == "single_tree"
    assert run(["train", tmp_path / "nope.jsonl", "--out", tmp_path / "m.povm"], capsys)[0] == cli.USAGE
    empty = tmp_path / "empty.jsonl"
    empty.write_text("", encoding="utf-8")
    code, _, err = run(["train", empty, "--out", tmp_path / "m.povm"], capsys)
    assert code == cli.USAGE and "no training examples" in err


def test_model_kind_mismatch_is_a_usage_error(capsys, small_examples, data_dir, tmp_path):
    run(["train", small_examples, "--out", tmp_path / "t.povm", "--baseline", "tree"], capsys)
    code, _, err = run(["convert", data_dir / "running_example_excerpt.json", "--model", tmp_path / "t.povm"],
                       capsys)
    assert code == cli.USAGE and "not a ranker" in err


def test_evaluate_gate(capsys, data_dir, tmp_path):
    run(["convert", data_dir / "running_example.json", "--baseline", "pronouns", "--out-dir", tmp_path], capsys)
    pred = tmp_path / "running-example.json"
    gold = data_dir / "running_example.json"
    code, out, _ = run(["evaluate", "--pred", pred, "--gold", gold, "--out", tmp_path / "r.json"], capsys)
    assert code == cli.OK and 0 < json.loads(out)["f1"] <= 1
    assert "mention_accuracy" in json.loads((tmp_path / "r.json").read_text())
    assert run(["evaluate", "--pred", pred, "--gold", gold, "--min-f1", "1.01"], capsys)[0] == cli.GATE_FAILED
    assert run(["evaluate", "--pred", pred, pred, "--gold", gold], capsys)[0] == cli.USAGE


def test_stats_and_extract(capsys, tmp_path):
    code, out, _ = run(["stats", MINI], capsys)
    # unfiltered: doc b adds Tom (2 mentions) but not its first-person chain
    assert code == cli.OK and out.splitlines()[1] == "data,4,8,2.00,2,20"
    code, out, _ = run(["extract-data", MINI, "--out", tmp_path / "ex.jsonl", "--stats", tmp_path / "s.csv"], capsys)
    assert code == cli.OK and out.strip() == "6 examples from 1 of 2 documents"
    assert (tmp_path / "s.csv").read_text().splitlines()[1] == "data,3,6,2.00,1,13"


def test_score_human_eval(capsys, tmp_path):
    ratings = tmp_path / "r.csv"
    ratings.write_text("worker,sentence,mention,amb,correct,nat\nw1,s1,m1,2,1,2\n", encoding="utf-8")
    code, out, _ = run(["score-human-eval", ratings, "--out-dir", tmp_path / "o"], capsys)
    assert code == cli.OK and json.loads(out)["ref_percent"] == 100.0
    ratings.write_text("bad,header\n", encoding="utf-8")
    code, _, err = run(["score-human-eval", ratings, "--out-dir", tmp_path / "o"], capsys)
    assert code == cli.USAGE and "ratings header" in err


def _subprocess(args, cwd, hashseed):
    env = dict(os.environ, PYTHONHASHSEED=str(hashseed))
    return subprocess.run([sys.executable, "-m", "povshift.cli", *map(str, args)], cwd=cwd, env=env,
                          capture_output=True, text=True, check=True).stdout


def test_reruns_are_identical_across_hash_seeds(tmp_path):
    outs = []
    for seed in (1, 2):
        d = tmp_path / str(seed)
        d.mkdir()
        _subprocess(["synth", "--docs", "2", "--seed", "4", "--out", "c.jsonl", "--examples", "ex.jsonl",
                     "--n-tokens", "8", "--k-mentions", "3"], d, seed)
        stdout = _subprocess(["train", "ex.jsonl", "--out", "m.povm", *SMALL], d, seed)
        outs.append((stdout, *((d / f).read_bytes() for f in ("c.jsonl", "ex.jsonl", "m.povm"))))
    assert outs[0] == outs[1]
