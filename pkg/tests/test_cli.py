import json
import subprocess
import sys

import pytest

from causalprobe import bif
from causalprobe.cli import build_parser, config_from_args, main

FAST = ["--n", "3", "--cardinality", "2", "--obs-size", "300", "--rounds", "2", "--batch", "8",
        "--model-kind", "table", "--dist-iters", "10", "--graph-iters", "3", "--graph-samples", "3",
        "--mc-graphs", "3", "--mc-samples", "3"]


def test_flags_mirror_config(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"n": 5, "rounds": 7, "strategy": "ait"}))
    args = build_parser().parse_args(["run", "--config", str(cfg_file), "--rounds", "3",
                                      "--no-squared-score", "--desk"])
    cfg = config_from_args(args)
    assert (cfg.n, cfg.rounds, cfg.strategy, cfg.squared_score) == (5, 3, "ait", False)
    assert cfg.cardinality == 4  # from the desk preset


def test_generate(tmp_path, capsys):
    assert main(["generate", "--graph", "jungle", "--n", "6", "--cardinality", "3",
                 "--samples", "50", "--interventional", "10", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "scm.json").exists() and (tmp_path / "observational.csv").exists()
    assert len(list(tmp_path.glob("interventional_*.csv"))) == 6
    assert "6 nodes" in capsys.readouterr().out


def test_run_and_eval(tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["run", *FAST, "--strategy", "git", "--seed", "1", "--out", str(out)]) == 0
    assert "final_shd=" in capsys.readouterr().out
    assert (out / "run.csv").exists()
    assert main(["eval", str(tmp_path), "--write"]) == 0
    assert "# aushd_table.csv" in capsys.readouterr().out
    assert (tmp_path / "aushd_table.csv").exists()


def test_suite(tmp_path, capsys):
    code = main(["suite", *FAST, "--graphs", "chain,collider", "--strategies", "random,git",
                 "--seeds", "0-1", "--out", str(tmp_path)])
    assert code == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0] == "graph,git,random"
    assert len(list(tmp_path.glob("runs/*/DONE"))) == 8


def test_probe(tmp_path, capsys):
    assert main(["probe", *FAST, "--n", "4", "--free-node", "2", "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert "node,count" in lines
    assert sum(int(l.split(",")[1]) for l in lines[lines.index("node,count") + 1:]) == 2


def test_parse_bif(tmp_path, capsys):
    src = tmp_path / "asia.bif"
    src.write_text(bif.serialize_bif(bif.from_scm(bif.load_network("asia"), "asia")))
    assert main(["parse-bif", str(src), "--json", str(tmp_path / "asia.json")]) == 0
    out = capsys.readouterr().out
    assert "nodes: 8" in out and "edges: 8" in out
    assert json.loads((tmp_path / "asia.json").read_text())


def test_errors_exit_nonzero(tmp_path, capsys):
    assert main(["parse-bif", str(tmp_path / "none.bif")]) == 2
    assert main(["run", "--strategy", "git", "--cardinality", "3", "--graph", "bif:cancer",
                 "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["eval", str(tmp_path / "empty")]) == 1


def test_console_module(tmp_path):
    r = subprocess.run([sys.executable, "-m", "causalprobe.cli", "--help"], capture_output=True,
                       text=True, check=True)
    for cmd in ("generate", "run", "suite", "eval", "parse-bif", "probe"):
        assert cmd in r.stdout


def test_output_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CAUSALPROBE_OUTPUT", str(tmp_path))
    assert main(["run", *FAST, "--rounds", "0"]) == 0
    assert list(tmp_path.glob("run-*/run.csv"))


@pytest.mark.parametrize("text,want", [("0-2", [0, 1, 2]), ("3,5", [3, 5]), ("1,4-5", [1, 4, 5])])
def test_seed_ranges(text, want):
    from causalprobe.cli import _parse_seeds
    assert _parse_seeds(text) == want
