import json

import pytest

from funcgraph.cli import main

TINY_TRAIN = ["--budget", "10", "--loops", "2", "--supervised-batches", "2", "--scene-batches", "2"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    conf = {
        "families": ["bedroom", {"base": "kitchen", "name": "kitchen_k2",
                                 "groups": [{"trigger": "knob", "responder": "burner", "count": [2], "layout": "stove"},
                                            {"trigger": "switch", "responder": "ceiling_lamp", "count": [1], "layout": "ceiling"}]}],
        "train": 8, "test": 4, "seed": 5, "points": 16,
    }
    (root / "gen.json").write_text(json.dumps(conf))
    assert main(["gen", "--config", str(root / "gen.json"), "--out", str(root / "data")]) == 0
    main(["train", "--manifest", str(root / "data" / "manifest.json"), "--out", str(root / "run"), "--seed", "1", *TINY_TRAIN])
    return root


def test_gen_writes_manifest_and_stats(workspace, capsys):
    m = json.loads((workspace / "data" / "manifest.json").read_text())
    assert len(m["scenes"]) == 12
    assert {e["family"] for e in m["scenes"]} == {"bedroom", "kitchen_k2"}
    assert "ifr_within_0.5m" in json.loads((workspace / "data" / "stats.json").read_text())


def test_flags_override_config(workspace, tmp_path):
    main(["gen", "--config", str(workspace / "gen.json"), "--out", str(tmp_path), "--train", "2", "--test", "1",
          "--families", "bathroom"])
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert len(m["scenes"]) == 3 and {e["family"] for e in m["scenes"]} == {"bathroom"}


def test_train_outputs(workspace):
    run = workspace / "run"
    for name in ("final.br.ckpt", "final.sr.ckpt", "final.card.json", "final.policy.ckpt", "metrics.jsonl", "train_config.json"):
        assert (run / name).exists(), name
    rows = [json.loads(x) for x in (run / "metrics.jsonl").read_text().splitlines()]
    assert [r["loop"] for r in rows] == [0, 1]


def test_train_and_eval_deterministic(workspace, tmp_path):
    manifest = str(workspace / "data" / "manifest.json")
    main(["train", "--manifest", manifest, "--out", str(tmp_path / "run"), "--seed", "1", *TINY_TRAIN])
    for f in sorted((workspace / "run").iterdir()):
        assert f.read_bytes() == (tmp_path / "run" / f.name).read_bytes(), f.name
    for prefix, out in ((workspace / "run" / "final", tmp_path / "e1"), (tmp_path / "run" / "final", tmp_path / "e2")):
        main(["eval", "--manifest", manifest, "--checkpoint", str(prefix), "--method", "ours_final", "--out", str(out)])
    assert (tmp_path / "e1" / "results.json").read_bytes() == (tmp_path / "e2" / "results.json").read_bytes()


def test_eval_methods(workspace, capsys):
    manifest = str(workspace / "data" / "manifest.json")
    ck = str(workspace / "run" / "final")
    main(["eval", "--manifest", manifest, "--method", "exhaustive", "--out", str(workspace / "ex"), "--dump-graphs"])
    out = capsys.readouterr().out
    assert "exhaustive" in out and " 1.000 " in out
    assert any((workspace / "ex" / "graphs").rglob("*.json"))
    main(["eval", "--manifest", manifest, "--checkpoint", ck, "--method", "prior_only", "--budget", "frac20",
          "--out", str(workspace / "po")])
    assert "prior_only" in capsys.readouterr().out
    with pytest.raises(SystemExit):
        main(["eval", "--manifest", manifest, "--method", "ours_final", "--out", str(workspace / "x")])


def test_adapt_writes_log_and_graphs(workspace):
    manifest = str(workspace / "data" / "manifest.json")
    out = workspace / "adapt"
    main(["adapt", "--manifest", manifest, "--checkpoint", str(workspace / "run" / "final"), "--budget", "frac20",
          "--out", str(out)])
    assert (out / "interactions.jsonl").exists()
    assert len(list(out.glob("*.graph.json"))) == 4


def test_transfer_ablate_curve(workspace, capsys):
    manifest = str(workspace / "data" / "manifest.json")
    ck = str(workspace / "run" / "final")
    with pytest.warns(UserWarning, match="identical"):
        main(["transfer", "--manifest", manifest, "--checkpoint", ck, "--train-family", "bedroom",
              "--test-family", "bedroom", "--out", str(workspace / "tr")])
    assert "ours_final" in capsys.readouterr().out
    main(["ablate-edges", "--manifest", manifest, "--checkpoint", ck, "--out", str(workspace / "ab")])
    table = capsys.readouterr().out
    for name in ("prior_only_edges", "distance_only_edges", "gamma_0.4", "gamma_1.0"):
        assert name in table
    main(["curve", "--manifest", manifest, "--checkpoint", ck, "--steps", "3", "--out", str(workspace / "curve.tsv")])
    assert len((workspace / "curve.tsv").read_text().splitlines()) == 5
