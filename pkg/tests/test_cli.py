import json
from pathlib import Path

import pytest

from twoview.cli import main
from twoview.config import load_config
from twoview.errors import ConfigError
from twoview.synth import planted_kb, write_kb_files


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Raw synthetic KB files plus a config for a quick TransE-CT run."""
    root = tmp_path_factory.mktemp("cli")
    kb, schema = planted_kb()
    raw = write_kb_files(kb, root / "raw")
    config = {
        "dataset": {
            "instance_triples": raw["instance"],
            "ontology_triples": raw["ontology"],
            "links": raw["links"],
            "split_dir": str(root / "splits"),
            "hierarchical_relations": ["subclass_of"],
        },
        "split": {"train": 0.85, "valid": 0.05, "test": 0.10,
                  "link_train_ratio": 0.6, "seed": 5},
        "model": {"variant": "TransE-CT", "d_e": 32, "d_c": 16},
        "train": {"epochs": 3, "learning_rate": 0.01, "batch_instance": 64,
                  "batch_ontology": 8, "batch_cross": 16, "batch_hierarchy": 8,
                  "seed": 2},
        "eval": {"tasks": ["typing"], "ks": [1, 3, 10]},
        "output_dir": str(root / "out"),
    }
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(config, indent=2))
    return root, cfg_path, config, schema


def test_prepare_writes_splits_and_stats(workspace, capsys):
    root, cfg_path, config, _ = workspace
    assert main(["prepare", "--config", str(cfg_path)]) == 0
    out = capsys.readouterr().out
    stats = json.loads(out[:out.rindex("}") + 1])
    assert stats["entities"] == 200
    assert stats["concepts"] == 20
    assert stats["instance_triples"] == 2000
    split_dir = Path(config["dataset"]["split_dir"])
    for fname in ("entities.txt", "instance_train.tsv", "links_test.tsv",
                  "hierarchy.tsv", "stats.json"):
        assert (split_dir / fname).exists()


def test_prepare_deterministic_bytes(workspace, tmp_path):
    root, cfg_path, config, _ = workspace
    alt = json.loads(Path(cfg_path).read_text())
    alt["dataset"]["split_dir"] = str(tmp_path / "splits2")
    alt_path = tmp_path / "config2.json"
    alt_path.write_text(json.dumps(alt))
    assert main(["prepare", "--config", str(alt_path)]) == 0
    original = Path(config["dataset"]["split_dir"])
    rerun = Path(alt["dataset"]["split_dir"])
    for f in sorted(original.iterdir()):
        assert (rerun / f.name).read_bytes() == f.read_bytes()


def test_train_eval_predict_export_check(workspace, capsys):
    root, cfg_path, config, schema = workspace
    assert main(["train", "--config", str(cfg_path)]) == 0
    ckpt = Path(config["output_dir"]) / "checkpoint.ckpt"
    assert ckpt.exists()
    history = Path(config["output_dir"]) / "history.csv"
    lines = history.read_text().strip().splitlines()
    assert len(lines) == 1 + config["train"]["epochs"]
    assert lines[0].startswith("epoch,")

    assert main(["eval", "--config", str(cfg_path), "--checkpoint", str(ckpt),
                 "--task", "typing"]) == 0
    report = json.loads((Path(config["output_dir"]) / "report_typing.json")
                        .read_text())
    assert report["task"] == "entity_typing"
    assert report["variant"] == "TransE-CT"
    assert set(report["hits"]) == {"1", "3", "10"}
    assert 0.0 <= report["mrr"] <= 1.0

    assert main(["eval", "--config", str(cfg_path), "--checkpoint", str(ckpt),
                 "--task", "triples"]) == 0
    for view in ("instance", "ontology"):
        assert (Path(config["output_dir"]) / f"report_triples_{view}.json").exists()

    capsys.readouterr()
    assert main(["predict", "--config", str(cfg_path), "--checkpoint",
                 str(ckpt), "type", "e00_0", "-k", "3"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 3
    assert out[0].split("\t")[1].startswith("concept")

    assert main(["predict", "--config", str(cfg_path), "--checkpoint",
                 str(ckpt), "tail", "e00_0", "r0", "-k", "5"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 5

    assert main(["predict", "--config", str(cfg_path), "--checkpoint",
                 str(ckpt), "meta", "concept00", "m0", "-k", "2"]) == 0
    capsys.readouterr()

    assert main(["predict", "--config", str(cfg_path), "--checkpoint",
                 str(ckpt), "relquery", "concept00", "concept01", "-k",
                 "10"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 10

    # unknown name produces hints and a nonzero exit
    assert main(["predict", "--config", str(cfg_path), "--checkpoint",
                 str(ckpt), "type", "e00_X"]) == 2
    err = capsys.readouterr().err
    assert "e00_" in err

    # export round-trips
    assert main(["export", "--config", str(cfg_path), "--checkpoint",
                 str(ckpt), "--what", "concepts"]) == 0
    capsys.readouterr()
    export = Path(config["output_dir"]) / "export_concepts.tsv"
    rows = export.read_text().strip().splitlines()
    assert len(rows) == 20
    import numpy as np
    from twoview.checkpoint import load_checkpoint
    params, _, _ = load_checkpoint(ckpt)
    for i, row in enumerate(rows):
        fields = row.split("\t")
        values = np.array([float(x) for x in fields[1:]], dtype=np.float32)
        assert np.array_equal(values, params.concepts[i])


def test_eval_dump_and_determinism(workspace, tmp_path, capsys):
    root, cfg_path, config, _ = workspace
    ckpt = Path(config["output_dir"]) / "checkpoint.ckpt"
    assert main(["eval", "--config", str(cfg_path), "--checkpoint", str(ckpt),
                 "--task", "typing", "--dump-ranks"]) == 0
    capsys.readouterr()
    report_path = Path(config["output_dir"]) / "report_typing.json"
    first = report_path.read_bytes()
    dump = Path(config["output_dir"]) / "ranks_typing.tsv"
    lines = dump.read_text().strip().splitlines()
    report = json.loads(first)
    assert len(lines) == report["n_queries"]
    query, gold, rank = lines[0].split("\t")
    assert query.startswith("e") and gold.startswith("concept")
    assert rank.isdigit()
    # identical config + seed + data produce an identical report
    assert main(["eval", "--config", str(cfg_path), "--checkpoint", str(ckpt),
                 "--task", "typing"]) == 0
    capsys.readouterr()
    assert report_path.read_bytes() == first


def test_eval_refuses_wrong_dataset(workspace, tmp_path, capsys):
    root, cfg_path, config, _ = workspace
    ckpt = Path(config["output_dir"]) / "checkpoint.ckpt"
    other = json.loads(Path(cfg_path).read_text())
    # re-prepare with a different seed: same names, different split files are
    # fine (same vocab hash), so instead drop one raw entity to change vocab
    raw_dir = tmp_path / "raw2"
    raw_dir.mkdir()
    for key in ("instance_triples", "ontology_triples", "links"):
        src = Path(config["dataset"][key])
        text = src.read_text().replace("e00_0", "e00_RENAMED")
        (raw_dir / src.name).write_text(text)
        other["dataset"][key] = str(raw_dir / src.name)
    other["dataset"]["split_dir"] = str(tmp_path / "splits3")
    other_path = tmp_path / "config3.json"
    other_path.write_text(json.dumps(other))
    assert main(["prepare", "--config", str(other_path)]) == 0
    capsys.readouterr()
    assert main(["eval", "--config", str(other_path), "--checkpoint",
                 str(ckpt), "--task", "typing"]) == 2
    assert "hash mismatch" in capsys.readouterr().err


def test_variant_string_parsing():
    from twoview.model import ModelConfig
    from twoview.scoring import ScorerKind
    cfg = ModelConfig.from_variant("TransE-CT", 8, 4)
    assert cfg.intra is ScorerKind.TRANSLATIONAL and not cfg.hierarchy_aware
    cfg = ModelConfig.from_variant("HATransE-CT", 8, 4)
    assert cfg.hierarchy_aware
    with pytest.raises(ConfigError):
        ModelConfig.from_variant("TransE-CG", 300, 50)
    with pytest.raises(ConfigError):
        ModelConfig.from_variant("HAMult-CG", 8, 8)
    with pytest.raises(ConfigError):
        ModelConfig.from_variant("Nonsense-CT", 8, 4)


def test_config_validation(tmp_path):
    bad = {"model": {"variant": "HATransE-CT", "d_e": 8, "d_c": 4},
           "dataset": {}}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    with pytest.raises(ConfigError):
        load_config(path)
    # CT without cross-view negative sampling is undefined
    bad2 = {"model": {"variant": "TransE-CT", "d_e": 8, "d_c": 4},
            "train": {"cross_negative_sampling": False}}
    path2 = tmp_path / "bad2.json"
    path2.write_text(json.dumps(bad2))
    with pytest.raises(ConfigError):
        load_config(path2)


def test_config_margin_defaults(tmp_path):
    cfg = {"model": {"variant": "HolE-CT", "d_e": 8, "d_c": 4}}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    loaded = load_config(path)
    assert loaded.train.margins.instance == 1.0
    cfg["model"]["variant"] = "TransE-CT"
    path.write_text(json.dumps(cfg))
    assert load_config(path).train.margins.instance == 0.5


def test_seed_override(tmp_path):
    cfg = {"split": {"seed": 1}, "train": {"seed": 1}}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    loaded = load_config(path, seed_override=99)
    assert loaded.train.seed == 99
    assert loaded.split.seed == 99


def test_check_command_passes(capsys):
    assert main(["check", "--probes", "3", "--seed", "0"]) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out and "FAIL" not in out


def test_check_command_audits_checkpoint(workspace, capsys):
    root, cfg_path, config, _ = workspace
    ckpt = Path(config["output_dir"]) / "checkpoint.ckpt"
    assert main(["check", "--probes", "3", "--seed", "0", "--config",
                 str(cfg_path), "--checkpoint", str(ckpt)]) == 0
    out = capsys.readouterr().out
    assert "[PASS] checkpoint-norms" in out


def test_check_command_catches_injected_fault(capsys):
    assert main(["check", "--probes", "3", "--seed", "0", "--fault",
                 "grad-ct"]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] grad-ct" in out


def test_train_checkpoint_interval(workspace, tmp_path):
    root, cfg_path, config, _ = workspace
    cfg = json.loads(Path(cfg_path).read_text())
    cfg["train"]["checkpoint_interval"] = 1
    cfg["train"]["epochs"] = 2
    cfg["output_dir"] = str(tmp_path / "out")
    path = tmp_path / "interval.json"
    path.write_text(json.dumps(cfg))
    assert main(["train", "--config", str(path)]) == 0
    out = Path(cfg["output_dir"])
    assert (out / "checkpoint_epoch0001.ckpt").exists()
    assert (out / "checkpoint_epoch0002.ckpt").exists()
    assert (out / "checkpoint.ckpt").exists()
