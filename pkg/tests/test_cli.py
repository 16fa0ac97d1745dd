import csv
import json
from pathlib import Path
from typing import Any, Dict

import pytest

from cli.commands import parse_variant
from cli.config import apply_overrides, load_run_config
from cli.main import build_parser, main
from hmil.tensor import BACKWARD_RULES, Matrix, Node
from shared.errors import (
    ConfigError,
    DatasetError,
    EXIT_OK,
    EXIT_RUNTIME,
    EXIT_THRESHOLD,
    EXIT_VALIDATION,
    NumericError,
    ThresholdBreach,
    exit_code_for,
)


SMALL_RUN: Dict[str, Any] = {
    "seed": 0,
    "synthetic": {
        "d_c": 8,
        "bags_per_fine_class": 10,
        "instances_range": [3, 6],
        "witness_rate": 0.5,
        "seed": 3,
    },
    "train": {"epochs": 2, "batch_size": 8, "learning_rate": 0.01},
    "eval": {"bootstrap": 5},
    "gradcheck": {"d_c": 8, "max_instances": 4, "bags_per_fine_class": 1, "threshold": 1e-2},
    "compare": {"variants": ["full", "abmil"], "seeds": [0, 1], "workers": 1},
}


@pytest.fixture()
def run_config(tmp_path: Path) -> Path:
    path = tmp_path / "run_config.json"
    path.write_text(json.dumps(SMALL_RUN), encoding="utf-8")
    return path


def _gen(tmp_path: Path, run_config: Path) -> Path:
    out = tmp_path / "data"
    assert main(["gen", "--config", str(run_config), "--out", str(out)]) == EXIT_OK
    return out / "manifest.json"


def test_gen_writes_dataset(tmp_path: Path, run_config: Path, capsys: pytest.CaptureFixture) -> None:
    manifest = _gen(tmp_path, run_config)
    summary = json.loads(capsys.readouterr().out)
    assert summary["bags"] == 40
    assert summary["d"] == 8
    assert manifest.exists()
    assert len(list((manifest.parent / "bags").glob("*.hmb"))) == 40
    record = json.loads((manifest.parent / "run.json").read_text(encoding="utf-8"))
    assert record["command"] == "gen"


def test_gen_refuses_non_empty_directory(tmp_path: Path, run_config: Path) -> None:
    _gen(tmp_path, run_config)
    out = str(tmp_path / "data")
    assert main(["gen", "--config", str(run_config), "--out", out]) == EXIT_VALIDATION
    assert main(["gen", "--config", str(run_config), "--out", out, "--force"]) == EXIT_OK


def test_gen_force_removes_stale_bags(tmp_path: Path, run_config: Path) -> None:
    manifest = _gen(tmp_path, run_config)
    (manifest.parent / "notes.txt").write_text("keep", encoding="utf-8")
    smaller = json.loads(json.dumps(SMALL_RUN))
    smaller["synthetic"]["bags_per_fine_class"] = 5
    smaller_path = tmp_path / "smaller.json"
    smaller_path.write_text(json.dumps(smaller), encoding="utf-8")

    out = str(manifest.parent)
    assert main(["gen", "--config", str(smaller_path), "--out", out, "--force"]) == EXIT_OK
    files = sorted(p.name for p in (manifest.parent / "bags").glob("*.hmb"))
    listed = sorted(Path(e["file"]).name for e in json.loads(manifest.read_text(encoding="utf-8"))["bags"])
    assert len(files) == 20
    assert files == listed
    assert (manifest.parent / "notes.txt").read_text(encoding="utf-8") == "keep"


def test_gen_seed_sets_generator_seed(tmp_path: Path, run_config: Path) -> None:
    for name, seed in (("a", "7"), ("b", "7"), ("c", "8")):
        assert main(["gen", "--config", str(run_config), "--out", str(tmp_path / name), "--seed", seed]) == 0
    first = sorted((tmp_path / "a" / "bags").glob("*.hmb"))[0].name
    read = lambda d: (tmp_path / d / "bags" / first).read_bytes()  # noqa: E731
    assert read("a") == read("b")
    assert read("a") != read("c")


def test_train_then_eval(tmp_path: Path, run_config: Path, capsys: pytest.CaptureFixture) -> None:
    manifest = _gen(tmp_path, run_config)
    out = tmp_path / "run"
    base = ["--config", str(run_config), "--dataset", str(manifest), "--out", str(out)]
    capsys.readouterr()

    assert main(["train", *base]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["model"] == "hmil" and summary["epochs"] == 2
    history = (out / "history.jsonl").read_text(encoding="utf-8").splitlines()
    assert [json.loads(line)["beta"] for line in history] == [1.0, 0.5]
    assert (out / "checkpoint.hmil").exists()

    assert main(["eval", *base]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["model"] == "hmil" and report["split"] == "test"
    assert report["n"] == 8
    assert report["fine"]["bootstrap"]["macro_auc"]["replicates"] <= 5
    assert json.loads((out / "report.json").read_text(encoding="utf-8")) == report
    with (out / "report.csv").open(encoding="utf-8") as fh:
        assert len(list(csv.DictReader(fh))) == 6


def test_train_is_reproducible_and_replayable(tmp_path: Path, run_config: Path) -> None:
    for name in ("a", "b"):
        assert main(["train", "--config", str(run_config), "--out", str(tmp_path / name)]) == EXIT_OK
    history = lambda d: (tmp_path / d / "history.jsonl").read_bytes()  # noqa: E731
    assert history("a") == history("b")

    replay = tmp_path / "a" / "run.json"
    assert main(["train", "--config", str(replay), "--out", str(tmp_path / "replay")]) == EXIT_OK
    assert history("replay") == history("a")


def test_train_flat_baseline(tmp_path: Path, run_config: Path) -> None:
    out = tmp_path / "abmil"
    assert main(["train", "--config", str(run_config), "--model", "abmil", "--out", str(out)]) == EXIT_OK
    record = json.loads((out / "history.jsonl").read_text(encoding="utf-8").splitlines()[0])
    assert "ce_f" in record
    for absent in ("ia", "ba", "reg", "beta"):
        assert absent not in record
    assert main(["eval", "--config", str(run_config), "--bootstrap", "0", "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["model"] == "abmil"
    assert report["hierarchy_consistency"] is None
    assert report["fine"]["bootstrap"] is None


def test_train_kfold(tmp_path: Path, run_config: Path) -> None:
    out = tmp_path / "fold"
    assert main(["train", "--config", str(run_config), "--kfold", "5:2", "--out", str(out)]) == EXIT_OK
    record = json.loads((out / "run.json").read_text(encoding="utf-8"))
    assert record["config"]["split"] == {"kind": "kfold", "k": 5, "fold_index": 2}


@pytest.mark.parametrize(
    "argv",
    [
        ["train", "--loss", "fancy"],
        ["train", "--kfold", "ten:1"],
        ["train", "--dataset", "does/not/exist.json"],
        ["eval", "--checkpoint", "missing.hmil"],
    ],
)
def test_validation_failures_exit_1(tmp_path: Path, run_config: Path, argv) -> None:
    argv = [*argv, "--config", str(run_config), "--out", str(tmp_path / "x")]
    assert main(argv) == EXIT_VALIDATION


def test_eval_rejects_incompatible_checkpoint(tmp_path: Path, run_config: Path) -> None:
    out = tmp_path / "run"
    assert main(["train", "--config", str(run_config), "--out", str(out)]) == EXIT_OK
    wide = dict(SMALL_RUN, synthetic={**SMALL_RUN["synthetic"], "d_c": 12})
    other = tmp_path / "wide.json"
    other.write_text(json.dumps(wide), encoding="utf-8")
    assert main(["eval", "--config", str(other), "--out", str(out)]) == EXIT_VALIDATION


def test_gradcheck_reports_every_component(tmp_path: Path, run_config: Path) -> None:
    out = tmp_path / "gc"
    assert main(["gradcheck", "--config", str(run_config), "--out", str(out)]) == EXIT_OK
    rows = json.loads((out / "gradcheck.json").read_text(encoding="utf-8"))
    assert [r["component"] for r in rows] == ["ce_c", "ce_f", "ia", "ba", "reg", "combined"]
    assert all(r["ok"] for r in rows)


def test_gradcheck_reads_only_the_dataset_taxonomy(tmp_path: Path, run_config: Path) -> None:
    manifest = _gen(tmp_path, run_config)
    for path in (manifest.parent / "bags").glob("*.hmb"):
        path.unlink()
    out = tmp_path / "gc"
    args = ["gradcheck", "--config", str(run_config), "--dataset", str(manifest), "--out", str(out)]
    assert main(args) == EXIT_OK
    assert len(json.loads((out / "gradcheck.json").read_text(encoding="utf-8"))) == 6


def test_gradcheck_detects_broken_rule(
    tmp_path: Path, run_config: Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    def broken_tanh(node: Node, g: Matrix, p):
        return (g * (1.0 - node.value**2) * 1.5,)

    monkeypatch.setitem(BACKWARD_RULES, "tanh", broken_tanh)
    out = tmp_path / "gc"
    assert main(["gradcheck", "--config", str(run_config), "--out", str(out)]) == EXIT_THRESHOLD
    rows = json.loads((out / "gradcheck.json").read_text(encoding="utf-8"))
    assert not next(r for r in rows if r["component"] == "combined")["ok"]


def test_compare_tabulates_variants(tmp_path: Path, run_config: Path) -> None:
    out = tmp_path / "cmp"
    assert main(["compare", "--config", str(run_config), "--out", str(out)]) == EXIT_OK
    with (out / "compare.csv").open(encoding="utf-8") as fh:
        table = list(csv.DictReader(fh))
    assert [row["variant"] for row in table] == ["full", "abmil"]
    assert all(row["runs"] == "2" for row in table)
    assert table[1]["consistency_mean"] == ""
    payload = json.loads((out / "compare.json").read_text(encoding="utf-8"))
    assert [(r["variant"], r["seed"]) for r in payload["runs"]] == [
        ("full", 0),
        ("full", 1),
        ("abmil", 0),
        ("abmil", 1),
    ]


def test_compare_rejects_unknown_variant(tmp_path: Path, run_config: Path) -> None:
    bad = dict(SMALL_RUN, compare={"variants": ["full", "no-such-thing"], "seeds": [0]})
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad), encoding="utf-8")
    assert main(["compare", "--config", str(path), "--out", str(tmp_path / "cmp")]) == EXIT_VALIDATION
    assert not (tmp_path / "cmp" / "compare.csv").exists()


@pytest.mark.parametrize(
    "variant, expected",
    [
        ("full", {}),
        ("no-ham+no-hba", {"train.ham": False, "train.hba": False}),
        ("no-ofr+static:1,0.1", {"model_options.use_ofr": False, "train.loss_mode": "static:1,0.1"}),
        ("abmil", {"model": "abmil"}),
        ("tau:0.5", {"train.tau": 0.5}),
    ],
)
def test_parse_variant(variant: str, expected) -> None:
    assert parse_variant(variant) == expected


@pytest.mark.parametrize("variant", ["bogus", "static:1", "tau:x"])
def test_parse_variant_errors(variant: str) -> None:
    with pytest.raises(ConfigError):
        parse_variant(variant)


def test_apply_overrides_ignores_none_and_revalidates() -> None:
    cfg = load_run_config(None)
    out = apply_overrides(cfg, {"train.tau": 0.2, "seed": None, "model_options.use_ofr": False})
    assert out.train.tau == 0.2
    assert out.seed == cfg.seed
    assert out.model_options.use_ofr is False
    assert out.synthetic is not None and out.synthetic.taxonomy.fine[0] == "normal"


def test_load_run_config_errors(tmp_path: Path) -> None:
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(bad)
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(bad)
    with pytest.raises(FileNotFoundError):
        load_run_config(tmp_path / "absent.json")


@pytest.mark.parametrize(
    "exc, code",
    [
        (ThresholdBreach("x"), EXIT_THRESHOLD),
        (ConfigError("x"), EXIT_VALIDATION),
        (DatasetError("x"), EXIT_VALIDATION),
        (FileNotFoundError("x"), EXIT_VALIDATION),
        (NumericError("x"), EXIT_RUNTIME),
        (RuntimeError("x"), EXIT_RUNTIME),
    ],
)
def test_exit_codes(exc: BaseException, code: int) -> None:
    assert exit_code_for(exc) == code


def test_parser_rejects_unknown_command() -> None:
    with pytest.raises(SystemExit):
        build_parser().parse_args(["explode"])
