"""Command-line surface: subcommands, exit codes, end-to-end flows."""

from __future__ import annotations

import json

import pytest

from banglasent.cli import cli_main


class TestExitCodes:
    def test_unknown_subcommand_is_a_usage_error(self, capsys):
        assert cli_main(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_no_arguments_is_a_usage_error(self):
        assert cli_main([]) == 1

    def test_bogus_tag_is_a_usage_error(self, capsys, toy2_path, tmp_path):
        code = cli_main(
            ["run", "bogus_tag_x", "--corpus", str(toy2_path), "--out", str(tmp_path)]
        )
        assert code == 1
        assert "tag" in capsys.readouterr().err.lower()

    def test_missing_corpus_is_a_data_error(self, capsys, tmp_path):
        code = cli_main(
            ["run", "BRBT_bin_FT_ra_1", "--corpus", str(tmp_path / "nope.jsonl"),
             "--out", str(tmp_path), "--epochs", "1"]
        )
        assert code == 2

    def test_unparseable_corpus_is_a_data_error(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("this is not json\n", encoding="utf-8")
        assert cli_main(["agree", str(bad)]) == 2


class TestAgree:
    def test_reference_table(self, capsys, pair_corpus_path):
        assert cli_main(["agree", str(pair_corpus_path)]) == 0
        out = capsys.readouterr().out
        for value in ("2817", "538", "392", "178", "3864", "404", "27", "95", "1022"):
            assert value in out
        assert "7703/9337" in out

    def test_json_artifact(self, capsys, pair_corpus_path, tmp_path):
        assert cli_main(
            ["agree", str(pair_corpus_path), "--json", "--out", str(tmp_path)]
        ) == 0
        payload = json.loads((tmp_path / "agreement.json").read_text())
        assert payload["trace"] == 7703


class TestMatrixListing:
    def test_dry_run_lists_36(self, capsys):
        assert cli_main(["matrix", "--dry-run"]) == 0
        tags = capsys.readouterr().out.strip().splitlines()
        assert len(tags) == 36

    def test_dry_run_with_pretraining_lists_72(self, capsys):
        assert cli_main(["matrix", "--dry-run", "--pretrain"]) == 0
        tags = capsys.readouterr().out.strip().splitlines()
        assert len(tags) == 72
        assert all(tag.endswith(("pre1", "pre2")) for tag in tags)

    def test_matrix_without_corpus_is_a_usage_error(self, capsys):
        assert cli_main(["matrix"]) == 1


class TestPipelineFlow:
    def test_toy_prepare_split_train_eval_plot(self, tmp_path, capsys):
        work = tmp_path / "flow"
        assert cli_main(["toy", "--out", str(work), "--samples", "80", "--seed", "3"]) == 0
        corpus = work / "toy_corpus.jsonl"
        assert corpus.exists()

        assert cli_main(
            ["prepare", str(corpus), "--out", str(work), "--maxlen", "12"]
        ) == 0
        assert (work / "dataset.enc").exists()
        assert (work / "vocab.tsv").exists()

        assert cli_main(
            ["split", str(work / "dataset.enc"), "--out", str(work), "--seed", "1"]
        ) == 0
        for name in ("train.enc", "val.enc", "test.enc"):
            assert (work / name).exists()

        assert cli_main(
            [
                "train",
                "--train", str(work / "train.enc"),
                "--val", str(work / "val.enc"),
                "--epochs", "2", "--batch-size", "8",
                "--hidden", "8", "--embed-dim", "8",
                "--out", str(work), "--seed", "5",
            ]
        ) == 0
        assert (work / "checkpoint.ckpt").exists()
        assert (work / "checkpoint.opt").exists()
        assert (work / "history.csv").exists()

        assert cli_main(
            [
                "eval",
                "--data", str(work / "test.enc"),
                "--checkpoint", str(work / "checkpoint.ckpt"),
            ]
        ) == 0
        result = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert 0.0 <= result["accuracy"] <= 1.0

        assert cli_main(
            ["plot", str(work / "history.csv"), "--out", str(work / "plots")]
        ) == 0
        assert (work / "plots" / "loss.svg").exists()
        assert (work / "plots" / "acc.svg").exists()

    def test_run_single_tag(self, toy2_path, tmp_path, capsys):
        code = cli_main(
            [
                "run", "rb_bin_FT_ra_1",
                "--corpus", str(toy2_path),
                "--out", str(tmp_path),
                "--epochs", "2", "--batch-size", "8",
                "--hidden", "8", "--embed-dim", "8", "--maxlen", "12",
                "--seed", "0",
            ]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["tag"] == "RB_bin_FT_ra_1"
        assert (tmp_path / "RB_bin_FT_ra_1" / "report.json").exists()


class TestConfigFile:
    def test_json_config_supplies_defaults(self, toy2_path, tmp_path, capsys):
        config = tmp_path / "cfg.json"
        config.write_text(
            json.dumps({"epochs": 1, "batch_size": 8, "hidden": 8, "embed_dim": 8, "maxlen": 10}),
            encoding="utf-8",
        )
        code = cli_main(
            [
                "run", "BRBT_bin_FT_ra_1",
                "--corpus", str(toy2_path),
                "--out", str(tmp_path),
                "--config", str(config),
            ]
        )
        assert code == 0
        history = (tmp_path / "BRBT_bin_FT_ra_1" / "history.csv").read_text()
        assert len(history.strip().splitlines()) == 1 + 1  # header + one epoch

    def test_toml_config(self, toy2_path, tmp_path, capsys):
        config = tmp_path / "cfg.toml"
        config.write_text(
            'epochs = 1\nbatch_size = 8\nhidden = 8\nembed_dim = 8\nmaxlen = 10\n',
            encoding="utf-8",
        )
        code = cli_main(
            [
                "run", "BRBT_bin_FT_ra_1",
                "--corpus", str(toy2_path),
                "--out", str(tmp_path),
                "--config", str(config),
            ]
        )
        assert code == 0

    def test_explicit_flags_override_config(self, toy2_path, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"epochs": 9}), encoding="utf-8")
        code = cli_main(
            [
                "run", "BRBT_bin_FT_ra_1",
                "--corpus", str(toy2_path),
                "--out", str(tmp_path),
                "--config", str(config),
                "--epochs", "1", "--batch-size", "8",
                "--hidden", "8", "--embed-dim", "8", "--maxlen", "10",
            ]
        )
        assert code == 0
        history = (tmp_path / "BRBT_bin_FT_ra_1" / "history.csv").read_text()
        assert len(history.strip().splitlines()) == 2

    def test_unknown_config_keys_are_usage_errors(self, toy2_path, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"nonsense": 1}), encoding="utf-8")
        code = cli_main(
            [
                "run", "BRBT_bin_FT_ra_1",
                "--corpus", str(toy2_path),
                "--out", str(tmp_path),
                "--config", str(config),
            ]
        )
        assert code == 1
