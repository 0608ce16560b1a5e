"""Tag grammar, matrix enumeration, the runner, and curve emission."""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from banglasent import experiments as ex
from banglasent.numerics import LossKind
from banglasent.training import AdamConfig, TrainConfig, TrainingHistory
from banglasent.curves import emit_curves, render_curve_svg

TOY_SETTINGS = ex.RunSettings(maxlen=16, embed_dim=32, hidden=32)


def toy_train_cfg(epochs=12, loss="bin", seed=0):
    kind = (
        LossKind.BINARY_CROSSENTROPY if loss == "bin"
        else LossKind.CATEGORICAL_CROSSENTROPY
    )
    return TrainConfig(
        epochs=epochs, loss=kind, batch_size=16,
        optimizer=AdamConfig(lr=0.01), seed=seed,
    )


class TestParseTag:
    def test_reference_tag(self):
        config = ex.parse_tag("bangla_cat_PN_ra_1")
        assert config.dataset == "Bangla"
        assert config.loss_tag == "cat"
        assert config.text_mode == "PN"
        assert config.label_mod == "ra"
        assert config.vocab_tag == 1
        assert config.n_out == 2

    def test_dataset_token_case_insensitive(self):
        assert ex.parse_tag("BRBT_bin_FT_ra_2").dataset == "BRBT"
        assert ex.parse_tag("brbt_bin_FT_ra_2").dataset == "BRBT"
        assert ex.parse_tag("rb_cat_PN_ato2_1").dataset == "RB"

    def test_bin_with_ato2_rejected(self):
        with pytest.raises(ex.TagError, match="incompatible"):
            ex.parse_tag("brbt_bin_FT_ato2_2")

    def test_unknown_tokens_named(self):
        with pytest.raises(ex.TagError, match="dataset"):
            ex.parse_tag("bogus_bin_FT_ra_1")
        with pytest.raises(ex.TagError, match="loss"):
            ex.parse_tag("brbt_mse_FT_ra_1")
        with pytest.raises(ex.TagError):
            ex.parse_tag("bogus_tag_x")

    def test_pretrain_suffixes(self):
        pre1 = ex.parse_tag("Bangla_cat_PN_ra_1_pre1")
        assert pre1.pretrain_order == "label1_first"
        assert pre1.active_labels == "label2"
        assert pre1.pretrain_labels == "label1"
        pre2 = ex.parse_tag("Bangla_cat_PN_ra_1_pre2")
        assert pre2.active_labels == "label1"

    def test_n_out_mapping(self):
        assert ex.parse_tag("BRBT_bin_FT_ra_1").n_out == 1
        assert ex.parse_tag("BRBT_cat_FT_ra_1").n_out == 2
        assert ex.parse_tag("BRBT_cat_FT_ato2_1").n_out == 3

    def test_round_trip_for_canonical_tags(self):
        for include in (False, True):
            for config in ex.enumerate_matrix(include):
                assert ex.parse_tag(config.tag()) == config
                assert ex.format_tag(ex.parse_tag(config.tag())) == config.tag()


class TestEnumerate:
    def test_thirty_six_without_pretraining(self):
        configs = ex.enumerate_matrix(include_pretrain=False)
        assert len(configs) == 36
        assert len(configs) == 3 * 2 * 3 * 2

    def test_seventy_two_with_pretraining(self):
        assert len(ex.enumerate_matrix(include_pretrain=True)) == 72

    def test_tags_unique_and_sorted(self):
        for include in (False, True):
            tags = [c.tag() for c in ex.enumerate_matrix(include)]
            assert len(set(tags)) == len(tags)
            assert tags == sorted(tags)

    def test_no_bin_ato2_cells(self):
        for config in ex.enumerate_matrix(True):
            assert not (config.loss_tag == "bin" and config.label_mod == "ato2")


class TestSeedDerivation:
    def test_stable_and_tag_dependent(self):
        a = ex.derive_seed(0, "BRBT_bin_FT_ra_1")
        assert a == ex.derive_seed(0, "BRBT_bin_FT_ra_1")
        assert a != ex.derive_seed(1, "BRBT_bin_FT_ra_1")
        assert a != ex.derive_seed(0, "BRBT_bin_FT_ra_2")


class TestRunExperiment:
    def test_report_fields_for_a_two_class_cell(self, toy2_path, tmp_path):
        config = ex.parse_tag("bangla_cat_PN_ra_1")
        report = ex.run_experiment(
            config, toy2_path, tmp_path, toy_train_cfg(loss="cat"), TOY_SETTINGS
        )
        assert report.n_out == 2
        assert report.chance == 0.5
        assert report.margin_over_chance == report.test_accuracy - 0.5
        assert (tmp_path / config.tag() / "report.json").exists()
        assert (tmp_path / config.tag() / "history.csv").exists()
        assert (tmp_path / config.tag() / "loss.svg").exists()
        assert (tmp_path / config.tag() / "acc.svg").exists()
        assert (tmp_path / config.tag() / "checkpoint.ckpt").exists()
        payload = json.loads((tmp_path / config.tag() / "report.json").read_text())
        assert payload["tag"] == "Bangla_cat_PN_ra_1"
        assert payload["chance"] == 0.5

    def test_same_seed_reruns_identically(self, toy2_path, tmp_path):
        config = ex.parse_tag("RB_bin_FT_ra_1")
        first = ex.run_experiment(
            config, toy2_path, tmp_path / "a", toy_train_cfg(epochs=6), TOY_SETTINGS
        )
        second = ex.run_experiment(
            config, toy2_path, tmp_path / "b", toy_train_cfg(epochs=6), TOY_SETTINGS
        )
        assert first.test_accuracy == second.test_accuracy
        assert first.history.loss == second.history.loss

    def test_three_class_cell(self, toy3_path, tmp_path):
        config = ex.parse_tag("BRBT_cat_PN_ato2_2")
        report = ex.run_experiment(
            config, toy3_path, tmp_path, toy_train_cfg(loss="cat"), TOY_SETTINGS
        )
        assert report.n_out == 3
        assert report.chance == pytest.approx(1 / 3)

    def test_pretraining_cell_writes_both_histories(self, toy2_path, tmp_path):
        config = ex.parse_tag("BRBT_bin_PN_ra_1_pre1")
        report = ex.run_experiment(
            config,
            toy2_path,
            tmp_path,
            toy_train_cfg(epochs=4),
            ex.RunSettings(maxlen=16, embed_dim=32, hidden=32, pretrain_epochs=3),
        )
        assert report.pretrain_history is not None
        assert len(report.pretrain_history) == 3
        assert len(report.history) == 4
        assert (tmp_path / config.tag() / "pretrain_history.csv").exists()

    def test_errors_carry_the_tag(self, tmp_path, toy2_path):
        config = ex.parse_tag("Bangla_bin_PN_ra_1")
        with pytest.raises(RuntimeError, match="Bangla_bin_PN_ra_1"):
            ex.run_experiment(
                config, tmp_path / "missing.jsonl", tmp_path, toy_train_cfg()
            )

    def test_empty_filter_is_a_wrapped_error(self, tmp_path):
        from banglasent.corpus import TextSample, save_corpus
        from banglasent.annotations import Label

        rows = [
            TextSample(i, f"only latin words {i}", None, Label.POSITIVE, Label.POSITIVE, "news")
            for i in range(4)
        ]
        path = tmp_path / "latin.jsonl"
        save_corpus(rows, path)
        with pytest.raises(RuntimeError, match="Bangla"):
            ex.run_experiment(
                ex.parse_tag("Bangla_bin_FT_ra_1"), path, tmp_path, toy_train_cfg()
            )

    def test_rerun_replaces_only_its_own_directory(self, toy2_path, tmp_path):
        cfg = toy_train_cfg(epochs=2)
        first = ex.parse_tag("RB_bin_FT_ra_1")
        second = ex.parse_tag("RB_bin_FT_ra_2")
        ex.run_experiment(first, toy2_path, tmp_path, cfg, TOY_SETTINGS)
        marker = tmp_path / first.tag() / "stale.txt"
        marker.write_text("old")
        ex.run_experiment(second, toy2_path, tmp_path, cfg, TOY_SETTINGS)
        assert marker.exists()  # untouched by the other tag
        ex.run_experiment(first, toy2_path, tmp_path, cfg, TOY_SETTINGS)
        assert not marker.exists()


class TestCurves:
    def _history(self, epochs):
        history = TrainingHistory()
        for e in range(epochs):
            history.append(1.0 / (e + 1), 1.2 / (e + 1), 0.5 + 0.04 * e, 0.5 + 0.03 * e)
        return history

    def test_files_and_csv_rows(self, tmp_path):
        history = self._history(5)
        paths = emit_curves(history, tmp_path)
        csv_lines = (tmp_path / "history.csv").read_text().strip().splitlines()
        assert len(csv_lines) == 5 + 1
        for key in ("loss_svg", "acc_svg"):
            ET.parse(paths[key])  # valid XML

    def test_one_polyline_per_series_with_epoch_points(self, tmp_path):
        epochs = 7
        paths = emit_curves(self._history(epochs), tmp_path)
        tree = ET.parse(paths["loss_svg"])
        ns = {"svg": "http://www.w3.org/2000/svg"}
        polylines = tree.getroot().findall(".//svg:polyline", ns)
        assert len(polylines) == 2
        for line in polylines:
            assert len(line.get("points").split()) == epochs

    def test_single_epoch_history_renders_markers(self, tmp_path):
        paths = emit_curves(self._history(1), tmp_path)
        tree = ET.parse(paths["loss_svg"])
        ns = {"svg": "http://www.w3.org/2000/svg"}
        assert len(tree.getroot().findall(".//svg:circle", ns)) == 2
        for line in tree.getroot().findall(".//svg:polyline", ns):
            assert len(line.get("points").split()) == 1

    def test_empty_history_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_curves(TrainingHistory(), tmp_path)
        with pytest.raises(ValueError):
            render_curve_svg("x", [("loss", [])])

    def test_legend_and_series_names_present(self, tmp_path):
        paths = emit_curves(self._history(3), tmp_path)
        text = open(paths["acc_svg"], encoding="utf-8").read()
        assert "val_acc" in text and "acc" in text
