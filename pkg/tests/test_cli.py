import json
import subprocess
import sys

import numpy as np
import pytest

from qcorr import cli
from qcorr.data import load_sequences


def rows(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


@pytest.fixture(scope="module")
def tiny(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    code = cli.run(["gen-synth", "--random-bbqc", "2", "2", "--count", "60", "--length", "6",
                    "--seed", "3", "--name", "tiny", "--out", str(out)])
    assert code == 0
    return out / "tiny.csv"


def test_gen_synth_outputs(tiny):
    ds = load_sequences(tiny)
    assert (ds.K, ds.n, ds.M) == (60, 6, 2)
    text = tiny.read_text()
    assert text.startswith("# config: ")
    gen = json.loads((tiny.parent / "tiny_generator.json").read_text())
    assert gen["config"]["seed"] == 3 and "U_t" in gen["generator"]


def test_gen_synth_from_checkpoint(tiny, tmp_path):
    code = cli.run(["gen-synth", "--model", str(tiny.parent / "tiny_generator.json"), "--count", "10",
                    "--length", "4", "--out", str(tmp_path)])
    assert code == 0
    assert load_sequences(tmp_path / "synthetic.csv").K == 10


def test_train_hmm(tiny, tmp_path):
    code = cli.run(["train-hmm", "--data", str(tiny), "--hidden", "2", "--epochs", "5",
                    "--trials", "2", "--out", str(tmp_path)])
    assert code == 0
    res = json.loads((tmp_path / "hmm_results.json").read_text())
    assert res["config"]["hidden"] == 2 and res["config"]["seed"] == 0
    assert {r["split"] for r in res["results"]} == {"train", "test"}
    assert set(res["results"][0]) == {"model", "dataset", "split", "k_or_h", "trial", "nll_per_symbol"}
    hist = (tmp_path / "hmm_history_trial00.csv").read_text().splitlines()
    assert hist[0].startswith("# config: ") and hist[1] == "epoch,split,nll_per_symbol"


def test_train_bbqc(tiny, tmp_path):
    code = cli.run(["train-bbqc", "--data", str(tiny), "--bond-dim", "2", "--epochs", "3",
                    "--trials", "2", "--alpha", "0.01", "--out", str(tmp_path)])
    assert code == 0
    res = json.loads((tmp_path / "bbqc_results.json").read_text())
    assert res["config"]["alpha"] == 0.01 and res["config"]["beta"] == 0.5
    assert res["config"]["batch_size"] == 8
    hist = rows(tmp_path / "bbqc_history_trial01.csv")
    assert sum(1 for r in hist if ",test," in r) == 3


def test_separate_test_file(tiny, tmp_path):
    code = cli.run(["train-hmm", "--data", str(tiny), "--test-data", str(tiny), "--epochs", "2",
                    "--trials", "1", "--out", str(tmp_path)])
    assert code == 0
    res = json.loads((tmp_path / "hmm_results.json").read_text())
    nll = {r["split"]: r["nll_per_symbol"] for r in res["results"]}
    assert nll["train"] == pytest.approx(nll["test"])


def compare(tiny, out, extra=()):
    return cli.run(["compare", "--data", str(tiny), "--bond-dims", "1,2", "--epochs", "2",
                    "--trials", "2", "--seed", "5", "--out", str(out), *extra])


def test_compare_schema(tiny, tmp_path):
    assert compare(tiny, tmp_path) == 0
    nll = rows(tmp_path / "nll_comparison.csv")
    assert nll[0] == "k,model,split,trial,nll_per_symbol"
    assert len(nll) == 1 + 2 * 2 * 2 * 2
    thr = rows(tmp_path / "kl_threshold.csv")
    assert thr[0] == "k,delta_kl,threshold_5sigma" and len(thr) == 3
    lr = json.loads((tmp_path / "lr_tests.json").read_text())
    for t in lr["tests"]:
        assert {"lr_statistic", "df", "p_value", "sigma"} <= set(t)
        assert 0 < t["p_value"] <= 1 and t["sigma"] >= 0


def test_compare_byte_identical(tiny, tmp_path, monkeypatch):
    monkeypatch.setenv("QCORR_THREADS", "1")
    assert compare(tiny, tmp_path / "a") == 0
    monkeypatch.setenv("QCORR_THREADS", "2")
    assert compare(tiny, tmp_path / "b") == 0
    for name in ("nll_comparison.csv", "kl_threshold.csv", "lr_tests.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_demo_walk(tmp_path, capsys):
    assert cli.run(["demo-walk", "--max-k", "5", "--out", str(tmp_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    table = report["witness"]["table"]
    assert table[1]["k"] == 1 and table[1]["walk"] == pytest.approx(0.5, abs=1e-15)
    assert len(table) == 6
    assert set(report) >= {"construction", "parameters", "verdict", "witness"}
    assert (tmp_path / "s3_walk.csv").exists() and (tmp_path / "demo_walk.json").exists()


def test_demo_nonlocality(capsys):
    assert cli.run(["demo-nonlocality", "--pairs", "5"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["witness"]["lhv_max_contexts"] == 3
    assert all(not lay["violations"] for lay in report["witness"]["layouts"])
    assert "3/4" in report["verdict"]


def test_demo_nonlocality_positions(capsys):
    assert cli.run(["demo-nonlocality", "--pairs", "7", "--positions", "0", "4", "6"]) == 0
    assert json.loads(capsys.readouterr().out)["parameters"]["layouts"] == [[0, 4, 6]]


def test_demo_nonlocality_no_layout(capsys):
    assert cli.run(["demo-nonlocality", "--pairs", "3"]) == 2
    assert "no admissible signal layout" in capsys.readouterr().err


def test_demo_nonlocality_odd_gap(capsys):
    assert cli.run(["demo-nonlocality", "--pairs", "7", "--positions", "0", "3", "6"]) == 2
    assert "odd gap" in capsys.readouterr().err


def test_demo_contextuality(capsys):
    assert cli.run(["demo-contextuality"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["witness"]["stabilizer_state_counts"] == {"1": 6, "2": 60, "3": 1080}
    assert len(report["witness"]["square"]) == 3


def test_unknown_flag():
    assert cli.run(["demo-walk", "--bogus"]) != 0


def test_missing_file(tmp_path, capsys):
    code = cli.run(["train-hmm", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "cannot load data" in capsys.readouterr().err


def test_bad_hyperparameter(tiny, tmp_path):
    code = cli.run(["train-bbqc", "--data", str(tiny), "--beta", "1.5", "--epochs", "1", "--trials", "1",
                    "--out", str(tmp_path)])
    assert code == 2
    assert not list(tmp_path.iterdir())


def test_partial_outputs_removed(tiny, tmp_path, monkeypatch):
    def fail(self, name, payload):
        raise OSError("disk full")

    monkeypatch.setattr(cli.Artifacts, "json", fail)
    code = cli.run(["train-hmm", "--data", str(tiny), "--epochs", "2", "--trials", "2", "--out", str(tmp_path)])
    assert code == 2
    assert not list(tmp_path.iterdir())


def test_bad_threads(tiny, tmp_path, monkeypatch):
    monkeypatch.setenv("QCORR_THREADS", "many")
    assert cli.run(["train-hmm", "--data", str(tiny), "--epochs", "1", "--trials", "2",
                    "--out", str(tmp_path)]) == 2


def test_trial_seeds_independent_of_count():
    assert cli._trial_seed(0, 3) == cli._trial_seed(0, 3)
    assert len({cli._trial_seed(0, t) for t in range(10)}) == 10


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qcorr", "demo-walk", "--max-k", "2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["config"]["max_k"] == 2


def test_biofam_defaults():
    assert cli._defaults_for("biofam") == {"alpha": 1e-3, "epochs": 75}
    assert cli._defaults_for("spect") == {"alpha": 1e-2, "epochs": 150}
    assert np.isclose(cli.DEFAULT_HOLDOUT, 0.25)
