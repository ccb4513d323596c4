import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from road_inspect.cli import main
from road_inspect.manifest import read_all, sha256_file

SMALL_CONFIG = """\
mlp:
  max_epochs: 4
rbf:
  n_centers: 5
  ga: {generations: 4}
  ica: {max_decades: 4}
"""


def _digests(root: Path) -> dict[str, str]:
    return {p.relative_to(root).as_posix(): sha256_file(p) for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "small.yaml").write_text(SMALL_CONFIG)
    assert main(["synth", "--n", "40", "--seed", "3", "--out", "data.csv", "--quiet"]) == 0
    return tmp_path


def test_synth_writes_data_sidecar_and_manifest(workdir):
    assert (workdir / "data.csv").is_file()
    prov = json.loads((workdir / "data.csv.provenance.json").read_text())
    assert prov["seed"] == 3 and prov["n"] == 40
    (rec,) = read_all(workdir)
    assert rec.command == "synth"
    assert set(rec.outputs) == {"data.csv", "data.csv.provenance.json"}
    assert rec.seeds["seed"] == 3


def test_pipeline_and_rerun_are_bit_identical(workdir):
    before = sha256_file(workdir / "data.csv")
    code = main(["pipeline", "--data", "data.csv", "--config", "small.yaml", "--outdir", "run", "--seed", "5", "--quiet"])
    assert code == 0
    assert sha256_file(workdir / "data.csv") == before
    rows = list(csv.DictReader((workdir / "run" / "plots" / "report.csv").open()))
    assert len(rows) == 15
    assert {r["model"] for r in rows} == {"mlp-lm", "mlp-scg", "rbf-ga", "rbf-ica", "cmis"}
    assert {r["split"] for r in rows} == {"Train", "Test", "Total"}
    rec = read_all(workdir / "run")[-1]
    assert rec.config["rbf"]["n_centers"] == 5
    assert rec.inputs["small.yaml"] == sha256_file(workdir / "small.yaml")

    original = _digests(workdir / "run")
    assert main(["rerun", "--manifest", "run", "--target", "again", "--quiet"]) == 0
    again = _digests(workdir / "again")
    for key, digest in rec.outputs.items():
        assert again[key] == digest == original[key]


def test_rerun_detects_changed_inputs(workdir, capsys):
    assert main(["pipeline", "--data", "data.csv", "--config", "small.yaml", "--outdir", "run", "--quiet"]) == 0
    with open(workdir / "data.csv", "a") as fh:
        fh.write("EXTRA,300,200,150,100,80,60,40,50\n")
    assert main(["rerun", "--manifest", "run/manifests.jsonl", "--quiet"]) == 1
    assert "[verify-inputs]" in capsys.readouterr().err


def test_missing_pci_column_fails_at_load(workdir, capsys):
    lines = (workdir / "data.csv").read_text().splitlines()
    bad = workdir / "bad.csv"
    bad.write_text("\n".join(",".join(line.split(",")[:-1]) for line in lines) + "\n")
    assert main(["pipeline", "--data", "bad.csv", "--outdir", "bad", "--quiet"]) == 1
    err = capsys.readouterr().err
    assert "[load]" in err and "pci" in err and "bad.csv" in err
    assert not (workdir / "bad" / "manifests.jsonl").exists()


def test_missing_input_file(workdir, capsys):
    assert main(["train", "--model", "mlp-lm", "--data", "nope.csv", "--out", "m.json"]) == 1
    assert "nope.csv" in capsys.readouterr().err


def test_train_ensemble_evaluate_chain(workdir, capsys):
    assert main(["pipeline", "--data", "data.csv", "--config", "small.yaml", "--outdir", "run", "--quiet"]) == 0
    run = workdir / "run"
    inputs = {p: sha256_file(p) for p in (run / "train_predictions.csv", run / "train.csv", run / "test.csv")}
    assert main(["ensemble", "fit", "--preds", "run/train_predictions.csv", "--out", "cmis.json",
                 "--outdir", "ens", "--quiet"]) == 0
    fitted = json.loads((workdir / "ens" / "cmis.json").read_text())
    piped = json.loads((run / "models" / "cmis.json").read_text())
    assert fitted["coefficients"] == piped["coefficients"]

    members = [f"run/models/{m}.json" for m in ("mlp-lm", "mlp-scg", "rbf-ga", "rbf-ica")]
    assert main(["ensemble", "combine", "--models", *members, "--cmis", "ens/cmis.json",
                 "--data", "run/test.csv", "--out", "combined.csv", "--outdir", "ens", "--quiet"]) == 0
    combined = list(csv.DictReader((workdir / "ens" / "combined.csv").open()))
    assert len(combined) == 8 and "cmis" in combined[0]

    assert main(["evaluate", "--models", *members, "run/models/cmis.json", "--train", "run/train.csv",
                 "--test", "run/test.csv", "--outdir", "ev", "--quiet"]) == 0
    assert (workdir / "ev" / "report.csv").read_bytes() == (run / "plots" / "report.csv").read_bytes()
    assert all(sha256_file(p) == h for p, h in inputs.items())
    assert len(read_all(workdir / "ens")) == 2


def test_train_single_model(workdir):
    assert main(["train", "--model", "rbf-ica", "--data", "data.csv", "--config", "small.yaml",
                 "--neurons", "3", "--out", "rbf.json", "--outdir", "m", "--quiet"]) == 0
    doc = json.loads((workdir / "m" / "rbf.json").read_text())
    assert doc["kind"] == "rbf" and len(doc["centers"]) == 3


def test_output_may_not_overwrite_input(workdir, capsys):
    before = sha256_file(workdir / "small.yaml")
    assert main(["synth", "--out", "small.yaml", "--config", "small.yaml", "--quiet"]) == 1
    assert "overwrite" in capsys.readouterr().err
    assert sha256_file(workdir / "small.yaml") == before


def test_pci_compute_to_stdout(workdir, capsys):
    survey = workdir / "survey.csv"
    survey.write_text("segment_id,distress_kind,severity,density_percent\n"
                      "S1,alligator_cracking,M,10\nS1,rutting,H,3\nS1,patching,L,10\nS2,,,\n")
    assert main(["pci", "compute", "--survey", "survey.csv"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert [(r["segment_id"], float(r["pci"]), r["rating"]) for r in rows] == [("S1", 51.75, "Poor"),
                                                                                ("S2", 100.0, "Good")]


def test_baselines(workdir, capsys):
    assert main(["baseline", "dewan", "--json", '{"iri": 0}']) == 0
    assert json.loads(capsys.readouterr().out) == {"raw": 153.0, "clamped": 100.0}
    assert main(["baseline", "park", "--json", '{"iri": 10}']) == 0
    assert json.loads(capsys.readouterr().out)["raw"] == pytest.approx(36.64, abs=0.005)
    assert main(["baseline", "dewan", "--json", '{"iri": -1}']) == 1
    assert "iri" in capsys.readouterr().err.lower()


def test_bench(workdir):
    assert main(["bench", "--functions", "sphere", "--dim", "2", "--runs", "2", "--outdir", "b", "--quiet"]) == 0
    rows = list(csv.DictReader((workdir / "b" / "bench.csv").open()))
    assert [r["kind"] for r in rows].count("summary") == 2


def test_module_entry_point_with_trailing_global_flags(workdir):
    proc = subprocess.run([sys.executable, "-m", "road_inspect", "synth", "--n", "5", "--out", "x.csv",
                           "--outdir", "o", "--seed", "1"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (workdir / "o" / "x.csv").is_file()


def test_rerun_rebases_absolute_output_paths(workdir):
    out = workdir / "abs" / "d.csv"
    assert main(["synth", "--n", "12", "--out", str(out), "--outdir", "abs", "--quiet"]) == 0
    stamp = out.stat().st_mtime_ns
    assert main(["rerun", "--manifest", "abs", "--target", "copy", "--quiet"]) == 0
    assert sha256_file(workdir / "copy" / "d.csv") == sha256_file(out)
    assert (workdir / "copy" / "d.csv.provenance.json").is_file()
    assert out.stat().st_mtime_ns == stamp
