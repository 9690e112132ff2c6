import shutil
from pathlib import Path

import numpy as np
import pytest
import scipy.io

from pflab.cli import main
from pflab.manifest import ManifestError, load_manifest

MANIFESTS = Path(__file__).resolve().parents[1] / "manifests"


def copy_manifest(tmp_path, name="smoke.yaml"):
    dst = tmp_path / name
    shutil.copy(MANIFESTS / name, dst)
    return dst


def test_list_suites(capsys):
    assert main(["list-suites"]) == 0
    out = capsys.readouterr().out
    for name in ("fock-algebra", "relative-bound", "graph-norm", "neumann", "smoke"):
        assert name in out


def test_run_writes_outputs_with_headers(tmp_path):
    man = copy_manifest(tmp_path)
    assert main(["run", str(man), "--out", str(tmp_path / "o")]) == 0
    out = tmp_path / "o"
    for fname in ("report.csv", "spectrum.csv", "frontier.csv", "weyl_counting.csv", "manifest.lock"):
        assert (out / fname).exists()
    lines = (out / "report.csv").read_text().splitlines()
    assert lines[0].startswith("# manifest_sha256=") and "seed=7" in lines[0]
    assert lines[1] == "suite,check,constant,observed_ratio,expected_fail,pass"
    assert all(line.endswith(",true") for line in lines[2:])


def test_report_is_byte_identical_across_runs(tmp_path):
    man = copy_manifest(tmp_path)
    main(["run", str(man), "--out", str(tmp_path / "a")])
    main(["run", str(man), "--out", str(tmp_path / "b")])
    for fname in ("report.csv", "spectrum.csv"):
        assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes()


def test_seed_override_changes_header(tmp_path):
    man = copy_manifest(tmp_path)
    main(["run", str(man), "--seed", "11", "--out", str(tmp_path / "o")])
    assert "seed=11" in (tmp_path / "o" / "report.csv").read_text().splitlines()[0]


def test_invalid_alpha_names_the_field(tmp_path, capsys):
    man = copy_manifest(tmp_path)
    man.write_text(man.read_text() + "dispersion: {alpha: 0.5}\n")
    assert main(["run", str(man), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "dispersion.alpha" in err and "alpha >= 1" in err


def test_validation_lists_every_bad_field():
    text = "seed: -1\ndomain: {kind: box, shape: [4], spacing: -0.1}\nfock: {max_quanta: -2}\n"
    with pytest.raises(ManifestError) as exc:
        load_manifest(text=text)
    msg = str(exc.value)
    assert "domain.spacing" in msg and "fock.max_quanta" in msg and "seed" in msg


def test_unknown_suite_lists_valid_names(tmp_path, capsys):
    man = copy_manifest(tmp_path)
    assert main(["run", str(man), "--suite", "nope", "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "nope" in err and "graph-norm" in err


def test_failing_check_exits_one(tmp_path, monkeypatch):
    import pflab.cli as cli
    from pflab.reports import BoundReport
    from pflab.suites import SuiteOutput

    man = copy_manifest(tmp_path)
    bad = SuiteOutput([BoundReport("forced", 1.0, 2.0, 1)])
    monkeypatch.setattr(cli, "run_suite", lambda name, m: bad)
    assert main(["run", str(man), "--out", str(tmp_path / "o")]) == 1


def test_export_operator_round_trip(tmp_path):
    man = copy_manifest(tmp_path)
    path = tmp_path / "h.mtx"
    assert main(["export-operator", str(man), "--format", "matrix-market", "--out", str(path)]) == 0
    m = scipy.io.mmread(str(path)).tocsr()
    assert m.shape[0] == 16 * 15
    assert abs(m - m.conj().T).max() < 1e-12
    assert "manifest_sha256=" in path.read_text().splitlines()[1]
    free = tmp_path / "h0.mtx"
    assert main(["export-operator", str(man), "--operator", "free", "--out", str(free)]) == 0
    assert np.any((m - scipy.io.mmread(str(free)).tocsr()).toarray() != 0)
