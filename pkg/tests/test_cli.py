"""Command-line entry points: outputs, manifests, exit codes."""

import json
import time

import numpy as np
import pytest

from ballchain.cli import main


def _run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_design_defaults(capsys):
    t0 = time.perf_counter()
    code, out, _ = _run(capsys, ["design"])
    elapsed = time.perf_counter() - t0
    assert code == 0
    doc = json.loads(out)
    assert doc["diameter_mm"] == pytest.approx(119.2831204825577, rel=1e-9)
    assert doc["mass_kg"] == pytest.approx(6.664949471981724, rel=1e-9)
    assert doc["residual"] < 1e-12
    assert doc["inter_magnet_force_gf"] == pytest.approx(249.92, rel=1e-3)
    assert elapsed < 1.0


def test_design_writes_out_and_manifest(tmp_path, capsys):
    out = tmp_path / "design.json"
    code, stdout, _ = _run(capsys, ["design", "--out", str(out)])
    assert code == 0
    assert stdout == ""
    doc = json.loads(out.read_text())
    assert "diameter_mm" in doc
    manifest = json.loads((tmp_path / "design.json.run.json").read_text())
    assert manifest["command"] == "design"
    assert str(out) in manifest["outputs"]
    assert manifest["created"]  # ISO timestamp lives only in the manifest
    assert "created" not in doc


def test_design_is_deterministic(capsys):
    _, out1, _ = _run(capsys, ["design"])
    _, out2, _ = _run(capsys, ["design"])
    assert out1 == out2


def test_solve_zero_field_is_straight(capsys):
    code, out, _ = _run(capsys, ["solve", "--config", "zero-field"])
    assert code == 0
    doc = json.loads(out)
    assert doc["n"] == 8
    d = 3.175e-3
    np.testing.assert_allclose(doc["tip"], [7 * d, 0.0, 0.0], atol=1e-9 * d)
    for k, p in enumerate(doc["positions"]):
        np.testing.assert_allclose(p, [k * d, 0.0, 0.0], atol=1e-9 * d)


def test_solve_transverse_field_alignment(capsys):
    code, out, _ = _run(capsys, ["solve", "--config", "fig5", "--angle", "90"])
    assert code == 0
    doc = json.loads(out)
    assert doc["n"] == 10
    assert doc["converged"]
    assert doc["alignment_deg"] < 1.4


def test_solve_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = _run(capsys, ["solve", "--config", str(bad)])
    assert code == 2
    assert "error" in err
    code, _, err = _run(capsys, ["solve", "--config",
                                 str(tmp_path / "missing.json")])
    assert code == 2


def test_align_csv_shape(capsys):
    code, out, _ = _run(capsys, ["align", "--lengths", "1:4",
                                 "--angles", "0:90:45"])
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "length,angle_deg,alignment_deg"
    assert len(lines) == 1 + 4 * 3
    assert lines[1].split(",")[:2] == ["1", "0"]


def test_reconfig_monotone_and_exit_codes(capsys):
    code, out, _ = _run(capsys, ["reconfig", "--start-angle", "120"])
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "step,angle_deg"
    angles = [float(line.split(",")[1]) for line in lines[1:]]
    assert angles[0] == pytest.approx(120.0, abs=1e-6)
    assert all(b < a for a, b in zip(angles, angles[1:]))
    assert angles[-1] <= 0.5

    code, _, err = _run(capsys, ["reconfig", "--start-angle", "120",
                                 "--max-steps", "3"])
    assert code == 1
    assert "did not converge" in err


def test_sweep_ratio(capsys):
    code, out, _ = _run(capsys, ["sweep", "--angles", "0:180:45",
                                 "--lengths", "2,4"])
    assert code == 0
    doc = json.loads(out)
    assert set(doc["areas_mm2"]) == {"sleeve_on", "sleeve_off"}
    assert 0.0 < doc["area_ratio"] <= 1.001
    assert doc["tips_mm"]["4"]


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--frobnicate"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_missing_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    capsys.readouterr()
