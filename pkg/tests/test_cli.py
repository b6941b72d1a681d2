import json

from radwalk import cli


TWO_POINT_LAW = {"family": "two_point",
                 "params": {"r_a": 1.0, "p_a": 0.5, "r_b": 1.7320508075688772}}


def _write_manifest(path, entries, seed=7, **extra):
    doc = {"suite": "test", "seed": seed, "entries": entries}
    doc.update(extra)
    path.write_text(json.dumps(doc))
    return path


def test_empty_manifest_gives_header_only_csv(tmp_path):
    manifest = _write_manifest(tmp_path / "m.json", [])
    code = cli.cmd_clt(manifest, tmp_path / "out", workers=1)
    assert code == 0
    lines = (tmp_path / "out" / "summary.csv").read_text().splitlines()
    assert lines[0].startswith("# tool=radwalk")
    assert lines[1] == ",".join(cli.CSV_COLUMNS)
    assert len(lines) == 2


def test_clt_entry_reports_limit_prediction_of_one(tmp_path):
    entries = [{"id": "c0", "kind": "clt", "regime": "CLT_II", "n": 20, "p": 400,
                "trials": 256, "law": TWO_POINT_LAW}]
    manifest = _write_manifest(tmp_path / "m.json", entries)
    cli.cmd_clt(manifest, tmp_path / "out", workers=1)
    rows = (tmp_path / "out" / "summary.csv").read_text().splitlines()[2:]
    fields = rows[0].split(",")
    assert fields[0] == "c0"
    assert float(fields[cli.CSV_COLUMNS.index("predicted_var")]) == 1.0
    report = json.loads((tmp_path / "out" / "c0.json").read_text())
    assert report["meta"]["master_seed"] == 7
    assert report["report"]["config"]["law"] == TWO_POINT_LAW


def test_nonsymmetric_radius_names_atom_index(tmp_path, capsys):
    entries = [{"id": "bad", "kind": "clt", "regime": "CLT_II", "n": 5, "p": 10,
                "trials": 200,
                "law": {"q": 2, "atoms": [
                    {"weight": 1.0, "radius": [1.0, 0.5, 0.0, 1.0]}]}}]
    manifest = _write_manifest(tmp_path / "m.json", entries)
    code = cli.main(["clt", "--manifest", str(manifest), "--out", str(tmp_path / "out")])
    assert code == 2
    err = capsys.readouterr().err
    assert "atoms[0]" in err


def test_duplicate_entry_ids_rejected(tmp_path, capsys):
    entries = [{"id": "x", "kind": "selftest"}, {"id": "x", "kind": "selftest"}]
    manifest = _write_manifest(tmp_path / "m.json", entries)
    code = cli.main(["clt", "--manifest", str(manifest), "--out", str(tmp_path / "out")])
    assert code == 2
    assert "entries[1].id" in capsys.readouterr().err


def test_exit_one_on_failed_verdict(tmp_path):
    # 256 trials cannot yield a PASS verdict (noise floor), so exit is 1
    entries = [{"id": "c0", "kind": "clt", "regime": "CLT_II", "n": 20, "p": 400,
                "trials": 256, "law": TWO_POINT_LAW, "checks": ["exact"]}]
    manifest = _write_manifest(tmp_path / "m.json", entries)
    assert cli.cmd_clt(manifest, tmp_path / "out", workers=1) == 1


def test_selftest_passes_and_seed_override_keeps_verdicts(capsys):
    assert cli.main(["selftest"]) == 0
    first = capsys.readouterr().out
    assert first.count("PASS") == 5
    assert cli.main(["selftest", "--seed", "4242"]) == 0
    second = capsys.readouterr().out
    assert second.count("PASS") == 5


def test_selftest_canary_detects_skewed_kron(monkeypatch, capsys):
    monkeypatch.setenv(cli.ENV_SKEW_KRON, "1")
    assert cli.main(["selftest"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_moments_parity_verdict(tmp_path, capsys):
    law_path = tmp_path / "law.json"
    law_path.write_text(json.dumps({"family": "point_mass", "params": {"radius": 1.0}}))
    code = cli.main(["moments", "--law", str(law_path), "--kappa", "0,0:1;1,0:2",
                     "--p-grid", "10,50", "--trials", "5000",
                     "--out", str(tmp_path / "out"), "--seed", "3"])
    assert code == 0
    assert "parity: PASS" in capsys.readouterr().out
    lines = (tmp_path / "out" / "moments.csv").read_text().splitlines()
    assert lines[1] == "p,estimate,stderr"
    assert len(lines) == 4


def test_moments_decay_slope_near_inverse_p(tmp_path, capsys):
    law_path = tmp_path / "law.json"
    law_path.write_text(json.dumps({"family": "point_mass", "params": {"radius": 1.0}}))
    code = cli.main(["moments", "--law", str(law_path), "--kappa", "0,0:2",
                     "--p-grid", "8,16,32,64,128", "--trials", "20000",
                     "--out", str(tmp_path / "out"), "--seed", "5"])
    assert code == 0
    out = capsys.readouterr().out
    assert "decay: PASS" in out
    slope_line = [l for l in (tmp_path / "out" / "moments.csv").read_text().splitlines()
                  if l.startswith("slope,")][0]
    slope = float(slope_line.split(",")[1])
    assert -1.3 <= slope <= -0.7


def test_moments_short_grid_is_config_error(tmp_path, capsys):
    law_path = tmp_path / "law.json"
    law_path.write_text(json.dumps({"family": "point_mass", "params": {"radius": 1.0}}))
    code = cli.main(["moments", "--law", str(law_path), "--kappa", "0,0:2",
                     "--p-grid", "8", "--trials", "2000", "--out", str(tmp_path / "out")])
    assert code == 2
    assert "p_grid" in capsys.readouterr().err


def test_bad_kappa_spec_is_config_error(tmp_path, capsys):
    law_path = tmp_path / "law.json"
    law_path.write_text(json.dumps({"family": "point_mass", "params": {"radius": 1.0}}))
    code = cli.main(["moments", "--law", str(law_path), "--kappa", "zzz",
                     "--p-grid", "8,16,32", "--trials", "2000", "--out", str(tmp_path / "out")])
    assert code == 2
    assert "kappa" in capsys.readouterr().err


def test_outputs_byte_identical_across_worker_counts(tmp_path):
    entries = [
        {"id": "walk", "kind": "clt", "regime": "MIXED", "n": 12, "p": 12, "trials": 1200,
         "law": TWO_POINT_LAW, "checks": ["exact"]},
        {"id": "algebra", "kind": "selftest", "cases": 10},
    ]
    manifest = _write_manifest(tmp_path / "m.json", entries, seed=2024)
    cli.cmd_clt(manifest, tmp_path / "out1", workers=1)
    cli.cmd_clt(manifest, tmp_path / "out2", workers=3)
    for name in ("summary.csv", "walk.json", "algebra.json"):
        assert (tmp_path / "out1" / name).read_bytes() == (tmp_path / "out2" / name).read_bytes()


def test_seed_override_changes_outputs(tmp_path):
    entries = [{"id": "walk", "kind": "clt", "regime": "CLT_II", "n": 10, "p": 100,
                "trials": 512, "law": TWO_POINT_LAW, "checks": ["exact"]}]
    manifest = _write_manifest(tmp_path / "m.json", entries, seed=1)
    cli.cmd_clt(manifest, tmp_path / "a", workers=1)
    cli.cmd_clt(manifest, tmp_path / "b", workers=1, seed_override=2)
    ra = json.loads((tmp_path / "a" / "walk.json").read_text())
    rb = json.loads((tmp_path / "b" / "walk.json").read_text())
    assert ra["report"]["empirical_cov"] != rb["report"]["empirical_cov"]
    assert rb["meta"]["master_seed"] == 2


def test_csv_floats_round_trip():
    assert cli._fmt(1.792) == "1.792"
    x = 1.0 + 8.0 * 99 / 1000
    assert float(cli._fmt(x)) == x
