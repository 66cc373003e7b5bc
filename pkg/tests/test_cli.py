import json
from pathlib import Path

import pytest

from lipvar.cli import main

CFG = {
    "domain": {
        "phi_breakpoints": [],
        "support_radius": 0.0,
        "box_halfwidth": 5.0,
        "box_height": 5.0,
        "grid_spacing": 0.1,
        "pole": [0.0, 1.0],
        "wos_seed": 7,
    },
    "epsilon": 0.05,
    "u_arc": [-1.0, 1.0],
    "segments": [[0.2, 0.4]],
    "balls": [{"center": [0.0, 0.0], "radius": 0.5},
              {"center": [0.5, 0.0], "radius": 0.4}],
    "z1": [0.0, 2.0],
    "wos_samples": 1500,
}


@pytest.fixture()
def cfg_path(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(CFG))
    return str(p)


def test_solve_then_cache_hit(cfg_path, tmp_path, capsys):
    out = str(tmp_path / "out")
    assert main(["--config", cfg_path, "--out", out, "solve"]) == 0
    first = capsys.readouterr().out
    assert "solved" in first
    assert main(["--config", cfg_path, "--out", out, "solve"]) == 0
    assert "cache hit" in capsys.readouterr().out
    cache = next((tmp_path / "out" / "cache").iterdir())
    assert (cache / "hm_weights.csv").exists()
    assert (cache / "halfplane_oracle.csv").exists()


def test_solve_no_cache_recomputes(cfg_path, tmp_path, capsys):
    out = str(tmp_path / "out")
    main(["--config", cfg_path, "--out", out, "solve"])
    capsys.readouterr()
    assert main(["--config", cfg_path, "--out", out, "--no-cache", "solve"]) == 0
    assert "solved" in capsys.readouterr().out


def test_malformed_json_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"domain": [,]}')
    assert main(["--config", str(p), "--out", str(tmp_path), "solve"]) == 2
    err = capsys.readouterr().err
    assert "line 1" in err and "column" in err


def test_missing_config_key_exits_2(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"domain": {"box_halfwidth": 5.0}}))
    assert main(["--config", str(p), "--out", str(tmp_path), "solve"]) == 2


def test_unknown_suite_exits_2(cfg_path, tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["--config", cfg_path, "--out", str(tmp_path), "verify", "bogus"])
    assert e.value.code == 2


def test_verify_field_passes_and_is_deterministic(cfg_path, tmp_path):
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["--config", cfg_path, "--out", out1, "verify", "field"]) == 0
    assert main(["--config", cfg_path, "--out", out2, "verify", "field"]) == 0
    r1 = Path(out1, "verify_field.json").read_bytes()
    r2 = Path(out2, "verify_field.json").read_bytes()
    assert r1 == r2


def test_verify_all_passes_on_sawtooth(tmp_path):
    cfg = dict(CFG, wos_samples=1200)
    cfg["domain"] = dict(CFG["domain"],
                         phi_breakpoints=[[-1.0, 0.0], [-0.5, 0.5],
                                          [0.0, 0.0], [0.5, 0.5], [1.0, 0.0]],
                         support_radius=1.0)
    p = tmp_path / "saw.json"
    p.write_text(json.dumps(cfg))
    assert main(["--config", str(p), "--out", str(tmp_path / "o"),
                 "verify", "all"]) == 0


def test_verify_omega_large_epsilon_fails(tmp_path):
    # coupling beyond the rough-boundary positivity threshold must trip
    # the omega suite
    big = dict(CFG, epsilon=0.45, u_arc=[-0.3, 0.3])
    big["domain"] = dict(CFG["domain"],
                         phi_breakpoints=[[-1.0, 0.0], [-0.5, 0.5],
                                          [0.0, 0.0], [0.5, 0.5], [1.0, 0.0]],
                         support_radius=1.0)
    p = tmp_path / "big.json"
    p.write_text(json.dumps(big))
    code = main(["--config", str(p), "--out", str(tmp_path / "o"), "verify", "omega"])
    assert code == 1
    rep = json.loads(Path(tmp_path / "o", "verify_omega.json").read_text())
    by_name = {c["name"]: c for c in rep["checks"]}
    assert not by_name["positivity"]["passed"]


def test_probe_writes_reports(cfg_path, tmp_path, capsys):
    out = tmp_path / "p"
    assert main(["--config", cfg_path, "--out", str(out), "probe"]) == 0
    assert (out / "probe_0.json").exists() and (out / "probe_1.json").exists()
    assert (out / "probe_0_V.csv").exists()
    rep = json.loads((out / "probe_0.json").read_text())
    assert rep["chain_ok"] and rep["ratio"] > 0


def test_report_collates(cfg_path, tmp_path):
    out = str(tmp_path / "r")
    main(["--config", cfg_path, "--out", out, "verify", "field"])
    assert main(["--out", out, "report"]) == 0
    merged = json.loads(Path(out, "report.json").read_text())
    assert "verify_field" in merged
    assert Path(out, "checks.csv").exists()


def test_sweep_epsilon_reports_scaling(cfg_path, tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["--config", cfg_path, "--out", str(out), "sweep-epsilon"]) == 0
    rep = json.loads((out / "epsilon_sweep.json").read_text())
    assert set(rep["gap_by_eps"]) == {"0.02", "0.04", "0.08"}
    assert 0.5 < rep["gap_loglog_slope"] < 2.5
    assert rep["positive_epsilon_threshold"] > 0
    assert "0.05" in rep["measure_reports"]


def test_report_empty_dir_exits_2(tmp_path):
    assert main(["--out", str(tmp_path / "empty"), "report"]) == 2


def test_epsilon_out_of_range_exits_2(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(dict(CFG, epsilon=0.9)))
    assert main(["--config", str(p), "--out", str(tmp_path), "solve"]) == 2
