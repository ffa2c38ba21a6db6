import csv
import io
import json
import logging

import pytest

from vperturb import cli
from vperturb.sim import CSV_COLUMNS

CFG = {
    "n_antennas": 2,
    "encoders": [{"kind": "fse", "t_count": 3, "p": 1}, {"kind": "lzf"}],
    "snr_db_list": [4.0, 8.0],
    "target_min_bit_errors": 50,
    "max_vectors": 5000,
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(CFG))
    return p


def run(args, capsys):
    code = cli.main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def test_sweep_csv_to_stdout(cfg_path, capsys):
    code, out, _ = run(["sweep", "--config", cfg_path], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == CSV_COLUMNS and len(rows) == 5


def test_sweep_threads_give_same_bytes(cfg_path, tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["sweep", "--config", cfg_path, "--out", a], capsys)[0] == 0
    assert run(["sweep", "--config", cfg_path, "--out", b, "--threads", "0"], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_seed_override(cfg_path, capsys):
    _, out, _ = run(["simulate", "--config", cfg_path, "--seed", "5", "--format", "json"], capsys)
    d = json.loads(out)
    assert d["config"]["seed"] == 5 and d["rows"][0]["seed"] == 5
    assert len(d["rows"]) == 1 and d["rows"][0]["snr_db"] == 4.0


def test_simulate_picks_encoder_and_snr(cfg_path, capsys):
    code, out, _ = run(["simulate", "--config", cfg_path, "--encoder", "1", "--snr", "6"], capsys)
    assert code == 0
    row = list(csv.DictReader(io.StringIO(out)))[0]
    assert row["encoder"] == "LZF" and float(row["snr_db"]) == 6.0


def test_complexity_node_table(capsys):
    code, out, _ = run(["complexity", "--node-table"], capsys)
    assert code == 0
    assert out.splitlines() == ["system,K,qrdme_T9,fse_p1_T9,fse_p2_T3", "4x4,8,576,72,66", "8x8,16,1224,144,138"]


def test_complexity_grid(capsys):
    code, out, _ = run(["complexity", "--k", "8", "--t", "7,9", "--p", "1", "--format", "json"], capsys)
    assert code == 0
    rows = json.loads(out)
    assert [r["rho"] for r in rows] == [0.16, 0.125]


def test_csi_bound(capsys):
    code, out, _ = run(["csi-bound", "--n", "2", "--pairs", "20", "--format", "json"], capsys)
    assert code == 0
    assert json.loads(out)[0]["violations"] == 0


def test_metric_stats(cfg_path, capsys):
    code, out, _ = run(["metric-stats", "--config", cfg_path, "--n", "2", "--realizations", "500"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["encoder"] for r in rows] == ["FSE-p1(T=9)", "FSE-p2(T=3)"]


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_antennas": 2, "snr_db_list": [5, 1]}))
    code, out, err = run(["sweep", "--config", bad], capsys)
    assert code == 2 and out == "" and "config error" in err
    bad.write_text("{not json")
    assert run(["sweep", "--config", bad], capsys)[0] == 2
    bad.write_text("[1, 2]")
    assert run(["sweep", "--config", bad], capsys)[0] == 2
    assert run(["sweep"], capsys)[0] == 2  # no encoders


def test_io_error_exit_code(cfg_path, tmp_path, capsys):
    assert run(["sweep", "--config", tmp_path / "missing.json"], capsys)[0] == 4
    assert run(["sweep", "--config", cfg_path, "--out", tmp_path / "no" / "x.csv"], capsys)[0] == 4


def test_redraw_storm_exit_code(cfg_path, capsys, monkeypatch):
    from vperturb import sim

    real = sim.batch.build_problems
    calls = {"n": 0}

    def flaky(*a, **kw):
        calls["n"] += 1
        if calls["n"] % 2:
            raise sim.RankDeficient("forced")
        return real(*a, **kw)

    monkeypatch.setattr(sim.batch, "build_problems", flaky)
    cfg = dict(CFG, encoders=[{"kind": "fse", "t_count": 3, "p": 1}])
    cfg_path.write_text(json.dumps(cfg))
    code, _, err = run(["sweep", "--config", cfg_path], capsys)
    assert code == 3 and "redrew" in err


def test_quiet_and_log_level(cfg_path, capsys, monkeypatch):
    monkeypatch.setenv("LP_LOG", "INFO")
    _, out, err = run(["simulate", "--config", cfg_path], capsys)
    assert "INFO" in err and "INFO" not in out
    _, _, err = run(["simulate", "--config", cfg_path, "--quiet"], capsys)
    assert err == ""
    logging.getLogger("vperturb").setLevel(logging.WARNING)
