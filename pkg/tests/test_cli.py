import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from gfdetect.cli import main
from gfdetect.pilot import PilotSpec, generate_zc

SYS = ["--antennas", "64", "--pilot-len", "7", "--users", "20", "--arrival", "0.2"]


def run(argv):
    out = io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_pilot_dump():
    code, text = run(["pilot", "dump", "--length", "5", "--root", "2", "--shift", "1"])
    assert code == 0
    data = rows(text)
    z = np.array([complex(float(r["re"]), float(r["im"])) for r in data])
    np.testing.assert_array_equal(z, generate_zc(PilotSpec(5, 2, 1)))


def test_threshold_and_pfa_agree():
    code, t = run(["threshold", *SYS, "--header"])
    assert code == 0
    code, p = run(["pfa", *SYS, "--header"])
    (tr,), (pr,) = rows(t), rows(p)
    assert tr["omega"] == pr["omega"] and tr["pfa"] == pr["pfa"]
    code, p2 = run(["pfa", *SYS, "--header", "--omega", tr["omega"]])
    assert rows(p2)[0]["pfa"] == tr["pfa"]


def test_threshold_without_header_is_one_line():
    code, text = run(["threshold", *SYS])
    assert code == 0 and text.count("\n") == 1


def test_kmax_and_minlen():
    code, text = run(["kmax", "--antennas", "512", "--pilot-len", "97", "--arrival", "0.1", "--header"])
    assert code == 0 and rows(text)[0]["kmax"] == "4846"
    code, text = run(["minlen", "--antennas", "512", "--pilot-len", "97", "--arrival", "0.1", "--header"])
    assert rows(text)[0]["min_pilot_len"] == "71"
    code, text = run(["kmax", "--antennas", "1", "--pilot-len", "3", "--arrival", "0.5", "--po", "0.25",
                      "--header"])
    assert rows(text)[0]["status"] == "unsatisfiable"


def test_default_users_is_capped_kmax():
    code, text = run(["threshold", "--antennas", "512", "--pilot-len", "7", "--arrival", "0.1", "--header"])
    assert code == 0 and rows(text)[0]["K"] == "42"


def test_simulate_reproducible():
    argv = ["simulate", *SYS, "--trials", "4000", "--seed", "5", "--header"]
    a, b = run(argv), run(argv + ["--workers", "2"])
    assert a == b and a[0] == 0
    r = rows(a[1])[0]
    assert r["trials"] == "4000" and r["mode"] == "model_faithful"


def test_sweep_command(tmp_path):
    cfg = dict(axis="antennas_M", grid=[32, 64], pd_targets=[0.9], pilot_length_L=7,
               arrival_rate_PA=0.2, outage_PO=0.1)
    path = tmp_path / "s.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "o.csv"
    assert main(["sweep", "--config", str(path), "--out", str(out), "--workers", "1"]) == 0
    assert len(rows(out.read_text())) == 2


def test_fig2_to_stdout():
    code, text = run(["fig2", "--out", "-", "--workers", "1"])
    assert code == 0
    assert len(rows(text)) == 15


@pytest.mark.parametrize("argv", [
    ["threshold", "--antennas", "64", "--pilot-len", "8", "--users", "5", "--arrival", "0.2"],
    ["threshold", "--antennas", "64", "--pilot-len", "7", "--users", "50", "--arrival", "0.2"],
    ["threshold", "--antennas", "1", "--pilot-len", "7", "--users", "5", "--arrival", "0.2"],
    ["pilot", "dump", "--length", "4", "--root", "1"],
])
def test_config_errors_exit_2(argv, capsys):
    assert main(argv, out=io.StringIO()) == 2
    assert "gfdetect:" in capsys.readouterr().err


def test_bad_sweep_file_exit_2(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"axis": "antennas_M", "grid": [16], "pd_targets": [0.9], "typo": 1}))
    assert main(["sweep", "--config", str(path), "--out", str(tmp_path / "o.csv")]) == 2


def test_unwritable_output_exit_3(tmp_path):
    assert main(["fig2", "--out", str(tmp_path / "nope" / "o.csv")]) == 3


def test_module_entry_point_with_fallback_backend():
    env = dict(os.environ, GFDETECT_BACKEND="python")
    argv = [sys.executable, "-m", "gfdetect", "threshold", *SYS]
    fallback = subprocess.run(argv, env=env, capture_output=True, text=True, check=True).stdout
    code, default = run(["threshold", *SYS])
    a, b = fallback.strip().split(","), default.strip().split(",")
    assert a[:10] == b[:10]
    assert float(a[11]) == pytest.approx(float(b[11]), rel=1e-12)
