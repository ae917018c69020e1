import csv
import json
import subprocess
import sys

import pytest

from linpm import cli

BANDIT = '{"variant": "bandit", "params": {"k": 3}}'
ENV = '{"type": "stochastic", "theta": [0.2, 0.0, 0.4], "sigma": 0.1}'


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


def test_classify(capsys):
    assert cli.main(["classify", BANDIT]) == 0
    out = _json_out(capsys)
    assert out["verdict"] == "LocallyObservable"


def test_classify_from_file(tmp_path, capsys):
    path = tmp_path / "g.json"
    path.write_text('{"variant": "composite_cycle", "params": {"k": 9}}')
    assert cli.main(["classify", str(path)]) == 0
    assert _json_out(capsys)["verdict"] == "Hopeless"


def test_constants(tmp_path):
    out = tmp_path / "c.json"
    assert cli.main(["constants", BANDIT, "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert "local_eta_threshold" in data and "global_eta_threshold" in data


def test_run_writes_trace(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    code = cli.main(["run", "--game", BANDIT, "--env", ENV, "--eta", "0.05", "--delta", "0.1",
                     "--T", "20", "--out", str(out)])
    assert code == 0
    summary = _json_out(capsys)
    assert summary["T"] == 20 and "pseudo_regret" in summary
    with open(out) as fh:
        assert len(list(csv.DictReader(fh))) == 20


def test_sweep_writes_outputs(tmp_path, capsys):
    code = cli.main(["sweep", "--game", BANDIT, "--env", ENV, "--eta", "0.05", "--delta", "0.1",
                     "--horizons", "5,10,20", "--repeats", "1", "--csv", str(tmp_path / "s.csv"),
                     "--json", str(tmp_path / "s.json")])
    assert code == 0
    assert json.loads((tmp_path / "s.json").read_text())["horizons"] == [5, 10, 20]
    assert _json_out(capsys)["slope_metric"] == "pseudo_regret"


@pytest.mark.parametrize("argv,code", [
    (["classify", '{"variant": "nope"}'], 2),
    (["classify", "/nonexistent/game.json"], 2),
    (["run", "--game", BANDIT, "--env", '{"type": "zzz"}', "--T", "3"], 2),
    (["run", "--game", BANDIT, "--env", ENV, "--eta", "100", "--delta", "0.01", "--T", "3"], 3),
    (["run", "--game", '{"variant": "composite_cycle", "params": {"k": 9}}',
      "--env", '{"type": "stochastic", "theta": [0,0,0,0,0,0,0,0,0]}', "--T", "3"], 2),
])
def test_exit_codes(argv, code, capsys):
    assert cli.main(argv) == code
    assert "error:" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "linpm", "classify", BANDIT], capture_output=True, text=True)
    assert res.returncode == 0 and "LocallyObservable" in res.stdout
    res = subprocess.run([sys.executable, "-m", "linpm", "classify", '{"variant": "nope"}'],
                         capture_output=True, text=True)
    assert res.returncode == 2
