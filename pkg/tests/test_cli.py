import json

import numpy as np
import pytest

from gfgl import __version__
from gfgl.cli import main
from gfgl.fileio import read_series_csv, read_simspec_config, truth_from_dict

SIM_CONFIG = """# two-block design
p = 4
T = 60
true_changepoints = 31
edge_count = 2
base_diagonal = 0.5
min_jump = 2   # Frobenius norm
"""


@pytest.fixture
def simulated(tmp_path):
    cfg = tmp_path / "sim.txt"
    cfg.write_text(SIM_CONFIG)
    data, truth = tmp_path / "d.csv", tmp_path / "t.json"
    code = main(["simulate", "--config", str(cfg), "--seed", "3",
                 "--data", str(data), "--truth", str(truth)])
    assert code == 0
    return tmp_path, data, truth


def test_simulate_outputs(simulated):
    _, data, truth = simulated
    series = read_series_csv(data)
    assert (series.T, series.p) == (60, 4)
    t = json.loads(truth.read_text())
    assert t["format"] == "gfgl-truth/1"
    assert t["changepoints"] == [31]
    assert t["eta_min"] >= 2
    assert truth_from_dict(t).T == 60
    assert len(t["edge_sets"]) == 2


def test_simulate_is_seeded(tmp_path, simulated):
    _, data, _ = simulated
    cfg = tmp_path / "sim.txt"
    again = tmp_path / "again.csv"
    main(["simulate", "--config", str(cfg), "--seed", "3", "--data", str(again),
          "--truth", str(tmp_path / "t2.json")])
    assert again.read_bytes() == data.read_bytes()


def test_round_trip_path_fit_evaluate(simulated):
    tmp, data, truth = simulated
    path_out, fit_out, ev_out = tmp / "path.json", tmp / "fit.json", tmp / "eval.json"
    code = main(["path", "--input", str(data), "--lambda1", "0.05", "--target-k", "1",
                 "--ratio", "0.1", "--output", str(path_out), "--fit-output", str(fit_out)])
    assert code == 0
    path = json.loads(path_out.read_text())
    assert path["selected"]["n_changepoints"] == 1
    fit = json.loads(fit_out.read_text())
    assert fit["format"] == "gfgl-fit/1"
    assert abs(fit["changepoints"][0] - 31) <= 3
    code = main(["evaluate", "--fit", str(fit_out), "--truth", str(truth),
                 "--delta-t", "0.05", "--output", str(ev_out)])
    assert code == 0
    ev = json.loads(ev_out.read_text())
    assert ev["cp_count_error"] == 0
    assert ev["cp_max_error"] == abs(fit["changepoints"][0] - 31)
    assert "beta3" in ev["constants"]
    assert len(ev["sign_consistency"]) == 2


def test_fit_report_contents(simulated, capsys):
    _, data, _ = simulated
    code = main(["fit", "--input", str(data), "--lambda1", "0.05", "--lambda2", "5",
                 "--history", "--threads", "1"])
    assert code == 0
    rep = json.loads(capsys.readouterr().out)
    assert set(rep) >= {"changepoints", "block_precisions", "jump_norms", "objective",
                        "iterations", "converged", "residuals", "config", "history"}
    assert len(rep["jump_norms"]) == 60
    assert len(rep["block_precisions"]) == len(rep["changepoints"]) + 1
    assert rep["config"]["lambda2"] == 5.0


def test_json_keeps_full_precision(simulated, capsys):
    _, data, _ = simulated
    main(["fit", "--input", str(data), "--lambda1", "0.05", "--lambda2", "50"])
    text = capsys.readouterr().out
    rep = json.loads(text)
    assert repr(rep["objective"]) in text
    digits = len(repr(rep["objective"]).replace("-", "").replace(".", "").lstrip("0"))
    assert digits >= 15


def test_planted_changepoint_recovered(tmp_path):
    csv = tmp_path / "x.csv"
    csv.write_text("0.5,0.3\n-0.6,-0.2\n3.0,1.0\n-2.5,-1.2\n")
    out = tmp_path / "fit.json"
    assert main(["fit", "--input", str(csv), "--lambda1", "0.1", "--lambda2", "4",
                 "--output", str(out)]) == 0
    assert json.loads(out.read_text())["changepoints"] == [3]


def test_exit_codes(tmp_path, capsys):
    good = tmp_path / "x.csv"
    good.write_text("a,b\n1,2\n3,4\n")
    assert main(["fit", "--input", str(good), "--lambda1", "0", "--lambda2", "1"]) == 2
    assert "lambda1 must be positive" in capsys.readouterr().err
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["fit", "--input", str(empty), "--lambda1", "0.1", "--lambda2", "1"]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,x\n")
    assert main(["fit", "--input", str(bad), "--lambda1", "0.1", "--lambda2", "1"]) == 2
    assert "line 2, column 2" in capsys.readouterr().err
    assert main(["fit", "--input", str(tmp_path / "nope.csv"), "--lambda1", "0.1",
                 "--lambda2", "1"]) == 2
    dead = tmp_path / "dead.csv"
    dead.write_text("1,0\n2,0\n-1,0\n")
    assert main(["fit", "--input", str(dead), "--lambda1", "0.1", "--lambda2", "1"]) == 3
    assert "unbounded" in capsys.readouterr().err


def test_simulate_requires_seed(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--p", "3", "--T", "10", "--data", str(tmp_path / "d.csv"),
              "--truth", str(tmp_path / "t.json")])
    assert info.value.code == 2


def test_simulate_from_flags(tmp_path):
    d, t = tmp_path / "d.csv", tmp_path / "t.json"
    assert main(["simulate", "--seed", "1", "--p", "3", "--T", "10", "--graph-model", "chain",
                 "--changepoints", "6", "--data", str(d), "--truth", str(t)]) == 0
    assert json.loads(t.read_text())["spec"]["graph_model"] == "chain"
    assert main(["simulate", "--seed", "1", "--T", "10", "--data", str(d),
                 "--truth", str(t)]) == 2


def test_evaluate_rejects_wrong_files(simulated):
    tmp, _, truth = simulated
    assert main(["evaluate", "--fit", str(truth), "--truth", str(truth)]) == 2
    broken = tmp / "broken.json"
    broken.write_text("{")
    assert main(["evaluate", "--fit", str(broken), "--truth", str(truth)]) == 2


def test_config_parser_errors(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("p = 3\nbogus = 1\n")
    with pytest.raises(ValueError, match="line 2"):
        read_simspec_config(cfg)
    cfg.write_text("p = 3\nrandom_sign = maybe\n")
    with pytest.raises(ValueError, match="random_sign"):
        read_simspec_config(cfg)
    cfg.write_text("edge_weight_range = 0.2, 0.5\ntrue_changepoints = 4 8\n")
    assert read_simspec_config(cfg) == {"edge_weight_range": (0.2, 0.5),
                                        "true_changepoints": (4, 8)}


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_path_grid_and_cold(tmp_path, capsys):
    csv = tmp_path / "x.csv"
    np.savetxt(csv, [[0.5, 0.3], [-0.6, -0.2], [3.0, 1.0], [-2.5, -1.2]], delimiter=",")
    assert main(["path", "--input", str(csv), "--lambda1", "0.1", "--lambda2-grid", "16", "4",
                 "0.5", "--cold", "--target-k", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert [p["n_changepoints"] for p in out["points"]] == [0, 1]
    assert out["selected"]["lambda2"] == 4.0
