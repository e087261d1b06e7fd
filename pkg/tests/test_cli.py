import json
import subprocess
import sys

import pytest

from corrprophet.cli import main
from corrprophet.harness import read_csv
from corrprophet.model import gen_tower2, load_instance

TOWER_PARAMS = '{"n": 2, "eps": 0.1}'


def test_gen_writes_instance(tmp_path):
    out = tmp_path / "t.json"
    assert main(["gen", "tower2", "--params", TOWER_PARAMS, "--out", str(out)]) == 0
    assert load_instance(out) == gen_tower2(2, 0.1)


def test_run_reports_tower_ratio(tmp_path, capsys):
    path = tmp_path / "t.json"
    path.write_text(gen_tower2(2, 0.1).to_json())
    code = main(["run", "--instance", str(path), "--algo", "threshold", "--tau", "5",
                 "--oracle", "exact", "--online-opt"])
    assert code == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["alg"]["mean"] == pytest.approx(1.1)
    assert rep["benchmark"]["mean"] == pytest.approx(1.99)
    assert rep["online_opt"]["mean"] == pytest.approx(1.18)
    assert "wall_time" not in rep


def test_run_csv_and_seed_determinism(capsys):
    argv = ["run", "--gen", "tower2", "--params", TOWER_PARAMS, "--algo", "col-sparse", "--oracle", "mc",
            "--samples", "2000", "--seed", "3", "--format", "csv"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first
    assert float(read_csv(first)[0]["alg_mean"]) > 0


def test_run_multi_item_flags(capsys):
    with pytest.warns(UserWarning, match="epsilon raised"):
        code = main(["run", "--gen", "tower", "--params", '{"c": 2, "eps": 0.1}', "--algo", "col-sparse-multi",
                     "--r", "4", "--eps-prime", "1", "--epsilon", "0.3", "--samples", "500"])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["metadata"]["spec"]["params"]["eps_prime"] == 1.0


def test_scan_csv(capsys):
    assert main(["scan", "--gen", "tower2", "--params", TOWER_PARAMS]) == 0
    rows = read_csv(capsys.readouterr().out)
    assert [float(r["value"]) for r in rows] == pytest.approx([1.1, 1.1, 0.92, 1.0, 0.0])


def test_oracle_subcommand(capsys):
    assert main(["oracle", "--gen", "tower2", "--params", TOWER_PARAMS, "--online"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["prophet"]["mean"] == pytest.approx(1.99)
    assert out["online_optimum"]["mean"] == pytest.approx(1.18)
    assert out["best_fixed_threshold"]["mean"] == pytest.approx(1.1)


def test_repro_quick_suite_passes(tmp_path):
    out = tmp_path / "rows.csv"
    assert main(["repro", "tower-hardness", "--quick", "--out", str(out)]) == 0
    rows = read_csv(out.read_text())
    assert {r["verdict"] for r in rows} == {"pass"}


def test_repro_failing_suite_exits_one(monkeypatch, capsys):
    from corrprophet import suites

    monkeypatch.setitem(suites.SUITES, "tower-hardness",
                        lambda scale: [suites.Check("forced", 2.0, 1.0, 0.0, "<=")])
    assert main(["repro", "tower-hardness", "--format", "json"]) == 1
    assert json.loads(capsys.readouterr().out)["passed"] is False


@pytest.mark.parametrize("argv", [
    ["run", "--algo", "threshold"],
    ["run", "--gen", "tower2", "--params", "{bad json", "--algo", "threshold"],
    ["run", "--gen", "tower2", "--params", TOWER_PARAMS, "--algo", "unweighted"],
    ["run", "--instance", "/nonexistent.json", "--algo", "threshold"],
    ["gen", "tower2", "--params", '{"n": 2, "eps": 0.9}'],
])
def test_usage_errors_exit_two(argv, capsys):
    assert main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_argparse_errors_exit_two():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--algo", "no-such-algo"])
    assert exc.value.code == 2


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "corrprophet.cli", "oracle", "--gen", "tower2",
                           "--params", TOWER_PARAMS], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["prophet"]["mean"] == pytest.approx(1.99)
