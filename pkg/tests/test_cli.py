import csv
import subprocess
import sys

import numpy as np
import pytest

from driftlearn import cli


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def by_label(rows):
    out = {}
    for r in rows:
        out.setdefault(r["label"], []).append(r)
    return {k: (np.array([float(r["t"]) for r in v]), np.array([float(r["position"]) for r in v]))
            for k, v in out.items()}


def test_presets_listed():
    assert set(cli.preset_names()) >= {"figure1", "figure2", "figure3", "cara_desk", "crra_desk",
                                       "crra_blowup", "cara_two_assets"}


def test_empty_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "empty.ini"
    cfg.write_text("")
    code, _, err = run(["solve", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 2 and "error" in err


def test_zero_paths_exits_2(tmp_path, capsys):
    code, _, _ = run(["simulate", "--config", "figure2", "--paths", "0", "--out", str(tmp_path)], capsys)
    assert code == 2


def test_unknown_figure_exits_2(tmp_path, capsys):
    code, _, err = run(["figures", "4", "--out", str(tmp_path)], capsys)
    assert code == 2 and "unknown figure" in err


def test_missing_file_and_bad_values_exit_2(tmp_path, capsys):
    assert run(["solve", "--config", str(tmp_path / "nope.ini")], capsys)[0] == 2
    bad = tmp_path / "bad.ini"
    bad.write_text(cli.read_config_text("figure2")[0].replace("eta = 0.15", "eta = -1"))
    assert run(["solve", "--config", str(bad), "--out", str(tmp_path)], capsys)[0] == 2


def test_blowup_exits_3_with_time(tmp_path, capsys):
    code, _, err = run(["solve", "--config", "crra_blowup", "--out", str(tmp_path)], capsys)
    assert code == 3
    assert "blow-up time: 9.45" in err


def test_unacknowledged_gamma_below_one_exits_2(tmp_path, capsys):
    text = cli.read_config_text("crra_desk")[0].replace("gamma = 2", "gamma = 0.5")
    cfg = tmp_path / "low.ini"
    cfg.write_text(text)
    code, _, err = run(["solve", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 2 and "acknowledge" in err


def test_liquidation_terminal_row(tmp_path, capsys):
    code, _, _ = run(["solve", "--config", "figure2", "--steps", "500", "--out", str(tmp_path)], capsys)
    assert code == 0
    rows = read_rows(tmp_path / "coefficients.csv")
    last = rows[-1]
    assert float(last["t"]) == 1.0
    assert float(last["d"]) == 5e-6 and float(last["b"]) == 0.0 and float(last["c"]) == 0.0
    assert float(last["a"]) == 0.0


def test_frictionless_solve_writes_table(tmp_path, capsys):
    code, _, _ = run(["solve", "--config", "cara_desk", "--steps", "10", "--out", str(tmp_path)], capsys)
    assert code == 0
    rows = read_rows(tmp_path / "coefficients.csv")
    assert len(rows) == 11 and float(rows[-1]["b"]) == 0.0
    assert float(rows[0]["b"]) == pytest.approx(1.35501e8, rel=1e-5)


def test_table_round_trip(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    base = ["--config", "figure3", "--steps", "400", "--paths", "20"]
    assert run(["solve", "--config", "figure3", "--steps", "400", "--out", str(a)], capsys)[0] == 0
    assert run(["simulate", *base, "--out", str(b), "--table", str(a / "coefficients.csv")], capsys)[0] == 0
    assert run(["simulate", *base, "--out", str(a)], capsys)[0] == 0
    assert (a / "trajectories.csv").read_bytes() == (b / "trajectories.csv").read_bytes()
    assert (a / "report.txt").read_bytes() == (b / "report.txt").read_bytes()


def test_simulate_report_frictionless(tmp_path, capsys):
    code, out, _ = run(["simulate", "--config", "crra_desk", "--paths", "200", "--steps", "50",
                        "--out", str(tmp_path)], capsys)
    assert code == 0
    report = (tmp_path / "report.txt").read_text()
    for key in ("optimal: mean=", "naive: mean=", "closed_form:"):
        assert key in report
    header = (tmp_path / "trajectories.csv").read_text().splitlines()[0]
    assert header == "path_id,t,S,beta,position,cash,wealth"


def test_simulate_is_deterministic(tmp_path, capsys):
    outs = []
    for name in ("x", "y"):
        run(["simulate", "--config", "cara_two_assets", "--paths", "50", "--steps", "40",
             "--out", str(tmp_path / name)], capsys)
        outs.append((tmp_path / name / "trajectories.csv").read_bytes())
    assert outs[0] == outs[1]


@pytest.fixture(scope="module")
def figures(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig")
    for k in (1, 2, 3):
        assert cli.main(["figures", str(k), "--out", str(out)]) == 0
    return out


def test_figure1_flat_path_tracks_q_opt(figures):
    t, q = by_label(read_rows(figures / "figure1.csv"))["flat"]
    q_opt = 0.01 / (2e-7 * 0.36)
    assert q_opt == pytest.approx(138888.9, abs=0.05)
    assert abs(q.mean() - q_opt) <= 0.25 * q_opt


def test_figure2_down_path_liquidates_first(figures):
    paths = by_label(read_rows(figures / "figure2.csv"))
    half = {}
    for label in ("up", "down"):
        t, q = paths[label]
        half[label] = t[np.argmax(q <= 5e4)]
    assert half["down"] < half["up"]


def test_figure3_flat_path_dips_then_rises(figures):
    t, q = by_label(read_rows(figures / "figure3.csv"))["flat"]
    assert q.min() < 1e5 < 2e5
    assert q[-1] > 1e5


def test_figure_summary_written(figures):
    text = (figures / "figure2_summary.txt").read_text()
    assert "q0: 100000" in text and "up:" in text and "down:" in text


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "driftlearn", "figures", "9", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 2
