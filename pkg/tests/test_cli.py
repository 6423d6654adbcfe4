import json
import subprocess
import sys
from pathlib import Path

import pytest

from ivpi.cli import main, parse_grid
from ivpi.io import counts_tsv, law_tsv
from ivpi.model import CELLS, ObservedLaw, TrialCounts
from ivpi.report import AnalysisReport

DATA = Path(__file__).resolve().parents[1] / "data"
FLU = str(DATA / "flu_vaccine.tsv")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def arm_counts(t1, y1, t0, y0, n=1000):
    """Counts with P(X=1|z)=t_z, P(Y=1|z)=y_z, Y independent of X."""
    cells = {}
    for z, t, y in ((1, t1, y1), (0, t0, y0)):
        for x, px in ((1, t), (0, 1 - t)):
            cells[(z, x, 1)] = round(n * px * y)
            cells[(z, x, 0)] = round(n * px * (1 - y))
    return TrialCounts.from_mapping(cells)


# check ------------------------------------------------------------------------


def test_check_valid_counts(capsys):
    code, out, _ = run(capsys, "check", FLU)
    assert code == 0
    assert json.loads(out)["status"] == "pass"


def test_check_violating_law(capsys, tmp_path):
    p = {(1, 1, 1): 0.7, (1, 1, 0): 0.1, (1, 0, 0): 0.1, (1, 0, 1): 0.1,
         (0, 1, 1): 0.1, (0, 1, 0): 0.7, (0, 0, 0): 0.1, (0, 0, 1): 0.1}
    path = write(tmp_path, "bad.tsv", law_tsv(ObservedLaw.from_mapping(p)))
    code, out, err = run(capsys, "check", path, "--format", "text")
    assert code == 2
    assert "falsified" in out
    assert "exceeds 1" in err


def test_check_truncated_file(capsys, tmp_path):
    text = "".join(Path(FLU).read_text().splitlines(keepends=True)[:5])
    code, _, err = run(capsys, "check", write(tmp_path, "short.tsv", text))
    assert code == 1
    assert "missing cells" in err


def test_check_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "check", tmp_path / "nope.tsv")
    assert code == 1
    assert "cannot read" in err


# bounds -----------------------------------------------------------------------


def test_bounds_no_flags(capsys):
    code, out, _ = run(capsys, "bounds", FLU)
    assert code == 0
    rep = json.loads(out)
    (b,) = rep["bounds"]
    assert b["display"] == "[-0.24, 0.64]"
    assert b["lower"]["display"] == "-0.24"


def test_bounds_flu_caps(capsys):
    code, out, err = run(capsys, "bounds", FLU, "--monotonicity", "--cap-nt", "0.10", "--cap-at", "0.10")
    assert code == 0
    rep = json.loads(out)
    assert [b["display"] for b in rep["bounds"]] == ["[-0.24, 0.64]", "[-0.07, 0.02]"]
    assert rep["bounds"][1]["law"] == "monotone_mle"
    assert "monotone_fit" in rep
    assert "pooled" in err


def test_bounds_raw_law_is_falsified_under_monotonicity(capsys):
    code, out, _ = run(capsys, "bounds", FLU, "--monotonicity", "--raw-law")
    assert code == 2
    assert json.loads(out)["bounds"][1]["status"] == "infeasible"


def test_bounds_sweep_tsv(capsys, tmp_path):
    fig = tmp_path / "sweep.png"
    table = tmp_path / "sweep.tsv"
    code, out, _ = run(capsys, "bounds", FLU, "--monotonicity", "--cap-at", "0.10",
                       "--sweep-nt", "0.05:0.10:0.05", "--format", "tsv", "--figure", fig, "--tsv", table)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "cap_nt\tlower\tupper\tstatus"
    rows = [line.split("\t") for line in lines[1:]]
    assert [(float(r[0]), round(float(r[1]), 2), round(float(r[2]), 2)) for r in rows] == [
        (0.05, -0.07, -0.02), (0.10, -0.07, 0.02)]
    assert table.read_text() == out
    assert fig.stat().st_size > 0


def test_bounds_figure_without_sweep(capsys, tmp_path):
    fig = tmp_path / "iv.png"
    code, _, _ = run(capsys, "bounds", FLU, "--monotonicity", "--figure", fig)
    assert code == 0 and fig.exists()


def test_bounds_text(capsys):
    code, out, _ = run(capsys, "bounds", FLU, "--format", "text")
    assert "[-0.24, 0.64]" in out and "Wald estimate: -0.12" in out


def test_bounds_bad_cap(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bounds", FLU, "--cap-nt", "1.5"])
    assert exc.value.code == 1


def test_bounds_infeasible_law_exit_2(capsys, tmp_path):
    p = {(1, 1, 1): 0.7, (1, 1, 0): 0.1, (1, 0, 0): 0.1, (1, 0, 1): 0.1,
         (0, 1, 1): 0.1, (0, 1, 0): 0.7, (0, 0, 0): 0.1, (0, 0, 1): 0.1}
    path = write(tmp_path, "bad.tsv", law_tsv(ObservedLaw.from_mapping(p)))
    code, out, _ = run(capsys, "bounds", path)
    assert code == 2
    assert json.loads(out)["bounds"][0]["status"] == "infeasible"


def test_precision_env(capsys, monkeypatch):
    monkeypatch.setenv("IVPI_PRECISION", "3")
    _, out, _ = run(capsys, "bounds", FLU)
    assert json.loads(out)["bounds"][0]["display"] == "[-0.239, 0.642]"


def test_report_rerun_reproduces(capsys, tmp_path):
    _, out, _ = run(capsys, "bounds", FLU, "--monotonicity", "--cap-nt", "0.1", "--cap-at", "0.1")
    path = write(tmp_path, "report.json", out)
    _, again, _ = run(capsys, "bounds", path, "--monotonicity", "--cap-nt", "0.1", "--cap-at", "0.1")
    a, b = json.loads(out), json.loads(again)
    assert a["bounds"] == b["bounds"] and a["estimates"] == b["estimates"]


def test_report_round_trip(capsys):
    _, out, _ = run(capsys, "bounds", FLU, "--monotonicity")
    rep = AnalysisReport.from_dict(json.loads(out))
    assert rep.to_json() == out


# estimate ---------------------------------------------------------------------


def test_estimate_flu(capsys):
    code, out, _ = run(capsys, "estimate", FLU)
    est = json.loads(out)["estimates"]
    assert code == 0
    assert est["wald"]["display"] == "-0.12"
    assert est["complier_share"]["display"] == "0.12"


def test_estimate_identical_arms(capsys, tmp_path):
    path = write(tmp_path, "same.tsv", counts_tsv(arm_counts(0.4, 0.3, 0.4, 0.3)))
    code, out, err = run(capsys, "estimate", path)
    assert code == 0
    est = json.loads(out)["estimates"]
    assert est["weak_instrument"] is True and est["wald"] is None
    assert "weak instrument" in err


def test_estimate_perfect_compliance(capsys, tmp_path):
    path = write(tmp_path, "pc.tsv", counts_tsv(arm_counts(1.0, 0.3, 0.0, 0.5)))
    _, out, _ = run(capsys, "estimate", path, "--format", "text")
    assert "complier_share      1.00" in out


def test_estimate_tsv(capsys):
    _, out, _ = run(capsys, "estimate", FLU, "--format", "tsv")
    rows = dict(line.split("\t") for line in out.strip().splitlines()[1:])
    assert round(float(rows["wald"]), 2) == -0.12


# sensitivity ------------------------------------------------------------------


def test_sensitivity_degenerate(capsys):
    wald = repr(-0.12455748282599623)
    code, out, _ = run(capsys, "sensitivity", FLU, f"--at-range={wald},{wald}", f"--nt-range={wald},{wald}")
    assert code == 0
    s = json.loads(out)["sensitivity"]
    assert s["display"] == "[-0.12, -0.12]"


def test_sensitivity_full_width(capsys):
    _, out, _ = run(capsys, "sensitivity", FLU, "--at-range=-1,1", "--nt-range=-1,1")
    rep = json.loads(out)
    s, e = rep["sensitivity"], rep["estimates"]
    width = s["upper"]["value"] - s["lower"]["value"]
    expected = 2 * e["always_taker_share"]["value"] + 2 * e["never_taker_share"]["value"]
    assert width == pytest.approx(expected, abs=1e-12)


def test_sensitivity_missing_flags(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["sensitivity", FLU])
    assert exc.value.code == 1


def test_sensitivity_weak_instrument(capsys, tmp_path):
    path = write(tmp_path, "same.tsv", counts_tsv(arm_counts(0.4, 0.3, 0.4, 0.3)))
    code, _, err = run(capsys, "sensitivity", path, "--at-range=0,0", "--nt-range=0,0")
    assert code == 2
    assert "not identified" in err


# simulate ---------------------------------------------------------------------


def scenario(tmp_path, **overrides):
    data = json.loads((DATA / "two_physician.json").read_text())
    data.update(overrides)
    return write(tmp_path, "scenario.json", json.dumps(data))


def test_simulate_defier_share(capsys):
    code, out, _ = run(capsys, "simulate", DATA / "two_physician.json")
    sim = json.loads(out)["simulation"]
    assert code == 0
    assert sim["defier_share"]["value"] == 0.1
    assert sim["defier_share"]["display"] == "0.10"


def test_simulate_zero_defiers(capsys, tmp_path):
    _, out, _ = run(capsys, "simulate", scenario(tmp_path, p_diabetic=0.0))
    sim = json.loads(out)["simulation"]
    assert sim["defier_share"]["value"] == 0.0
    assert sim["iv_estimand"]["value"] == pytest.approx(sim["true_late"]["value"], abs=1e-9)


def test_simulate_frechet_violation(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", scenario(tmp_path, rho=-0.9))
    assert code == 1
    assert "Frechet" in err


def test_simulate_missing_field(capsys, tmp_path):
    data = json.loads((DATA / "two_physician.json").read_text())
    del data["p_active"]
    code, _, err = run(capsys, "simulate", write(tmp_path, "s.json", json.dumps(data)))
    assert code == 1 and "p_active" in err


def test_simulate_mc_deterministic(capsys):
    argv = ["simulate", DATA / "two_physician.json", "--mode", "mc", "--seed", "42", "--n", "2000"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b
    assert sum(r["count"] for r in json.loads(a)["counts"]) == 2000


def test_simulate_mc_replicates_tsv(capsys):
    _, out, _ = run(capsys, "simulate", DATA / "two_physician.json", "--mode", "mc", "--seed", "1",
                    "--n", "300", "--replicates", "3", "--format", "tsv")
    lines = out.strip().splitlines()
    assert lines[0].startswith("replicate") and len(lines) == 1 + 3 * 8


def test_simulate_mc_requires_seed(capsys):
    code, _, err = run(capsys, "simulate", DATA / "two_physician.json", "--mode", "mc", "--n", "10")
    assert code == 1 and "--seed" in err


@pytest.mark.parametrize("name", ["two_physician.json", "proxy.json"])
def test_simulate_pipes_into_bounds(capsys, tmp_path, name):
    _, out, _ = run(capsys, "simulate", DATA / name)
    path = write(tmp_path, "sim.json", out)
    code, rep, _ = run(capsys, "bounds", path)
    assert code == 0
    truth = json.loads(out)["simulation"]["true_ate"]["value"]
    b = json.loads(rep)["bounds"][0]
    assert b["lower"]["value"] - 1e-9 <= truth <= b["upper"]["value"] + 1e-9


def test_simulate_proxy_figure(capsys, tmp_path):
    fig = tmp_path / "w.png"
    code, out, _ = run(capsys, "simulate", DATA / "proxy.json", "--figure", fig)
    assert code == 0 and fig.exists()
    weights = [w["weight"]["value"] for w in json.loads(out)["simulation"]["level_weights"]]
    assert sum(weights) == pytest.approx(1.0)


def test_unit_records_input(capsys, tmp_path):
    lines = ["z,x,y"] + ["1,1,0"] * 30 + ["1,0,1"] * 20 + ["0,0,0"] * 35 + ["0,1,1"] * 15
    code, out, _ = run(capsys, "estimate", write(tmp_path, "units.csv", "\n".join(lines) + "\n"))
    assert code == 0
    assert json.loads(out)["inputs"]["source_format"] == "records"


def test_parse_grid():
    assert parse_grid("0.05:0.10:0.05") == [0.05, 0.1]
    assert parse_grid("0.1,0.2,0.5") == [0.1, 0.2, 0.5]
    assert parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ivpi", "check", FLU, "--format", "text"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "pass" in proc.stdout


def test_law_file_echo_has_no_counts(capsys, tmp_path):
    path = write(tmp_path, "law.tsv", "z\tx\ty\tp\n" + "".join(f"{z}\t{x}\t{y}\t0.25\n" for z, x, y in CELLS))
    _, out, _ = run(capsys, "check", path)
    assert "counts" not in json.loads(out)["inputs"]


def test_simulate_pipes_into_bounds(capsys, monkeypatch):
    import io

    assert main(["simulate", str(DATA / "two_physician.json")]) == 0
    monkeypatch.setattr("sys.stdin", io.StringIO(capsys.readouterr().out))
    assert main(["bounds", "-", "--format", "json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["bounds"]


def test_simulate_mc_text_lists_replicate_walds(capsys):
    code, out, _ = run(capsys, "simulate", str(DATA / "two_physician.json"), "--mode", "mc",
                       "--n", "4000", "--replicates", "3", "--seed", "5", "--format", "text")
    assert code == 0
    assert out.splitlines()[0] == "3 replicate(s) of n=4000, seed 5"
    assert out.splitlines()[-1].startswith("mean ")
