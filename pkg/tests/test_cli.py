import json

import pytest

from exitflow.cli import main, run_plan
from exitflow.grid import ScalarField, build_domain, read_field_csv, write_field_csv
from exitflow.config import load_config

SMALL = """
[domain]
kind = ellipse
a = 2
b = 1
n = 48

[solve]
flow = shear
amplitude = 20

[montecarlo]
start = 0.5, 0.2
paths = 2000
dt = 1e-3
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return str(p)


def test_solve_writes_field_and_record(tmp_path, cfg):
    out = tmp_path / "o"
    assert main(["solve", "--config", cfg, "--out-dir", str(out)]) == 0
    rec = json.loads((out / "tau.json").read_text())
    assert rec["amplitude"] == 20.0
    assert set(rec["norms"]) == {"L1", "L2", "Linf"}
    assert rec["residual"] <= 1e-10
    grid = build_domain(load_config(cfg).domain)
    assert read_field_csv(out / "tau.csv", grid).max() == pytest.approx(rec["max"])


def test_output_root_from_environment(tmp_path, cfg, monkeypatch):
    monkeypatch.setenv("EXITFLOW_OUT", str(tmp_path / "env"))
    assert main(["solve", "--config", cfg, "--amplitude", "0"]) == 0
    assert (tmp_path / "env" / "tau.csv").exists()


def test_freidlin_outputs(tmp_path, cfg):
    out = tmp_path / "f"
    assert main(["freidlin", "--config", cfg, "--out-dir", str(out), "--amplitudes", "10,100"]) == 0
    head = (out / "profile.csv").read_text().splitlines()[0]
    assert head == "h,a,T,p,tau_bar"
    assert (out / "convergence.csv").read_text().startswith("amplitude,deviation,scheme,peclet")


def test_iterate_outputs(tmp_path, cfg):
    out = tmp_path / "i"
    assert main(["iterate", "--config", cfg, "--scheme", "naive", "--max-steps", "3", "--out-dir", str(out)]) == 0
    assert (out / "trace.csv").read_text().startswith("step,sup_norm,residual_l2,apriori1,apriori2,apriori3")
    svg = (out / "contours.svg").read_text()
    assert "Maximiser" in svg and "Expected exit time" in svg


def test_verify_status_follows_the_verdict(tmp_path, cfg):
    out = tmp_path / "v"
    assert main(["solve", "--config", cfg, "--out-dir", str(out)]) == 0
    assert main(["verify", "--config", cfg, "--field", str(out / "tau.csv"), "--out-dir", str(out)]) == 0
    assert (out / "rearrangement.csv").read_text().startswith("r,gamma,bound")
    grid = build_domain(load_config(cfg).domain)
    tau = read_field_csv(out / "tau.csv", grid)
    write_field_csv(ScalarField(grid, tau.values * 2.0), out / "big.csv")
    assert main(["verify", "--config", cfg, "--field", str(out / "big.csv"), "--out-dir", str(out)]) == 1
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] is False


def test_montecarlo_outputs(tmp_path, cfg):
    out = tmp_path / "m"
    args = ["montecarlo", "--config", cfg, "--seed", "4", "--out-dir", str(out)]
    assert main(args) == 0
    first = (out / "montecarlo.csv").read_text()
    assert first.splitlines()[0] == "x,y,mean,stderr,paths,truncated,dt"
    assert len(first.splitlines()) == 2
    assert main(args) == 0
    assert (out / "montecarlo.csv").read_text() == first


def test_plot(tmp_path, cfg):
    out = tmp_path / "p"
    main(["solve", "--config", cfg, "--out-dir", str(out)])
    assert main(["plot", "--config", cfg, "--field", str(out / "tau.csv"), "--annotate", "--out-dir", str(out)]) == 0
    assert "Hessian axis ratio" in (out / "contours.svg").read_text()


def test_missing_inputs(tmp_path, cfg, capsys):
    assert main(["verify", "--config", cfg, "--field", str(tmp_path / "none.csv"), "--out-dir", str(tmp_path)]) == 2
    assert main(["solve", "--config", str(tmp_path / "none.ini")]) == 2
    assert main(["run-plan", "no-such-plan"]) == 2


def test_empty_plan_is_a_no_op(tmp_path):
    p = tmp_path / "empty.ini"
    p.write_text("[plan]\nstages =\n")
    out = tmp_path / "e"
    assert main(["run-plan", str(p), "--out-dir", str(out)]) == 0
    assert not out.exists() or not any(out.iterdir())


PLAN = """
[plan]
stages = solve, freidlin, verify, montecarlo, plot

[domain:small]
kind = disc
n = 40

[solve]
flow = cellular
amplitude = 5

[montecarlo]
start = 0.1, 0.1
paths = 1000
dt = 1e-3
"""


def test_user_plan_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_plan(PLAN, a) == 0
    assert run_plan(PLAN, b) == 0
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert {"small/tau.csv", "small/profile.csv", "small/report.json", "small/montecarlo.csv", "summary.json"} <= {
        str(f) for f in files
    }
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_stage_failure_is_recorded_and_stops_the_domain(tmp_path):
    bad = PLAN.replace("start = 0.1, 0.1", "start = 3, 3")
    out = tmp_path / "bad"
    assert run_plan(bad, out) == 1
    summary = json.loads((out / "summary.json").read_text())["small"]
    assert "error" in summary["montecarlo"]
    assert "plot" not in summary
