import json
import math
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fairshare.cli import run_command
from fairshare.config import RunConfig, dump_config, parse_config, parse_grid, validate_report
from fairshare.errors import ConfigError

HI = {"label": "U_hi", "support": [1, -1], "transitions": [[0.95, 0.05], [0.95, 0.05]]}
LO = {"label": "U_lo", "support": [1, -1], "transitions": [[0.51, 0.49], [0.51, 0.49]]}
DEM = {"label": "U_dem", "support": [1, -1], "transitions": [[0.4, 0.6], [0.4, 0.6]]}
GEN = {"label": "U_gen", "support": [1, -1], "transitions": [[0.6, 0.4], [0.6, 0.4]]}


def _cfg(tmp_path, name="cfg.json", **fields):
    path = tmp_path / name
    path.write_text(json.dumps(fields))
    return str(path)


def test_grid_syntax():
    assert parse_grid("0:0.5:0.05") == pytest.approx([0.05 * k for k in range(11)])
    assert len(parse_grid("0:0.5:0.05")) == 11
    assert parse_grid("2:12:2") == [2, 4, 6, 8, 10, 12]
    # stop within half a step is included, beyond it is not
    assert parse_grid("0:1.04:0.1")[-1] == pytest.approx(1.0)
    assert parse_grid("0:1.06:0.1")[-1] == pytest.approx(1.1)
    assert parse_grid("1,2,5") == [1, 2, 5]
    with pytest.raises(ConfigError):
        parse_grid("0:1:0")
    with pytest.raises(ConfigError):
        parse_grid("a:b:c")


def test_grid_must_increase():
    with pytest.raises(ConfigError):
        RunConfig(users=[GEN], b_grid=[4, 2])
    with pytest.raises(ConfigError):
        RunConfig(users=[GEN], delta_grid=[0.1, 0.1])


@given(st.lists(st.integers(0, 30), min_size=1, max_size=5, unique=True).map(sorted),
       st.one_of(st.none(), st.floats(0, 2), st.just(math.inf)), st.integers(0, 2**31))
def test_config_roundtrip(grid, delta, seed):
    cfg = RunConfig(users=[HI, LO], b_grid=grid, delta=delta, seed=seed, command="sweep",
                    kind="pof_vs_b", solver={"backend": "highs"})
    text = dump_config(cfg)
    back = parse_config(json.loads(text))
    assert back == cfg
    assert dump_config(back) == text


def test_schema_errors_name_the_field(tmp_path):
    bad = {"users": [{"support": [1, -1], "transitions": [[0.5, "x"], [0.5, 0.5]]}], "b_max": 2}
    with pytest.raises(ConfigError, match=r"users\[0\]\.transitions\[0\]\[1\]"):
        parse_config(bad)
    with pytest.raises(ConfigError, match="b_max"):
        parse_config({"users": [GEN], "b_max": -1})
    with pytest.raises(ConfigError, match="users"):
        parse_config({"b_max": 2})


def test_json_syntax_error_has_line(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"users":\n  [1,,]}')
    assert run_command(["llr-e", "--config", str(path)]) == 1
    assert "line 2" in capsys.readouterr().err


def test_solve_f_example(tmp_path):
    cfg = _cfg(tmp_path, users=[HI, LO], b_max=6)
    out = tmp_path / "f.json"
    assert run_command(["solve-f", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    validate_report(rep, "solve")
    assert rep["objective"] == pytest.approx(-0.44, abs=1e-6)


def test_solve_p_delta_inf(tmp_path):
    cfg = _cfg(tmp_path, users=[HI, DEM], b_max=3, delta="inf")
    out = tmp_path / "p.json"
    assert run_command(["solve-p", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    validate_report(rep, "solve")
    assert rep["delta"] == "inf"


def test_pof_single_user(tmp_path):
    cfg = _cfg(tmp_path, users=[GEN], b_max=2)
    out = tmp_path / "pof.json"
    assert run_command(["pof", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    validate_report(rep, "pof")
    assert rep["pof"] == 1.0


def test_llr_e_and_decay(tmp_path):
    cfg = _cfg(tmp_path, users=[GEN], b_max=2, b_grid=[2, 4, 6, 8, 10])
    out = tmp_path / "e.json"
    assert run_command(["llr-e", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    validate_report(rep, "llr_e")
    assert rep["llr_e"] == pytest.approx(0.0842105263, abs=1e-9)
    assert run_command(["decay", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    validate_report(rep, "decay")
    assert rep["verdict"] == "exponential"


def test_sweep_frontier_csv(tmp_path):
    cfg = _cfg(tmp_path, users=[HI, LO, GEN])
    out = tmp_path / "front.csv"
    argv = ["sweep", "--kind", "frontier", "--config", cfg, "--bmax", "4",
            "--delta-grid", "0:0.5:0.05", "--out", str(out)]
    assert run_command(argv) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "kind,abscissa,llr_o,llr_e,llr_delta,pof,theta_star,epsilon"
    eps = [float(l.split(",")[-1]) for l in lines[1:]]
    assert len(eps) == 11
    assert all(b <= a + 1e-9 for a, b in zip(eps, eps[1:]))
    side = json.loads((tmp_path / "front.json").read_text())
    validate_report(side, "sweep_sidecar")


def test_sweep_jobs_deterministic(tmp_path):
    cfg = _cfg(tmp_path, users=[HI, LO], b_grid=[2, 3, 4])
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_command(["sweep", "--kind", "pof_vs_b", "--config", cfg, "--out", str(a)]) == 0
    assert run_command(["sweep", "--kind", "pof_vs_b", "--config", cfg, "--out", str(b), "--jobs", "2"]) == 0
    assert a.read_text() == b.read_text()


def test_sweep_bad_point_exit_zero(tmp_path, capsys):
    # the second capacity exceeds the instance size cap, so only that row fails
    cfg = _cfg(tmp_path, users=[GEN], b_grid=[2, 5_000_000])
    out = tmp_path / "s.csv"
    assert run_command(["sweep", "--kind", "pof_vs_b", "--config", cfg, "--out", str(out)]) == 0
    rows = out.read_text().splitlines()[1:]
    assert float(rows[0].split(",")[5]) == pytest.approx(1.0)
    assert rows[1].endswith("nan,nan,nan,nan,nan,nan")
    assert "warning" in capsys.readouterr().err
    side = json.loads((tmp_path / "s.json").read_text())
    assert "InstanceTooLarge" in side["rows"][1]["error"]


def test_simulate_reproducible(tmp_path):
    cfg = _cfg(tmp_path, users=[HI, LO], b_max=4, seed=7, steps=20_000)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run_command(["simulate", "--config", cfg, "--out", str(a)]) == 0
    assert run_command(["simulate", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    validate_report(rep, "simulate")
    hist = (tmp_path / "a_hist.csv").read_text().splitlines()
    assert hist[0] == "level,count" and len(hist) == 6


def test_simulate_optimal_policy(tmp_path):
    cfg = _cfg(tmp_path, users=[HI, DEM], b_max=3, steps=5000)
    out = tmp_path / "o.json"
    assert run_command(["simulate", "--policy", "optimal-p", "--config", cfg, "--out", str(out)]) == 0


def test_validate_passes(tmp_path):
    cfg = _cfg(tmp_path, users=[HI, LO], b_max=4)
    out = tmp_path / "v.json"
    assert run_command(["validate", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    validate_report(rep, "validate")
    assert rep["passed"] and all(c["ok"] for c in rep["checks"])


def test_validate_fails_nonzero(tmp_path, monkeypatch):
    import fairshare.invariants as inv

    def broken(out, chain, b_max, backend):
        out.append(inv.Check("injected", False, "forced failure"))

    monkeypatch.setattr(inv, "_tie_checks", broken)
    cfg = _cfg(tmp_path, users=[HI, LO], b_max=2)
    assert run_command(["validate", "--config", cfg, "--out", str(tmp_path / "v.json")]) == 1


def test_model_error_exit_one(tmp_path, capsys):
    cfg = _cfg(tmp_path, users=[{"support": [1, -1], "transitions": [[0.5, 0.4], [0.5, 0.5]]}], b_max=2)
    assert run_command(["llr-e", "--config", cfg]) == 1
    assert "NotStochastic" in capsys.readouterr().err


def test_missing_bmax_exit_one(tmp_path):
    cfg = _cfg(tmp_path, users=[GEN])
    assert run_command(["solve-p", "--config", cfg]) == 1


def test_solver_failure_exit_two(tmp_path, monkeypatch):
    import fairshare.cli as cli
    from fairshare.errors import NumericalFailure

    def boom(*a, **k):
        raise NumericalFailure("residual blow-up")

    monkeypatch.setattr(cli, "solve_p", boom)
    cfg = _cfg(tmp_path, users=[GEN], b_max=2)
    assert run_command(["solve-p", "--config", cfg]) == 2


def test_stdout_report_when_no_out(tmp_path, capsys):
    cfg = _cfg(tmp_path, users=[GEN], b_max=2)
    assert run_command(["llr-e", "--config", cfg]) == 0
    cap = capsys.readouterr()
    assert json.loads(cap.out)["llr_e"] == pytest.approx(0.0842105263, abs=1e-9)
    assert "LLR_e" in cap.err


def test_log_env(tmp_path, monkeypatch):
    monkeypatch.setenv("FAIRSHARE_LOG", "debug")
    cfg = _cfg(tmp_path, users=[GEN], b_max=1)
    assert run_command(["llr-e", "--config", cfg, "--out", str(tmp_path / "x.json")]) == 0


CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_example_solve_f_two_user(tmp_path):
    out = tmp_path / "f.json"
    assert run_command(["solve-f", "--config", str(CONFIGS / "two_user.json"), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["objective"] == pytest.approx(-0.44, abs=1e-6)


def test_example_pof_single(tmp_path):
    out = tmp_path / "p.json"
    assert run_command(["pof", "--config", str(CONFIGS / "single.json"), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["pof"] == 1.0


def test_example_frontier_five_user(tmp_path):
    out = tmp_path / "front.csv"
    argv = ["sweep", "--kind", "frontier", "--config", str(CONFIGS / "five_user.json"), "--bmax", "12",
            "--delta-grid", "0:0.5:0.05", "--out", str(out)]
    assert run_command(argv) == 0
    eps = [float(l.split(",")[-1]) for l in out.read_text().splitlines()[1:]]
    assert len(eps) == 11
    assert all(b <= a for a, b in zip(eps, eps[1:]))


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.json")))
def test_shipped_configs_roundtrip(name):
    cfg = parse_config(json.loads((CONFIGS / name).read_text()))
    assert parse_config(json.loads(dump_config(cfg))) == cfg
