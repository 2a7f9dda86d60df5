import json
import os

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oscillospec import cache as cache_mod
from oscillospec import cli, solve_oscillatory
from oscillospec.cache import (
    ENV_VAR,
    ResultCache,
    atomic_write_text,
    cache_key,
    cached_spectral,
    resolve_cache_dir,
)
from oscillospec.config import ConfigError, ExperimentConfig, load_config, parse_eps_grid
from oscillospec.sweep import run_sweep, write_outputs
from oscillospec.asymptotics import REPORT_COLUMNS


@pytest.fixture(autouse=True)
def _no_env_cache(monkeypatch):
    monkeypatch.delenv(ENV_VAR, raising=False)


# -- config ------------------------------------------------------------------

def test_eps_grids():
    assert parse_eps_grid("0.25:0.0625:dyadic") == [0.25, 0.125, 0.0625]
    g = parse_eps_grid("0.25:0.03125:halfdyadic")
    assert len(g) == 7 and g[-1] == pytest.approx(2**-5)
    assert parse_eps_grid("0.5, 0.2") == [0.5, 0.2]
    assert parse_eps_grid([0.3]) == [0.3]
    for bad in ("", "0.1:0.5:dyadic", "0.5:0.1:triadic", "a,b", "2.0", "0"):
        with pytest.raises(ConfigError):
            parse_eps_grid(bad)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(eps=[])
    with pytest.raises(ConfigError):
        ExperimentConfig(alphas=[-1.0])
    with pytest.raises(ConfigError):
        ExperimentConfig(alphas=[0.5], regime="semiclassical")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"version": 2})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"solver": {"N_grid": 100}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"unknown": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"potential": {"terms": [{"harmonic": 0, "envelope":
                                    {"kind": "gaussian", "amplitude": 1, "width": 1}}]}})
    # N_grid too small for the modes at eps = 0.25, L = 40, n = 64
    with pytest.raises(ConfigError, match="4 max"):
        ExperimentConfig.from_dict({"eps_grid": [0.25], "solver": {"L": 40, "n": 64, "N_grid": 1024}})
    ExperimentConfig.from_dict({"eps_grid": [0.25], "solver": {"L": 40, "n": 64, "N_grid": 4096}})


def test_config_round_trip(tmp_path):
    raw = {"version": 1, "alpha": [2, 1], "eps_grid": "0.25:0.125:dyadic", "solver": {"num_eigs": 2},
           "wkb": {"n": 1}}
    cfg = ExperimentConfig.from_dict(raw)
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()
    p = tmp_path / "c.json"
    p.write_text(json.dumps(raw))
    assert load_config(p).alphas == [2.0, 1.0]
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")


# -- cache ---------------------------------------------------------------------

def test_cache_key():
    a = cache_key("osc", eps=0.1, L=40.0, potential={"b": 1, "a": [1, 2]})
    assert a == cache_key("osc", L=40.0, potential={"a": [1, 2], "b": 1}, eps=0.1)
    assert a != cache_key("osc", eps=float(np.nextafter(0.1, 1.0)), L=40.0, potential={"b": 1, "a": [1, 2]})
    assert a != cache_key("eff", eps=0.1, L=40.0, potential={"b": 1, "a": [1, 2]})


@given(st.floats(allow_nan=False, allow_infinity=False), st.floats(allow_nan=False, allow_infinity=False))
def test_cache_key_distinguishes_floats(a, b):
    if a != b:
        assert cache_key("k", x=a) != cache_key("k", x=b)


def test_spectral_round_trip_bit_exact(tmp_path, pot, monkeypatch):
    c = ResultCache(tmp_path)
    calls = []

    def compute():
        calls.append(1)
        return solve_oscillatory(pot, 0.25, 2.0, 40.0, None, 16, 3)

    r1 = cached_spectral(c, "osc", compute, eps=0.25)
    r2 = cached_spectral(c, "osc", compute, eps=0.25)
    assert len(calls) == 1 and c.hits == 1
    assert r1.eigenvalues.tobytes() == r2.eigenvalues.tobytes()
    assert np.array_equal(r1.eigenvectors, r2.eigenvectors)
    assert r2.meta == json.loads(json.dumps(r1.meta))
    # an entry written by another version is a miss
    monkeypatch.setattr(cache_mod, "__version__", "0.0.0-other")
    assert c.get_spectral(cache_key("osc", eps=0.25)) is None


def test_corrupt_entry_is_miss(tmp_path):
    c = ResultCache(tmp_path)
    key = cache_key("x", a=1)
    p = c._path(key, "npz")
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(b"garbage")
    assert c.get_spectral(key) is None
    c.put_json(key, {"v": 1.5})
    assert c.get_json(key) == {"v": 1.5}


def test_atomic_write(tmp_path):
    target = tmp_path / "out.csv"
    atomic_write_text(target, "a\n")

    class Boom(str):
        def encode(self):
            raise KeyboardInterrupt

    with pytest.raises(KeyboardInterrupt):
        atomic_write_text(target, Boom("b\n"))
    assert target.read_text() == "a\n"
    assert sorted(os.listdir(tmp_path)) == ["out.csv"]


def test_cache_dir_resolution(monkeypatch, tmp_path):
    assert resolve_cache_dir(None) is None
    assert resolve_cache_dir(str(tmp_path)) == tmp_path
    monkeypatch.setenv(ENV_VAR, str(tmp_path / "env"))
    assert resolve_cache_dir(str(tmp_path)) == tmp_path / "env"


# -- sweep -----------------------------------------------------------------------

def _small_cfg(**kw):
    d = {"alpha": [2], "eps_grid": [0.25, 0.2], "solver": {"num_eigs": 2}}
    d.update(kw)
    return ExperimentConfig.from_dict(d)


def test_sweep_order_and_failures(tmp_path):
    cfg = _small_cfg(alpha=[2, 1.5])
    res = run_sweep(cfg)
    keys = [(r["alpha"], r["epsilon"], r["n"]) for rep in res.reports for r in rep.records]
    assert keys == [(2.0, 0.25, 1), (2.0, 0.25, 2), (2.0, 0.2, 1), (2.0, 0.2, 2),
                    (1.5, 0.25, 1), (1.5, 0.25, 2), (1.5, 0.2, 1), (1.5, 0.2, 2)]
    assert res.to_csv().splitlines()[0] == ",".join(REPORT_COLUMNS)
    assert not res.failures
    # an aliasing-unsafe grid fails its points but not the sweep
    bad = _small_cfg(solver={"num_eigs": 1, "N_grid": 16})
    out = run_sweep(bad)
    assert len(out.failures) == 2 and "AliasingError" in out.failures[0]["error"]
    write_outputs(out, bad, tmp_path / "r.csv", tmp_path / "r.json")
    blob = json.loads((tmp_path / "r.json").read_text())
    assert blob["points"][0]["error"]


def test_sweep_cache_and_jobs(tmp_path):
    cfg = _small_cfg()
    a = run_sweep(cfg, tmp_path / "c", 1)
    b = run_sweep(cfg, tmp_path / "c", 1)
    c = run_sweep(cfg, None, 2)
    assert a.to_csv() == b.to_csv() == c.to_csv()
    assert a.to_json(cfg) == b.to_json(cfg)


# -- CLI --------------------------------------------------------------------------

def test_solve_defaults(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli.main(["solve"]) == 0
    blob = json.loads((tmp_path / "spec.json").read_text())
    assert len(blob["eigenvalues"]) == 6
    assert blob["epsilon"] == 0.2 and blob["alpha"] == 2.0
    assert blob["negative_count"] >= 1


def test_solve_explicit_grid(tmp_path):
    out = tmp_path / "s.json"
    assert cli.main(["solve", "--epsilon", "0.25", "--alpha", "1", "--L", "40", "--modes-n", "64",
                     "--grid-N", "16384", "--num-eigs", "3", "--emit-grid", "-40:40:11", "--out", str(out)]) == 0
    blob = json.loads(out.read_text())
    assert blob["eigenvalues"][0] == pytest.approx(-0.00413562, abs=1e-8)
    assert len(blob["grid"]["x"]) == 11


def test_usage_errors_leave_no_files(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert cli.main(["solve", "--bogus"]) == 2
    assert cli.main(["frobnicate"]) == 2
    assert cli.main(["solve", "--grid-N", "100", "--json-errors"]) == 2
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert json.loads(err)["exit_code"] == 2
    assert cli.main(["sweep", "--config", "nope.json"]) == 2
    assert cli.main(["solve", "--epsilon", "1.5"]) == 2
    assert os.listdir(tmp_path) == []


def test_compare_schema(tmp_path):
    out = tmp_path / "r.csv"
    assert cli.main(["compare", "--alpha", "2", "--eps-grid", "0.25:0.125:dyadic", "--num-eigs", "1",
                     "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "epsilon,alpha,n,lambda_osc,lambda_eff,lambda_formula,err_eff,err_formula,d_raw,d_dressed"
    assert len(lines) == 3


def test_sweep_exit_code_on_failure(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"version": 1, "eps_grid": [0.25], "solver": {"num_eigs": 1, "N_grid": 16}}))
    out = tmp_path / "r.csv"
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(out)]) == 3
    assert out.exists() and (tmp_path / "r.json").exists()


def test_cell_phase_wkb_commands(tmp_path):
    c = tmp_path / "cell.csv"
    assert cli.main(["cell", "--grid", "-10:10:401", "--out", str(c)]) == 0
    rows = c.read_text().splitlines()
    assert rows[0] == "X,V0,V1,V0pp" and len(rows) == 402
    X, V0 = map(float, rows[201].split(",")[:2])
    assert X == 0 and V0 == pytest.approx(-2 / np.pi**2, abs=1e-15)
    p = tmp_path / "phase.csv"
    assert cli.main(["phase", "--epsilon", "0.2", "--alpha", "2", "--grid", "-40:40:801", "--out", str(p)]) == 0
    assert p.read_text().splitlines()[0] == "x,phi,dphi,ddphi,Vred,x_tilde"
    w = tmp_path / "wkb.json"
    assert cli.main(["wkb", "--n", "0", "--orders", "5", "--epsilon", "0.25", "--out", str(w)]) == 0
    blob = json.loads(w.read_text())
    assert blob["lambdas"][4] == pytest.approx(-2 / np.pi**2, abs=1e-15)
    assert blob["quasimodes"][0]["residual_ratio"] > 0
    assert {"Phi", "f0", "X"} <= set(blob)
    e = tmp_path / "eff.json"
    assert cli.main(["effective", "--epsilon", "0.25", "--alpha", "1", "--with-v1", "--num-eigs", "2",
                     "--out", str(e)]) == 0
    assert json.loads(e.read_text())["eigenvalues"][0] < 0


def test_env_cache_used(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_VAR, str(tmp_path / "envcache"))
    out = tmp_path / "s.json"
    assert cli.main(["solve", "--epsilon", "0.25", "--num-eigs", "2", "--cache-dir", str(tmp_path / "ignored"),
                     "--out", str(out)]) == 0
    assert (tmp_path / "envcache").exists() and not (tmp_path / "ignored").exists()
