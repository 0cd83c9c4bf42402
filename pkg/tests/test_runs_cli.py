import json

import numpy as np
import pytest

from aggdiff.cli import main
from aggdiff.energy import free_energy, interaction
from aggdiff.flow import gaussian_profile
from aggdiff.grids import Profile, RadialGrid, write_profile_csv
from aggdiff.models import EntropyLaw, Kernel
from aggdiff.runs import run_classify, run_energy, run_minimize, run_probe, run_sweep
from aggdiff.schemas import RunConfig

BASE = {
    "grid": {"d": 2, "R": 10.0, "N": 96},
    "kernel": {"shape": "exponential", "d": 2, "c": 1.0},
    "entropy": {"form": "quadratic", "chi0": 1.0},
}


def cfg_file(tmp_path, name="cfg.json", **overrides):
    data = {**{k: dict(v) for k, v in BASE.items()}, **overrides}
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path), data


def fast_flow(**kw):
    return {"widths": [1.0], "max_steps": 4000, **kw}


# -- config plumbing ---------------------------------------------------------


def test_missing_config_file(tmp_path):
    assert main(["energy", str(tmp_path / "nope.json")]) == 3


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["energy", str(p)]) == 1


def test_unknown_key_rejected(tmp_path):
    path, _ = cfg_file(tmp_path, extra_section={"x": 1})
    assert main(["energy", path]) == 1


def test_kernel_grid_dimension_mismatch(tmp_path):
    path, _ = cfg_file(tmp_path, kernel={"shape": "exponential", "d": 3, "c": 1.0})
    assert main(["energy", path]) == 1


# -- energy ------------------------------------------------------------------


def test_energy_matches_direct(tmp_path, capsys):
    path, data = cfg_file(tmp_path)
    cfg = RunConfig.model_validate(data)
    grid = RadialGrid(2, 10.0, 96)
    op = interaction(grid, Kernel(shape="exponential", d=2, c=1.0))
    direct = free_energy(EntropyLaw.quadratic(1.0), op, gaussian_profile(grid, 1.0, 1.0))
    assert main(["energy", path]) == 0
    out = capsys.readouterr().out
    assert repr(direct.F) in out
    assert run_energy(cfg)["F"] == direct.F


def test_energy_zero_profile(tmp_path, capsys):
    grid = RadialGrid(2, 10.0, 96)
    ppath = tmp_path / "zeros.csv"
    write_profile_csv(Profile(grid, np.zeros(96)), ppath)
    path, _ = cfg_file(tmp_path, profile={"path": str(ppath)})
    assert main(["energy", path]) == 0
    assert "F=0.0" in capsys.readouterr().out


def test_energy_profile_grid_mismatch(tmp_path):
    other = RadialGrid(2, 8.0, 96)
    ppath = tmp_path / "other.csv"
    write_profile_csv(Profile(other, np.zeros(96)), ppath)
    path, _ = cfg_file(tmp_path, profile={"path": str(ppath)})
    assert main(["energy", path]) == 1


def test_energy_writes_stamped_report(tmp_path):
    path, data = cfg_file(tmp_path)
    out = tmp_path / "out"
    assert main(["energy", path, "--out", str(out)]) == 0
    text = (out / "energy.txt").read_text()
    first = text.splitlines()[0]
    assert first.startswith("# aggdiff ")
    assert "config_sha256=" + RunConfig.model_validate(data).config_hash() in first


# -- classify ----------------------------------------------------------------


def test_classify_cli_report(tmp_path, capsys):
    path, _ = cfg_file(tmp_path)
    out = tmp_path / "rep"
    assert main(["classify", path, "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "regime='exists_strong_kernel'" in stdout.replace('"', "'")
    text = (out / "classify.txt").read_text()
    assert "m_c=inf" in text
    assert "regime='exists_strong_kernel'" in text


def test_classify_seed_changes_default_constant(tmp_path):
    data = {
        "grid": {"d": 2, "R": 10.0, "N": 96},
        "kernel": {"shape": "power_law", "d": 2, "c": 1.0, "beta": 1.0},
        "entropy": {"form": "power", "m": 1.5},
        "classify": {"ensemble": 16},
    }
    a = run_classify(RunConfig.model_validate(data))
    b = run_classify(RunConfig.model_validate({**data, "seed": 1}))
    assert a["c0_used"] != b["c0_used"]
    assert a == run_classify(RunConfig.model_validate(data))


# -- probe -------------------------------------------------------------------


def test_probe_artifacts_and_overflow(tmp_path):
    path, _ = cfg_file(tmp_path, probe={"width": 1.0, "lambdas": [1.0, 0.5, 0.25]})
    out = tmp_path / "probe_out"
    assert main(["probe", path, "--out", str(out)]) == 0
    csv = (out / "probe.csv").read_text().splitlines()
    assert csv[1] == "lambda,F"
    assert len(csv) == 4  # stamp, header, two surviving lambdas
    svg = (out / "probe.svg").read_text()
    assert svg.startswith("<!-- aggdiff")
    assert "<svg" in svg and "polyline" in svg
    rep = run_probe(RunConfig.model_validate(json.loads(open(path).read())))
    assert rep["skipped"] == [0.25]


def test_probe_bad_lambda_rejected(tmp_path):
    path, _ = cfg_file(tmp_path, probe={"lambdas": [2.0]})
    assert main(["probe", path]) == 1


# -- minimize ----------------------------------------------------------------


def test_minimize_artifacts_deterministic(tmp_path):
    path, _ = cfg_file(tmp_path, flow=fast_flow(widths=[0.5, 1.0]))
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["minimize", path, "--out", str(out1)]) == 0
    assert main(["minimize", path, "--out", str(out2)]) == 0
    for name in ("trace_w0.5.csv", "trace_w1.csv", "final.csv", "summary.txt"):
        b1 = (out1 / name).read_bytes()
        assert b1 == (out2 / name).read_bytes()
        assert b1.startswith(b"# aggdiff ")
    header = (out1 / "trace_w1.csv").read_text().splitlines()[1]
    assert header == "step,S,W,F,sup,boundary_mass,mass_error,residual"


def test_minimize_strong_kernel_result(tmp_path, capsys):
    path, data = cfg_file(tmp_path, flow=fast_flow())
    assert main(["minimize", path]) == 0
    assert "outcome=stationary" in capsys.readouterr().out
    rep = run_minimize(RunConfig.model_validate(data))
    assert rep["estimate"] < 0
    assert rep["best_outcome"] == "stationary"


def test_numerical_failure_exit_code(tmp_path):
    path, _ = cfg_file(
        tmp_path,
        flow={"scheme": "finite_volume_pde", "tau": 1e300, "max_steps": 5, "widths": [1.0]},
    )
    assert main(["minimize", path]) == 2


# -- sweep -------------------------------------------------------------------


def test_sweep_missing_section(tmp_path):
    path, _ = cfg_file(tmp_path)
    assert main(["sweep", path]) == 1


def test_sweep_empty_values(tmp_path):
    path, _ = cfg_file(tmp_path, sweep={"parameter": "kernel_c", "values": []})
    assert main(["sweep", path]) == 1


def test_sweep_amplitude_flip(tmp_path):
    path, data = cfg_file(
        tmp_path,
        flow=fast_flow(),
        sweep={"parameter": "kernel_c", "values": [0.05, 1.0]},
    )
    out = tmp_path / "sw"
    assert main(["sweep", path, "--out", str(out)]) == 0
    rep = run_sweep(RunConfig.model_validate(data))
    outcomes = [r["outcome"] for r in rep["rows"]]
    assert outcomes == ["vanishing", "stationary"]
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[1] == "value,outcome,i_m,sup"
    assert len(lines) == 4


def test_sweep_jobs_deterministic(tmp_path):
    path, _ = cfg_file(
        tmp_path,
        flow=fast_flow(),
        sweep={"parameter": "mass", "values": [0.5, 1.0, 2.0]},
    )
    o1, o2 = tmp_path / "j1", tmp_path / "j2"
    assert main(["sweep", path, "--out", str(o1), "--jobs", "1"]) == 0
    assert main(["sweep", path, "--out", str(o2), "--jobs", "3"]) == 0
    assert (o1 / "sweep.csv").read_bytes() == (o2 / "sweep.csv").read_bytes()


def test_single_point_sweep_matches_minimize(tmp_path):
    _, data = cfg_file(tmp_path, flow=fast_flow())
    cfg_min = RunConfig.model_validate(data)
    cfg_sw = RunConfig.model_validate({**data, "sweep": {"parameter": "kernel_c", "values": [1.0]}})
    est_min = run_minimize(cfg_min)["estimate"]
    est_sw = run_sweep(cfg_sw)["rows"][0]["i_m"]
    assert est_sw == est_min


def test_sweep_entropy_m(tmp_path):
    data = {
        "grid": {"d": 2, "R": 10.0, "N": 96},
        "kernel": {"shape": "exponential", "d": 2, "c": 1.0},
        "entropy": {"form": "power", "m": 2.0},
        "flow": fast_flow(),
        "sweep": {"parameter": "entropy_m", "values": [2.0, 3.0]},
    }
    rep = run_sweep(RunConfig.model_validate(data))
    assert len(rep["rows"]) == 2
    data["entropy"] = {"form": "quadratic", "chi0": 1.0}
    with pytest.raises(ValueError):
        run_sweep(RunConfig.model_validate(data))
