import numpy as np
import pytest

from ppblowup import io
from ppblowup.config import ConfigError, ExperimentConfig, config_from_dict, load_config
from ppblowup.dynamics import COLUMNS, Status, TimeStepConfig, run
from ppblowup.experiment import sweep_points, synthesize_initial
from ppblowup.config import InitialConfig


def test_defaults_and_shipped_configs():
    cfg = config_from_dict({})
    assert cfg == ExperimentConfig()
    for name in ("flagship", "subcritical", "small_data", "sweep_s", "sweep_lambda"):
        load_config(f"configs/{name}.toml")
    flag = load_config("configs/flagship.toml")
    assert (flag.model.s, flag.model.p, flag.mesh.M, flag.stepping.dt0) == (1.0, 4.0, 200, 1e-4)


def test_aliases():
    cfg = config_from_dict({"initial": {"profile": "PolynomialBump", "A": 0.5}})
    assert cfg.initial.scale == 0.5 and cfg.initial.J_ratio is None
    cfg = config_from_dict({"initial": {"lambda": 2.0}, "sweep": {"lambda": [1.0, 2.0]}})
    assert cfg.initial.scale == 2.0 and cfg.sweep.lam == [1.0, 2.0]
    assert len(sweep_points(cfg)) == 2


@pytest.mark.parametrize("data", [
    {"modle": {}},
    {"model": {"q": 1}},
    {"mesh": {"M": 3}},
    {"mesh": {"grading": 0.0}},
    {"mesh": {"quad_order": 2}},
    {"model": {"s": 2.5}},
    {"model": {"p": 2.0}},
    {"initial": {"profile": "Gaussian"}},
    {"initial": {"A": -1.0}},
    {"initial": {"A": 1.0, "scale": 1.0}},
    {"initial": {"q": 0.0}},
    {"initial": {"J_ratio": 1.0}},
    {"stepping": {"dt0": -1.0}},
])
def test_invalid(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[model\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_sweep_axes_conflict():
    cfg = config_from_dict({"sweep": {"lambda": [1.0], "J_ratio": [0.5]}})
    with pytest.raises(ValueError):
        sweep_points(cfg)
    assert sweep_points(config_from_dict({})) == []
    cfg = config_from_dict({"sweep": {"s": [0.0, 1.0], "p": [3.0, 4.0, 5.0]}})
    assert len(sweep_points(cfg)) == 6


def test_zero_amplitude(small):
    mesh, ops, est = small
    init = synthesize_initial(mesh, ops, InitialConfig("PolynomialBump", scale=0.0, J_ratio=None), est)
    assert not init.u.any() and init.J0 == 0 and init.I0 == 0


@pytest.fixture(scope="module")
def traj(small):
    mesh, ops, est = small
    from ppblowup.constants import build_constants_report
    u0 = 5.0 * est.extremal
    rep = build_constants_report(mesh, ops, u0, est)
    return run(mesh, ops, u0, TimeStepConfig(dt0=1e-3, blowup_factor=1e5), rep)


def test_csv_roundtrip(traj, tmp_path):
    path = io.write_trajectory_csv(traj, tmp_path / "t.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == f"# schema: {io.SCHEMA}"
    header = next(l for l in lines if not l.startswith("#"))
    assert header == "t,dt,H,J,I,G,norm_p,norm_grad,weighted_l2"
    back = io.read_trajectory_csv(path)
    for c in COLUMNS:
        np.testing.assert_array_equal(back.column(c), traj.column(c))
    assert back.status is Status.BLOWUP and back.T_num == traj.T_num and back.p == traj.p
    assert back.fit == traj.fit and back.meta["thinned"] is False
    assert back.meta["dt0"] == traj.meta["dt0"]


def test_csv_thinning(traj, tmp_path):
    idx = io.thin_rows(traj, 1e-2, 1e-2)
    assert idx[0] == 0 and idx[-1] == len(traj) - 1 and np.all(np.diff(idx) > 0)
    assert idx.size < len(traj)
    # every band crossing in log H is represented
    levels = np.floor(np.log(traj.H / traj.H[0]) / 1e-2)
    assert set(levels[idx]) == set(levels)
    back = io.read_trajectory_csv(io.write_trajectory_csv(traj, tmp_path / "t.csv", 1e-2, 1e-2))
    assert len(back) == idx.size and back.meta["thinned"] is True
    np.testing.assert_array_equal(back.H, traj.H[idx])


def test_csv_rejects(traj, tmp_path):
    path = io.write_trajectory_csv(traj, tmp_path / "t.csv")
    text = path.read_text()
    (tmp_path / "a.csv").write_text(text.replace(io.SCHEMA, "other/9"))
    (tmp_path / "b.csv").write_text(text.replace("t,dt,H,J", "t,dt,J,H"))
    (tmp_path / "c.csv").write_text("# schema: " + io.SCHEMA + "\n")
    for name in "abc":
        with pytest.raises(ValueError):
            io.read_trajectory_csv(tmp_path / f"{name}.csv")


def test_constants_json_roundtrip(small, tmp_path):
    mesh, ops, est = small
    from ppblowup.constants import build_constants_report
    rep = build_constants_report(mesh, ops, 5.0 * est.extremal, est)
    back = io.read_constants_json(io.write_json(rep, tmp_path / "c.json"))
    assert back.to_dict() == rep.to_dict()
