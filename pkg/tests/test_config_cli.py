import csv
import math
import warnings

import numpy as np
import pytest
from scipy import stats
from scipy.linalg import expm

from se3sync import cli, oracles
from se3sync import liegroup as lg
from se3sync.config import (
    FIG2_V,
    SimConfig,
    config_from_dict,
    config_to_dict,
    dump_config,
    fig2_config,
    fig2_initial_poses,
    haar_angle,
    load_config,
    random_initial,
    random_rotation,
)
from se3sync.errors import ConfigError, OracleFailure, SynergyWarning
from se3sync.montecarlo import aggregate, montecarlo, run_seeds


@pytest.fixture(autouse=True)
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SynergyWarning)
        yield


# configs


def test_toml_roundtrip(tmp_path):
    cfg = fig2_config(seed=7, twist_std=0.1, h=5e-4)
    path = tmp_path / "exp.toml"
    dump_config(cfg, path)
    back = load_config(path)
    assert back == cfg
    assert dump_config(back) == dump_config(cfg)


def test_file_indices_are_one_based(tmp_path):
    text = dump_config(fig2_config())
    assert "edges = [\n    [\n        1,\n        2," in text or "[1, 2]" in text.replace(",\n", ", ")
    data = config_to_dict(fig2_config())
    assert data["topology"]["edges"][0] == [1, 2]
    assert config_from_dict(data).edges[0] == (0, 1)


def test_config_errors():
    data = config_to_dict(fig2_config())
    with pytest.raises(ConfigError):
        config_from_dict({**data, "extra": {}})
    with pytest.raises(ConfigError):
        config_from_dict({**data, "gains": {"k_q": 1.0}})
    del data["weight"]
    with pytest.raises(ConfigError):
        config_from_dict(data)
    with pytest.raises(ConfigError):
        fig2_config(h=0.0)
    with pytest.raises(ConfigError):
        fig2_config(certificate_strictness="maybe")
    with pytest.raises(ConfigError):
        fig2_config(preset=None).build()


def test_fig2_initial_condition():
    cfg = fig2_config()
    sys_, st = cfg.build()
    assert st.n_agents == 6 and st.n_edges == 5
    np.testing.assert_array_equal(st.thetas, 0)
    np.testing.assert_array_equal(st.twists, 0)
    v = np.asarray(FIG2_V) / np.linalg.norm(FIG2_V)
    for X in st.edge_poses:
        # every relative pose is a pi rotation about v
        np.testing.assert_allclose(X[:3, :3], 2 * np.outer(v, v) - np.eye(3), atol=1e-12)
    for X, sign in zip(fig2_initial_poses(sys_.weight), [-1, 1] * 3):
        np.testing.assert_allclose(X[:3, :3], expm(sign * np.pi / 2 * lg.skew(v)), atol=1e-12)


def test_haar_angle_distribution():
    rng = np.random.default_rng(3)
    u = rng.uniform(size=2000)
    ang = haar_angle(u)
    np.testing.assert_allclose((ang - np.sin(ang)) / np.pi, u, atol=1e-12)
    sampled = []
    for _ in range(2000):
        R = random_rotation(rng)
        sampled.append(np.arccos(np.clip((np.trace(R) - 1) / 2, -1, 1)))
    res = stats.kstest(sampled, lambda t: (t - np.sin(t)) / np.pi)
    assert res.pvalue > 1e-3


def test_random_initial_box():
    rng = np.random.default_rng(0)
    poses, twists = random_initial(rng, 4, 5.0)
    assert all(np.all(np.abs(X[:3, 3]) <= 5.0) for X in poses)
    np.testing.assert_array_equal(twists, 0)
    poses, _ = random_initial(rng, 4, 0.0, rotations=False)
    np.testing.assert_array_equal(poses, [np.eye(4)] * 4)


# oracles


def test_series_exp_against_expm():
    rng = np.random.default_rng(1)
    for _ in range(20):
        M = rng.normal(size=(4, 4)) * 2
        np.testing.assert_allclose(oracles.series_exp(M), expm(M), rtol=1e-10, atol=1e-10)


def test_oracles_pass(fig2_w, synth_p, fig2_p):
    rng = np.random.default_rng(2)
    assert oracles.exp_check(fig2_w, synth_p, rng, samples=50).ok
    assert oracles.gradcheck(fig2_w, fig2_p, rng, samples=20).ok
    assert oracles.rank_check(rng, sizes=[2, 6], samples=5).ok
    rep = oracles.gap_check(fig2_w, fig2_p)
    assert rep.ok and len(rep.lines) == 3
    assert "gap" in rep.text()


def test_oracle_require_raises():
    rep = oracles.OracleReport("x", 1.0, 0.5, False, [])
    with pytest.raises(OracleFailure):
        rep.require()


# command line


def test_check_params_fig2_values(capsys):
    # the fig2 delta exceeds the strict bound
    assert cli.main(["check-params", "--preset", "fig2"]) == cli.EXIT_INVALID
    out = capsys.readouterr().out
    assert "case: 2" in out and "Delta_W*: 0.89" in out
    assert "warning:" in out and "strict inequalities: FAIL" in out


def test_check_params_synthesized(tmp_path, capsys):
    path = tmp_path / "synth.toml"
    dump_config(fig2_config(gamma=None, delta=None), path)
    assert cli.main(["check-params", "--config", str(path)]) == cli.EXIT_OK
    assert "strict inequalities: ok" in capsys.readouterr().out


def test_check_params_diagonal_and_isotropic(tmp_path, capsys):
    path = tmp_path / "diag.toml"
    dump_config(fig2_config(A=np.diag([1.0, 2, 3]).tolist(), b=[0.0] * 3, d=1.0, gamma=None, delta=None), path)
    assert cli.main(["check-params", "--config", str(path)]) == cli.EXIT_OK
    assert "case: 2" in capsys.readouterr().out
    dump_config(fig2_config(A=np.eye(3).tolist(), b=[0.0] * 3, d=1.0, gamma=None, delta=None), path)
    assert cli.main(["check-params", "--config", str(path)]) == cli.EXIT_INVALID


def test_single_agent_config_rejected(tmp_path):
    path = tmp_path / "one.toml"
    data = config_to_dict(fig2_config())
    data["topology"] = {"n_agents": 1, "edges": []}
    data["inertia"] = {"mass": 2.4, "inertia": [0.043, 0.041, 0.082]}
    import tomli_w

    path.write_text(tomli_w.dumps(data))
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == cli.EXIT_INVALID


def test_run_writes_artifacts(tmp_path):
    out = tmp_path / "run"
    code = cli.main(["run", "--preset", "fig2", "--t-end", "0.03", "--out", str(out)])
    assert code == cli.EXIT_NOT_CONVERGED
    with open(out / "trace.csv") as f:
        header = f.readline().strip().split(",")
        first = f.readline().strip().split(",")
    assert header[:2] == ["t", "j"] and header[-3:] == ["Vbar", "Ubar", "kinetic"]
    assert {"theta_5", "muU_1", "rotErr_3", "posErr_2", "omega_1x", "v_6z"} <= set(header)
    # 17 significant digits round-trip exactly
    assert any(len(x.replace("-", "").replace(".", "").split("e")[0]) >= 16 for x in first)
    rows = np.loadtxt(out / "trace.csv", delimiter=",", skiprows=1)
    assert rows.shape[1] == len(header)
    with open(out / "events.csv") as f:
        events = list(csv.DictReader(f))
    assert len(events) == 5 and {e["edge"] for e in events} == {"1", "2", "3", "4", "5"}
    assert float(events[0]["theta_after"]) == 0.3 * np.pi
    summary = (out / "summary.txt").read_text()
    assert "jump_budget = " in summary and "certificates = ok" in summary
    gp = (out / "plot.gp").read_text()
    used = [int(s.split(":")[1].split()[0]) for s in gp.split("using ")[1:]]
    assert max(used) <= len(header) and "trace.csv" in gp


def test_montecarlo_trivial_and_deterministic(tmp_path, capsys):
    args = ["montecarlo", "--runs", "3", "--seed", "5", "--box", "0", "--identity-rotations",
            "--t-end", "1", "--workers", "1"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == cli.EXIT_OK
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == cli.EXIT_OK
    a = (tmp_path / "a" / "summary.txt").read_text()
    assert a == (tmp_path / "b" / "summary.txt").read_text()
    assert "converged = 3" in a and "max_jumps = 0" in a


def test_montecarlo_seeds_reproducible():
    cfg = fig2_config(t_end=0.3, h=5e-4)
    assert run_seeds(1, 4) == run_seeds(1, 4)
    rows1, agg1 = montecarlo(cfg, 2, seed=1, workers=1)
    rows2, agg2 = montecarlo(cfg, 2, seed=1, workers=1)
    strip = lambda rows: [r._replace(wall_time=0.0) for r in rows]
    assert strip(rows1) == strip(rows2)
    assert agg1._replace(wall_time=0) == agg2._replace(wall_time=0)
    assert aggregate(rows1).runs == 2


def test_montecarlo_rejects_zero_runs():
    with pytest.raises(ValueError):
        montecarlo(fig2_config(), 0)


def test_oracle_commands(capsys, monkeypatch):
    assert cli.main(["oracle", "exp", "--samples", "20"]) == cli.EXIT_OK
    assert cli.main(["oracle", "gap"]) == cli.EXIT_OK
    assert cli.main(["oracle", "gradcheck", "--samples", "10"]) == cli.EXIT_OK
    assert cli.main(["oracle", "rank", "--samples", "2"]) == cli.EXIT_OK
    monkeypatch.setattr(oracles, "EXP_TOL", 0.0)
    assert cli.main(["oracle", "exp", "--samples", "5"]) == cli.EXIT_ORACLE


def test_divergence_exit_code(tmp_path):
    # a huge step blows the stiff closed loop up
    code = cli.main(["run", "--preset", "fig2", "--h", "0.2", "--t-end", "20", "--out", str(tmp_path)])
    assert code in (cli.EXIT_DIVERGED, cli.EXIT_CERTIFICATE)


def test_invalid_argument_is_usage_error():
    with pytest.raises(SystemExit):
        cli.main(["oracle", "nope"])
