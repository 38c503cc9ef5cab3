import json
import math

import numpy as np
import pytest

from dualfield import io
from dualfield.cases import PI_BOX, beltrami_u, constant_field, tgv_u
from dualfield.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main
from dualfield.config import ConfigError, RunConfig, parse_config
from dualfield.diagnostics import DiagnosticsRecord
from dualfield.spaces import C, D, G, Discretization
from dualfield.timestepping import DualFieldStepper, march

SMALL = ["--K", "2", "--N", "1", "--solver", "superlu", "-q"]


# -- config ----------------------------------------------------------------------

@pytest.mark.parametrize("case,expected", [
    ("conservation", dict(K=3, N=2, dt=0.05, t_end=10.0, Re=math.inf)),
    ("dissipation", dict(K=3, N=2, dt=0.05, t_end=10.0, Re=100.0)),
    ("convergence", dict(dt=0.02, t_end=2.0, Re=1.0)),
    ("tgv", dict(K=8, N=2, Re=500.0)),
])
def test_case_defaults(case, expected):
    cfg = parse_config(case=case)
    for k, v in expected.items():
        assert getattr(cfg, k) == pytest.approx(v)


def test_default_case_is_conservation():
    cfg = parse_config()
    assert cfg.case == "conservation" and cfg.inviscid and cfg.deterministic


@pytest.mark.parametrize("over", [
    dict(dt=0), dict(dt="-1"), dict(t_end=-1), dict(K=0), dict(N=0), dict(Re=0),
    dict(case="nope"), dict(t_end=1, dt=0.3), dict(diag_every=0), dict(solver="lapack"),
    dict(deterministic="false"), dict(spectrum=True, spectrum_n=4), dict(dt="abc"),
])
def test_invalid_configs(over):
    with pytest.raises(ConfigError):
        parse_config(**over)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        parse_config(colour="blue")


def test_fractions_and_inf():
    cfg = parse_config(dt="1/40", Re="inf", t_end="1/2")
    assert cfg.dt == 0.025 and cfg.t_end == 0.5 and math.isinf(cfg.Re)


def test_file_then_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\ncase = dissipation\nK = 2\ndt = 1/10  # inline\nt_end = 1\nsweep_K = 2, 3\n")
    cfg = parse_config(path, K=4, N=None)
    assert (cfg.case, cfg.K, cfg.N, cfg.dt, cfg.Re) == ("dissipation", 4, 2, 0.1, 100.0)
    assert cfg.sweep_K == (2, 3)


def test_malformed_file(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("K 3\n")
    with pytest.raises(ConfigError):
        parse_config(path)


def test_as_dict_roundtrip():
    cfg = parse_config(case="tgv")
    assert RunConfig(**{**cfg.as_dict(), "sweep_K": tuple(cfg.sweep_K), "sweep_N": tuple(cfg.sweep_N)}) == cfg


# -- CSV / manifest --------------------------------------------------------------

def test_csv_roundtrip_is_exact(tmp_path):
    rec = DiagnosticsRecord(t=0.1, t_half=0.15, K1=1 / 3, K2=2 / 7, H1=-1e-17, H2=math.pi, E1=0.0, E2=1.0,
                            div_u2_linf=0.0, div_u1_linf=0.0, volume=8.0)
    io.write_diagnostics(tmp_path / "d.csv", [rec])
    row = io.read_csv(tmp_path / "d.csv")[0]
    assert row["K1"] == 1 / 3 and row["H2"] == math.pi and row["H1"] == -1e-17


def test_csv_writer_keeps_rows_until(tmp_path):
    p = tmp_path / "x.csv"
    with io.CsvWriter(p, ["t", "a"]) as w:
        for t in (0.0, 0.5, 1.0):
            w.write({"t": t, "a": 2 * t})
    with io.CsvWriter(p, ["t", "a"], keep_until=0.5) as w:
        w.write({"t": 0.75, "a": 9.0})
    assert [r["t"] for r in io.read_csv(p)] == [0.0, 0.5, 0.75]


def test_manifest_contents(tmp_path):
    cfg = parse_config(case="conservation")
    io.write_manifest(tmp_path / "m.json", cfg, status="ok")
    m = json.loads((tmp_path / "m.json").read_text())
    assert m["config"]["Re"] == "inf" and m["config"]["K"] == 3
    assert m["version"] and m["status"] == "ok" and "numpy" in m["environment"]
    assert set(m["config"]) == set(cfg.as_dict())


# -- field dumps -----------------------------------------------------------------

def test_vtk_roundtrip_of_constant_field(tmp_path, disc22):
    f = disc22.project(constant_field(1.0, -2.0, 0.5), D)
    io.write_vtk(tmp_path / "c.vtk", disc22, {"u": f}, 4, title="const")
    h = io.read_vtk(tmp_path / "c.vtk")
    assert h["title"] == "const" and h["dimensions"] == (4, 4, 4)
    np.testing.assert_allclose(h["fields"]["u"], np.tile([1.0, -2.0, 0.5], (64, 1)), atol=1e-13)


def test_vtk_point_order_is_x_fastest(tmp_path, disc22):
    f = disc22.project(beltrami_u, C)
    io.write_vtk(tmp_path / "b.vtk", disc22, {"u": f}, 5)
    h = io.read_vtk(tmp_path / "b.vtk")
    pts = io.vtk_points(h)
    np.testing.assert_allclose(pts[1] - pts[0], [0.2, 0, 0])
    np.testing.assert_allclose(pts[5] - pts[0], [0, 0.2, 0])
    np.testing.assert_allclose(pts[25] - pts[0], [0, 0, 0.2])
    np.testing.assert_allclose(h["fields"]["u"], disc22.eval_field(f, pts), atol=1e-14)


def test_vtk_tgv_dump_close_to_analytic(tmp_path):
    disc = Discretization.build(4, 3, *PI_BOX)
    io.write_vtk(tmp_path / "t.vtk", disc, {"u2": disc.project(tgv_u, D)}, 8)
    h = io.read_vtk(tmp_path / "t.vtk")
    pts = io.vtk_points(h)
    np.testing.assert_allclose(h["origin"], [-np.pi] * 3)
    exact = np.stack(tgv_u(*pts.T), 1)
    assert np.abs(h["fields"]["u2"] - exact).max() < 0.05


def test_vtk_rejects_scalar_and_garbage(tmp_path, disc22):
    with pytest.raises(ValueError):
        io.write_vtk(tmp_path / "s.vtk", disc22, {"p": disc22.zeros(G)}, 2)
    (tmp_path / "g.vtk").write_text("hello\n")
    with pytest.raises(ValueError):
        io.read_vtk(tmp_path / "g.vtk")


# -- checkpoints -----------------------------------------------------------------

def test_checkpoint_roundtrip(tmp_path, disc22, mats22):
    st = DualFieldStepper(disc22, 0.05, 20.0, backend="superlu", matrices=mats22)
    res = march(st, beltrami_u, 0.1)
    io.save_checkpoint(tmp_path / "c.npz", disc22, res.state, res.records[-1])
    ck = io.load_checkpoint(tmp_path / "c.npz")
    assert (ck["K"], ck["N"], ck["k"], ck["dt"], ck["Re"]) == (2, 2, 2, 0.05, 20.0)
    for name in ("u1_half", "w2_half", "u2_int", "w1_int", "P0", "P3", "w2_int"):
        a, b = getattr(res.state, name), getattr(ck["state"], name)
        np.testing.assert_array_equal(a.coeffs, b.coeffs)
        assert a.time_tag == b.time_tag and a.kind == b.kind
    assert ck["record"].as_row() == res.records[-1].as_row()


# -- CLI -------------------------------------------------------------------------

def test_cli_run_writes_artifacts(tmp_path):
    out = tmp_path / "run"
    code = main(["--case", "conservation", "--t-end", "0.2", "--out", str(out), "--spectrum-n", "8",
                 "--dump-every", "2", "--dump-n", "4", "--checkpoint-every", "2"] + SMALL)
    assert code == EXIT_OK
    rows = io.read_csv(out / "diagnostics.csv")
    assert [round(r["t"], 10) for r in rows] == [0.0, 0.05, 0.1, 0.15, 0.2]
    k = np.array([r["K2"] for r in rows])
    assert np.ptp(k) <= 1e-9 * k[0]
    spec = io.read_csv(out / "spectrum.csv")
    assert sorted({r["t"] for r in spec}) == [0.0, 0.1, 0.2]
    assert sorted(p.name for p in out.glob("*.vtk")) == ["fields_k00000.vtk", "fields_k00002.vtk", "fields_k00004.vtk"]
    assert sorted(p.name for p in out.glob("*.npz")) == ["checkpoint_k00002.npz", "checkpoint_k00004.npz"]
    m = json.loads((out / "manifest.json").read_text())
    assert m["status"] == "ok" and m["solver_backend"] == "superlu"


def test_cli_t_end_zero_single_row(tmp_path):
    assert main(["--t-end", "0", "--out", str(tmp_path)] + SMALL) == EXIT_OK
    rows = io.read_csv(tmp_path / "diagnostics.csv")
    assert len(rows) == 1 and rows[0]["t"] == 0.0


def test_cli_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["--case", "dissipation", "--t-end", "0.1", "--out", str(tmp_path / name)] + SMALL) == EXIT_OK
    assert (tmp_path / "a" / "diagnostics.csv").read_bytes() == (tmp_path / "b" / "diagnostics.csv").read_bytes()


def test_cli_resume_matches_uninterrupted_run(tmp_path):
    common = ["--case", "dissipation", "--t-end", "0.2"] + SMALL
    assert main(common + ["--out", str(tmp_path / "full")]) == EXIT_OK
    assert main(common + ["--out", str(tmp_path / "part"), "--checkpoint-every", "2"]) == EXIT_OK
    # simulate a crash after step 2: drop later rows by resuming from the checkpoint
    ck = tmp_path / "part" / "checkpoint_k00002.npz"
    assert main(common + ["--out", str(tmp_path / "part"), "--resume", str(ck)]) == EXIT_OK
    assert (tmp_path / "part" / "diagnostics.csv").read_bytes() == (tmp_path / "full" / "diagnostics.csv").read_bytes()


def test_cli_resume_mismatch_is_config_error(tmp_path):
    common = ["--case", "dissipation", "--t-end", "0.1", "--checkpoint-every", "1"] + SMALL
    assert main(common + ["--out", str(tmp_path)]) == EXIT_OK
    bad = ["--case", "dissipation", "--t-end", "0.1", "--K", "3", "--N", "1", "-q", "--solver", "superlu"]
    assert main(bad + ["--out", str(tmp_path), "--resume", str(tmp_path / "checkpoint_k00001.npz")]) == EXIT_CONFIG


def test_cli_convergence_sweep(tmp_path):
    code = main(["--case", "convergence", "--t-end", "0.04", "--sweep-K", "2,3", "--sweep-N", "1",
                 "--out", str(tmp_path), "--solver", "superlu", "-q"])
    assert code == EXIT_OK
    rows = io.read_csv(tmp_path / "errors.csv")
    assert [(r["K"], r["N"]) for r in rows] == [(2, 1), (3, 1)]
    assert all(r["err_u2"] > 0 for r in rows)
    assert (tmp_path / "diagnostics_K3_N1.csv").exists()


@pytest.mark.parametrize("argv", [["--dt", "0"], ["--case", "bogus"], ["--t-end", "1", "--dt", "0.3"]])
def test_cli_config_errors(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path), "-q"]) == EXIT_CONFIG


def test_cli_solver_failure_exit_code(tmp_path, monkeypatch):
    from dualfield import linsolve

    def boom(A, b, backend="auto"):
        raise linsolve.SolverError("singular")

    monkeypatch.setattr(linsolve, "solve", boom)
    assert main(["--t-end", "0.1", "--out", str(tmp_path)] + SMALL) == EXIT_SOLVER
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["status"].startswith("failed")


def test_cli_inviscid_and_re_are_exclusive(tmp_path):
    with pytest.raises(SystemExit):
        main(["--inviscid", "--re", "10", "--out", str(tmp_path)])
