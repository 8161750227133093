import json

import numpy as np
import pytest

from steadywaves.cli import main, read_csv
from steadywaves import laminar
from steadywaves.vorticity import FlowParameters, two_layer


FLAT_CFG = """\
physics.d = 1.0
physics.g = 9.8
physics.c = 1.0
physics.p0 = -1.0
vorticity.piece = -1.0, 0.0, 0.0
grid.Nq = 16
grid.Np = 32
solver.mode = fixed_Q
solver.Q = 20.6
verify.pairing_tol = 1e-3
"""

TWO_LAYER_CFG = """\
physics.d = 1.0
physics.g = 9.8
physics.c = 1.0
physics.p0 = -1.0
vorticity.piece = -1.0, -0.5, 3.0
vorticity.piece = -0.5, 0.0, 0.0
grid.Nq = 16
grid.Np = 64
solver.mode = fixed_amplitude
solver.amplitude_schedule = 0.0
solver.tol = 1e-11
# pairing noise floor scales with the coarse Np of this smoke grid
verify.pairing_tol = 5e-3
verify.eps_list = 0.8, 1.0
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_laminar_flat(tmp_path, capsys):
    cfg = write_cfg(tmp_path, FLAT_CFG)
    assert main(["laminar", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "laminar.json").read_text())
    assert summary["lambda"] == pytest.approx(1.0, abs=1e-12)
    assert summary["Q"] == pytest.approx(20.6, abs=1e-12)


def test_laminar_two_layer_matches_module(tmp_path):
    cfg = write_cfg(tmp_path, TWO_LAYER_CFG)
    assert main(["laminar", "--config", cfg, "--out", str(tmp_path / "o"),
                 "--quiet"]) == 0
    summary = json.loads((tmp_path / "o" / "laminar.json").read_text())
    params = FlowParameters(d=1.0, g=9.8, c=1.0, p0=-1.0)
    v = two_layer(3.0)
    lam = laminar.solve_lambda(v, params)
    # bit-for-bit agreement with the library values
    assert summary["lambda"] == lam
    assert summary["Q"] == laminar.laminar_Q(lam, params)
    header, data = read_csv(tmp_path / "o" / "laminar.csv")
    assert header == ["p", "h", "h_p"]
    lf = laminar.solve(v, params, data[:, 0])
    assert np.max(np.abs(data[:, 1] - lf.h)) == 0.0


def test_solve_flat_fixed_Q(tmp_path):
    cfg = write_cfg(tmp_path, FLAT_CFG)
    out = tmp_path / "run"
    assert main(["solve", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    summary = json.loads((out / "field.json").read_text())
    assert summary["residual_inf"] <= 1e-10
    assert summary["Q"] == 20.6
    assert summary["min_one_plus_hp"] == pytest.approx(1.0, abs=1e-12)
    header, data = read_csv(out / "field.csv")
    assert header == ["q", "p", "h"]
    assert np.max(np.abs(data[:, 2])) <= 1e-12


def test_solve_amplitude_zero_matches_laminar(tmp_path):
    cfg = write_cfg(tmp_path, TWO_LAYER_CFG)
    out = tmp_path / "run"
    assert main(["solve", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    _, data = read_csv(out / "field.csv")
    params = FlowParameters(d=1.0, g=9.8, c=1.0, p0=-1.0)
    lf = laminar.solve(two_layer(3.0), params, np.linspace(-1, 0, 65))
    h = data[:, 2].reshape(16, 65)
    assert np.max(np.abs(h - lf.h[None, :])) < 1e-6


def test_transform_and_verify_pipeline(tmp_path):
    cfg = write_cfg(tmp_path, TWO_LAYER_CFG)
    out = tmp_path / "run"
    assert main(["solve", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    assert main(["transform", "--config", cfg, "--out", str(out / "t"),
                 "--field", str(out / "field.csv"), "--quiet"]) == 0
    tsum = json.loads((out / "t" / "transform.json").read_text())
    assert tsum["max_u_minus_c"] < 0.0
    assert tsum["bernoulli_collapse_err"] < 1e-12
    header, data = read_csv(out / "t" / "fields.csv")
    assert header == ["x", "y", "psi", "u", "v", "P"]
    assert main(["verify", "--config", cfg, "--out", str(out / "v"),
                 "--field", str(out / "field.csv"), "--quiet"]) == 0
    rep = json.loads((out / "v" / "verify.json").read_text())
    names = {r["formulation"] for r in rep["pairings"]}
    assert names == {"height", "stream", "euler_R1", "euler_R2", "euler_R3"}
    assert rep["surface_identity"]["identity_gap_rel"] < 1e-13
    assert "mollification" in rep and len(rep["mollification"]["eps"]) == 2
    assert main(["report", "--out", str(out / "v"), "--quiet"]) == 0
    assert (out / "v" / "report.csv").exists()


def test_verify_threshold_failure_exit_code(tmp_path):
    cfg_text = TWO_LAYER_CFG.replace("verify.pairing_tol = 5e-3",
                                     "verify.pairing_tol = 1e-16")
    cfg = write_cfg(tmp_path, cfg_text)
    out = tmp_path / "run"
    assert main(["solve", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    assert main(["verify", "--config", cfg, "--out", str(out / "v"),
                 "--field", str(out / "field.csv"), "--quiet"]) == 4


def test_missing_field_in_config(tmp_path, capsys):
    cfg = write_cfg(tmp_path, FLAT_CFG.replace("physics.d = 1.0\n", ""))
    assert main(["laminar", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "physics.d" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = write_cfg(tmp_path, FLAT_CFG + "solver.colour = blue\n")
    assert main(["laminar", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "solver.colour" in capsys.readouterr().err


def test_misaligned_jump_rejected(tmp_path, capsys):
    cfg = write_cfg(tmp_path, TWO_LAYER_CFG.replace("grid.Np = 64",
                                                    "grid.Np = 63"))
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "breakpoint" in capsys.readouterr().err


def test_nonconvergence_exit_code(tmp_path):
    # an absurd fixed-Q target the Newton loop cannot reach in 2 iterations
    cfg = write_cfg(tmp_path, FLAT_CFG.replace("solver.Q = 20.6",
                                               "solver.Q = -4000.0")
                    + "solver.max_iter = 2\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o"),
                 "--quiet"]) == 3


def test_stale_field_file_rejected(tmp_path, capsys):
    cfg = write_cfg(tmp_path, FLAT_CFG)
    out = tmp_path / "run"
    assert main(["solve", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    cfg2 = write_cfg(tmp_path, FLAT_CFG.replace("grid.Np = 32",
                                                "grid.Np = 16"), "run2.cfg")
    assert main(["verify", "--config", cfg2, "--out", str(out / "v"),
                 "--field", str(out / "field.csv")]) == 2
    assert "stale" in capsys.readouterr().err


def test_empty_lattice_rejected(tmp_path, capsys):
    cfg = write_cfg(tmp_path, FLAT_CFG + "verify.n_q_centers = 0\n")
    assert main(["laminar", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_solve_nonconvergent_amplitude_exit_code(tmp_path):
    # far-from-critical data cannot support a finite-amplitude wave
    cfg_text = TWO_LAYER_CFG.replace(
        "solver.amplitude_schedule = 0.0",
        "solver.amplitude_schedule = 0.0, 0.3") + "solver.max_iter = 8\n"
    cfg = write_cfg(tmp_path, cfg_text)
    out = tmp_path / "run"
    assert main(["solve", "--config", cfg, "--out", str(out), "--quiet"]) == 3
    assert (out / "field.csv").exists()  # last good field is still written


def test_determinism(tmp_path):
    cfg = write_cfg(tmp_path, TWO_LAYER_CFG)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["solve", "--config", cfg, "--out", str(out),
                     "--quiet"]) == 0
        assert main(["verify", "--config", cfg, "--out", str(out / "v"),
                     "--field", str(out / "field.csv"), "--quiet"]) == 0
        outs.append(out)

    def gather(base):
        files = {}
        for p in sorted(base.rglob("*")):
            if p.is_file():
                rel = p.relative_to(base)
                body = p.read_bytes()
                if p.name == "manifest.json":
                    data = json.loads(body)
                    data.pop("timestamp")  # the single volatile field
                    body = json.dumps(data, sort_keys=True).encode()
                files[str(rel)] = body
        return files

    fa, fb = gather(outs[0]), gather(outs[1])
    assert fa.keys() == fb.keys()
    for k in fa:
        assert fa[k] == fb[k], f"outputs differ in {k}"


def test_wave_pipeline_via_cli(tmp_path):
    # amplitude continuation through the CLI at near-critical gravity,
    # then transform + verify on the produced wave field
    Nq = 64
    dq = 2 * np.pi / Nq
    k_disc = np.sqrt(2.0 - 2.0 * np.cos(dq)) / dq
    g_crit = k_disc / np.tanh(k_disc)
    cfg_text = f"""\
physics.d = 1.0
physics.g = {g_crit:.17g}
physics.c = 1.0
physics.p0 = -1.0
vorticity.piece = -1.0, 0.0, 0.0
grid.Nq = {Nq}
grid.Np = 64
solver.mode = fixed_amplitude
solver.amplitude_schedule = 0.0, 5e-4, 1e-3
solver.tol = 1e-11
verify.pairing_tol = 5e-3
"""
    cfg = write_cfg(tmp_path, cfg_text)
    out = tmp_path / "wave"
    assert main(["solve", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    summary = json.loads((out / "field.json").read_text())
    assert summary["amplitude"] == pytest.approx(1e-3, rel=1e-8)
    assert summary["min_one_plus_hp"] > 0
    assert main(["transform", "--config", cfg, "--out", str(out / "t"),
                 "--field", str(out / "field.csv"), "--quiet"]) == 0
    tsum = json.loads((out / "t" / "transform.json").read_text())
    assert tsum["max_u_minus_c"] < 0
    assert tsum["bernoulli_collapse_err"] < 1e-12
    assert main(["verify", "--config", cfg, "--out", str(out / "v"),
                 "--field", str(out / "field.csv"), "--quiet"]) == 0
    rep = json.loads((out / "v" / "verify.json").read_text())
    for r in rep["pairings"]:
        assert r["max_normalized"] <= 5e-3
