"""End-to-end command line tests on a small synthetic scene."""
import numpy as np
import pytest

from plmm import cli, fileio

W, H, L, K = 6, 4, 18, 3
N = W * H


def _synth_args(out_dir, seed=11, snr="45"):
    return [
        "synth",
        "--width", str(W),
        "--height", str(H),
        "--bands", str(L),
        "--endmembers", str(K),
        "--snr-db", snr,
        "--cvar-top", "0.1",
        "--cvar-bottom", "0.25",
        "--seed", str(seed),
        "--out-dir", str(out_dir),
    ]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One scene, one solver config, one finished unmixing run."""
    root = tmp_path_factory.mktemp("cli")
    scene = root / "scene"
    assert cli.run(_synth_args(scene)) == 0

    cfg = fileio.RunConfig(
        gamma=1.0,
        eps_abs=1e-7,
        eps_rel=1e-7,
        rho0_A=1.0,
        rho0_M=1e-4,
        rho0_dM=1.0,
        outer_tol=1e-6,
        max_outer_iters=8,
        max_inner_iters=4000,
        seed=11,
    )
    cfg_path = root / "run.cfg"
    fileio.save_run_config(cfg_path, cfg)

    run = root / "run0"
    code = cli.run(
        ["unmix", "--input", str(scene), "--config", str(cfg_path), "--out-dir", str(run)]
    )
    assert code == 0
    return {"root": root, "scene": scene, "cfg": cfg_path, "run": run}


def _report_lines_without_wall(path):
    lines = path.read_text().splitlines()
    return [ln for ln in lines if not ln.startswith("wall_time_s=")]


# ------------------------------------------------------------------ scene side


def test_synth_writes_complete_scene(workspace):
    scene = workspace["scene"]
    y = fileio.load_hsm(scene / "Y.hsm")
    m = fileio.load_hsm(scene / "M_true.hsm")
    a = fileio.load_hsm(scene / "A_true.hsm")
    flat = fileio.load_hsm(scene / "dM_true.hsm")
    assert y.shape == (L, N)
    assert m.shape == (L, K)
    assert a.shape == (K, N)
    assert flat.shape == (L * K, N)
    assert np.allclose(a.sum(axis=0), 1.0)
    side = fileio.read_kv(scene / "spec.cfg")
    assert side["width"] == str(W) and side["height"] == str(H)
    assert side["endmembers"] == str(K)
    assert float(side["sigma"]) > 0.0


def test_synth_is_deterministic(workspace, tmp_path):
    twin = tmp_path / "twin"
    assert cli.run(_synth_args(twin)) == 0
    scene = workspace["scene"]
    for name in ["Y.hsm", "M_true.hsm", "A_true.hsm", "dM_true.hsm", "spec.cfg"]:
        assert (twin / name).read_bytes() == (scene / name).read_bytes()


def test_synth_rejects_bad_geometry(tmp_path):
    out = tmp_path / "bad"
    args = _synth_args(out)
    args[args.index("--bands") + 1] = "2"  # too few bands for the spectra model
    assert cli.run(args) == 2
    assert not out.exists()


# ------------------------------------------------------------------- unmix run


def test_unmix_outputs_and_feasibility(workspace):
    run = workspace["run"]
    m = fileio.load_hsm(run / "M.hsm")
    a = fileio.load_hsm(run / "A.hsm")
    flat = fileio.load_hsm(run / "dM.hsm")
    assert m.shape == (L, K)
    assert a.shape == (K, N)
    dM = fileio.unflatten_dm(flat, L, K)
    assert a.min() >= -1e-3
    assert np.abs(a.sum(axis=0) - 1.0).max() <= 1e-3
    assert m.min() >= 0.0
    assert (m[None, :, :] + dM).min() >= -1e-3

    report = fileio.read_kv(run / "report.txt")
    assert report["termination"] in {"converged", "max_iters"}
    assert report["objective_increases"] == "0"
    assert float(report["J_final"]) > 0.0
    assert float(report["wall_time_s"]) > 0.0
    assert report["pixels"] == str(N)


def test_unmix_trace_is_monotone(workspace):
    import csv

    with open(workspace["run"] / "objective_trace.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "iteration"
    js = np.array([float(r[1]) for r in rows[1:]])
    assert js.size >= 2
    assert np.all(np.diff(js) <= 1e-8 * (1.0 + np.abs(js[:-1])))


def test_unmix_renders_figures(workspace):
    run = workspace["run"]
    for name in [
        "objective_trace.png",
        "endmembers.png",
        "abundance_maps.png",
        "variability_maps.png",
    ]:
        blob = (run / name).read_bytes()
        assert blob[:8] == b"\x89PNG\r\n\x1a\n"
        assert len(blob) > 1000


def test_unmix_is_deterministic(workspace, tmp_path):
    twin = tmp_path / "twin"
    code = cli.run(
        [
            "unmix",
            "--input", str(workspace["scene"]),
            "--config", str(workspace["cfg"]),
            "--out-dir", str(twin),
            "--no-figures",
        ]
    )
    assert code == 0
    run = workspace["run"]
    for name in ["M.hsm", "A.hsm", "dM.hsm", "objective_trace.csv"]:
        assert (twin / name).read_bytes() == (run / name).read_bytes()
    assert _report_lines_without_wall(twin / "report.txt") == _report_lines_without_wall(
        run / "report.txt"
    )


def test_unmix_flag_overrides_beat_config(workspace, tmp_path):
    out = tmp_path / "plain"
    code = cli.run(
        [
            "unmix",
            "--input", str(workspace["scene"]),
            "--config", str(workspace["cfg"]),
            "--penalty", "none",
            "--alpha", "0.7",
            "--out-dir", str(out),
            "--no-figures",
        ]
    )
    assert code == 0
    report = fileio.read_kv(out / "report.txt")
    # the plain variant zeroes the weights it does not use
    assert report["penalty"] == "none"
    assert float(report["alpha"]) == 0.0
    assert float(report["phi"]) == 0.0


def test_unmix_penalty_variants(workspace, tmp_path):
    scene = str(workspace["scene"])
    base = ["unmix", "--input", scene, "--config", str(workspace["cfg"]), "--no-figures"]

    out = tmp_path / "ss"
    assert cli.run(base + ["--penalty", "ss", "--alpha", "0.05", "--out-dir", str(out)]) == 0
    report = fileio.read_kv(out / "report.txt")
    assert report["psi_kind"] == "none"
    assert float(report["phi"]) > 0.0

    out = tmp_path / "mv"
    assert cli.run(base + ["--penalty", "mv", "--beta", "1e-6", "--out-dir", str(out)]) == 0
    assert fileio.read_kv(out / "report.txt")["psi_kind"] == "volume"

    out = tmp_path / "vca"
    assert cli.run(base + ["--penalty", "vca", "--beta", "0.1", "--out-dir", str(out)]) == 0
    assert fileio.read_kv(out / "report.txt")["psi_kind"] == "dist"

    out = tmp_path / "dist"
    ref = workspace["scene"] / "M_true.hsm"
    code = cli.run(
        base
        + ["--penalty", "dist", "--beta", "0.1", "--ref-file", str(ref), "--out-dir", str(out)]
    )
    assert code == 0


def test_unmix_usage_errors(workspace, tmp_path):
    scene = str(workspace["scene"])
    missing = tmp_path / "missing"

    # dist penalty without reference spectra
    code = cli.run(
        ["unmix", "--input", scene, "--penalty", "dist", "--out-dir", str(missing)]
    )
    assert code == 2
    # negative weight
    code = cli.run(
        ["unmix", "--input", scene, "--gamma", "-1", "--out-dir", str(missing)]
    )
    assert code == 2
    # smoothness without image layout: bare matrix file, no spec.cfg next to it
    bare = tmp_path / "bare.hsm"
    fileio.save_hsm(bare, fileio.load_hsm(workspace["scene"] / "Y.hsm"))
    code = cli.run(
        [
            "unmix",
            "--input", str(bare),
            "--endmembers", str(K),
            "--alpha", "0.1",
            "--out-dir", str(missing),
        ]
    )
    assert code == 2
    # endmember count unknown for the same bare matrix
    assert cli.run(["unmix", "--input", str(bare), "--out-dir", str(missing)]) == 2
    # rejected invocations leave no partial results
    assert not missing.exists()


def test_unmix_unreadable_inputs_exit_2(tmp_path):
    out = tmp_path / "out"
    assert cli.run(["unmix", "--input", str(tmp_path / "nope.hsm"), "--out-dir", str(out)]) == 2
    corrupt = tmp_path / "corrupt.hsm"
    corrupt.write_bytes(b"HSM1 4 4\n\x00\x00")
    assert cli.run(["unmix", "--input", str(corrupt), "--out-dir", str(out)]) == 2
    assert not out.exists()


def test_bad_flags_exit_2(capsys):
    assert cli.run(["unmix", "--input"]) == 2
    assert cli.run(["frobnicate"]) == 2
    assert cli.run([]) == 2
    capsys.readouterr()


def test_help_exits_0(capsys):
    assert cli.run(["--help"]) == 0
    capsys.readouterr()


# ------------------------------------------------------------------ evaluation


def test_eval_truth_against_itself_is_exact(tmp_path, capsys):
    scene = tmp_path / "clean"
    assert cli.run(_synth_args(scene, seed=4, snr="inf")) == 0
    out = tmp_path / "self.csv"
    code = cli.run(
        [
            "eval",
            "--truth-dir", str(scene),
            "--estimate-dir", str(scene),
            "--out", str(out),
        ]
    )
    assert code == 0
    capsys.readouterr()
    import csv

    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["seed", "aSAM_deg", "GMSE_A", "GMSE_dM", "RE", "wall_time_s"]
    seed, asam, ga, gd, re, wall = rows[1]
    assert seed == "4"
    assert abs(float(asam)) <= 1e-9
    assert float(ga) == 0.0
    assert float(gd) == 0.0
    assert float(re) <= 1e-30  # noise-free scene reconstructs exactly
    assert float(wall) == 0.0


def test_eval_scores_a_run(workspace):
    run = workspace["run"]
    code = cli.run(
        ["eval", "--truth-dir", str(workspace["scene"]), "--estimate-dir", str(run)]
    )
    assert code == 0
    import csv

    with open(run / "eval.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    seed, asam, ga, gd, re, wall = rows[1]
    assert seed == "11"
    # high-SNR pure-pixel scene: the run should land near the truth
    assert 0.0 < float(asam) < 15.0
    assert float(re) > 0.0
    report = fileio.read_kv(run / "report.txt")
    assert float(wall) == float(report["wall_time_s"])


def test_eval_shape_mismatch_is_a_failure(workspace, tmp_path):
    bad = tmp_path / "bad_est"
    bad.mkdir()
    fileio.save_hsm(bad / "M.hsm", np.ones((L, K + 1)))
    fileio.save_hsm(bad / "A.hsm", np.full((K + 1, N), 1.0 / (K + 1)))
    fileio.save_hsm(bad / "dM.hsm", np.zeros((L * (K + 1), N)))
    code = cli.run(
        ["eval", "--truth-dir", str(workspace["scene"]), "--estimate-dir", str(bad)]
    )
    assert code == 1


def test_eval_missing_dir_exits_2(workspace, tmp_path):
    code = cli.run(
        [
            "eval",
            "--truth-dir", str(workspace["scene"]),
            "--estimate-dir", str(tmp_path / "nowhere"),
        ]
    )
    assert code == 2


# ------------------------------------------------------------------ map export


def test_export_abundance_maps(workspace, tmp_path):
    out = tmp_path / "maps"
    code = cli.run(
        [
            "export-maps",
            "--input", str(workspace["scene"] / "A_true.hsm"),
            "--kind", "abundance",
            "--out-dir", str(out),
        ]
    )
    assert code == 0
    for k in range(K):
        raw, vmin, vmax = fileio.load_pgm16(out / f"abundance_{k}.pgm")
        assert raw.shape == (H, W)
        assert 0.0 <= vmin <= vmax <= 1.0
    assert not (out / f"abundance_{K}.pgm").exists()


def test_export_variability_maps(workspace, tmp_path):
    out = tmp_path / "vmaps"
    code = cli.run(
        [
            "export-maps",
            "--input", str(workspace["run"] / "dM.hsm"),
            "--kind", "variability",
            "--width", str(W),
            "--height", str(H),
            "--bands", str(L),
            "--out-dir", str(out),
        ]
    )
    assert code == 0
    raw, vmin, vmax = fileio.load_pgm16(out / "variability_0.pgm")
    assert raw.shape == (H, W)
    assert vmax >= vmin >= 0.0


def test_export_maps_usage_errors(workspace, tmp_path):
    out = tmp_path / "nope"
    a_path = str(workspace["scene"] / "A_true.hsm")
    # wrong layout for the pixel count
    code = cli.run(
        [
            "export-maps",
            "--input", a_path,
            "--kind", "abundance",
            "--width", str(W - 1),
            "--height", str(H),
            "--out-dir", str(out),
        ]
    )
    assert code == 2
    # variability stack not divisible by the band count
    code = cli.run(
        [
            "export-maps",
            "--input", str(workspace["scene"] / "dM_true.hsm"),
            "--kind", "variability",
            "--bands", str(L - 1),
            "--out-dir", str(out),
        ]
    )
    assert code == 2
    assert not out.exists()
