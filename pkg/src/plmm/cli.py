"""Command line front end: synthetic scenes, unmixing runs, metrics, map export.

Exit codes: 0 on success, 1 when the computation fails, 2 for bad usage or
unreadable inputs. Inputs are validated before any output file is created, so
a rejected invocation leaves no partial results.

The ``--penalty`` flag selects the solver variant:

* ``none``  plain data fit, no spatial or shape penalty
* ``ss``    spatial smoothness on the abundance maps
* ``mv``    smoothness plus minimum simplex volume on the endmembers
* ``vca``   smoothness plus distance to the seeded extraction result
* ``dist``  smoothness plus distance to reference spectra from ``--ref-file``

Weights for terms a variant does not use are ignored. Without ``--penalty``
the structure comes from the config file's ``psi_kind`` and the weights alone.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import admm, fileio, initialization, metrics, model, penalties, plots, subspace, synthgen

_PENALTY_CHOICES = ("none", "ss", "mv", "vca", "dist")


class UsageError(Exception):
    """Bad flags or malformed inputs; reported with exit code 2."""


def _side_value(side: dict, key: str, caster, what: str):
    if key not in side:
        return None
    try:
        return caster(side[key])
    except ValueError as exc:
        raise UsageError(f"bad {key} in {what}: {side[key]!r}") from exc


def _cmd_synth(args) -> int:
    try:
        cvar = synthgen.halves_cvar_map(
            args.width, args.height, args.cvar_top, args.cvar_bottom
        )
        spec = synthgen.SyntheticSpec(
            width=args.width,
            height=args.height,
            bands=args.bands,
            n_endmembers=args.endmembers,
            snr_db=args.snr_db,
            cvar_map=cvar,
            pure_pixels=args.pure_pixels,
            max_abundance=args.max_abundance,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    scene = synthgen.generate(spec)
    out = fileio.ensure_dir(args.out_dir)
    fileio.save_hsm(out / "Y.hsm", scene.y.data)
    fileio.save_hsm(out / "M_true.hsm", scene.truth.M)
    fileio.save_hsm(out / "A_true.hsm", scene.truth.A)
    fileio.save_hsm(out / "dM_true.hsm", fileio.flatten_dm(scene.truth.dM))
    fileio.write_kv(
        out / "spec.cfg",
        {
            "width": args.width,
            "height": args.height,
            "bands": args.bands,
            "endmembers": args.endmembers,
            "snr_db": float(args.snr_db),
            "cvar_top": float(args.cvar_top),
            "cvar_bottom": float(args.cvar_bottom),
            "pure_pixels": "true" if args.pure_pixels else "false",
            "max_abundance": float(args.max_abundance),
            "seed": args.seed,
            "sigma": float(scene.sigma),
        },
    )
    print(f"wrote synthetic scene ({args.bands} bands, {spec.pixels} pixels) to {out}")
    return 0


def _resolve_scene_input(raw: str):
    p = Path(raw)
    if p.is_dir():
        return p / "Y.hsm", p / "spec.cfg"
    return p, p.parent / "spec.cfg"


def _cmd_unmix(args) -> int:
    y_path, side_path = _resolve_scene_input(args.input)
    y_raw = fileio.load_hsm(y_path)
    side = fileio.read_kv(side_path) if side_path.exists() else {}
    cfg = fileio.load_run_config(args.config) if args.config else fileio.RunConfig()

    alpha = cfg.alpha if args.alpha is None else args.alpha
    beta = cfg.beta if args.beta is None else args.beta
    gamma = cfg.gamma if args.gamma is None else args.gamma
    seed = cfg.seed if args.seed is None else args.seed
    width = args.width if args.width is not None else _side_value(side, "width", int, str(side_path))
    height = args.height if args.height is not None else _side_value(side, "height", int, str(side_path))
    n_end = args.endmembers
    if n_end is None:
        n_end = _side_value(side, "endmembers", int, str(side_path))
    if n_end is None:
        raise UsageError("endmember count unknown: pass --endmembers or provide spec.cfg")

    variant = args.penalty
    if variant is None:
        psi_kind = cfg.psi_kind
        if psi_kind not in model.PSI_KINDS:
            raise UsageError(f"bad psi_kind in config: {psi_kind!r}")
    elif variant in ("none", "ss"):
        psi_kind = "none"
    elif variant == "mv":
        psi_kind = "volume"
    else:
        psi_kind = "dist"
    if variant == "none":
        alpha = 0.0
        beta = 0.0

    ref = None
    if args.ref_file is not None:
        ref = fileio.load_hsm(args.ref_file)
    if psi_kind == "dist" and variant != "vca" and ref is None:
        raise UsageError("the dist penalty needs reference spectra via --ref-file")

    # Flag, shape, and layout validation; everything here maps to exit 2.
    try:
        if min(alpha, beta, gamma) < 0:
            raise ValueError("penalty weights must be nonnegative")
        layout_known = width is not None and height is not None
        if layout_known:
            y = model.HsiMatrix(data=y_raw, width=width, height=height)
        else:
            y = model.as_matrix(y_raw)
            if alpha > 0:
                raise ValueError(
                    "the smoothness penalty needs the image layout: "
                    "pass --width/--height or provide spec.cfg"
                )
        if ref is not None and ref.shape != (y_raw.shape[0], n_end):
            raise ValueError("reference spectra shape does not match the scene")
        op = (
            penalties.build_smoothness_operator(width, height)
            if alpha > 0
            else None
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    t0 = time.perf_counter()
    state0 = initialization.initialize(y, n_end, initialization.InitSpec(seed=seed))
    m0 = None
    if psi_kind == "dist":
        m0 = state0.M.copy() if variant == "vca" else ref
    frame = subspace.fit_projection(y, n_end) if psi_kind == "volume" else None

    pcfg = model.PenaltyConfig(
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        psi_kind=psi_kind,
        m0=m0,
        smoothness=op,
        frame=frame,
    )
    acfg = admm.AdmmConfig(
        eps_abs=cfg.eps_abs,
        eps_rel=cfg.eps_rel,
        tau_incr=cfg.tau_incr,
        tau_decr=cfg.tau_decr,
        mu=cfg.mu,
        rho0_A=cfg.rho0_A,
        rho0_M=cfg.rho0_M,
        rho0_dM=cfg.rho0_dM,
        max_inner_iters=cfg.max_inner_iters,
    )
    bcd = admm.BcdConfig(
        penalty=pcfg,
        admm=acfg,
        outer_tol=cfg.outer_tol,
        max_outer_iters=cfg.max_outer_iters,
    )
    state, trace = admm.unmix(y, state0, bcd)
    wall = time.perf_counter() - t0
    for arr in (state.M, state.A, state.dM):
        if not np.all(np.isfinite(arr)):
            raise RuntimeError("solver produced nonfinite values")

    out = fileio.ensure_dir(args.out_dir)
    fileio.save_hsm(out / "M.hsm", state.M)
    fileio.save_hsm(out / "A.hsm", state.A)
    fileio.save_hsm(out / "dM.hsm", fileio.flatten_dm(state.dM))
    rows = trace.rows()
    fileio.write_trace_csv(out / "objective_trace.csv", rows)

    report = {}
    if layout_known:
        report["width"] = width
        report["height"] = height
    cons = model.constraint_report(state)
    final = rows[-1]
    report.update(
        {
            "bands": y_raw.shape[0],
            "pixels": y_raw.shape[1],
            "endmembers": n_end,
            "penalty": variant if variant is not None else "config",
            "psi_kind": psi_kind,
            "alpha": float(alpha),
            "beta": float(beta),
            "gamma": float(gamma),
            "seed": seed,
            "outer_iterations": trace.n_outer,
            "termination": trace.termination,
            "objective_increases": len(trace.increases),
            "J_final": final[1],
            "data_term": final[2],
            "phi": final[3],
            "psi": final[4],
            "upsilon": final[5],
            "min_abundance": cons["min_a"],
            "max_colsum_dev": cons["max_colsum_dev"],
            "min_endmember": cons["min_m"],
            "min_perturbed": cons["min_m_plus_dm"],
            "wall_time_s": wall,
        }
    )
    fileio.write_kv(out / "report.txt", report)

    if not args.no_figures:
        plots.plot_objective_trace(rows, out / "objective_trace.png")
        plots.plot_endmembers(state.M, out / "endmembers.png")
        if m0 is not None:
            plots.plot_endmember_comparison(m0, state.M, out / "endmembers_vs_reference.png")
        if layout_known:
            plots.plot_abundance_maps(state.A, width, height, out / "abundance_maps.png")
            plots.plot_variability_maps(state.dM, width, height, out / "variability_maps.png")

    print(
        f"unmixed {y_raw.shape[1]} pixels in {trace.n_outer} outer iterations "
        f"({trace.termination}), J = {final[1]:.6e}, results in {out}"
    )
    return 0


def _pick_file(directory: Path, names) -> Path:
    for name in names:
        p = directory / name
        if p.exists():
            return p
    raise UsageError(f"{directory}: expected one of {', '.join(names)}")


def _load_state_dir(directory) -> model.PlmmState:
    d = Path(directory)
    if not d.is_dir():
        raise UsageError(f"{d}: not a directory")
    M = fileio.load_hsm(_pick_file(d, ("M.hsm", "M_true.hsm")))
    A = fileio.load_hsm(_pick_file(d, ("A.hsm", "A_true.hsm")))
    flat = fileio.load_hsm(_pick_file(d, ("dM.hsm", "dM_true.hsm")))
    L, K = M.shape
    return model.PlmmState(M=M, A=A, dM=fileio.unflatten_dm(flat, L, K))


def _cmd_eval(args) -> int:
    truth_dir = Path(args.truth_dir)
    est_dir = Path(args.estimate_dir)
    truth = _load_state_dir(truth_dir)
    est = _load_state_dir(est_dir)
    y_path = Path(args.input) if args.input else truth_dir / "Y.hsm"
    y = fileio.load_hsm(y_path)

    seed = 0
    wall = 0.0
    report_path = est_dir / "report.txt"
    if report_path.exists():
        report = fileio.read_kv(report_path)
        seed = _side_value(report, "seed", int, str(report_path)) or 0
        wall = _side_value(report, "wall_time_s", float, str(report_path)) or 0.0
    else:
        side_path = truth_dir / "spec.cfg"
        if side_path.exists():
            side = fileio.read_kv(side_path)
            seed = _side_value(side, "seed", int, str(side_path)) or 0

    result = metrics.evaluate(truth, est, y)
    out = Path(args.out) if args.out else est_dir / "eval.csv"
    fileio.write_eval_csv(
        out,
        [(seed, result.asam_deg, result.gmse_a, result.gmse_dm, result.re, wall)],
    )
    print(
        f"aSAM_deg={result.asam_deg:.6g} GMSE_A={result.gmse_a:.6g} "
        f"GMSE_dM={result.gmse_dm:.6g} RE={result.re:.6g} wall_time_s={wall:.6g}"
    )
    return 0


def _cmd_export_maps(args) -> int:
    src = Path(args.input)
    mat = fileio.load_hsm(src)
    side_path = src.parent / "spec.cfg"
    side = fileio.read_kv(side_path) if side_path.exists() else {}
    width = args.width if args.width is not None else _side_value(side, "width", int, str(side_path))
    height = args.height if args.height is not None else _side_value(side, "height", int, str(side_path))
    if width is None or height is None:
        raise UsageError("image layout unknown: pass --width/--height or provide spec.cfg")

    if args.kind == "abundance":
        maps = mat
        prefix = "abundance"
    else:
        bands = args.bands if args.bands is not None else _side_value(side, "bands", int, str(side_path))
        if bands is None:
            raise UsageError("variability maps need --bands (or spec.cfg) to split the stack")
        if bands <= 0 or mat.shape[0] % bands != 0:
            raise UsageError(
                f"stored stack has {mat.shape[0]} rows, not divisible by {bands} bands"
            )
        dM = fileio.unflatten_dm(mat, bands, mat.shape[0] // bands)
        maps = metrics.variability_energy(dM)
        prefix = "variability"

    if maps.shape[1] != width * height:
        raise UsageError(
            f"{maps.shape[1]} pixels do not fill a {width}x{height} image"
        )
    out = fileio.ensure_dir(args.out_dir)
    for k in range(maps.shape[0]):
        fileio.save_pgm16(out / f"{prefix}_{k}.pgm", maps[k].reshape(height, width))
    print(f"wrote {maps.shape[0]} {prefix} maps to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plmm",
        description="Hyperspectral unmixing with per-pixel endmember variability.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic scene with known truth")
    sp.add_argument("--width", type=int, default=128)
    sp.add_argument("--height", type=int, default=64)
    sp.add_argument("--bands", type=int, default=413)
    sp.add_argument("--endmembers", type=int, default=3)
    sp.add_argument("--snr-db", type=float, default=30.0, help="'inf' disables noise")
    sp.add_argument("--cvar-top", type=float, default=0.1)
    sp.add_argument("--cvar-bottom", type=float, default=0.25)
    sp.add_argument("--pure-pixels", action=argparse.BooleanOptionalAction, default=True)
    sp.add_argument("--max-abundance", type=float, default=0.8)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=_cmd_synth)

    up = sub.add_parser("unmix", help="estimate endmembers, abundances, perturbations")
    up.add_argument("--input", required=True, help="observation matrix file or scene directory")
    up.add_argument("--out-dir", required=True)
    up.add_argument("--config", help="key=value solver settings file")
    up.add_argument("--penalty", choices=_PENALTY_CHOICES)
    up.add_argument("--alpha", type=float, help="smoothness weight")
    up.add_argument("--beta", type=float, help="endmember penalty weight")
    up.add_argument("--gamma", type=float, help="perturbation energy weight")
    up.add_argument("--seed", type=int, help="initialization seed")
    up.add_argument("--endmembers", type=int)
    up.add_argument("--width", type=int)
    up.add_argument("--height", type=int)
    up.add_argument("--ref-file", help="reference endmember matrix for --penalty dist")
    up.add_argument("--no-figures", action="store_true")
    up.set_defaults(func=_cmd_unmix)

    ev = sub.add_parser("eval", help="score an estimate against a known truth")
    ev.add_argument("--truth-dir", required=True)
    ev.add_argument("--estimate-dir", required=True)
    ev.add_argument("--input", help="observation matrix, default <truth-dir>/Y.hsm")
    ev.add_argument("--out", help="CSV path, default <estimate-dir>/eval.csv")
    ev.set_defaults(func=_cmd_eval)

    xp = sub.add_parser("export-maps", help="render stored maps as 16-bit PGM images")
    xp.add_argument("--input", required=True, help="abundance or perturbation matrix file")
    xp.add_argument("--kind", choices=("abundance", "variability"), required=True)
    xp.add_argument("--width", type=int)
    xp.add_argument("--height", type=int)
    xp.add_argument("--bands", type=int, help="band count, needed for --kind variability")
    xp.add_argument("--out-dir", required=True)
    xp.set_defaults(func=_cmd_export_maps)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if isinstance(exc.code, int):
            return exc.code
        return 0 if exc.code is None else 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (fileio.FormatError, FileNotFoundError, IsADirectoryError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
