"""File formats used by the command line tools.

Matrices travel in a tiny self-describing binary container: an ASCII header
``HSM1 <rows> <cols>\\n`` followed by ``rows * cols`` float64 values,
little-endian, row-major. Writing then reading a matrix reproduces it bit for
bit, including signed zeros and subnormals.

Run settings live in flat ``key=value`` text files with a fixed, closed key
set. Perturbation stacks are stored as a single matrix of shape
``(bands * endmembers, pixels)`` whose column ``n`` is the row-major
flattening of the n-th per-pixel perturbation.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

_HSM_MAGIC = b"HSM1"

RUN_CONFIG_DEFAULTS = {
    "alpha": 0.0,
    "beta": 0.0,
    "gamma": 1.0,
    "psi_kind": "none",
    "eps_abs": 1e-1,
    "eps_rel": 1e-4,
    "tau_incr": 1.1,
    "tau_decr": 1.1,
    "mu": 10.0,
    "rho0_A": 1e-4,
    "rho0_M": 1e-8,
    "rho0_dM": 1e-4,
    "outer_tol": 1e-3,
    "max_outer_iters": 100,
    "max_inner_iters": 100,
    "seed": 0,
}

_INT_KEYS = {"max_outer_iters", "max_inner_iters", "seed"}
_STR_KEYS = {"psi_kind"}


class FormatError(ValueError):
    """A file failed to parse as the expected format."""


def save_hsm(path, matrix: np.ndarray) -> None:
    """Write a 2-D float64 matrix to ``path`` in the binary container."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("only 2-D matrices are stored")
    header = b"%s %d %d\n" % (_HSM_MAGIC, m.shape[0], m.shape[1])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(m, dtype="<f8").tobytes(order="C"))


def load_hsm(path) -> np.ndarray:
    """Read a matrix written by :func:`save_hsm`, bit for bit."""
    with open(path, "rb") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 3 or parts[0] != _HSM_MAGIC:
            raise FormatError(f"{path}: bad matrix header")
        try:
            rows, cols = int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise FormatError(f"{path}: bad matrix dimensions") from exc
        if rows < 0 or cols < 0:
            raise FormatError(f"{path}: negative matrix dimensions")
        payload = fh.read()
    expect = rows * cols * 8
    if len(payload) != expect:
        raise FormatError(
            f"{path}: expected {expect} payload bytes, found {len(payload)}"
        )
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64, copy=True)
    return data.reshape(rows, cols)


def flatten_dm(dM: np.ndarray) -> np.ndarray:
    """(N, L, K) perturbation stack -> (L*K, N) matrix for storage."""
    d = np.asarray(dM, dtype=np.float64)
    if d.ndim != 3:
        raise ValueError("perturbation stack must be 3-D")
    n = d.shape[0]
    return np.ascontiguousarray(d.reshape(n, -1).T)


def unflatten_dm(mat: np.ndarray, bands: int, n_endmembers: int) -> np.ndarray:
    """Inverse of :func:`flatten_dm` given the band and endmember counts."""
    m = np.asarray(mat, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != bands * n_endmembers:
        raise ValueError("stored perturbation matrix has the wrong shape")
    return np.ascontiguousarray(m.T.reshape(m.shape[1], bands, n_endmembers))


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_kv(path, mapping: dict) -> None:
    """Write a flat ``key=value`` file, one pair per line, keys in given order."""
    lines = [f"{k}={_format_value(v)}\n" for k, v in mapping.items()]
    with open(path, "w", encoding="ascii") as fh:
        fh.writelines(lines)


def read_kv(path) -> dict:
    """Parse a ``key=value`` file; ``#`` comments and blank lines are skipped."""
    out = {}
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            key = key.strip()
            if not key:
                raise FormatError(f"{path}:{lineno}: empty key")
            if key in out:
                raise FormatError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


@dataclass
class RunConfig:
    """Solver settings as stored in a run configuration file."""

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 1.0
    psi_kind: str = "none"
    eps_abs: float = 1e-1
    eps_rel: float = 1e-4
    tau_incr: float = 1.1
    tau_decr: float = 1.1
    mu: float = 10.0
    rho0_A: float = 1e-4
    rho0_M: float = 1e-8
    rho0_dM: float = 1e-4
    outer_tol: float = 1e-3
    max_outer_iters: int = 100
    max_inner_iters: int = 100
    seed: int = 0

    def to_mapping(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def parse_run_config(raw: dict, source: str = "run config") -> RunConfig:
    """Build a :class:`RunConfig` from parsed key=value pairs.

    Unknown keys are rejected so typos never silently fall back to defaults.
    """
    unknown = set(raw) - set(RUN_CONFIG_DEFAULTS)
    if unknown:
        names = ", ".join(sorted(unknown))
        raise FormatError(f"{source}: unknown keys: {names}")
    values = dict(RUN_CONFIG_DEFAULTS)
    for key, text in raw.items():
        if key in _STR_KEYS:
            values[key] = text
            continue
        try:
            values[key] = int(text) if key in _INT_KEYS else float(text)
        except ValueError as exc:
            raise FormatError(f"{source}: bad value for {key}: {text!r}") from exc
    return RunConfig(**values)


def load_run_config(path) -> RunConfig:
    return parse_run_config(read_kv(path), source=str(path))


def save_run_config(path, cfg: RunConfig) -> None:
    write_kv(path, cfg.to_mapping())


def write_trace_csv(path, rows) -> None:
    """Objective trace: one row per outer iteration, iteration 0 is the start."""
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "J", "data_term", "phi", "psi", "upsilon"])
        for i, j, data, phi, psi, ups in rows:
            writer.writerow(
                [i, repr(j), repr(data), repr(phi), repr(psi), repr(ups)]
            )


def write_eval_csv(path, rows) -> None:
    """Metric summary rows: (seed, aSAM_deg, GMSE_A, GMSE_dM, RE, wall_time_s)."""
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "aSAM_deg", "GMSE_A", "GMSE_dM", "RE", "wall_time_s"])
        for seed, a, ga, gd, r, wall in rows:
            writer.writerow([seed, repr(a), repr(ga), repr(gd), repr(r), repr(wall)])


def save_pgm16(path, image: np.ndarray) -> None:
    """Write a 2-D array as a 16-bit big-endian PGM, min-max scaled.

    The scaling interval is recorded next to the image in ``<path>.scale`` so
    physical values can be recovered. A constant image maps to all zeros.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM export needs a 2-D image")
    if not np.all(np.isfinite(img)):
        raise ValueError("PGM export needs finite values")
    h, w = img.shape
    vmin = float(img.min()) if img.size else 0.0
    vmax = float(img.max()) if img.size else 0.0
    if vmax > vmin:
        scaled = np.round((img - vmin) / (vmax - vmin) * 65535.0)
    else:
        scaled = np.zeros_like(img)
    pixels = scaled.astype(">u2")
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n65535\n" % (w, h))
        fh.write(pixels.tobytes(order="C"))
    write_kv(str(path) + ".scale", {"vmin": vmin, "vmax": vmax})


def load_pgm16(path) -> tuple:
    """Read a 16-bit PGM written by :func:`save_pgm16`; returns (raw, vmin, vmax)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    parts = blob.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5" or parts[2] != b"65535":
        raise FormatError(f"{path}: not a 16-bit PGM written by this tool")
    try:
        w, h = (int(t) for t in parts[1].split())
    except ValueError as exc:
        raise FormatError(f"{path}: bad PGM dimensions") from exc
    payload = parts[3]
    if len(payload) != w * h * 2:
        raise FormatError(f"{path}: truncated PGM payload")
    raw = np.frombuffer(payload, dtype=">u2").reshape(h, w).astype(np.uint16)
    scale = read_kv(str(path) + ".scale")
    return raw, float(scale["vmin"]), float(scale["vmax"])


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
