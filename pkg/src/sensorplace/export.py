"""Artifact writers: scalar fields (CSV, 16-bit PGM), run logs, placements and manifests."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .geometry import Placement
from .grid import Grid

FLOAT_FMT = "%.17g"


def _fmt(x) -> str:
    return FLOAT_FMT % x


def export_field(field: np.ndarray, grid: Grid | None, path, fmt: str = "CSV") -> list[Path]:
    """Write ``field`` (shape (ny, nx)) and return the paths written.

    CSV holds the array row-major, row j = j-th grid row (increasing y), 17 significant
    digits. PGM16 is a binary P5 image with maxval 65535 after min-max normalization,
    drawn with increasing y upwards; a sidecar ``<path>.range.txt`` stores min and max.
    A constant field maps to all-zero pixels.
    """
    field = np.asarray(field, dtype=float)
    if field.ndim != 2:
        raise ValueError("field must be two-dimensional")
    if grid is not None and field.shape != grid.shape:
        raise ValueError(f"field shape {field.shape} does not match grid {grid.shape}")
    path = Path(path)
    fmt = fmt.upper()
    if fmt == "CSV":
        np.savetxt(path, field, fmt=FLOAT_FMT, delimiter=",")
        return [path]
    if fmt != "PGM16":
        raise ValueError(f"unknown format {fmt!r}")
    lo, hi = float(np.min(field)), float(np.max(field))
    if hi > lo:
        scaled = np.rint((field - lo) / (hi - lo) * 65535.0)
    else:
        scaled = np.zeros_like(field)
    pix = np.clip(scaled, 0, 65535).astype(">u2")[::-1]
    ny, nx = field.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n65535\n".encode("ascii"))
        fh.write(pix.tobytes())
    side = Path(str(path) + ".range.txt")
    side.write_text(f"{_fmt(lo)}\n{_fmt(hi)}\n")
    return [path, side]


def read_field_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def read_pgm16(path) -> np.ndarray:
    """Pixel array of a P5 16-bit image, rows in file order."""
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    nx, ny, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 65535:
        raise ValueError("expected a 16-bit PGM")
    pix = np.frombuffer(parts[4], dtype=">u2", count=nx * ny)
    return pix.reshape(ny, nx).astype(np.int64)


def write_csv(path, header: list[str], rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_convergence_log(path, run) -> Path:
    rows = [(r.iteration, r.g, r.f, r.grad_norm, r.step, int(r.accepted)) for r in run.log]
    return write_csv(path, ["iter", "g", "f", "grad_norm", "step", "accepted"], rows)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, Path):
        return str(x)
    return x


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_placement(path, pl: Placement, g: float, f: float, p: float, eps: float, h: float,
                    seed: int | None) -> Path:
    return write_json(path, {"centers": pl.centers, "radius": pl.radius, "g": g, "f": f,
                             "p": p, "eps": eps, "h": h, "seed": seed})


def read_placement(path) -> Placement:
    d = json.loads(Path(path).read_text())
    return Placement(np.array(d["centers"], dtype=float), float(d["radius"]))


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, artifacts: list[Path], config: dict, extra: dict | None = None) -> Path:
    """``manifest.json`` listing every artifact (relative path + sha256) and the config."""
    out_dir = Path(out_dir)
    entries = [{"path": str(Path(a).relative_to(out_dir)), "sha256": sha256(a)}
               for a in sorted(set(map(Path, artifacts)))]
    body = {"artifacts": entries, "config": config}
    if extra:
        body.update(extra)
    return write_json(out_dir / "manifest.json", body)
