"""Varadhan error and objective gap against eps for a centered sensor in the unit disk.

    python3 scripts/eps_sweep.py [--h 0.00390625] [--out runs/eps_sweep.csv]
"""
import argparse
from pathlib import Path

import numpy as np
from scipy import integrate, special

from sensorplace.cli import epsilon_sweep
from sensorplace.export import write_csv
from sensorplace.geometry import Placement, regular_polygon

R = 0.25


def bessel_objective(eps: float, p: float = 1.0) -> float:
    """g for the continuum radial state K0(s/a) / K0(R/a), a = sqrt(eps), over R < s < 1."""
    a = np.sqrt(eps)
    v = lambda s: -a * (np.log(special.k0e(s / a) / special.k0e(R / a)) - (s - R) / a)
    return integrate.quad(lambda s: v(s) ** p * 2 * np.pi * s, R, 1.0, limit=200)[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--h", type=float, default=1 / 256)
    ap.add_argument("--eps", type=float, nargs="+", default=[4e-3, 1e-3, 2.5e-4])
    ap.add_argument("--out", default="runs/eps_sweep.csv")
    args = ap.parse_args()

    disk = regular_polygon(256)
    rows, c_hat = epsilon_sweep(disk, Placement([(0.0, 0.0)], R), args.eps, args.h)
    out = []
    print(f"C_hat = {c_hat:.4f}")
    print(f"{'eps':>9} {'sup err':>8} {'bound':>8} {'g grid':>8} {'g exact':>8} {'g Bessel':>8}")
    for eps, h, err, bound, g, ge in rows:
        gb = bessel_objective(eps)
        out.append((eps, h, err, bound, g, ge, gb))
        print(f"{eps:9.2e} {err:8.4f} {bound:8.4f} {g:8.4f} {ge:8.4f} {gb:8.4f}")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_csv(args.out, ["eps", "h", "sup_error", "rate_bound", "g_varadhan", "g_exact", "g_bessel"], out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
