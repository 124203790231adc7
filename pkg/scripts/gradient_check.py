"""Shape gradient against central finite differences for an off-center sensor.

    python3 scripts/gradient_check.py [--eps 1e-3] [--h 0.00390625] [--p 1 2 10]
"""
import argparse

from sensorplace.cli import gradient_report
from sensorplace.geometry import Placement, regular_polygon


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--eps", type=float, default=1e-3)
    ap.add_argument("--h", type=float, default=1 / 256)
    ap.add_argument("--r", type=float, default=0.25)
    ap.add_argument("--center", type=float, nargs=2, default=(0.2, 0.1))
    ap.add_argument("--p", type=float, nargs="+", default=[1, 2, 10])
    args = ap.parse_args()

    disk = regular_polygon(256)
    pl = Placement([tuple(args.center)], args.r)
    for p in args.p:
        rows, rel, cos = gradient_report(disk, pl, args.eps, p, args.h)
        comps = "  ".join(f"{ax}: {a:+.5g} vs {b:+.5g}" for _, ax, a, b, _ in rows)
        print(f"p={p:g}  rel {rel:.4f}  cos {cos:.5f}  {comps}")


if __name__ == "__main__":
    main()
