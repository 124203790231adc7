"""Two sensors in a rhombus: multistart optimum against the best mirror-symmetric pair.

    python3 scripts/symmetry_breaking.py [--p 10] [--r 0.1] [--K 8]
"""
import argparse
import math

import numpy as np

from sensorplace.geometry import Placement, Polygon, is_feasible
from sensorplace.objective import SensorModel
from sensorplace.optimizer import DescentConfig, multistart


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--p", type=float, default=10)
    ap.add_argument("--r", type=float, default=0.1)
    ap.add_argument("--K", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    rh = Polygon([(1, 0), (0, 0.5), (-1, 0), (0, -0.5)])
    eps = 1e-3 * rh.diameter ** 2
    th = math.sqrt(eps) / 3
    cfg = DescentConfig(p=args.p, eps=eps, target_h=th, seed=args.seed)
    ms = multistart(cfg, rh, args.r, 2, args.K, workers=args.workers)
    for k, run in enumerate(ms.runs):
        c = np.round(run.final.centers, 3).tolist()
        print(f"start {k}: {run.termination.value:15s} {run.iterations:3d} it  g {run.final_g:.6g}  {c}")

    model = SensorModel(rh, eps, th)
    fam = []
    for t in np.arange(args.r, 1.0, model.h):
        pl = Placement([(t, 0.0), (-t, 0.0)], args.r)
        if is_feasible(pl, rh):
            fam.append((model.objective(pl, args.p).g, t))
    g_sym, t_sym = min(fam)
    c = ms.best.centers
    print(f"best multistart g {ms.best_g:.6g} at {np.round(c, 3).tolist()}")
    print(f"best symmetric pair (+-t, 0) g {g_sym:.6g} at t = {t_sym:.3f}")
    print("mirror defects (units of h): x->-x {:.2f}, y->-y {:.2f}".format(
        *(max(min(np.linalg.norm(a - b * s) for b in c) for a in c) / model.h
          for s in (np.array([-1, 1]), np.array([1, -1])))))


if __name__ == "__main__":
    main()
