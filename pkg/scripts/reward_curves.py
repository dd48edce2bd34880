"""Tabulate accuracy reward against absolute error for every kind.

    python3 scripts/reward_curves.py --r-min 0.05 --d0 1 > curves.csv
"""

import argparse
import sys

import numpy as np

from reward_lab.rewards import KINDS, RewardSpec, accuracy_reward

ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
ap.add_argument("--r-min", type=float, default=0.05)
ap.add_argument("--d0", type=float, default=1.0)
ap.add_argument("--points", type=int, default=81)
args = ap.parse_args()

err = np.linspace(0.0, 4.0, args.points)
cols = [accuracy_reward(1.0 + err, 1.0, RewardSpec(kind=k, r_min=args.r_min, d_0=args.d0)) for k in KINDS]
sys.stdout.write("abs_error," + ",".join(KINDS) + "\n")
for i, e in enumerate(err):
    sys.stdout.write(f"{e:.4f}," + ",".join(f"{c[i]:.6f}" for c in cols) + "\n")
