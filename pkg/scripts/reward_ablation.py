"""Depth trajectories per reward kind on the synthetic environment.

    python3 scripts/reward_ablation.py --seeds 10 --out runs/ablation.csv

For each preset, trains from the same cold start over several seeds and
reports initial/final mean depth, final modal depth, format probability and
the oracle-optimal depth for that preset.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from reward_lab.config import preset_config
from reward_lab.env import oracle_optimal_depth
from reward_lab.grpo import train

DEFAULT_PRESETS = ["l1_length", "l2_length", "laplacian_length", "gaussian_length", "gaussian_saturated", "l1_depth_heavy"]


def run(preset: str, seed: int) -> dict:
    cfg = preset_config(preset).with_seed(seed)
    start = cfg.initial_policy()
    result = train(start, cfg.env, cfg.reward, cfg.grpo)
    tail = result.log[-len(result.log) // 10 :]
    return {
        "preset": preset,
        "seed": seed,
        "steps": len(result.log),
        "mean_depth_initial": round(start.mean_depth(), 4),
        "mean_depth_final": round(result.policy.mean_depth(), 4),
        "modal_depth_final": result.policy.modal_depth(),
        "format_prob_final": round(result.policy.format_prob(), 4),
        "reward_last10pct": round(float(np.mean([s.mean_reward for s in tail])), 4),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--presets", nargs="+", default=DEFAULT_PRESETS)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--out", help="CSV path (default: stdout)")
    args = ap.parse_args()

    rows = [run(p, s) for p in args.presets for s in range(args.seeds)]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.DictWriter(fh, fieldnames=list(rows[0]))
    w.writeheader()
    w.writerows(rows)
    if args.out:
        fh.close()

    print("\npreset               k*  depth0  depth_final(mean±sd)  modal", file=sys.stderr)
    for p in args.presets:
        cfg = preset_config(p)
        k_star = oracle_optimal_depth(cfg.env, cfg.reward, samples=200_000)
        sub = [r for r in rows if r["preset"] == p]
        finals = np.array([r["mean_depth_final"] for r in sub])
        modal = np.bincount([r["modal_depth_final"] for r in sub]).argmax()
        print(
            f"{p:<20} {k_star:>2}  {sub[0]['mean_depth_initial']:>6.2f}  {finals.mean():>8.2f} ± {finals.std():.2f}"
            f"          {modal}",
            file=sys.stderr,
        )


if __name__ == "__main__":
    main()
