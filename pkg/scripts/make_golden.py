"""Regenerate the frozen test artifacts.

    python scripts/make_golden.py

Writes the shared reward golden vector (package data), the 15-rater MOS
fixture and its expected table, the metric fixture pair, and the seed-7
training logs. Re-running on the same platform reproduces them byte for byte;
only rerun after an intentional behaviour change.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from reward_lab.config import preset_config
from reward_lab.grpo import GrpoConfig, format_train_log, grpo_step, train
from reward_lab.env import EnvConfig, ToyPolicy
from reward_lab.metrics import correlation_report
from reward_lab.mos import run_pipeline
from reward_lab.rewards import KINDS, RewardSpec, composite_reward

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "reward_lab" / "data"
GOLDEN = ROOT / "tests" / "golden"
FIXTURES = ROOT / "tests" / "fixtures"

RESPONSES = [
    "<think>ok</think><answer>3.75</answer>",
    "<think>The edit is faithful.</think><answer>4</answer>",
    "<think>\nblurry edges\n</think>\n<answer> 2.5 </answer>\n",
    "<think></think><answer>1.0</answer>",
    "<think>a</think><answer>5</answer>",
    "<think>a</think><answer>3.5</answer><answer>4</answer>",
    "<answer>3.75</answer>",
    "<think>a</think><answer>three</answer>",
    "<think>a</think><answer>nan</answer>",
    "<think>a</think><answer>7.25</answer>",
    "<think>a</think><answer>-0.5</answer>",
    "<think>x<think>y</think></think><answer>2</answer>",
    "<answer>2</answer><think>a</think>",
    "<THINK>a</THINK><ANSWER>2</ANSWER>",
    "garbled output",
    "",
]
GT_SCORES = [1.0, 2.25, 3.0, 3.75, 5.0]


def reward_vector() -> str:
    lines = []
    for kind in KINDS:
        spec = RewardSpec(kind=kind)
        for text in RESPONSES:
            for gt in GT_SCORES:
                b = composite_reward(text, gt, spec)
                lines.append(
                    json.dumps(
                        {
                            "response": text,
                            "s_gt": gt,
                            "kind": kind,
                            "r_acc": f"{b.r_acc:.6f}",
                            "r_fmt": f"{b.r_fmt:.6f}",
                            "r_total": f"{b.r_total:.6f}",
                        }
                    )
                )
    return "\n".join(lines) + "\n"


def ratings_fixture(seed: int = 0) -> str:
    """14 consistent raters plus one uniform-random rater (p15) over 15 samples x 4 dims."""
    rng = np.random.default_rng(seed)
    dims = ("text_alignment", "fidelity", "quality", "overall")
    stimuli = [(f"s{i:02d}", d) for i in range(1, 16) for d in dims]
    quality = rng.uniform(2.5, 8.5, len(stimuli))
    consistent = np.clip(np.rint(quality + rng.normal(0.0, 0.8, (14, len(stimuli)))), 1, 10)
    random_rater = rng.integers(1, 11, len(stimuli))
    ratings = np.vstack([consistent, random_rater])
    lines = ["participant,sample,dimension,score"]
    for p in range(15):
        for j, (s, d) in enumerate(stimuli):
            lines.append(f"p{p + 1:02d},{s},{d},{int(ratings[p, j])}")
    return "\n".join(lines) + "\n"


def metric_fixture(seed: int = 3) -> tuple[str, str]:
    rng = np.random.default_rng(seed)
    gt = np.round(rng.uniform(1, 5, 40), 2)
    pred = np.round(gt + rng.normal(0, 0.6, 40), 2)
    ids = [f"img{i:03d}" for i in range(40)]
    pred_csv = "id,score\n" + "".join(f"{i},{p:.2f}\n" for i, p in zip(ids, pred))
    gt_csv = "id,score\n" + "".join(f"{i},{g:.2f}\n" for i, g in zip(ids, gt))
    return pred_csv, gt_csv


def step_fixture_log() -> str:
    """One update from the uniform policy on a fixed 16-prompt batch, seed 7."""
    env = EnvConfig()
    cfg = GrpoConfig(seed=7)
    ids = np.arange(16)
    s_gt = env.grid[np.arange(16) % env.n_bins]
    _, stats = grpo_step(ToyPolicy.uniform(env.max_depth, 2.0), env, RewardSpec(), cfg, 0, ids, s_gt)
    return format_train_log([stats])


def scenario_log(name: str, seed: int) -> str:
    cfg = preset_config(name).with_seed(seed)
    return format_train_log(train(cfg.initial_policy(), cfg.env, cfg.reward, cfg.grpo).log)


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    GOLDEN.mkdir(parents=True, exist_ok=True)
    FIXTURES.mkdir(parents=True, exist_ok=True)

    (DATA / "reward_golden.jsonl").write_text(reward_vector())

    ratings = ratings_fixture()
    (FIXTURES / "ratings_15.csv").write_text(ratings)
    _, table, _ = run_pipeline(ratings)
    (GOLDEN / "mos_table_15.csv").write_text(table.to_csv())

    pred_csv, gt_csv = metric_fixture()
    (FIXTURES / "pred.csv").write_text(pred_csv)
    (FIXTURES / "gt.csv").write_text(gt_csv)
    pred = [float(l.split(",")[1]) for l in pred_csv.splitlines()[1:]]
    gt = [float(l.split(",")[1]) for l in gt_csv.splitlines()[1:]]
    (GOLDEN / "eval_report.json").write_text(json.dumps(correlation_report(pred, gt).to_dict(), indent=2) + "\n")

    (GOLDEN / "step_seed7.csv").write_text(step_fixture_log())
    (GOLDEN / "l1_default_seed7.csv").write_text(scenario_log("l1_default", 7))
    print("golden artifacts written")


if __name__ == "__main__":
    main()
