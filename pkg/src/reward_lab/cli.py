"""``reward-lab`` command line: mos, eval, reward, train, oracle, serve.

Exit codes: 0 success, 1 usage, 2 validation, 3 runtime.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import socket
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from . import __version__
from .config import ConfigError, ExperimentConfig, dump_config, load_config, preset_config, PRESETS
from .env import ORACLE_SAMPLES, oracle_table
from .grpo import TRAIN_LOG_HEADER, save_checkpoint, train
from .metrics import DegenerateSeriesError, correlation_report
from .mos import RatingsError, ScreeningError, run_pipeline
from .rewards import KINDS, RewardSpec, RewardSpecError, composite_reward

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3
ADDR_ENV = "REWARD_LAB_ADDR"

log = logging.getLogger("reward_lab")


class ValidationError(Exception):
    pass


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    config_hash: Optional[str] = None
    seed: Optional[int] = None
    started_at: str = field(default_factory=_now)
    finished_at: Optional[str] = None
    files: list[str] = field(default_factory=list)

    def write(self, out_dir: Path) -> None:
        self.files.append("manifest.json")
        self.finished_at = _now()
        (out_dir / "manifest.json").write_text(json.dumps(dataclasses.asdict(self), indent=2) + "\n")


def _write(out_dir: Path, name: str, text: str, manifest: RunManifest) -> Path:
    path = out_dir / name
    path.write_text(text)
    manifest.files.append(name)
    return path


def _experiment(args) -> ExperimentConfig:
    if args.config and getattr(args, "scenario", None):
        raise UsageError("give either --config or --scenario, not both")
    if args.config:
        cfg = load_config(args.config)
    elif getattr(args, "scenario", None):
        cfg = preset_config(args.scenario)
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


# --- commands -------------------------------------------------------------------

def cmd_mos(args) -> int:
    text = Path(args.input).read_text(encoding="utf-8")
    z_table, table, report = run_pipeline(text, args.lo, args.hi)
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("mos")
    _write(out, "mos_table.csv", table.to_csv(), manifest)
    _write(out, "mos_z.csv", z_table.to_csv(), manifest)
    _write(out, "screening.json", report.to_json(), manifest)
    manifest.write(out)
    print(f"{len(table.entries)} stimuli, rejected participants: {sorted(report.rejected) or 'none'}")
    for key in table.excluded:
        print(f"excluded (no retained raters): {key[0]},{key[1]}")
    for dim in table.constant_dimensions:
        print(f"constant dimension mapped to midpoint: {dim}")
    return EXIT_OK


def _read_scores(path: str) -> dict[str, float]:
    scores: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ValidationError(f"{path}:{lineno}: expected 'id,score'")
            key, raw = row[0].strip(), row[1].strip()
            try:
                value = float(raw)
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ValidationError(f"{path}:{lineno}: score {raw!r} is not a number") from None
            if key in scores:
                raise ValidationError(f"{path}:{lineno}: duplicate id {key!r}")
            scores[key] = value
    return scores


def cmd_eval(args) -> int:
    pred = _read_scores(args.pred)
    gt = _read_scores(args.gt)
    missing_pred = sorted(set(gt) - set(pred))
    missing_gt = sorted(set(pred) - set(gt))
    if missing_pred or missing_gt:
        parts = []
        if missing_pred:
            parts.append(f"ids missing from predictions: {', '.join(missing_pred)}")
        if missing_gt:
            parts.append(f"ids missing from ground truth: {', '.join(missing_gt)}")
        raise ValidationError("; ".join(parts))
    ids = sorted(gt)
    report = correlation_report([pred[i] for i in ids], [gt[i] for i in ids])
    print(report.format())
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("eval")
    _write(out, "report.json", json.dumps(report.to_dict(), indent=2) + "\n", manifest)
    manifest.write(out)
    return EXIT_OK


def cmd_reward(args) -> int:
    spec = RewardSpec(
        kind=args.kind, r_min=args.r_min, d_0=args.d0, lam=args.lam, normalize_linear_error=args.normalize_linear_error
    )
    b = composite_reward(args.response, args.gt, spec)
    score = "none" if b.score is None else repr(b.score)
    print(f"format_ok={str(b.format_ok).lower()} score={score} r_acc={b.r_acc:.6f} r_fmt={b.r_fmt:.0f} r_total={b.r_total:.6f}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _experiment(args)
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("train", cfg.config_hash(), cfg.grpo.seed)
    _write(out, "config.yaml", dump_config(cfg), manifest)

    policy = cfg.initial_policy()
    every = args.checkpoint_every
    log_path = out / "train_log.csv"
    manifest.files.append(log_path.name)
    with log_path.open("w") as fh:
        fh.write(TRAIN_LOG_HEADER + "\n")

        def on_step(stats, current):
            fh.write(stats.csv_row() + "\n")
            if every and (stats.step + 1) % every == 0:
                name = f"checkpoint_{stats.step + 1:06d}.json"
                save_checkpoint(current, out / name, stats.step + 1)
                manifest.files.append(name)

        result = train(policy, cfg.env, cfg.reward, cfg.grpo, on_step=on_step)

    save_checkpoint(result.policy, out / "checkpoint_final.json", len(result.log))
    manifest.files.append("checkpoint_final.json")
    manifest.write(out)
    print(
        f"scenario={cfg.scenario} steps={len(result.log)} "
        f"mean_depth {policy.mean_depth():.3f} -> {result.policy.mean_depth():.3f} "
        f"modal_depth={result.policy.modal_depth()} format_prob={result.policy.format_prob():.3f}"
    )
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _experiment(args)
    table = oracle_table(cfg.env, cfg.reward, samples=args.samples, seed=cfg.grpo.seed)
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("oracle", cfg.config_hash(), cfg.grpo.seed)
    _write(out, "oracle.csv", table.to_csv(), manifest)
    manifest.write(out)
    print(table.to_csv(), end="")
    print(f"optimal depth k* = {table.best_depth}")
    return EXIT_OK


def bind_socket(address: str) -> socket.socket:
    host, _, port = address.rpartition(":")
    if not host or not port.isdigit():
        raise ValidationError(f"listen address must be host:port, got {address!r}")
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        sock.bind((host, int(port)))
    except OSError:
        sock.close()
        raise
    return sock


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    cfg = load_config(args.config) if args.config else ExperimentConfig()
    address = args.addr or os.environ.get(ADDR_ENV) or cfg.service.address
    sock = bind_socket(address)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    print(f"serving reward-lab {__version__} on http://{address}", flush=True)
    app = create_app(cfg.reward, cfg.service.max_batch)
    server = uvicorn.Server(uvicorn.Config(app, log_level="warning", access_log=False))
    server.run(sockets=[sock])
    return EXIT_OK


# --- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file (YAML)")
    common.add_argument("--seed", type=int, help="override grpo.seed")
    common.add_argument("--out", help="output directory")

    parser = _Parser(prog="reward-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mos", parents=[common], help="ratings CSV -> screened, normalised MOS table")
    p.add_argument("input")
    p.add_argument("--lo", type=float, default=1.0)
    p.add_argument("--hi", type=float, default=5.0)
    p.set_defaults(func=cmd_mos)

    p = sub.add_parser("eval", parents=[common], help="PLCC / SROCC / MainScore of two id,score files")
    p.add_argument("pred")
    p.add_argument("gt")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reward", parents=[common], help="score one response string")
    p.add_argument("response")
    p.add_argument("--gt", type=float, required=True)
    p.add_argument("--kind", choices=KINDS, default="l1")
    p.add_argument("--r-min", type=float, default=0.05)
    p.add_argument("--d0", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--normalize-linear-error", action="store_true")
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("train", parents=[common], help="GRPO on the synthetic environment")
    p.add_argument("--scenario", choices=sorted(PRESETS))
    p.add_argument("--checkpoint-every", type=int, default=0, metavar="N")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("oracle", parents=[common], help="Monte Carlo expected-reward table")
    p.add_argument("--scenario", choices=sorted(PRESETS))
    p.add_argument("--samples", type=int, default=ORACLE_SAMPLES)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("serve", parents=[common], help="run the reward HTTP service")
    p.add_argument("--addr", help=f"host:port (default: ${ADDR_ENV} or config)")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"reward-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"reward-lab: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RatingsError as exc:
        print(f"reward-lab: invalid ratings in {getattr(args, 'input', '?')}:", file=sys.stderr)
        for row, msg in exc.problems:
            print(f"  row {row}: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValidationError, ScreeningError, RewardSpecError, DegenerateSeriesError, ValueError) as exc:
        print(f"reward-lab: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"reward-lab: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
