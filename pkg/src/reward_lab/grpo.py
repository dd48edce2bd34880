"""Group-relative advantages and the clipped policy-gradient update.

``grpo_objective`` is generic: a policy only needs ``log_prob(batch)``,
``grad_log_prob(batch)`` (one row per trajectory), ``vector`` and a
``from_vector`` constructor. The training loop is wired to the synthetic
environment in ``reward_lab.env``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .env import EnvConfig, ToyPolicy, TrajectoryBatch, make_dataset, render_response, rollout_from_uniforms
from .rewards import RewardSpec, composite_reward, composite_reward_arrays
from .streams import normals, uniforms

ZERO_STD = 1e-8
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class GrpoConfig:
    group_size: int = 8
    clip_eps: float = 0.2
    kl_beta: float = 0.0
    learning_rate: float = 0.05
    max_grad_norm: float = 1.0
    episodes: int = 5
    prompts_per_step: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")
        if not self.clip_eps > 0:
            raise ValueError("clip_eps must be > 0")
        if not self.kl_beta >= 0:
            raise ValueError("kl_beta must be >= 0")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if not self.max_grad_norm > 0:
            raise ValueError("max_grad_norm must be > 0")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if self.prompts_per_step < 1:
            raise ValueError("prompts_per_step must be >= 1")

    @property
    def rollout_batch(self) -> int:
        # on-policy: every rollout is consumed by exactly one update
        return self.prompts_per_step * self.group_size

    @property
    def train_batch(self) -> int:
        return self.rollout_batch


@dataclass
class RolloutGroup:
    prompt_id: int
    s_gt: float
    trajectories: TrajectoryBatch
    rewards: np.ndarray
    advantages: np.ndarray


@dataclass(frozen=True)
class StepStats:
    step: int
    mean_reward: float
    mean_depth: float
    format_rate: float
    grad_norm: float
    objective: float

    def csv_row(self) -> str:
        return (
            f"{self.step},{self.mean_reward:.6f},{self.mean_depth:.6f},"
            f"{self.format_rate:.6f},{self.grad_norm:.6f},{self.objective:.6f}"
        )


TRAIN_LOG_HEADER = "step,mean_reward,mean_depth,format_rate,grad_norm,objective"


@dataclass(frozen=True)
class ObjectiveResult:
    value: float
    gradient: np.ndarray


@dataclass
class TrainResult:
    policy: ToyPolicy
    log: list[StepStats] = field(default_factory=list)


def _standardize_rows(r: np.ndarray) -> np.ndarray:
    mean = r.mean(axis=-1, keepdims=True)
    std = r.std(axis=-1, keepdims=True)
    flat = std < ZERO_STD
    return np.where(flat, 0.0, (r - mean) / np.where(flat, 1.0, std))


def group_advantages(rewards: Sequence[float]) -> np.ndarray:
    """(r - mean) / population std within one group; all zeros if the group is flat."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1 or r.size < 2:
        raise ValueError("a group needs at least two rewards")
    return _standardize_rows(r[None, :])[0]


def surrogate_term(logp_new, logp_old, advantage, eps: float):
    """Pessimistic clipped surrogate min(ratio*A, clip(ratio, 1-eps, 1+eps)*A)."""
    ratio = np.exp(np.asarray(logp_new, dtype=np.float64) - np.asarray(logp_old, dtype=np.float64))
    a = np.asarray(advantage, dtype=np.float64)
    out = np.minimum(ratio * a, np.clip(ratio, 1.0 - eps, 1.0 + eps) * a)
    return float(out) if out.ndim == 0 else out


def kl_penalty(logp_new, logp_ref):
    """Per-sample KL estimate exp(d) - d - 1 with d = logp_ref - logp_new (always >= 0)."""
    d = np.asarray(logp_ref, dtype=np.float64) - np.asarray(logp_new, dtype=np.float64)
    out = np.expm1(d) - d
    return float(out) if out.ndim == 0 else out


def grpo_objective(
    groups: Sequence[RolloutGroup],
    policy,
    reference_policy=None,
    config: GrpoConfig = GrpoConfig(),
    need_gradient: bool = True,
) -> ObjectiveResult:
    """Mean over groups and members of surrogate - beta*KL, with its analytic gradient.

    ``trajectories.logp`` holds the snapshot (old-policy) log-probabilities.
    Members whose clipped branch is active contribute no gradient.
    """
    if not groups:
        raise ValueError("no rollout groups")
    for g in groups:
        if len(g.trajectories) != config.group_size or len(g.advantages) != config.group_size:
            raise ValueError(
                f"group {g.prompt_id} has {len(g.trajectories)} trajectories, expected {config.group_size}"
            )
    batch = TrajectoryBatch.concat(g.trajectories for g in groups)
    adv = np.concatenate([np.asarray(g.advantages, dtype=np.float64) for g in groups])
    weight = 1.0 / len(batch)  # equal-size groups: mean of group means == overall mean

    logp_new = policy.log_prob(batch)
    ratio = np.exp(logp_new - batch.logp)
    eps = config.clip_eps
    terms = np.minimum(ratio * adv, np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv)
    clipped = ((adv > 0) & (ratio > 1.0 + eps)) | ((adv < 0) & (ratio < 1.0 - eps))
    coef = np.where(clipped, 0.0, ratio * adv)

    beta = config.kl_beta
    if beta > 0:
        if reference_policy is None:
            raise ValueError("kl_beta > 0 requires a reference policy")
        d = reference_policy.log_prob(batch) - logp_new
        terms = terms - beta * (np.expm1(d) - d)
        coef = coef - beta * (-np.expm1(d))

    value = float(terms.sum() * weight)
    if not need_gradient:
        return ObjectiveResult(value, np.zeros(0))
    gradient = (coef * weight) @ policy.grad_log_prob(batch)
    return ObjectiveResult(value, gradient)


def clip_by_global_norm(grad: np.ndarray, max_norm: float) -> tuple[np.ndarray, float]:
    norm = float(np.sqrt(grad @ grad))
    if norm > max_norm:
        return grad * (max_norm / norm), norm
    return grad, norm


def collect_groups(
    policy: ToyPolicy,
    env: EnvConfig,
    spec: RewardSpec,
    config: GrpoConfig,
    step: int,
    prompt_ids: np.ndarray,
    s_gt: np.ndarray,
    render_text: bool = False,
) -> tuple[list[RolloutGroup], np.ndarray]:
    """G rollouts per prompt. Returns the groups and the raw composite rewards (no depth cost).

    Rollout (p, i) of this step draws from the counter stream keyed by
    (seed, step, prompt id, i), so results do not depend on evaluation order.
    """
    prompt_ids = np.asarray(prompt_ids, dtype=np.int64)
    s_gt = np.asarray(s_gt, dtype=np.float64)
    G = config.group_size
    u = uniforms(config.seed, step, prompt_ids[:, None], np.arange(G)[None, :], draws=3)
    gt_flat = np.repeat(s_gt, G)
    batch = rollout_from_uniforms(policy, gt_flat, env, u[..., 0].ravel(), u[..., 1].ravel(), normals(u[..., 2]).ravel())
    if render_text:
        raw = np.array([composite_reward(render_response(t), gt, spec).r_total for t, gt in zip(batch, gt_flat)])
    else:
        raw = composite_reward_arrays(batch.format_ok, batch.s_pred, gt_flat, spec)
    shaped = (raw - env.depth_cost * batch.depth).reshape(-1, G)
    adv = _standardize_rows(shaped)
    groups = [
        RolloutGroup(int(pid), float(gt), batch.take(slice(i * G, (i + 1) * G)), shaped[i], adv[i])
        for i, (pid, gt) in enumerate(zip(prompt_ids, s_gt))
    ]
    return groups, raw


def grpo_step(
    policy: ToyPolicy,
    env: EnvConfig,
    spec: RewardSpec,
    config: GrpoConfig,
    step: int,
    prompt_ids: np.ndarray,
    s_gt: np.ndarray,
    reference_policy: Optional[ToyPolicy] = None,
    render_text: bool = False,
) -> tuple[ToyPolicy, StepStats]:
    """One on-policy update: rollouts, rewards, advantages, clipped ascent step."""
    groups, raw = collect_groups(policy, env, spec, config, step, prompt_ids, s_gt, render_text)
    grad = grpo_objective(groups, policy, reference_policy, config).gradient
    grad, norm = clip_by_global_norm(grad, config.max_grad_norm)
    new_policy = ToyPolicy.from_vector(policy.vector + config.learning_rate * grad)
    after = grpo_objective(groups, new_policy, reference_policy, config, need_gradient=False).value
    depth = np.concatenate([g.trajectories.depth for g in groups])
    fmt = np.concatenate([g.trajectories.format_ok for g in groups])
    stats = StepStats(
        step=step,
        mean_reward=float(raw.mean()),
        mean_depth=float(depth.mean()),
        format_rate=float(fmt.mean()),
        grad_norm=norm,
        objective=after,
    )
    return new_policy, stats


def train(
    policy: ToyPolicy,
    env: EnvConfig,
    spec: RewardSpec,
    config: GrpoConfig,
    reference_policy: Optional[ToyPolicy] = None,
    on_step: Optional[Callable[[StepStats, ToyPolicy], None]] = None,
) -> TrainResult:
    """``episodes`` passes over the prompt pool, ``prompts_per_step`` prompts per update.

    The reference policy for the KL term defaults to the initial policy.
    """
    if reference_policy is None:
        reference_policy = policy
    dataset = make_dataset(env)
    per_episode = len(dataset) // config.prompts_per_step
    result = TrainResult(policy)
    step = 0
    for episode in range(config.episodes):
        order = np.random.default_rng([config.seed, episode]).permutation(len(dataset))
        for b in range(per_episode):
            ids = order[b * config.prompts_per_step : (b + 1) * config.prompts_per_step]
            result.policy, stats = grpo_step(result.policy, env, spec, config, step, ids, dataset[ids], reference_policy)
            result.log.append(stats)
            if on_step is not None:
                on_step(stats, result.policy)
            step += 1
    return result


def format_train_log(log: Sequence[StepStats]) -> str:
    return "\n".join([TRAIN_LOG_HEADER, *(s.csv_row() for s in log)]) + "\n"


def save_checkpoint(policy: ToyPolicy, path: str | Path, step: Optional[int] = None) -> None:
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "max_depth": policy.max_depth,
        "step": step,
        "params": [float(x) for x in policy.vector],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_checkpoint(path: str | Path) -> ToyPolicy:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    params = np.asarray(doc["params"], dtype=np.float64)
    if params.size != doc["max_depth"] + 2:
        raise ValueError("checkpoint parameter count does not match max_depth")
    return ToyPolicy.from_vector(params)
