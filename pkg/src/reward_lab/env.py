"""Synthetic quality-judging environment and its two-headed toy policy.

A rollout picks a reasoning depth k and whether to emit well-formed output.
Deeper reasoning observes the ground truth with less noise
(sigma_k = sigma_0 / sqrt(1 + k)); the observation is clamped to [1, 5] and
snapped to the score grid. Observation noise belongs to the environment, so a
trajectory's log-probability covers only the depth and format decisions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit, log_softmax

from .rewards import SCORE_HI, SCORE_LO, RewardSpec, composite_reward_arrays

FILLER = (
    "The edit follows the instruction for the main subject.",
    "Background regions are preserved from the source image.",
    "Edges around the modified area show mild blending artifacts.",
    "Colors stay consistent with the original lighting.",
    "Fine textures in the edited region look plausible.",
    "No unintended objects were introduced by the edit.",
    "Overall composition remains balanced after editing.",
    "Small details such as text and faces are intact.",
)


@dataclass(frozen=True)
class EnvConfig:
    max_depth: int = 6
    base_noise: float = 1.2
    bin_width: float = 0.25
    depth_cost: float = 0.0
    dataset_size: int = 3200
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if not self.base_noise > 0:
            raise ValueError("base_noise must be > 0")
        if not self.depth_cost >= 0:
            raise ValueError("depth_cost must be >= 0")
        if self.dataset_size < 1:
            raise ValueError("dataset_size must be >= 1")
        n = (SCORE_HI - SCORE_LO) / self.bin_width
        if not (self.bin_width > 0 and abs(n - round(n)) < 1e-9):
            raise ValueError(f"bin_width {self.bin_width} does not tile [{SCORE_LO}, {SCORE_HI}]")

    @property
    def n_bins(self) -> int:
        return int(round((SCORE_HI - SCORE_LO) / self.bin_width)) + 1

    @property
    def grid(self) -> np.ndarray:
        """Bin centres; also the support of the ground-truth sampler."""
        return SCORE_LO + self.bin_width * np.arange(self.n_bins)

    def noise(self, depth):
        return self.base_noise / np.sqrt(1.0 + np.asarray(depth, dtype=np.float64))

    def snap(self, s_hat):
        """Clamp to [1, 5] and round to the nearest grid point, ties to the lower one."""
        s = np.clip(s_hat, SCORE_LO, SCORE_HI)
        j = np.ceil((s - SCORE_LO) / self.bin_width - 0.5)
        return np.clip(SCORE_LO + self.bin_width * j, SCORE_LO, SCORE_HI)


@dataclass(frozen=True, eq=False)
class ToyPolicy:
    """Softmax over depths 0..K and a Bernoulli format head."""

    depth_logits: np.ndarray
    format_logit: float = 0.0

    def __post_init__(self):
        logits = np.array(self.depth_logits, dtype=np.float64)
        logits.setflags(write=False)
        object.__setattr__(self, "depth_logits", logits)
        object.__setattr__(self, "format_logit", float(self.format_logit))
        if not (np.all(np.isfinite(logits)) and math.isfinite(self.format_logit)):
            raise ValueError("policy parameters must be finite")

    @classmethod
    def uniform(cls, max_depth: int, format_logit: float = 0.0) -> ToyPolicy:
        return cls(np.zeros(max_depth + 1), format_logit)

    @classmethod
    def from_vector(cls, vec) -> ToyPolicy:
        vec = np.asarray(vec, dtype=np.float64)
        return cls(vec[:-1], vec[-1])

    @property
    def max_depth(self) -> int:
        return self.depth_logits.size - 1

    @property
    def vector(self) -> np.ndarray:
        return np.append(self.depth_logits, self.format_logit)

    def depth_log_probs(self) -> np.ndarray:
        return log_softmax(self.depth_logits)

    def depth_probs(self) -> np.ndarray:
        return np.exp(self.depth_log_probs())

    def format_prob(self) -> float:
        return float(expit(self.format_logit))

    def mean_depth(self) -> float:
        return float(self.depth_probs() @ np.arange(self.max_depth + 1))

    def modal_depth(self) -> int:
        return int(np.argmax(self.depth_logits))

    def log_prob(self, batch: TrajectoryBatch) -> np.ndarray:
        fmt = np.where(batch.format_ok, log_expit(self.format_logit), log_expit(-self.format_logit))
        return self.depth_log_probs()[batch.depth] + fmt

    def grad_log_prob(self, batch: TrajectoryBatch) -> np.ndarray:
        """Per-trajectory gradient of log_prob w.r.t. ``vector``; shape (N, K + 2)."""
        n = len(batch)
        g = np.empty((n, self.max_depth + 2))
        g[:, :-1] = -self.depth_probs()
        g[np.arange(n), batch.depth] += 1.0
        g[:, -1] = batch.format_ok.astype(np.float64) - self.format_prob()
        return g


@dataclass(frozen=True)
class Trajectory:
    depth: int
    format_ok: bool
    s_pred: float
    logp: float

    @property
    def rendered_text(self) -> str:
        return render_response(self)


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    """Column-oriented trajectories; indexing yields ``Trajectory`` objects."""

    depth: np.ndarray
    format_ok: np.ndarray
    s_pred: np.ndarray
    logp: np.ndarray

    def __len__(self) -> int:
        return int(self.depth.size)

    def __getitem__(self, i: int) -> Trajectory:
        return Trajectory(int(self.depth[i]), bool(self.format_ok[i]), float(self.s_pred[i]), float(self.logp[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def take(self, idx) -> TrajectoryBatch:
        return TrajectoryBatch(self.depth[idx], self.format_ok[idx], self.s_pred[idx], self.logp[idx])

    @classmethod
    def from_trajectories(cls, trajs) -> TrajectoryBatch:
        trajs = list(trajs)
        return cls(
            np.array([t.depth for t in trajs], dtype=np.int64),
            np.array([t.format_ok for t in trajs], dtype=bool),
            np.array([t.s_pred for t in trajs], dtype=np.float64),
            np.array([t.logp for t in trajs], dtype=np.float64),
        )

    @classmethod
    def concat(cls, batches) -> TrajectoryBatch:
        batches = list(batches)
        return cls(*(np.concatenate([getattr(b, f) for b in batches]) for f in ("depth", "format_ok", "s_pred", "logp")))


@dataclass(frozen=True)
class Instance:
    s_gt: float
    prompt_id: int = 0


def sample_instance(env: EnvConfig, rng: np.random.Generator, prompt_id: int = 0) -> Instance:
    return Instance(float(env.grid[rng.integers(env.n_bins)]), prompt_id)


def make_dataset(env: EnvConfig) -> np.ndarray:
    """The fixed prompt pool: ``dataset_size`` ground-truth scores drawn with ``env.seed``."""
    rng = np.random.default_rng(env.seed)
    return env.grid[rng.integers(env.n_bins, size=env.dataset_size)]


def rollout_from_uniforms(policy: ToyPolicy, s_gt, env: EnvConfig, u_depth, u_format, z) -> TrajectoryBatch:
    """Vectorised rollout driven by explicit random inputs (one entry per trajectory)."""
    cdf = np.cumsum(policy.depth_probs())
    depth = np.minimum(np.searchsorted(cdf, np.asarray(u_depth), side="right"), policy.max_depth)
    format_ok = np.asarray(u_format) < policy.format_prob()
    s_pred = env.snap(np.asarray(s_gt) + env.noise(depth) * np.asarray(z))
    depth = depth.astype(np.int64)
    unscored = TrajectoryBatch(depth, format_ok, s_pred, np.zeros(depth.shape))
    return TrajectoryBatch(depth, format_ok, s_pred, policy.log_prob(unscored))


def rollout(policy: ToyPolicy, instance: Instance, env: EnvConfig, rng: np.random.Generator) -> Trajectory:
    u_depth, u_format = rng.random(2)
    z = rng.standard_normal()
    return rollout_from_uniforms(policy, np.array([instance.s_gt]), env, [u_depth], [u_format], [z])[0]


def render_response(traj: Trajectory) -> str:
    sentences = " ".join(FILLER[i % len(FILLER)] for i in range(traj.depth))
    score = repr(float(traj.s_pred))
    if traj.format_ok:
        return f"<think>{sentences}</think><answer>{score}</answer>"
    return f"{sentences}\nFinal score: {score}" if sentences else f"Final score: {score}"


# --- brute-force oracle -----------------------------------------------------------

@dataclass(frozen=True)
class OracleTable:
    rows: dict[tuple[int, bool], tuple[float, float]]
    best_depth: int

    def expected(self, depth: int, format_ok: bool = True) -> float:
        return self.rows[(depth, format_ok)][0]

    def to_csv(self) -> str:
        lines = ["k,format,expected_reward,stderr"]
        for (k, f), (mean, se) in sorted(self.rows.items(), key=lambda kv: (kv[0][0], not kv[0][1])):
            lines.append(f"{k},{int(f)},{mean:.6f},{se:.6f}")
        return "\n".join(lines) + "\n"


ORACLE_SAMPLES = 1_000_000


def oracle_expected_reward(
    env: EnvConfig,
    spec: RewardSpec,
    depth: int,
    format_ok: bool = True,
    samples: int = ORACLE_SAMPLES,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo E[composite reward - c*k] for a fixed (depth, format) action.

    The same ground-truth and noise draws are reused for every depth (common
    random numbers), so depth differences carry far less noise than each cell.
    Returns (mean, standard error).
    """
    cost = env.depth_cost * depth
    if not format_ok:
        return 0.0 - cost, 0.0
    rng = np.random.default_rng(seed)
    s_gt = env.grid[rng.integers(env.n_bins, size=samples)]
    z = rng.standard_normal(samples)
    s_pred = env.snap(s_gt + env.noise(depth) * z)
    r = composite_reward_arrays(np.ones(samples, dtype=bool), s_pred, s_gt, spec) - cost
    return float(r.mean()), float(r.std(ddof=1) / math.sqrt(samples))


def oracle_table(env: EnvConfig, spec: RewardSpec, samples: int = ORACLE_SAMPLES, seed: int = 0) -> OracleTable:
    rows = {}
    for k in range(env.max_depth + 1):
        for f in (True, False):
            rows[(k, f)] = oracle_expected_reward(env, spec, k, f, samples, seed)
    values = [rows[(k, True)][0] for k in range(env.max_depth + 1)]
    return OracleTable(rows, int(np.argmax(values)))


def oracle_optimal_depth(env: EnvConfig, spec: RewardSpec, samples: int = ORACLE_SAMPLES, seed: int = 0) -> int:
    """Best depth for a well-formatted answer; ties go to the smaller depth."""
    return oracle_table(env, spec, samples, seed).best_depth
