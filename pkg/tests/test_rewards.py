import json
import math
from importlib import resources

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reward_lab.rewards import (
    KINDS,
    RewardSpec,
    RewardSpecError,
    accuracy_reward,
    composite_reward,
    derive_params,
    error_measure,
    parse_response,
    shaped_reward,
)

SCORES = st.floats(1.0, 5.0)


def test_default_spec():
    spec = RewardSpec()
    assert (spec.kind, spec.r_min, spec.d_0, spec.lam) == ("l1", 0.05, 1.0, 1.0)


@pytest.mark.parametrize(
    "kwargs", [{"r_min": 1.0}, {"r_min": 0.0}, {"d_0": 0.0}, {"d_0": -1}, {"kind": "huber"}, {"lam": -0.5}]
)
def test_invalid_spec(kwargs):
    with pytest.raises(RewardSpecError):
        RewardSpec(**kwargs)


def test_derived_params_hand_values():
    assert derive_params(RewardSpec(kind="gaussian")).sigma == pytest.approx(1 / math.sqrt(2 * math.log(20)), rel=1e-15)
    assert derive_params(RewardSpec(kind="gaussian")).sigma == pytest.approx(0.408539, abs=1e-6)
    assert derive_params(RewardSpec(kind="laplacian")).tau == pytest.approx(0.333808, abs=1e-6)
    assert derive_params(RewardSpec(kind="l1")).alpha == pytest.approx(0.95, abs=1e-15)
    assert derive_params(RewardSpec(kind="l2", d_0=2.0)).alpha == pytest.approx(0.95 / 4, abs=1e-15)


@pytest.mark.parametrize(
    "text, ok, score",
    [
        ("<think>ok</think><answer>3.75</answer>", True, 3.75),
        ("<think></think><answer>3.25</answer>", True, 3.25),
        ("  <think>\nmulti\nline</think>\n <answer> 4 </answer>\n", True, 4.0),
        ("<think>a</think><answer>+.5</answer>", True, 0.5),
        ("<answer>3.75</answer>", False, None),
        ("<think>a</think><answer>3.5</answer><answer>4</answer>", False, None),
        ("<think>a</think>", False, None),
        ("<answer>2</answer><think>a</think>", False, None),
        ("<think>a<answer>2</answer></think>", False, None),
        ("<think>a</think>junk<answer>2</answer>", False, None),
        ("preamble <think>a</think><answer>2</answer>", False, None),
        ("<think>a</think><answer>1e2</answer>", False, None),
        ("<think>a</think><answer>inf</answer>", False, None),
        ("<think>a</think><answer></answer>", False, None),
        ("<Think>a</Think><Answer>2</Answer>", False, None),
        ("", False, None),
    ],
)
def test_parse_response(text, ok, score):
    parsed = parse_response(text)
    assert parsed.format_ok is ok
    assert parsed.score == score


@pytest.mark.parametrize("kind", KINDS)
def test_zero_error_gives_one(kind):
    assert accuracy_reward(3.0, 3.0, RewardSpec(kind=kind)) == 1.0


def test_accuracy_examples():
    assert accuracy_reward(4.0, 3.0, RewardSpec(kind="l1")) == pytest.approx(0.05, abs=1e-12)
    assert accuracy_reward(5.0, 1.0, RewardSpec(kind="gaussian")) == pytest.approx(0.05, abs=1e-12)
    sigma = 1 / math.sqrt(2 * math.log(20))
    hand = math.exp(-(0.5**2) / (2 * sigma**2))
    assert hand == pytest.approx(0.47287, abs=5e-6)
    assert accuracy_reward(5.0, 3.0, RewardSpec(kind="gaussian")) == pytest.approx(hand, abs=1e-14)


def test_floor_applies_beyond_threshold():
    assert accuracy_reward(5.0, 1.0, RewardSpec(kind="l1")) == 0.05
    assert accuracy_reward(5.0, 1.0, RewardSpec(kind="l2")) == 0.05


def test_out_of_range_prediction_is_scored_not_clamped():
    spec = RewardSpec(kind="laplacian")
    assert accuracy_reward(5.5, 5.0, spec) < accuracy_reward(5.0, 5.0, spec)
    assert accuracy_reward(5.5, 5.0, spec) == pytest.approx(math.exp(-(0.5 / 4) * math.log(20)), rel=1e-14)


def test_gt_out_of_range():
    with pytest.raises(ValueError):
        accuracy_reward(3.0, 5.5, RewardSpec())
    with pytest.raises(ValueError):
        composite_reward("<think></think><answer>3</answer>", 0.5, RewardSpec())


def test_normalize_linear_error_flag():
    spec = RewardSpec(kind="l1", normalize_linear_error=True)
    assert error_measure(5.0, 3.0, spec) == 0.5
    assert accuracy_reward(5.0, 3.0, spec) == pytest.approx(1 - 0.95 * 0.5, abs=1e-15)


@pytest.mark.parametrize("kind", KINDS)
def test_floor_anchor(kind):
    # pre-floor value at the decay threshold equals r_min
    spec = RewardSpec(kind=kind)
    assert float(shaped_reward(spec.d_0, spec)) == pytest.approx(spec.r_min, abs=1e-12)


def test_composite_examples():
    b = composite_reward("<think>x</think><answer>3.75</answer>", 3.75, RewardSpec())
    assert (b.r_acc, b.r_fmt, b.r_total) == (1.0, 1.0, 2.0)
    b = composite_reward("garbled", 3.0, RewardSpec())
    assert (b.r_acc, b.r_fmt, b.r_total) == (0.0, 0.0, 0.0)
    b = composite_reward("<think>x</think><answer>3.5</answer>", 3.0, RewardSpec())
    assert b.r_acc == pytest.approx(0.525, abs=1e-15)
    assert (b.r_fmt, b.r_total) == (1.0, b.r_acc + 1.0)


def test_lambda_weights_format():
    b = composite_reward("<think>x</think><answer>3</answer>", 3.0, RewardSpec(lam=0.25))
    assert b.r_total == 1.25


@pytest.mark.parametrize("kind", KINDS)
def test_monotone_in_error(kind):
    spec = RewardSpec(kind=kind)
    for gt in (1.0, 2.75, 5.0):
        errs = np.linspace(0, 4, 2001)
        preds = gt + errs
        r = accuracy_reward(preds, gt, spec)
        assert np.all(np.diff(r) <= 0)


@pytest.mark.parametrize("kind", KINDS)
@given(a=SCORES, b=SCORES)
def test_bounds_and_symmetry(kind, a, b):
    spec = RewardSpec(kind=kind)
    r = accuracy_reward(a, b, spec)
    assert spec.r_min <= r <= 1.0
    assert r == accuracy_reward(b, a, spec)
    assert (r == 1.0) == (a == b) or abs(a - b) < 1e-7


def test_gaussian_dominates_laplacian_below_threshold():
    d = np.linspace(1e-6, 1 - 1e-6, 1000)
    g = shaped_reward(d, RewardSpec(kind="gaussian"))
    lap = shaped_reward(d, RewardSpec(kind="laplacian"))
    assert np.all(g >= lap)


def test_golden_vector_replay():
    lines = resources.files("reward_lab").joinpath("data/reward_golden.jsonl").read_text().splitlines()
    assert len(lines) >= 100
    for line in lines:
        rec = json.loads(line)
        b = composite_reward(rec["response"], rec["s_gt"], RewardSpec(kind=rec["kind"]))
        assert (f"{b.r_acc:.6f}", f"{b.r_fmt:.6f}", f"{b.r_total:.6f}") == (rec["r_acc"], rec["r_fmt"], rec["r_total"])


def test_golden_vector_spot_values():
    # independent hand evaluations of a few golden rows
    rows = [json.loads(l) for l in resources.files("reward_lab").joinpath("data/reward_golden.jsonl").read_text().splitlines()]
    index = {(r["response"], r["s_gt"], r["kind"]): r for r in rows}
    canon = "<think>ok</think><answer>3.75</answer>"
    assert index[(canon, 3.75, "l1")]["r_total"] == "2.000000"
    assert index[(canon, 3.0, "l1")]["r_acc"] == f"{1 - 0.95 * 0.75:.6f}"
    assert index[(canon, 2.25, "laplacian")]["r_acc"] == f"{math.exp(-(1.5 / 4) * math.log(20)):.6f}"
    assert index[("garbled output", 3.0, "gaussian")]["r_total"] == "0.000000"
