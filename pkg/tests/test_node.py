"""Node round operations: replay validation, field projection, updates."""

import math

import numpy as np
import pytest

from ccfsim.errors import ConfigurationError
from ccfsim.node import (REJECT_INCONSISTENT, REJECT_NO_IMPROVEMENT,
                         CollectiveView, Node, PatternObject, PrivateState,
                         RawSignal)
from ccfsim.spaces import Artifact, CcfSnapshot
from ccfsim.tasks import Outcome, Task, gradient_step, quadratic_loss


def make_node(rows, step=0.05, eta=0.2, tau=0.1, node_id=0, budget=16):
    pat = PatternObject(per_type_strategies=np.asarray(rows, dtype=float),
                        local_step_size=step, blend_rate=eta)
    state = PrivateState(node_id, budget, np.random.default_rng(node_id))
    return Node(node_id, pat, state, tau_val=tau)


def one_hot_artifact(pattern, task_type, k_types, tag, round_no=0,
                     confidence=1.0, loss=0.0):
    outcome = np.zeros(k_types + 1)
    outcome[task_type] = 1.0
    outcome[-1] = loss
    return Artifact(pattern_part=pattern, outcome_part=outcome, node_tag=tag,
                    round=round_no, confidence=confidence)


def snap_of(artifacts, round_no=0):
    return CcfSnapshot(round=round_no, artifacts=tuple(artifacts),
                       participant_set=frozenset(a.node_tag
                                                 for a in artifacts))


def test_generate_then_validate_accepts_noise_free():
    node = make_node(np.zeros((2, 3)))
    task = Task(task_type=1, target=np.array([1.0, -1.0, 0.5]),
                noise_std=0.0, task_id=0)
    raw = node.generate_signal(task)
    result = node.validate_signal(raw)
    assert result.accepted
    assert result.confidence == 1.0
    assert result.reason is None
    # interaction was logged for the later local step
    assert node.private.latest_task_of_type(1) is task


def test_validate_rejects_tampered_row():
    node = make_node(np.zeros((1, 3)))
    task = Task(task_type=0, target=np.ones(3), noise_std=0.0, task_id=0)
    raw = node.generate_signal(task)
    forged = Outcome(task_id=0, achieved_loss=raw.outcome.achieved_loss,
                     loss_before=raw.outcome.loss_before,
                     strategy_used=raw.outcome.strategy_used + 0.01)
    bad = RawSignal(node_id=0, round=0, task=task, outcome=forged,
                    pattern_row=raw.pattern_row)
    result = node.validate_signal(bad)
    assert not result.accepted
    assert result.reason == REJECT_INCONSISTENT
    assert result.confidence == 0.0


def test_validate_deviation_boundary():
    # powers of two keep the deviation arithmetic exact:
    # step 0.25 -> replayed = (1 - 0.5)^2 * 2 = 0.5, tau = 0.125
    node = make_node(np.zeros((1, 2)), step=0.25, tau=0.125)
    task = Task(task_type=0, target=np.array([1.0, 1.0]), noise_std=0.0,
                task_id=0)
    row = np.zeros(2)
    replayed = quadratic_loss(gradient_step(row, task.target, 0.25),
                              task.target)
    assert replayed == 0.5

    def signal_with(achieved):
        out = Outcome(task_id=0, achieved_loss=achieved,
                      loss_before=quadratic_loss(row, task.target),
                      strategy_used=row)
        return RawSignal(node_id=0, round=0, task=task, outcome=out,
                         pattern_row=row)

    at_edge = node.validate_signal(signal_with(0.625))
    assert at_edge.accepted
    assert at_edge.confidence == pytest.approx(math.exp(-1.0), rel=1e-12)
    beyond = node.validate_signal(signal_with(0.625 + 2.0 ** -40))
    assert not beyond.accepted
    assert beyond.reason == REJECT_INCONSISTENT


def test_validate_rejects_non_improving_step():
    # step size > 1 makes the replayed step increase the loss
    node = make_node(np.zeros((1, 2)), step=1.5)
    task = Task(task_type=0, target=np.array([1.0, 1.0]), noise_std=0.0,
                task_id=0)
    raw = node.generate_signal(task)
    result = node.validate_signal(raw)
    assert not result.accepted
    assert result.reason == REJECT_NO_IMPROVEMENT


def test_project_ccf_weighted_mean_and_self_exclusion():
    node = make_node(np.zeros((2, 2)))
    node.round_tag = "self"
    a1 = one_hot_artifact([1.0, 0.0], 0, 2, "n1")
    a2 = one_hot_artifact([3.0, 0.0], 0, 2, "n2")
    a3 = one_hot_artifact([0.0, 5.0], 1, 2, "n3")
    own = one_hot_artifact([99.0, 99.0], 0, 2, "self")
    ignored = one_hot_artifact([77.0, 77.0], 1, 2, "n4")
    view = node.project_ccf(snap_of([a1, a2, a3, own, ignored]),
                            weights=[1.0, 3.0, 2.0, 1.0, 0.0])
    # type 0: (1*1 + 3*3) / 4, own artifact and zero-weight skipped
    assert view.per_type_centroids[0] == pytest.approx([2.5, 0.0])
    assert view.per_type_centroids[1] == pytest.approx([0.0, 5.0])
    assert list(view.support_counts) == [2, 1]
    assert view.source_round == 0


def test_project_ccf_alignment_and_dim_errors():
    node = make_node(np.zeros((2, 2)))
    a = one_hot_artifact([1.0, 0.0], 0, 2, "n1")
    with pytest.raises(ConfigurationError):
        node.project_ccf(snap_of([a]), weights=[1.0, 2.0])
    wrong_dim = one_hot_artifact([1.0, 0.0, 0.0], 0, 2, "n2")
    with pytest.raises(ConfigurationError):
        node.project_ccf(snap_of([wrong_dim]), weights=[1.0])


def test_update_pattern_blend_oracle():
    node = make_node([[1.0, 1.0], [4.0, 4.0]], step=0.0, eta=0.25)
    view = CollectiveView(per_type_centroids=np.array([[3.0, 3.0],
                                                       [0.0, 0.0]]),
                          support_counts=np.array([2, 0]), source_round=0)
    updated = node.update_pattern(view)
    # supported type blends, unsupported type untouched; step 0 adds nothing
    assert updated.per_type_strategies[0] == pytest.approx([1.5, 1.5])
    assert updated.per_type_strategies[1] == pytest.approx([4.0, 4.0])


def test_update_pattern_blend_then_local_step():
    node = make_node([[0.0, 0.0]], step=0.05, eta=0.5)
    task = Task(task_type=0, target=np.array([2.0, 2.0]), noise_std=0.0,
                task_id=0)
    node.generate_signal(task)
    view = CollectiveView(per_type_centroids=np.array([[1.0, 1.0]]),
                          support_counts=np.array([3]), source_round=0)
    updated = node.update_pattern(view)
    blended = np.array([0.5, 0.5])
    expected = gradient_step(blended, task.target, 0.05)
    assert updated.per_type_strategies[0] == pytest.approx(expected,
                                                           rel=1e-12)


def test_update_pattern_eta_extremes():
    view = CollectiveView(per_type_centroids=np.array([[3.0, 3.0]]),
                          support_counts=np.array([1]), source_round=0)
    frozen = make_node([[1.0, 1.0]], step=0.0, eta=0.0)
    assert frozen.update_pattern(view).per_type_strategies[0] \
        == pytest.approx([1.0, 1.0])
    adopt = make_node([[1.0, 1.0]], step=0.0, eta=1.0)
    assert adopt.update_pattern(view).per_type_strategies[0] \
        == pytest.approx([3.0, 3.0])


def test_update_pattern_none_is_local_only():
    node = make_node([[0.0, 0.0]], step=0.05)
    task = Task(task_type=0, target=np.array([1.0, 1.0]), noise_std=0.0,
                task_id=0)
    node.generate_signal(task)
    updated = node.update_pattern(None)
    expected = gradient_step(np.zeros(2), task.target, 0.05)
    assert updated.per_type_strategies[0] == pytest.approx(expected)


def test_update_pattern_rejects_stale_view():
    node = make_node([[0.0, 0.0]])
    node.round = 5
    view = CollectiveView(per_type_centroids=np.zeros((1, 2)),
                          support_counts=np.array([1]), source_round=4)
    with pytest.raises(ConfigurationError):
        node.update_pattern(view)


def test_private_state_log_budget_and_recall():
    state = PrivateState(3, 4, np.random.default_rng(0))
    tasks = [Task(task_type=i % 2, target=np.array([float(i)]),
                  noise_std=0.0, task_id=i) for i in range(6)]
    for t in tasks:
        state.record(t, Outcome(task_id=t.task_id, achieved_loss=0.0,
                                loss_before=0.0,
                                strategy_used=np.zeros(1)))
    assert len(state.interaction_log) == 4   # bounded by replay budget
    assert state.latest_task_of_type(1).task_id == 5
    assert state.latest_task_of_type(0).task_id == 4
    assert state.latest_task_of_type(7) is None
    with pytest.raises(ConfigurationError):
        PrivateState(0, 0, np.random.default_rng(0))


def test_pattern_object_validation():
    with pytest.raises(ConfigurationError):
        PatternObject(per_type_strategies=np.zeros(3), local_step_size=0.1,
                      blend_rate=0.5)
    with pytest.raises(ConfigurationError):
        PatternObject(per_type_strategies=np.array([[np.nan]]),
                      local_step_size=0.1, blend_rate=0.5)
    with pytest.raises(ConfigurationError):
        PatternObject(per_type_strategies=np.zeros((1, 1)),
                      local_step_size=-0.1, blend_rate=0.5)
    with pytest.raises(ConfigurationError):
        PatternObject(per_type_strategies=np.zeros((1, 1)),
                      local_step_size=0.1, blend_rate=1.5)
    pat = PatternObject(per_type_strategies=np.zeros((2, 3)),
                        local_step_size=0.1, blend_rate=0.5)
    assert not pat.per_type_strategies.flags.writeable
    assert pat.k_types == 2 and pat.d_pattern == 3


def test_node_requires_positive_tau():
    with pytest.raises(ConfigurationError):
        make_node(np.zeros((1, 1)), tau=0.0)
