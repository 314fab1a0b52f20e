"""Runtime controller: state machine, probing, retraining, latency math."""

import json

import numpy as np
import pytest

from conftest import FlakyBackend, RecordingBackend, fresh_agent
from qpress.controller import (
    Controller,
    ControllerParams,
    Mode,
    StepRecord,
    estimated_latency,
    run_stream,
    transition,
    transmission_ms,
)
from qpress.environment import InvocationStats, SimulatedOracle
from qpress.exceptions import BackendUnavailableError
from qpress.training import train_agent

# --------------------------------------------------------------------------
# pure transition function


def test_transition_inference_edges():
    assert transition(Mode.INFERENCE, 0.10, 0.2, None, None, None, 0.45) is Mode.ESTIMATE
    assert transition(Mode.INFERENCE, 0.20, 0.2, None, None, None, 0.45) is Mode.ESTIMATE
    assert transition(Mode.INFERENCE, 0.21, 0.2, None, None, None, 0.45) is Mode.INFERENCE


def test_transition_estimate_edges():
    # Drift check wins over the probe draw, even when xi would keep it
    # probing.
    assert transition(Mode.ESTIMATE, 0.0, 1.0, 0.7, 0.9, None, 0.45) is Mode.RETRAIN
    assert transition(Mode.ESTIMATE, 0.9, 0.2, 0.7, 0.9, None, 0.45) is Mode.RETRAIN
    # No drift: xi decides between staying and dropping back.
    assert transition(Mode.ESTIMATE, 0.1, 0.2, 0.9, 0.9, None, 0.45) is Mode.ESTIMATE
    assert transition(Mode.ESTIMATE, 0.9, 0.2, 0.9, 0.9, None, 0.45) is Mode.INFERENCE
    # Equality is not drift; the comparison is strict.
    assert transition(Mode.ESTIMATE, 0.9, 0.2, 0.9, 0.9, None, 0.45) is not Mode.RETRAIN


def test_transition_estimate_undefined_stats_never_retrain():
    for acc_mean, baseline in ((None, 0.9), (0.7, None), (None, None)):
        out = transition(Mode.ESTIMATE, 0.05, 0.2, acc_mean, baseline, None, 0.45)
        assert out is Mode.ESTIMATE


def test_transition_retrain_edges():
    assert transition(Mode.RETRAIN, 0.0, 0.2, None, None, 0.46, 0.45) is Mode.INFERENCE
    assert transition(Mode.RETRAIN, 0.0, 0.2, None, None, 0.45, 0.45) is Mode.RETRAIN
    assert transition(Mode.RETRAIN, 0.0, 0.2, None, None, 0.44, 0.45) is Mode.RETRAIN
    assert transition(Mode.RETRAIN, 0.0, 0.2, None, None, None, 0.45) is Mode.RETRAIN


def test_transition_never_jumps_inference_to_retrain():
    # Even degenerate statistics cannot skip the estimate stage.
    for xi in (0.0, 0.5, 1.0):
        out = transition(Mode.INFERENCE, xi, 1.0, 0.0, 1.0, -5.0, 0.45)
        assert out in (Mode.INFERENCE, Mode.ESTIMATE)


def test_transition_unknown_mode():
    with pytest.raises(ValueError):
        transition("weird", 0.5, 0.2, None, None, None, 0.45)


# --------------------------------------------------------------------------
# log record format


def test_step_record_field_order_is_frozen():
    rec = StepRecord(
        step=3,
        mode="inference",
        quality=25,
        size_c=1000,
        size_ref=4000,
        delta_s=0.25,
        accuracy=None,
        reward=None,
        p_est=0.2,
        loss=None,
    )
    pairs = json.loads(rec.to_json(), object_pairs_hook=list)
    assert [k for k, _ in pairs] == [
        "step",
        "mode",
        "quality",
        "size_c",
        "size_ref",
        "delta_s",
        "accuracy",
        "reward",
        "p_est",
        "loss",
    ]


def test_step_record_json_roundtrip():
    rec = StepRecord(
        step=7,
        mode="estimate",
        quality=35,
        size_c=1200,
        size_ref=3000,
        delta_s=0.4,
        accuracy=1,
        reward=0.6,
        p_est=0.05,
        loss=0.123,
    )
    assert StepRecord.from_json(rec.to_json()) == rec
    none_rec = StepRecord(1, "inference", 75, 10, 10, 1.0, None, None, 0.2, None)
    assert StepRecord.from_json(none_rec.to_json()) == none_rec
    assert '"accuracy":null' in none_rec.to_json()


def test_controller_params_defaults():
    p = ControllerParams()
    assert p.c_ref == 75
    assert p.window == 10
    assert p.r_th == 0.45
    assert p.p_0 == 0.2
    assert p.p_min == 0.05
    assert p.omega == -3.0


# --------------------------------------------------------------------------
# controller over live streams


@pytest.fixture(scope="module")
def trained(small_corpus, extractor):
    agent = fresh_agent(extractor, 1)
    train_agent(agent, extractor, small_corpus.oracle(), small_corpus.stream(), 400)
    return agent


def test_stationary_stream_never_retrains(small_corpus, extractor, trained):
    records = []
    stats = InvocationStats()
    controller = Controller(
        trained,
        extractor,
        small_corpus.oracle(),
        seed=0,
        log_sink=records.append,
        stats=stats,
    )
    steps = run_stream(controller, small_corpus.stream())
    assert isinstance(steps, int) and steps == 40
    assert controller.step == 40
    assert controller.retrain_entries == 0
    assert controller.mode_counts["retrain"] == 0
    assert controller.mode_counts["inference"] + controller.mode_counts["estimate"] == 40
    assert len(records) == 40
    assert all(0.05 <= r.p_est <= 1.0 for r in records)


def test_upload_accounting_by_mode(small_corpus, extractor, trained):
    records = []
    stats = InvocationStats()
    backend = RecordingBackend(small_corpus.oracle())
    controller = Controller(
        trained, extractor, backend, seed=0, log_sink=records.append, stats=stats
    )
    run_stream(controller, small_corpus.stream())
    n_inf = sum(1 for r in records if r.mode == "inference")
    n_est = sum(1 for r in records if r.mode == "estimate")
    assert n_inf + n_est == 40
    assert n_est > 0
    # Inference uploads one encode; estimate uploads the pair. Ids are
    # unique within the pass, so no reference upload is ever saved by the
    # episode cache here.
    assert stats.count == n_inf + 2 * n_est
    expected_bytes = sum(
        r.size_c + (r.size_ref if r.mode == "estimate" else 0) for r in records
    )
    assert stats.total_bytes == expected_bytes


def test_inference_mode_logs_no_measurements(small_corpus, extractor, trained):
    records = []
    controller = Controller(
        trained, extractor, small_corpus.oracle(), seed=3, log_sink=records.append
    )
    run_stream(controller, small_corpus.stream())
    for rec in records:
        if rec.mode == "inference":
            assert rec.accuracy is None and rec.reward is None and rec.loss is None
        elif rec.mode == "estimate":
            assert rec.accuracy in (0, 1) and rec.reward is not None
            assert rec.reward == pytest.approx(rec.accuracy - rec.delta_s)


def test_estimate_probing_follows_p_est(small_corpus, extractor, trained):
    # With p_0 = 1 and flat accuracy the probe probability stays pinned
    # at 1: every step after the first runs in estimate mode.
    records = []
    controller = Controller(
        trained,
        extractor,
        small_corpus.oracle(),
        params=ControllerParams(p_0=1.0),
        seed=0,
        log_sink=records.append,
    )
    run_stream(controller, small_corpus.stream())
    assert records[0].mode == "inference"
    assert all(r.mode == "estimate" for r in records[1:])
    assert controller.p_est == 1.0
    result = controller.process(small_corpus.stream().item_at(0))
    assert result.is_reference  # estimate mode answers with reference labels


def drifted_backend(corpus):
    """Same labels, but nothing below the reference quality survives."""
    return SimulatedOracle(
        labels=dict(corpus.labels),
        fragility={sid: 75 for sid in corpus.ids},
    )


def test_drift_enters_and_exits_retrain(small_corpus, extractor):
    # Fresh copy of the trained policy so this test owns its agent state.
    agent = fresh_agent(extractor, 1)
    train_agent(agent, extractor, small_corpus.oracle(), small_corpus.stream(), 400)

    records = []
    params = ControllerParams(p_0=1.0, window=5)
    controller = Controller(
        agent,
        extractor,
        small_corpus.oracle(),
        params=params,
        seed=2,
        log_sink=records.append,
    )
    items = [small_corpus.stream().item_at(i) for i in range(40)]

    # Phase 1: benign backend long enough to freeze the accuracy baseline.
    for item in items[:10]:
        controller.process(item)
    assert controller.acc_window.baseline == 1.0
    assert controller.retrain_entries == 0

    # Phase 2: backend turns strict; measured accuracy collapses and the
    # drift check must fire within a few probes.
    controller.backend = drifted_backend(small_corpus)
    for step, item in enumerate(items[10:30]):
        controller.process(item)
        if controller.mode is Mode.RETRAIN:
            break
    assert controller.mode is Mode.RETRAIN
    assert controller.retrain_entries == 1
    # Entry effects: exploration bumped, reward window restarted.
    assert agent.policy.epsilon == params.epsilon_retrain
    assert controller.reward_window.count <= 1

    # Phase 3: backend heals; rewards clear the threshold and the
    # controller must leave retrain, flushing per-episode state.
    controller.backend = small_corpus.oracle()
    for i in range(200):
        controller.process(items[i % 40])
        if controller.mode is Mode.INFERENCE:
            break
    assert controller.mode is Mode.INFERENCE
    assert len(agent.memory) == 0
    assert controller.p_est == params.p_0
    assert controller.acc_window.mean() is None
    assert any(r.mode == "retrain" for r in records)
    for rec in records:
        if rec.mode == "retrain":
            assert rec.accuracy == 1 and rec.p_est == 1.0


def test_inference_retries_transient_failure(small_corpus, extractor, trained):
    backend = FlakyBackend(small_corpus.oracle(), failures=1, exc_type=BackendUnavailableError)
    controller = Controller(
        trained, extractor, backend, params=ControllerParams(p_0=0.0, p_min=0.0), seed=0
    )
    item = small_corpus.stream().item_at(0)
    result = controller.process(item)
    assert backend.calls == 2
    assert result.labels == (small_corpus.labels[item.source_id],)


def test_inference_double_failure_propagates(small_corpus, extractor, trained):
    backend = FlakyBackend(small_corpus.oracle(), failures=2, exc_type=BackendUnavailableError)
    controller = Controller(
        trained, extractor, backend, params=ControllerParams(p_0=0.0, p_min=0.0), seed=0
    )
    with pytest.raises(BackendUnavailableError):
        controller.process(small_corpus.stream().item_at(0))


# --------------------------------------------------------------------------
# latency arithmetic


def test_transmission_ms_decimal_units():
    # 1 KB = 1000 bytes, 1 Mbps = 1e6 bits/s: 1000 B over 1 Mbps is 8 ms.
    assert transmission_ms(1000, 1e6) == pytest.approx(8.0)
    assert transmission_ms(0, 1e6) == 0.0
    # Linear in size, inverse in bandwidth.
    assert transmission_ms(2000, 1e6) == pytest.approx(16.0)
    assert transmission_ms(1000, 2e6) == pytest.approx(4.0)


def test_transmission_ms_rejects_bad_bandwidth():
    with pytest.raises(ValueError):
        transmission_ms(1000, 0)
    with pytest.raises(ValueError):
        transmission_ms(1000, -5)


def test_estimated_latency_adds_model_time():
    assert estimated_latency(1000, 1e6, inference_ms=2.5) == pytest.approx(10.5)
    assert estimated_latency(1000, 1e6) == pytest.approx(8.0)
