"""Runtime controller: the inference / estimate / retrain state machine.

Inference uploads only the chosen encode and trusts the policy. With
probability p_est a step runs in estimate mode instead: both the chosen
encode and the reference go up, accuracy and reward are measured, and
p_est itself adapts to the accuracy trend. When windowed accuracy falls
below its frozen baseline the controller retrains the agent in place,
exploring aggressively until windowed reward clears the exit threshold,
then flushes the replay memory and returns to inference.
"""

import json
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .agent import Agent, Transition
from .codec import compress, compression_ratio, quality_at
from .environment import InvocationStats, PredictionResult, StreamItem, invoke
from .exceptions import BackendTimeoutError, BackendUnavailableError
from .features import FeatureExtractor
from .metrics import RewardParams, RollingWindow, accuracy, reward, update_p_est


class Mode(str, Enum):
    INFERENCE = "inference"
    ESTIMATE = "estimate"
    RETRAIN = "retrain"


def transition(
    mode: Mode,
    xi: float,
    p_est: float,
    acc_mean: float | None,
    acc_baseline: float | None,
    reward_mean: float | None,
    r_th: float,
) -> Mode:
    """One edge of the state machine given the current step's statistics.

    Inference flips to estimate when the uniform draw xi lands at or
    below p_est. Estimate prefers the drift check (windowed accuracy
    strictly below its baseline, both defined) over the xi draw. Retrain
    ends exactly when windowed reward exceeds r_th. There is no direct
    inference-to-retrain edge.
    """
    if mode is Mode.INFERENCE:
        return Mode.ESTIMATE if xi <= p_est else Mode.INFERENCE
    if mode is Mode.ESTIMATE:
        if acc_mean is not None and acc_baseline is not None and acc_mean < acc_baseline:
            return Mode.RETRAIN
        return Mode.ESTIMATE if xi <= p_est else Mode.INFERENCE
    if mode is Mode.RETRAIN:
        if reward_mean is not None and reward_mean > r_th:
            return Mode.INFERENCE
        return Mode.RETRAIN
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class StepRecord:
    """One JSON-lines log entry; field names are part of the file format."""

    step: int
    mode: str
    quality: int
    size_c: int
    size_ref: int
    delta_s: float
    accuracy: int | None
    reward: float | None
    p_est: float
    loss: float | None

    _FIELDS = (
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
    )

    def to_json(self) -> str:
        return json.dumps(
            {name: getattr(self, name) for name in self._FIELDS},
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "StepRecord":
        doc = json.loads(line)
        return cls(**{name: doc[name] for name in cls._FIELDS})


@dataclass(frozen=True)
class ControllerParams:
    c_ref: int = 75
    window: int = 10
    r_th: float = 0.45
    p_0: float = 0.2
    p_min: float = 0.05
    omega: float = -3.0
    epsilon_retrain: float = 0.5
    reward: RewardParams = RewardParams()


class Controller:
    """Drives one deployment stream through the state machine."""

    def __init__(
        self,
        agent: Agent,
        extractor: FeatureExtractor,
        backend,
        params: ControllerParams = ControllerParams(),
        seed: int = 0,
        log_sink: Callable[[StepRecord], None] | None = None,
        stats: InvocationStats | None = None,
    ):
        self.agent = agent
        self.extractor = extractor
        self.backend = backend
        self.params = params
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
        self.log_sink = log_sink
        self.stats = stats if stats is not None else InvocationStats()

        self.mode = Mode.INFERENCE
        self.p_est = params.p_0
        self.acc_window = RollingWindow(params.window)
        self.reward_window = RollingWindow(params.window)
        self.step = 0
        self.retrain_entries = 0
        self.mode_counts = {m.value: 0 for m in Mode}
        self._prev_acc_mean: float | None = None
        self._retrain_steps = 0
        self._pending: tuple[np.ndarray, int, float, int, int] | None = None
        self._ref_predictions: dict[str, PredictionResult] = {}

    # -- plumbing -----------------------------------------------------------

    def _emit(self, record: StepRecord) -> None:
        if self.log_sink is not None:
            self.log_sink(record)

    def _complete_pending(self, next_state: np.ndarray) -> None:
        if self._pending is None:
            return
        state, action, r, acc, step = self._pending
        self._pending = None
        self.agent.observe(Transition(state, action, r, next_state, acc, step))

    def _encode_pair(self, item: StreamItem, action: int):
        quality = quality_at(action)
        comp = compress(item.image, quality, item.source_id)
        ref = compress(item.image, self.params.c_ref, item.source_id)
        return comp, ref

    def _reference_prediction(self, item: StreamItem, ref) -> PredictionResult:
        # One reference upload per contiguous estimate/retrain episode.
        cached = self._ref_predictions.get(item.source_id)
        if cached is not None:
            return cached
        result = invoke(self.backend, ref, self.stats, reference=True)
        self._ref_predictions[item.source_id] = result
        return result

    # -- mode steps ---------------------------------------------------------

    def process(self, item: StreamItem) -> PredictionResult:
        """Handle one stream image; returns what the caller gets to see."""
        state = self.extractor.extract(item.image)
        self._complete_pending(state)
        if self.mode is Mode.INFERENCE:
            return self._step_inference(item, state)
        if self.mode is Mode.ESTIMATE:
            return self._step_estimate(item, state)
        return self._step_retrain(item, state)

    def _step_inference(self, item: StreamItem, state: np.ndarray) -> PredictionResult:
        action = self.agent.greedy_action(state)
        comp, ref = self._encode_pair(item, action)
        try:
            result = invoke(self.backend, comp, self.stats)
        except (BackendUnavailableError, BackendTimeoutError):
            result = invoke(self.backend, comp, self.stats)

        self.step += 1
        self.mode_counts[Mode.INFERENCE.value] += 1
        self._emit(
            StepRecord(
                step=self.step,
                mode=Mode.INFERENCE.value,
                quality=comp.quality,
                size_c=comp.size_bytes,
                size_ref=ref.size_bytes,
                delta_s=compression_ratio(comp, ref),
                accuracy=None,
                reward=None,
                p_est=self.p_est,
                loss=None,
            )
        )
        xi = float(self.rng.random())
        self.mode = transition(
            Mode.INFERENCE, xi, self.p_est, None, None, None, self.params.r_th
        )
        return result

    def _step_estimate(self, item: StreamItem, state: np.ndarray) -> PredictionResult:
        action = self.agent.greedy_action(state)
        comp, ref = self._encode_pair(item, action)
        result_c = invoke(self.backend, comp, self.stats)
        result_ref = self._reference_prediction(item, ref)

        acc = accuracy(list(result_c.labels), list(result_ref.labels))
        delta = compression_ratio(comp, ref)
        r = reward(delta, acc, self.params.reward)

        self.step += 1
        self.mode_counts[Mode.ESTIMATE.value] += 1
        self.acc_window.push(acc)
        self.reward_window.push(r)
        acc_mean = self.acc_window.mean()
        grad = 0.0 if self._prev_acc_mean is None else acc_mean - self._prev_acc_mean
        self._prev_acc_mean = acc_mean
        self.p_est = update_p_est(
            self.p_est, grad, self.params.omega, self.params.p_min
        )
        self._pending = (state, action, r, acc, self.step)

        self._emit(
            StepRecord(
                step=self.step,
                mode=Mode.ESTIMATE.value,
                quality=comp.quality,
                size_c=comp.size_bytes,
                size_ref=ref.size_bytes,
                delta_s=delta,
                accuracy=acc,
                reward=r,
                p_est=self.p_est,
                loss=None,
            )
        )

        xi = float(self.rng.random())
        next_mode = transition(
            Mode.ESTIMATE,
            xi,
            self.p_est,
            acc_mean,
            self.acc_window.baseline,
            None,
            self.params.r_th,
        )
        if next_mode is Mode.RETRAIN:
            self._enter_retrain()
        elif next_mode is Mode.INFERENCE:
            self._ref_predictions.clear()
        self.mode = next_mode
        return result_ref

    def _step_retrain(self, item: StreamItem, state: np.ndarray) -> PredictionResult:
        action = self.agent.explore_action(state)
        comp, ref = self._encode_pair(item, action)
        result_c = invoke(self.backend, comp, self.stats)
        result_ref = self._reference_prediction(item, ref)

        acc = accuracy(list(result_c.labels), list(result_ref.labels))
        delta = compression_ratio(comp, ref)
        r = reward(delta, acc, self.params.reward)

        self.step += 1
        self.mode_counts[Mode.RETRAIN.value] += 1
        self._retrain_steps += 1
        self.reward_window.push(r)
        self._pending = (state, action, r, acc, self.step)

        loss = None
        if (
            self._retrain_steps % self.agent.policy.train_interval == 0
            and self.step >= self.agent.policy.train_start
            and self.agent.can_train()
        ):
            loss = self.agent.train()

        # Caller sees reference labels, so accuracy and p_est log as 1.
        self._emit(
            StepRecord(
                step=self.step,
                mode=Mode.RETRAIN.value,
                quality=comp.quality,
                size_c=comp.size_bytes,
                size_ref=ref.size_bytes,
                delta_s=delta,
                accuracy=1,
                reward=r,
                p_est=1.0,
                loss=loss,
            )
        )

        next_mode = transition(
            Mode.RETRAIN,
            0.0,
            self.p_est,
            None,
            None,
            self.reward_window.mean(),
            self.params.r_th,
        )
        if next_mode is Mode.INFERENCE:
            self._exit_retrain()
        self.mode = next_mode
        return result_ref

    # -- retrain bookkeeping ------------------------------------------------

    def _enter_retrain(self) -> None:
        self.retrain_entries += 1
        self._retrain_steps = 0
        self.reward_window.reset()
        self.agent.policy.epsilon = self.params.epsilon_retrain

    def _exit_retrain(self) -> None:
        self.agent.memory.flush()
        self._pending = None
        self.acc_window.reset()
        self._prev_acc_mean = None
        self.p_est = self.params.p_0
        self._ref_predictions.clear()


def run_stream(controller: Controller, stream) -> int:
    """Feed every stream item through the controller; returns steps taken."""
    steps = 0
    for item in stream:
        controller.process(item)
        steps += 1
    return steps


def transmission_ms(size_bytes: float, bandwidth_bps: float) -> float:
    """Milliseconds to push a payload through a link; decimal units (1 KB = 1000 B)."""
    if bandwidth_bps <= 0:
        raise ValueError("bandwidth must be positive")
    return size_bytes * 8.0 / bandwidth_bps * 1000.0


def estimated_latency(
    size_bytes: float, bandwidth_bps: float, inference_ms: float = 0.0
) -> float:
    """Overall per-image latency: transmission plus model inference."""
    return transmission_ms(size_bytes, bandwidth_bps) + inference_ms
