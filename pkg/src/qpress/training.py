"""Offline training loop: epsilon-greedy exploration with dual uploads.

Every step uploads both the explored encode and the reference, measures
accuracy and reward against the reference labels, stores the transition,
and trains on schedule. The stream cycles when the step budget exceeds
its length; the next image's features serve as the successor state.
"""

from dataclasses import dataclass
from typing import Callable

from .agent import Agent, Transition
from .codec import CompressedImage, compress, compression_ratio, quality_at
from .controller import StepRecord
from .environment import InvocationStats, SceneryStream, invoke
from .features import FeatureExtractor
from .metrics import RewardParams, RollingWindow, accuracy, reward


@dataclass
class TrainSummary:
    steps: int = 0
    train_invocations: int = 0
    final_epsilon: float = 0.0
    recent_accuracy: float | None = None
    recent_reward: float | None = None
    mean_delta_s: float | None = None
    final_loss: float | None = None


def train_agent(
    agent: Agent,
    extractor: FeatureExtractor,
    backend,
    stream: SceneryStream,
    steps: int,
    c_ref: int = 75,
    reward_params: RewardParams = RewardParams(),
    window: int = 10,
    log_sink: Callable[[StepRecord], None] | None = None,
    stats: InvocationStats | None = None,
) -> TrainSummary:
    summary = TrainSummary(final_epsilon=agent.policy.epsilon)
    if steps <= 0:
        return summary
    if len(stream) == 0:
        raise ValueError("cannot train on an empty stream")

    stats = stats if stats is not None else InvocationStats()
    acc_window = RollingWindow(window)
    reward_window = RollingWindow(window)
    delta_total = 0.0

    feature_cache: dict[str, object] = {}
    ref_cache: dict[str, CompressedImage] = {}
    items = [None] * len(stream)

    def fetch(index: int):
        if items[index] is None:
            items[index] = stream.item_at(index)
        return items[index]

    def features_of(item):
        vec = feature_cache.get(item.source_id)
        if vec is None:
            vec = extractor.extract(item.image)
            feature_cache[item.source_id] = vec
        return vec

    policy = agent.policy
    for t in range(1, steps + 1):
        item = fetch((t - 1) % len(stream))
        succ = fetch(t % len(stream))
        state = features_of(item)
        next_state = features_of(succ)

        action = agent.explore_action(state)
        comp = compress(item.image, quality_at(action), item.source_id)
        ref = ref_cache.get(item.source_id)
        if ref is None:
            ref = compress(item.image, c_ref, item.source_id)
            ref_cache[item.source_id] = ref

        result_c = invoke(backend, comp, stats)
        result_ref = invoke(backend, ref, stats, reference=True)
        acc = accuracy(list(result_c.labels), list(result_ref.labels))
        delta = compression_ratio(comp, ref)
        r = reward(delta, acc, reward_params)
        agent.observe(Transition(state, action, r, next_state, acc, t))

        loss = None
        if t % policy.train_interval == 0 and t >= policy.train_start and agent.can_train():
            loss = agent.train()
            summary.train_invocations += 1
            summary.final_loss = loss

        acc_window.push(acc)
        reward_window.push(r)
        delta_total += delta
        if log_sink is not None:
            # Training is estimation by construction: dual uploads, p_est 1.
            log_sink(
                StepRecord(
                    step=t,
                    mode="train",
                    quality=comp.quality,
                    size_c=comp.size_bytes,
                    size_ref=ref.size_bytes,
                    delta_s=delta,
                    accuracy=acc,
                    reward=r,
                    p_est=1.0,
                    loss=loss,
                )
            )

    summary.steps = steps
    summary.final_epsilon = policy.epsilon
    summary.recent_accuracy = acc_window.mean()
    summary.recent_reward = reward_window.mean()
    summary.mean_delta_s = delta_total / steps
    return summary
