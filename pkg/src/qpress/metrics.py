"""Relative accuracy, reward, and the rolling statistics the controller reads."""

from collections import deque
from dataclasses import dataclass

TOP_K = 5
P_EST_FLOOR = 0.05


def _canon(label: str) -> str:
    return label.strip().lower()


def accuracy(compressed_labels: list[str], reference_labels: list[str]) -> int:
    """Binary relative accuracy of a compressed upload against its reference.

    1 when any of the first min(5, len) compressed labels exactly matches
    any reference label after whitespace trim and lowercasing; an empty
    reference yields 0 by definition.
    """
    reference = {_canon(l) for l in reference_labels}
    if not reference:
        return 0
    head = compressed_labels[:TOP_K]
    return int(any(_canon(l) in reference for l in head))


@dataclass(frozen=True)
class RewardParams:
    alpha: float = 1.0
    beta: float = 0.0


def reward(delta_s: float, acc: int, params: RewardParams = RewardParams()) -> float:
    """Scalar reward: accuracy bonus minus size ratio plus offset."""
    return params.alpha * acc - delta_s + params.beta


class RollingWindow:
    """Mean over the most recent `capacity` samples, plus a frozen baseline.

    The mean follows the running mean of whatever is available until the
    window fills, then the mean of the last `capacity` samples. The
    baseline is the mean of the first `capacity` samples pushed since the
    last reset and never moves afterwards.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("window capacity must be positive")
        self.capacity = capacity
        self._values: deque[float] = deque(maxlen=capacity)
        self._count = 0
        self._baseline_sum = 0.0
        self._baseline: float | None = None

    def push(self, value: float) -> None:
        value = float(value)
        self._values.append(value)
        self._count += 1
        if self._baseline is None:
            self._baseline_sum += value
            if self._count == self.capacity:
                self._baseline = self._baseline_sum / self.capacity

    def mean(self) -> float | None:
        if not self._values:
            return None
        return sum(self._values) / len(self._values)

    @property
    def count(self) -> int:
        return self._count

    @property
    def baseline(self) -> float | None:
        return self._baseline

    def reset(self) -> None:
        self._values.clear()
        self._count = 0
        self._baseline_sum = 0.0
        self._baseline = None


def update_p_est(
    p_est: float, grad: float, omega: float, p_min: float = P_EST_FLOOR
) -> float:
    """One step of the estimation-probability controller, clamped to [p_min, 1]."""
    return min(1.0, max(p_min, p_est + omega * grad))
