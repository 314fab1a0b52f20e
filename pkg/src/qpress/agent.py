"""Deep-Q agent over the quality ladder: policy, replay memory, training.

The network maps a feature vector to one value per ladder action. A
single set of parameters produces both the behavior values and the
bootstrap targets unless the frozen-target flag is set, in which case
targets come from a periodic snapshot.
"""

import dataclasses
import io
import json
import os
import struct
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import kernels
from .codec import QUALITY_LADDER
from .exceptions import (
    CheckpointIOError,
    ExtractorMismatchError,
    InsufficientMemoryError,
    VersionMismatchError,
)
from .features import ExtractorDescriptor

N_ACTIONS = len(QUALITY_LADDER)
CHECKPOINT_MAGIC = b"QPK1"
CHECKPOINT_VERSION = 1


@dataclass
class PolicyState:
    """Exploration schedule and training hyperparameters."""

    epsilon: float = 1.0
    epsilon_min: float = 0.02
    decay: float = 0.99
    gamma: float = 0.95
    train_interval: int = 5
    train_start: int = 50
    minibatch_size: int = 64
    learning_rate: float = 0.25
    rng_seed: int = 0
    use_frozen_target: bool = True
    target_sync: int = 75
    value_init: float = 3.0


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    accuracy: int
    step: int


class ReplayMemory:
    """Bounded FIFO of transitions with uniform minibatch sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("replay capacity must be positive")
        self.capacity = capacity
        self._buf: deque[Transition] = deque(maxlen=capacity)

    def store(self, transition: Transition) -> None:
        self._buf.append(transition)

    def sample(self, k: int, rng: np.random.Generator) -> list[Transition]:
        if len(self._buf) < k:
            raise InsufficientMemoryError(f"{len(self._buf)} transitions < batch {k}")
        idx = rng.choice(len(self._buf), size=k, replace=False)
        return [self._buf[int(i)] for i in idx]

    def flush(self) -> None:
        self._buf.clear()

    def __len__(self) -> int:
        return len(self._buf)


class QFunction:
    """MLP scoring every ladder action for a feature vector."""

    def __init__(self, input_dim: int, hidden: tuple[int, ...], weights, biases):
        self.input_dim = input_dim
        self.hidden = tuple(hidden)
        self.weights = weights
        self.biases = biases

    @classmethod
    def initialize(
        cls,
        input_dim: int,
        hidden: tuple[int, ...],
        rng: np.random.Generator,
        output_bias: float = 0.0,
    ) -> "QFunction":
        # output_bias > 0 starts every action value optimistic. With a
        # discounted bootstrap the value scale settles well above the raw
        # rewards, and seeding the output layer near that scale spends the
        # early updates on action ordering instead of chasing the offset.
        sizes = [input_dim, *hidden, N_ACTIONS]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            limit = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        biases[-1][:] = output_bias
        return cls(input_dim, tuple(hidden), weights, biases)

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"feature dim {x.shape[-1]} != network {self.input_dim}")
        return x

    def values(self, state: np.ndarray) -> np.ndarray:
        x = self._check(state).reshape(1, -1)
        return kernels.mlp_forward(x, self.weights, self.biases)[0]

    def values_batch(self, states: np.ndarray) -> np.ndarray:
        return kernels.mlp_forward(self._check(states), self.weights, self.biases)

    def clone(self) -> "QFunction":
        return QFunction(
            self.input_dim,
            self.hidden,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def copy_from(self, other: "QFunction") -> None:
        for dst, src in zip(self.weights, other.weights):
            dst[...] = src
        for dst, src in zip(self.biases, other.biases):
            dst[...] = src


def greedy_action(q: QFunction, state: np.ndarray) -> int:
    """Argmax action; ties break toward the lowest ladder index."""
    return int(np.argmax(q.values(state)))


def select_action(
    q: QFunction, state: np.ndarray, policy: PolicyState, rng: np.random.Generator
) -> int:
    """Epsilon-greedy: uniform random with probability epsilon, else greedy."""
    if rng.random() < policy.epsilon:
        return int(rng.integers(N_ACTIONS))
    return greedy_action(q, state)


def decay_epsilon(policy: PolicyState) -> PolicyState:
    """Multiplicative decay with a hard floor; applied once per training call."""
    stepped = policy.decay * policy.epsilon
    policy.epsilon = stepped if stepped > policy.epsilon_min else policy.epsilon_min
    return policy


def train_step(
    q: QFunction,
    memory: ReplayMemory,
    policy: PolicyState,
    rng: np.random.Generator,
    target_q: QFunction | None = None,
) -> float:
    """One minibatch update; returns the pre-update loss and decays epsilon."""
    batch = memory.sample(policy.minibatch_size, rng)
    states = np.stack([t.state for t in batch])
    actions = np.array([t.action for t in batch], dtype=np.int64)
    rewards = np.array([t.reward for t in batch], dtype=np.float64)
    next_states = np.stack([t.next_state for t in batch])

    bootstrap = (target_q or q).values_batch(next_states).max(axis=1)
    targets = rewards + policy.gamma * bootstrap

    loss, grads_w, grads_b = kernels.mlp_backward(
        states, actions, targets, q.weights, q.biases
    )
    kernels.sgd_step(q.weights, q.biases, grads_w, grads_b, policy.learning_rate)
    decay_epsilon(policy)
    return loss


class Agent:
    """Q-function plus policy schedule, replay memory, and seeded rng streams."""

    def __init__(
        self,
        q: QFunction,
        policy: PolicyState,
        memory: ReplayMemory,
        descriptor: ExtractorDescriptor,
    ):
        self.q = q
        self.policy = policy
        self.memory = memory
        self.descriptor = descriptor
        self.action_rng = np.random.default_rng(
            np.random.SeedSequence([policy.rng_seed, 1])
        )
        self.sample_rng = np.random.default_rng(
            np.random.SeedSequence([policy.rng_seed, 2])
        )
        self._target = q.clone() if policy.use_frozen_target else None
        self._train_calls = 0

    @classmethod
    def fresh(
        cls,
        descriptor: ExtractorDescriptor,
        policy: PolicyState | None = None,
        hidden: tuple[int, ...] = (64, 64),
        capacity: int = 10000,
    ) -> "Agent":
        policy = policy if policy is not None else PolicyState()
        init_rng = np.random.default_rng(np.random.SeedSequence([policy.rng_seed, 0]))
        q = QFunction.initialize(
            descriptor.dim, tuple(hidden), init_rng, output_bias=policy.value_init
        )
        return cls(q, policy, ReplayMemory(capacity), descriptor)

    def greedy_action(self, state: np.ndarray) -> int:
        return greedy_action(self.q, state)

    def explore_action(self, state: np.ndarray) -> int:
        return select_action(self.q, state, self.policy, self.action_rng)

    def observe(self, transition: Transition) -> None:
        self.memory.store(transition)

    def can_train(self) -> bool:
        return len(self.memory) >= self.policy.minibatch_size

    def train(self) -> float:
        loss = train_step(
            self.q, self.memory, self.policy, self.sample_rng, target_q=self._target
        )
        self._train_calls += 1
        if self._target is not None and self._train_calls % self.policy.target_sync == 0:
            self._target.copy_from(self.q)
        return loss

    def save(self, path: str | os.PathLike) -> None:
        save_checkpoint(path, self.q, self.policy, self.descriptor, self.memory.capacity)

    @classmethod
    def restore(
        cls, path: str | os.PathLike, expected: ExtractorDescriptor | None = None
    ) -> "Agent":
        bundle = load_checkpoint(path, expected)
        return cls(
            bundle.q, bundle.policy, ReplayMemory(bundle.capacity), bundle.descriptor
        )


@dataclass
class CheckpointBundle:
    q: QFunction
    policy: PolicyState
    descriptor: ExtractorDescriptor
    capacity: int


def save_checkpoint(
    path: str | os.PathLike,
    q: QFunction,
    policy: PolicyState,
    descriptor: ExtractorDescriptor,
    capacity: int,
) -> None:
    """Write a self-describing single-file checkpoint, atomically.

    Layout: magic, u32 header length, JSON header (format version,
    extractor descriptor, hyperparameters, array manifest), then raw
    little-endian float64 tensor bytes in manifest order. Writing the
    same state twice yields identical bytes.
    """
    arrays: list[tuple[str, np.ndarray]] = []
    for i, (w, b) in enumerate(zip(q.weights, q.biases)):
        arrays.append((f"w{i}", w))
        arrays.append((f"b{i}", b))
    header = {
        "version": CHECKPOINT_VERSION,
        "extractor": dataclasses.asdict(descriptor),
        "policy": dataclasses.asdict(policy),
        "input_dim": q.input_dim,
        "hidden": list(q.hidden),
        "capacity": capacity,
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    blob = io.BytesIO()
    head_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    blob.write(CHECKPOINT_MAGIC)
    blob.write(struct.pack("<I", len(head_bytes)))
    blob.write(head_bytes)
    for _, arr in arrays:
        blob.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob.getvalue())
    os.replace(tmp, path)


def load_checkpoint(
    path: str | os.PathLike, expected: ExtractorDescriptor | None = None
) -> CheckpointBundle:
    """Read a checkpoint back; bit-exact inverse of save_checkpoint.

    Raises CheckpointIOError on truncation or corruption,
    VersionMismatchError on a foreign format version, and
    ExtractorMismatchError when the embedded descriptor differs from the
    expected one. No partial state escapes on failure.
    """
    try:
        raw = open(path, "rb").read()
    except OSError as exc:
        raise CheckpointIOError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < 8 or raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointIOError(f"{path} is not a checkpoint (bad magic)")
    (head_len,) = struct.unpack("<I", raw[4:8])
    if len(raw) < 8 + head_len:
        raise CheckpointIOError(f"{path} truncated inside header")
    try:
        header = json.loads(raw[8 : 8 + head_len])
    except ValueError as exc:
        raise CheckpointIOError(f"{path} header unparseable: {exc}") from exc
    if header.get("version") != CHECKPOINT_VERSION:
        raise VersionMismatchError(
            f"checkpoint version {header.get('version')!r}, expected {CHECKPOINT_VERSION}"
        )
    descriptor = ExtractorDescriptor(**header["extractor"])
    if expected is not None and descriptor != expected:
        raise ExtractorMismatchError(
            f"checkpoint built for {descriptor}, run configured with {expected}"
        )

    offset = 8 + head_len
    tensors = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        nbytes = 8 * int(np.prod(shape)) if shape else 8
        chunk = raw[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointIOError(f"{path} truncated inside tensor {entry['name']}")
        tensors[entry["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        offset += nbytes

    hidden = tuple(header["hidden"])
    n_layers = len(hidden) + 1
    try:
        weights = [tensors[f"w{i}"] for i in range(n_layers)]
        biases = [tensors[f"b{i}"] for i in range(n_layers)]
    except KeyError as exc:
        raise CheckpointIOError(f"{path} missing tensor {exc}") from exc
    q = QFunction(int(header["input_dim"]), hidden, weights, biases)
    policy = PolicyState(**header["policy"])
    return CheckpointBundle(q, policy, descriptor, int(header["capacity"]))
