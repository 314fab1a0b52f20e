"""Run configuration: a JSON file whose hyperparameter keys match the
symbols used throughout the docs (c_ref, epsilon_min, gamma, mu_dec,
r_th, K, p_0, omega, T, n, ...).

Paths inside the file resolve relative to the file's own directory, so a
corpus directory with a config in it stays relocatable.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .agent import PolicyState
from .codec import QUALITY_LADDER
from .controller import ControllerParams
from .environment import HttpBackend, HttpBackendConfig, SimulatedOracle
from .exceptions import ConfigError
from .features import get_extractor
from .metrics import RewardParams


@dataclass
class RunConfig:
    seed: int = 0
    K: int = 1000
    c_ref: int = 75
    epsilon_start: float = 1.0
    epsilon_min: float = 0.02
    epsilon_retrain: float = 0.5
    gamma: float = 0.95
    mu_dec: float = 0.99
    T: int = 5
    T_start: int = 50
    n: int = 10
    r_th: float = 0.45
    p_0: float = 0.2
    p_min: float = 0.05
    omega: float = -3.0
    alpha: float = 1.0
    beta: float = 0.0
    minibatch_size: int = 64
    memory_capacity: int = 10000
    learning_rate: float = 0.25
    value_init: float = 3.0
    hidden_layers: list[int] = field(default_factory=lambda: [64, 64])
    use_frozen_target: bool = True
    target_sync: int = 75
    extractor: str = "block-dct-hist"
    backend: dict = field(default_factory=lambda: {"type": "oracle", "spec": "oracle.json"})
    manifest: str = "manifest.jsonl"
    checkpoint: str = "agent.qpk"
    log: str = "steps.jsonl"


def default_config_dict() -> dict:
    return asdict(RunConfig())


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def validate_config(cfg: RunConfig) -> RunConfig:
    _require(cfg.c_ref in QUALITY_LADDER, f"c_ref {cfg.c_ref} not on ladder")
    _require(cfg.K >= 0, "K must be >= 0")
    for name in ("epsilon_start", "epsilon_min", "epsilon_retrain", "mu_dec"):
        v = getattr(cfg, name)
        _require(0.0 <= v <= 1.0, f"{name} {v} outside [0, 1]")
    _require(0.0 <= cfg.gamma <= 1.0, f"gamma {cfg.gamma} outside [0, 1]")
    _require(cfg.T >= 1, "T must be >= 1")
    _require(cfg.T_start >= 0, "T_start must be >= 0")
    _require(cfg.n >= 1, "n must be >= 1")
    _require(0.0 < cfg.p_min <= 1.0, f"p_min {cfg.p_min} outside (0, 1]")
    _require(cfg.p_min <= cfg.p_0 <= 1.0, f"p_0 {cfg.p_0} outside [p_min, 1]")
    _require(cfg.minibatch_size >= 1, "minibatch_size must be >= 1")
    _require(cfg.memory_capacity >= cfg.minibatch_size, "memory_capacity < minibatch_size")
    _require(cfg.learning_rate > 0.0, "learning_rate must be positive")
    _require(
        bool(cfg.hidden_layers) and all(int(h) >= 1 for h in cfg.hidden_layers),
        "hidden_layers must be a non-empty list of positive ints",
    )
    _require(cfg.target_sync >= 1, "target_sync must be >= 1")
    _require(isinstance(cfg.backend, dict) and "type" in cfg.backend, "backend needs a type")
    _require(
        cfg.backend["type"] in ("oracle", "http"),
        f"backend type {cfg.backend.get('type')!r} not one of oracle, http",
    )
    return cfg


def load_config(path: str | Path) -> tuple[RunConfig, Path]:
    """Parse and validate a config file; returns (config, base directory)."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    known = set(default_config_dict())
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    try:
        cfg = RunConfig(**doc)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return validate_config(cfg), path.parent


def policy_from_config(cfg: RunConfig, seed: int | None = None) -> PolicyState:
    return PolicyState(
        epsilon=cfg.epsilon_start,
        epsilon_min=cfg.epsilon_min,
        decay=cfg.mu_dec,
        gamma=cfg.gamma,
        train_interval=cfg.T,
        train_start=cfg.T_start,
        minibatch_size=cfg.minibatch_size,
        learning_rate=cfg.learning_rate,
        rng_seed=cfg.seed if seed is None else seed,
        use_frozen_target=cfg.use_frozen_target,
        target_sync=cfg.target_sync,
        value_init=cfg.value_init,
    )


def controller_params_from_config(cfg: RunConfig) -> ControllerParams:
    return ControllerParams(
        c_ref=cfg.c_ref,
        window=cfg.n,
        r_th=cfg.r_th,
        p_0=cfg.p_0,
        p_min=cfg.p_min,
        omega=cfg.omega,
        epsilon_retrain=cfg.epsilon_retrain,
        reward=RewardParams(alpha=cfg.alpha, beta=cfg.beta),
    )


def backend_from_config(cfg: RunConfig, base_dir: Path):
    spec = cfg.backend
    if spec["type"] == "oracle":
        if "spec" not in spec:
            raise ConfigError("oracle backend needs a 'spec' path")
        return SimulatedOracle.from_spec(base_dir / spec["spec"])
    if "url" not in spec:
        raise ConfigError("http backend needs a 'url'")
    return HttpBackend(
        HttpBackendConfig(
            url=spec["url"],
            label_path=spec.get("label_path", "labels"),
            timeout_s=float(spec.get("timeout_s", 10.0)),
            headers=dict(spec.get("headers", {})),
            retry_backoff_s=float(spec.get("retry_backoff_s", 0.5)),
            min_interval_s=float(spec.get("min_interval_s", 0.0)),
        )
    )


def extractor_from_config(cfg: RunConfig):
    return get_extractor(cfg.extractor)
