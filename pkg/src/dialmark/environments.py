"""Simulator environments: error rate, action masks and user model."""

from __future__ import annotations

from dataclasses import dataclass

NORMAL = "normal"
UNFRIENDLY = "unfriendly"

DEFAULT_MAX_TURNS = 25


@dataclass(frozen=True)
class EnvironmentConfig:
    id: int
    error_rate: float
    masks: bool
    user_model: str = NORMAL
    max_turns: int = DEFAULT_MAX_TURNS
    gamma: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.error_rate <= 1.0:
            raise ValueError(f"error_rate {self.error_rate} outside [0, 1]")
        if self.user_model not in (NORMAL, UNFRIENDLY):
            raise ValueError(f"unknown user model {self.user_model!r}")
        if self.max_turns < 1:
            raise ValueError("max_turns must be positive")


ENVIRONMENTS: dict[int, EnvironmentConfig] = {
    1: EnvironmentConfig(1, 0.00, True, NORMAL),
    2: EnvironmentConfig(2, 0.00, False, NORMAL),
    3: EnvironmentConfig(3, 0.15, True, NORMAL),
    4: EnvironmentConfig(4, 0.15, False, NORMAL),
    5: EnvironmentConfig(5, 0.15, False, UNFRIENDLY),
    6: EnvironmentConfig(6, 0.30, True, NORMAL),
}


def get_environment(env_id: int, **overrides) -> EnvironmentConfig:
    try:
        env = ENVIRONMENTS[int(env_id)]
    except KeyError:
        raise ValueError(f"unknown environment {env_id}; expected 1..6") from None
    if overrides:
        env = EnvironmentConfig(**{**env.__dict__, **overrides})
    return env
