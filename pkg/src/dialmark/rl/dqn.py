"""Deep Q-learning with a small numpy MLP, replay buffer and target network."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .common import TEST, EpsilonSchedule, Transition, masked_argmax, uniform_allowed


@dataclass(frozen=True)
class QNetworkSpec:
    hidden_sizes: tuple[int, ...] = (300, 100)
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8


@dataclass(frozen=True)
class DQNConfig:
    network: QNetworkSpec = QNetworkSpec()
    gamma: float = 1.0
    epsilon_start: float = 0.5
    epsilon_end: float = 0.05
    epsilon_horizon: int = 4000
    buffer_size: int = 2000
    batch_size: int = 64
    target_sync: int = 100
    # Feasible return range of an episode; bootstrapped targets are clipped to it.
    value_bounds: tuple[float, float] | None = (-25.0, 19.0)
    # Rewards are multiplied by this before regression; Q estimates are reported unscaled.
    reward_scale: float = 1.0


class MLP:
    """ReLU feed-forward net with a linear output layer and Adam state."""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator, spec: QNetworkSpec = QNetworkSpec()):
        self.sizes = tuple(int(s) for s in sizes)
        self.spec = spec
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(np.float32))
            self.biases.append(np.zeros(fan_out, dtype=np.float32))
        self._m = [np.zeros_like(p) for p in self.params]
        self._v = [np.zeros_like(p) for p in self.params]
        self._tmp = [np.zeros_like(p) for p in self.params]
        self.steps = 0

    @property
    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy_from(self, other: "MLP") -> None:
        for dst, src in zip(self.params, other.params):
            dst[...] = src

    def forward(self, x: np.ndarray, keep: bool = False):
        h = np.asarray(x, dtype=np.float32)
        acts = [h]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return (h, acts) if keep else h

    def gradients(self, acts: list[np.ndarray], grad_out: np.ndarray) -> list[np.ndarray]:
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.weights)
        g = grad_out
        for i in range(len(self.weights) - 1, -1, -1):
            grads_w[i] = acts[i].T @ g
            grads_b[i] = g.sum(axis=0)
            if i > 0:
                g = (g @ self.weights[i].T) * (acts[i] > 0.0)
        return [p for pair in zip(grads_w, grads_b) for p in pair]

    def adam_step(self, grads: list[np.ndarray]) -> None:
        s = self.spec
        self.steps += 1
        lr_t = s.learning_rate * np.sqrt(1 - s.beta2**self.steps) / (1 - s.beta1**self.steps)
        for p, g, m, v, tmp in zip(self.params, grads, self._m, self._v, self._tmp):
            m *= s.beta1
            np.multiply(g, 1 - s.beta1, out=tmp)
            m += tmp
            v *= s.beta2
            np.multiply(g, g, out=tmp)
            tmp *= 1 - s.beta2
            v += tmp
            np.sqrt(v, out=tmp)
            tmp += s.adam_eps
            np.divide(m, tmp, out=tmp)
            tmp *= lr_t
            p -= tmp


class ReplayBuffer:
    def __init__(self, capacity: int, n_features: int, n_actions: int):
        self.capacity = capacity
        self.b = np.zeros((capacity, n_features), dtype=np.float32)
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.b_next = np.zeros((capacity, n_features), dtype=np.float32)
        self.mask_next = np.ones((capacity, n_actions), dtype=bool)
        self.terminal = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._pos = 0

    def __len__(self) -> int:
        return self.size

    def add(self, t: Transition) -> None:
        i = self._pos
        self.b[i] = t.b
        self.a[i] = t.a
        self.r[i] = t.r
        self.terminal[i] = t.terminal
        if t.terminal:
            self.b_next[i] = 0.0
            self.mask_next[i] = True
        else:
            self.b_next[i] = t.b_next
            self.mask_next[i] = t.mask_next
        self._pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.size, size=n)


class DQNLearner:
    """Q-network learner with epsilon-greedy exploration.

    The exploration rate is indexed by the number of training dialogues this
    learner has finished, so segment learners anneal on their own clocks.
    """

    kind = "DQN"

    def __init__(self, n_features: int, n_actions: int, rng: np.random.Generator, config: DQNConfig = DQNConfig()):
        self.n_features = n_features
        self.n_actions = n_actions
        self.config = config
        self.rng = rng
        sizes = (n_features, *config.network.hidden_sizes, n_actions)
        self.net = MLP(sizes, rng, config.network)
        self.target = MLP(sizes, rng, config.network)
        self.target.copy_from(self.net)
        self.buffer = ReplayBuffer(config.buffer_size, n_features, n_actions)
        self.schedule = EpsilonSchedule(config.epsilon_start, config.epsilon_end, config.epsilon_horizon)
        self.dialogues = 0
        self.updates = 0

    @property
    def epsilon(self) -> float:
        return self.schedule(self.dialogues)

    def q_values(self, x: np.ndarray) -> np.ndarray:
        return self.net.forward(np.asarray(x, dtype=float)[None, :])[0].astype(float) / self.config.reward_scale

    def select_action(self, x: np.ndarray, mask: np.ndarray, phase: str, rng: np.random.Generator) -> int:
        if phase != TEST and rng.random() < self.epsilon:
            return uniform_allowed(mask, rng)
        return masked_argmax(self.q_values(x), mask)

    def targets(self, r: np.ndarray, b_next: np.ndarray, mask_next: np.ndarray, terminal: np.ndarray) -> np.ndarray:
        q_next = self.target.forward(b_next)
        best = np.where(mask_next, q_next, -np.inf).max(axis=1)
        scale = self.config.reward_scale
        if self.config.value_bounds is not None:
            # Bootstrapped values are kept inside the range of achievable returns.
            lo, hi = self.config.value_bounds
            best = np.clip(best, scale * lo, scale * hi)
        best = np.where(terminal, 0.0, best)
        return scale * np.asarray(r, dtype=float) + self.config.gamma * best

    def td_loss(self, b, a, y) -> float:
        q = self.net.forward(b)
        return float(np.mean((q[np.arange(len(a)), a] - y) ** 2))

    def update(self, b: np.ndarray, a: np.ndarray, r: np.ndarray, b_next: np.ndarray, mask_next: np.ndarray, terminal: np.ndarray) -> float:
        """One Adam step on the mean squared TD error of a batch; returns the pre-step loss."""
        y = self.targets(r, b_next, mask_next, terminal)
        q, acts = self.net.forward(b, keep=True)
        rows = np.arange(len(a))
        err = q[rows, a] - y
        grad_out = np.zeros_like(q)
        grad_out[rows, a] = 2.0 * err / len(a)
        self.net.adam_step(self.net.gradients(acts, grad_out))
        self.updates += 1
        if self.updates % self.config.target_sync == 0:
            self.target.copy_from(self.net)
        return float(np.mean(err**2))

    def observe(self, t: Transition, next_action: int | None = None) -> None:
        self.buffer.add(t)
        if len(self.buffer) >= self.config.batch_size:
            buf = self.buffer
            idx = buf.sample(self.config.batch_size, self.rng)
            self.update(buf.b[idx], buf.a[idx], buf.r[idx], buf.b_next[idx], buf.mask_next[idx], buf.terminal[idx])

    def end_episode(self) -> None:
        self.dialogues += 1

    def state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_features": self.n_features,
            "n_actions": self.n_actions,
            "config": asdict(self.config),
            "dialogues": self.dialogues,
            "updates": self.updates,
            "weights": [w.tolist() for w in self.net.weights],
            "biases": [b.tolist() for b in self.net.biases],
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.state_dict(), fh)

    @classmethod
    def from_state_dict(cls, d: dict, rng: np.random.Generator | None = None) -> "DQNLearner":
        cfg = d["config"]
        config = DQNConfig(
            network=QNetworkSpec(**{**cfg["network"], "hidden_sizes": tuple(cfg["network"]["hidden_sizes"])}),
            **{k: (tuple(v) if k == "value_bounds" and v is not None else v) for k, v in cfg.items() if k != "network"},
        )
        learner = cls(d["n_features"], d["n_actions"], rng or np.random.default_rng(0), config)
        for w, src in zip(learner.net.weights, d["weights"]):
            w[...] = np.asarray(src)
        for b, src in zip(learner.net.biases, d["biases"]):
            b[...] = np.asarray(src)
        learner.target.copy_from(learner.net)
        learner.dialogues = d["dialogues"]
        learner.updates = d["updates"]
        return learner

    @classmethod
    def load(cls, path) -> "DQNLearner":
        with open(path, encoding="utf-8") as fh:
            return cls.from_state_dict(json.load(fh))
