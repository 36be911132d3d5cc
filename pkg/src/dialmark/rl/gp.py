"""Sparse online GP-SARSA.

Q is modelled on a dictionary of (belief, action) points under the kernel
``k((b, a), (b', a')) = [a == a'] <b, b'>``. New points enter the dictionary
through an approximate linear dependence test. The posterior over Q at the
dictionary points is Gaussian and updated with one rank-one Kalman step per
observed reward, treating ``r_t = Q(x_t) - gamma Q(x_{t+1}) + noise``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import blas

from .common import TEST, Transition, masked_argmax


@dataclass(frozen=True)
class GPConfig:
    gamma: float = 1.0
    noise_var: float = 1.0
    ald_threshold: float = 0.01
    max_dictionary: int = 1500
    exploration_scale: float = 3.0


class _ActionDictionary:
    """Dictionary points for one action and the inverse of their Gram matrix."""

    def __init__(self, n_features: int):
        self.points = np.zeros((0, n_features))
        self.kinv = np.zeros((0, 0))
        self.global_index = np.zeros(0, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.global_index)

    def project(self, b: np.ndarray) -> tuple[np.ndarray, float]:
        """Projection coefficients of ``b`` and the squared residual."""
        kbb = float(b @ b)
        if len(self) == 0:
            return np.zeros(0), kbb
        kvec = self.points @ b
        coef = self.kinv @ kvec
        return coef, max(kbb - float(kvec @ coef), 0.0)

    def add(self, b: np.ndarray, coef: np.ndarray, residual: float, index: int) -> None:
        m = len(self)
        kinv = np.empty((m + 1, m + 1))
        kinv[:m, :m] = self.kinv + np.outer(coef, coef) / residual
        kinv[:m, m] = kinv[m, :m] = -coef / residual
        kinv[m, m] = 1.0 / residual
        self.kinv = kinv
        self.points = np.vstack([self.points, b[None, :]])
        self.global_index = np.append(self.global_index, index)


class GPSarsaLearner:
    """GP-SARSA with posterior sampling for exploration.

    Training draws one sample per allowed action from
    ``N(mean, (scale * std)^2)`` and acts greedily on the samples; testing acts
    on the posterior mean.
    """

    kind = "GP"

    def __init__(self, n_features: int, n_actions: int, rng: np.random.Generator, config: GPConfig = GPConfig()):
        self.n_features = n_features
        self.n_actions = n_actions
        self.config = config
        self.rng = rng
        self.dicts = [_ActionDictionary(n_features) for _ in range(n_actions)]
        self.mu = np.zeros(0)
        self.sigma = np.zeros((0, 0), order="F")
        self.dialogues = 0
        self.updates = 0

    # -- posterior queries -------------------------------------------------

    def posterior(self, b: np.ndarray, action: int) -> tuple[float, float]:
        d = self.dicts[action]
        coef, residual = d.project(b)
        if len(d) == 0:
            return 0.0, residual
        idx = d.global_index
        mean = float(coef @ self.mu[idx])
        var = float(coef @ self.sigma[np.ix_(idx, idx)] @ coef) + residual
        return mean, max(var, 0.0)

    def q_values(self, b: np.ndarray, mask: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        means = np.zeros(self.n_actions)
        variances = np.zeros(self.n_actions)
        for a in range(self.n_actions):
            if mask is None or mask[a]:
                means[a], variances[a] = self.posterior(b, a)
        return means, variances

    def select_action(self, b: np.ndarray, mask: np.ndarray, phase: str, rng: np.random.Generator) -> int:
        means, variances = self.q_values(b, mask)
        if phase == TEST:
            return masked_argmax(means, mask)
        scale = self.config.exploration_scale
        sample = means + scale * np.sqrt(variances) * rng.standard_normal(self.n_actions)
        return masked_argmax(sample, mask)

    # -- learning ----------------------------------------------------------

    def _sparse_vector(self, b: np.ndarray, action: int) -> tuple[np.ndarray, np.ndarray, float]:
        """Dictionary weights of a point, adding it to the dictionary when novel."""
        d = self.dicts[action]
        coef, residual = d.project(b)
        kbb = float(b @ b)
        novel = residual > self.config.ald_threshold * max(kbb, 1e-12)
        if novel and self.size < self.config.max_dictionary:
            self._grow(d, b, coef, residual)
            return np.array([self.size - 1]), np.ones(1), 0.0
        return d.global_index.copy(), coef, residual

    @property
    def size(self) -> int:
        return len(self.mu)

    def _grow(self, d: _ActionDictionary, b: np.ndarray, coef: np.ndarray, residual: float) -> None:
        n = self.size
        idx = d.global_index
        sigma = np.zeros((n + 1, n + 1), order="F")
        sigma[:n, :n] = self.sigma
        mu_new = 0.0
        var_new = residual
        if len(idx):
            col = self.sigma[:, idx] @ coef
            mu_new = float(coef @ self.mu[idx])
            sigma[:n, n] = col
            sigma[n, :n] = col
            var_new += float(coef @ col[idx])
        sigma[n, n] = var_new
        self.sigma = sigma
        self.mu = np.append(self.mu, mu_new)
        d.add(b, coef, residual, n)

    def update(self, b, a, r, b_next=None, a_next=None) -> None:
        """Kalman step for ``r = Q(b, a) - gamma Q(b_next, a_next) + noise``."""
        gamma = self.config.gamma
        idx0, w0, res0 = self._sparse_vector(b, a)
        noise = self.config.noise_var + res0
        if b_next is not None:
            idx1, w1, res1 = self._sparse_vector(b_next, a_next)
            idx = np.concatenate([idx0, idx1])
            h = np.concatenate([w0, -gamma * w1])
            noise += gamma * gamma * res1
        else:
            idx, h = idx0, w0
        n = self.size
        if n == 0 or len(idx) == 0:
            self.updates += 1
            return
        sh = self.sigma[:, idx] @ h
        s = float(h @ sh[idx]) + noise
        innovation = r - float(h @ self.mu[idx])
        self.mu += sh * (innovation / s)
        # In-place symmetric rank-one downdate; sigma is kept Fortran ordered.
        self.sigma = blas.dger(-1.0 / s, sh, sh, a=self.sigma, overwrite_a=1)
        self.updates += 1

    def observe(self, t: Transition, next_action: int | None = None) -> None:
        if t.terminal:
            self.update(t.b, t.a, t.r)
        else:
            self.update(t.b, t.a, t.r, t.b_next, next_action)

    def end_episode(self) -> None:
        self.dialogues += 1

    # -- persistence -------------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_features": self.n_features,
            "n_actions": self.n_actions,
            "config": asdict(self.config),
            "dialogues": self.dialogues,
            "updates": self.updates,
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "dictionaries": [
                {"points": d.points.tolist(), "index": d.global_index.tolist()} for d in self.dicts
            ],
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.state_dict(), fh)

    @classmethod
    def from_state_dict(cls, d: dict, rng: np.random.Generator | None = None) -> "GPSarsaLearner":
        learner = cls(d["n_features"], d["n_actions"], rng or np.random.default_rng(0), GPConfig(**d["config"]))
        n = len(d["mu"])
        learner.mu = np.asarray(d["mu"], dtype=float)
        learner.sigma = np.asfortranarray(np.asarray(d["sigma"], dtype=float).reshape(n, n))
        for ad, src in zip(learner.dicts, d["dictionaries"]):
            pts = np.asarray(src["points"], dtype=float).reshape(-1, d["n_features"])
            ad.points = pts
            ad.global_index = np.asarray(src["index"], dtype=np.int64)
            ad.kinv = np.linalg.inv(pts @ pts.T) if len(pts) else np.zeros((0, 0))
        learner.dialogues = d["dialogues"]
        learner.updates = d["updates"]
        return learner

    @classmethod
    def load(cls, path) -> "GPSarsaLearner":
        with open(path, encoding="utf-8") as fh:
            return cls.from_state_dict(json.load(fh))
