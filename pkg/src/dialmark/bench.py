"""Experiment grid: run cells, persist them as CSV, aggregate over seeds."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .baselines import EMDBPolicy, EMDMPolicy, HDCPolicy, RQPolicy
from .belief import TrackerConfig
from .environments import ENVIRONMENTS, get_environment
from .ontology import SHIPPED_DOMAINS, load_domain
from .personalization import MODES, make_learner_policies, play, shared_policies
from .rl import DQNConfig, GPConfig
from .rl.dqn import QNetworkSpec
from .usersim import ConfigurationError, ErrorModel, ProfileSampler, UserFactory

log = logging.getLogger(__name__)

BASELINES = ("RQ", "EMDB", "EMDM", "HDC")
LEARNERS = ("DQN", "GP")
ALGORITHMS = BASELINES + LEARNERS
NO_MODE = "-"
SEED_OFFSET_ENV = "DIALMARK_SEED_OFFSET"

CSV_FIELDS = (
    "env_id",
    "domain",
    "algorithm",
    "mode",
    "seed",
    "train_episodes",
    "test_episodes",
    "test_reward_mean",
    "test_success_rate",
    "wall_clock_s",
)


@dataclass(frozen=True, order=True)
class CellKey:
    env_id: int
    domain: str
    algorithm: str
    mode: str
    seed: int

    @property
    def label(self) -> str:
        return algorithm_label(self.algorithm, self.mode)


def algorithm_label(algorithm: str, mode: str) -> str:
    return algorithm if mode == NO_MODE else f"{algorithm}_{mode}"


@dataclass
class CellResult:
    key: CellKey
    train_episodes: int
    test_episodes: int
    test_reward_mean: float
    test_success_rate: float
    wall_clock_s: float = 0.0
    train_rewards: list = field(default_factory=list, repr=False)

    def to_row(self) -> dict:
        k = self.key
        return {
            "env_id": k.env_id,
            "domain": k.domain,
            "algorithm": k.algorithm,
            "mode": k.mode,
            "seed": k.seed,
            "train_episodes": self.train_episodes,
            "test_episodes": self.test_episodes,
            "test_reward_mean": repr(float(self.test_reward_mean)),
            "test_success_rate": repr(float(self.test_success_rate)),
            "wall_clock_s": f"{self.wall_clock_s:.3f}",
        }

    @classmethod
    def from_row(cls, row: dict) -> "CellResult":
        key = CellKey(int(row["env_id"]), row["domain"], row["algorithm"], row["mode"], int(row["seed"]))
        return cls(
            key,
            int(row["train_episodes"]),
            int(row["test_episodes"]),
            float(row["test_reward_mean"]),
            float(row["test_success_rate"]),
            float(row.get("wall_clock_s") or 0.0),
        )


@dataclass(frozen=True)
class CellSettings:
    """Everything besides the cell key that determines a cell's numbers."""

    n_train: int = 4000
    n_test: int = 500
    user: tuple = ()
    error_model: tuple = ()
    tracker: tuple = ()
    dqn: tuple = ()
    gp: tuple = ()
    checkpoint_dir: str | None = None

    @classmethod
    def build(cls, n_train=4000, n_test=500, user=None, error_model=None, tracker=None, dqn=None, gp=None, checkpoint_dir=None):
        def freeze(d):
            return tuple(sorted((k, tuple(v) if isinstance(v, list) else v) for k, v in (d or {}).items()))

        return cls(n_train, n_test, freeze(user), freeze(error_model), freeze(tracker), freeze(dqn), freeze(gp), checkpoint_dir)

    def learner_config(self, algorithm: str):
        if algorithm == "GP":
            return GPConfig(**dict(self.gp))
        d = dict(self.dqn)
        net = {k: d.pop(k) for k in [f.name for f in fields(QNetworkSpec)] if k in d}
        if "hidden_sizes" in net:
            net["hidden_sizes"] = tuple(net["hidden_sizes"])
        return DQNConfig(network=QNetworkSpec(**net), **d)


def seed_range(n_seeds: int, offset: int | None = None) -> list[int]:
    """Seeds ``offset .. offset + n_seeds - 1``; the offset defaults to $DIALMARK_SEED_OFFSET or 0."""
    if offset is None:
        raw = os.environ.get(SEED_OFFSET_ENV, "0").strip() or "0"
        try:
            offset = int(raw)
        except ValueError:
            raise ConfigurationError(f"{SEED_OFFSET_ENV} must be an integer, got {raw!r}") from None
    return list(range(offset, offset + n_seeds))


def expand_cells(
    envs: Sequence[int],
    domains: Sequence[str],
    algorithms: Sequence[str],
    modes: Sequence[str],
    seeds: Sequence[int],
) -> list[CellKey]:
    """Cross product of the grid axes; baselines ignore the mode axis."""
    for e in envs:
        if e not in ENVIRONMENTS:
            raise ConfigurationError(f"unknown environment {e}")
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {a!r}; expected one of {ALGORITHMS}")
    for m in modes:
        if m not in MODES:
            raise ConfigurationError(f"unknown mode {m!r}; expected one of {MODES}")
    cells = []
    for e in envs:
        for d in domains:
            for a in algorithms:
                for m in (modes if a in LEARNERS else (NO_MODE,)):
                    for s in seeds:
                        cells.append(CellKey(int(e), d, a, m, int(s)))
    if len(set(cells)) != len(cells):
        raise ConfigurationError("grid contains duplicate cells")
    return cells


def _factory(domain, env, settings: CellSettings) -> UserFactory:
    em = dict(settings.error_model)
    em.setdefault("error_rate", env.error_rate)
    prof = dict(settings.user)
    prof.setdefault("user_model", env.user_model)
    return UserFactory(domain, ErrorModel(**em), ProfileSampler(**prof))


def run_cell(key: CellKey, settings: CellSettings = CellSettings()) -> CellResult:
    """Train and test one cell. The result depends only on ``key`` and ``settings``."""
    start = time.perf_counter()
    domain = load_domain(key.domain)
    env = get_environment(key.env_id)
    factory = _factory(domain, env, settings)
    tracker = TrackerConfig(**dict(settings.tracker)) if settings.tracker else None
    if key.algorithm in LEARNERS:
        policies = make_learner_policies(key.mode, key.algorithm, domain, key.seed, settings.learner_config(key.algorithm))
    else:
        policy = {"RQ": RQPolicy, "EMDB": EMDBPolicy, "HDC": HDCPolicy}.get(key.algorithm)
        policies = shared_policies(EMDMPolicy(domain) if key.algorithm == "EMDM" else policy())
    train_rewards, _, _ = play(policies, factory, env, settings.n_train, key.seed, "train", tracker)
    policies.freeze()
    _, _, records = play(policies, factory, env, settings.n_test, key.seed, "test", tracker, keep_records=True)
    if settings.checkpoint_dir and key.algorithm in LEARNERS:
        save_checkpoints(policies, key, settings.checkpoint_dir)
    rewards = np.array([r.return_ for r in records], dtype=float)
    success = np.array([r.success for r in records], dtype=float)
    return CellResult(
        key,
        settings.n_train,
        settings.n_test,
        float(rewards.mean()) if len(rewards) else float("nan"),
        float(success.mean()) if len(success) else float("nan"),
        time.perf_counter() - start,
        train_rewards,
    )


def save_checkpoints(policies, key: CellKey, directory) -> list[Path]:
    out = []
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for segment, policy in policies.policies.items():
        name = f"{key.algorithm}_{key.domain}_{key.mode}_env{key.env_id}_seed{key.seed}_{segment or 'all'}.json"
        policy.learner.save(directory / name)
        out.append(directory / name)
    return out


def write_results(path, results: Iterable[CellResult]) -> None:
    """Write results sorted by cell key, so the file does not depend on completion order."""
    rows = sorted(results, key=lambda r: r.key)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r.to_row())


def read_results(path) -> list[CellResult]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return [CellResult.from_row(row) for row in reader]


def _append(path, result: CellResult) -> None:
    new = not Path(path).exists() or Path(path).stat().st_size == 0
    with open(path, "a", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        if new:
            w.writeheader()
        w.writerow(result.to_row())


def run_grid(
    cells: Sequence[CellKey],
    settings: CellSettings = CellSettings(),
    out=None,
    jobs: int = 1,
    resume: bool = False,
    progress=None,
) -> list[CellResult]:
    """Run every cell, appending finished cells to ``out`` as they complete.

    With ``resume`` cells already present in ``out`` are read back instead of
    rerun. A cell that raises is logged and skipped. The final file is
    rewritten sorted by cell key.
    """
    done: dict[CellKey, CellResult] = {}
    if out is not None and resume and Path(out).exists():
        for r in read_results(out):
            if r.train_episodes == settings.n_train and r.test_episodes == settings.n_test:
                done[r.key] = r
    todo = [c for c in cells if c not in done]
    if out is not None:
        write_results(out, done.values())
    failures = []

    def finish(result: CellResult) -> None:
        done[result.key] = result
        if out is not None:
            try:
                _append(out, result)
            except OSError as exc:
                log.error("could not record cell %s: %s", result.key, exc)
        if progress is not None:
            progress(result)

    if jobs <= 1:
        for c in todo:
            try:
                finish(run_cell(c, settings))
            except Exception as exc:  # noqa: BLE001 - one bad cell must not stop the grid
                log.error("cell %s failed: %s", c, exc)
                failures.append(c)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(run_cell, c, settings): c for c in todo}
            for fut in as_completed(futures):
                try:
                    finish(fut.result())
                except Exception as exc:  # noqa: BLE001
                    log.error("cell %s failed: %s", futures[fut], exc)
                    failures.append(futures[fut])
    wanted = set(cells)
    results = sorted((r for k, r in done.items() if k in wanted), key=lambda r: r.key)
    if out is not None:
        write_results(out, done.values())
    if failures:
        log.warning("%d of %d cells failed", len(failures), len(cells))
    return results


@dataclass(frozen=True)
class SummaryRow:
    group: tuple
    mean: float
    sd: float
    n: int
    single_seed: bool

    def get(self, name):
        return dict(self.group)[name]


def aggregate(results: Iterable[CellResult], keys: Sequence[str] = ("env_id", "domain", "algorithm", "mode")) -> list[SummaryRow]:
    """Mean and sample standard deviation of test reward over seeds for each group.

    A group with one member gets sd 0 and ``single_seed`` set.
    """
    groups: dict[tuple, list[float]] = {}
    for r in results:
        g = tuple((k, getattr(r.key, k)) for k in keys)
        groups.setdefault(g, []).append(r.test_reward_mean)
    rows = []
    for g in sorted(groups):
        vals = np.asarray(groups[g], dtype=float)
        if len(vals) == 0:
            log.warning("empty group %s omitted", g)
            continue
        sd = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        rows.append(SummaryRow(g, float(vals.mean()), sd, len(vals), len(vals) == 1))
    return rows


def grand_means(results: Iterable[CellResult]) -> dict[str, float]:
    """Per algorithm label, the mean over (env, domain) of the seed-averaged reward."""
    per_cell = aggregate(results, ("algorithm", "mode", "env_id", "domain"))
    acc: dict[str, list[float]] = {}
    for row in per_cell:
        acc.setdefault(algorithm_label(row.get("algorithm"), row.get("mode")), []).append(row.mean)
    return {k: float(np.mean(v)) for k, v in sorted(acc.items())}


def summary_to_records(rows: Iterable[SummaryRow]) -> list[dict]:
    return [{**dict(r.group), "mean": r.mean, "sd": r.sd, "n": r.n, "single_seed": r.single_seed} for r in rows]


# -- configuration files -------------------------------------------------------

GRID_KEYS = ("env", "domain", "algo", "mode", "seeds", "train", "test", "out", "jobs")
SETTING_KEYS = ("user", "error_model", "tracker", "dqn", "gp", "checkpoints")


@dataclass
class GridConfig:
    env: list = field(default_factory=lambda: list(range(1, 7)))
    domain: list = field(default_factory=lambda: list(SHIPPED_DOMAINS))
    algo: list = field(default_factory=lambda: list(ALGORITHMS))
    mode: list = field(default_factory=lambda: list(MODES))
    seeds: int = 10
    train: int = 4000
    test: int = 500
    out: str = "results.csv"
    jobs: int = 1
    user: dict = field(default_factory=dict)
    error_model: dict = field(default_factory=dict)
    tracker: dict = field(default_factory=dict)
    dqn: dict = field(default_factory=dict)
    gp: dict = field(default_factory=dict)
    checkpoints: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "GridConfig":
        unknown = set(d) - set(GRID_KEYS) - set(SETTING_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
        d = dict(d)
        for k in ("env", "domain", "algo", "mode"):
            if k in d and not isinstance(d[k], list):
                d[k] = [d[k]]
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "GridConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None

    def cells(self, seed_offset: int | None = None) -> list[CellKey]:
        return expand_cells(self.env, self.domain, self.algo, self.mode, seed_range(self.seeds, seed_offset))

    def settings(self) -> CellSettings:
        return CellSettings.build(
            self.train, self.test, self.user, self.error_model, self.tracker, self.dqn, self.gp, self.checkpoints
        )

    def to_dict(self) -> dict:
        return asdict(self)
