"""Consensus-gated target syncing for the DQN agent.

``M`` workers each draw a mini-batch from the replay buffer and measure how
closely the target network's penultimate-layer features track the
action-value network's on those states (cosine similarity, batch-averaged).
The target is refreshed only when the ensemble's consensus score drops to
``alpha`` or below. Workers read from a weight snapshot taken when the check
starts and never write to the agent, so they may run concurrently; each one
draws from its own generator seeded by ``(run_seed, check_index, worker)``.
"""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, field

import numpy as np

from fsorf import _kernels
from fsorf.dqn import DqnAgent, DqnParams

CONSENSUS_MODES = ("min", "mean", "majority")


@dataclass(frozen=True)
class EnsembleConfig:
    m_workers: int = 10
    alpha: float = 0.5
    batch_size: int = 32
    mode: str = "min"

    def validate(self) -> list[str]:
        errors = []
        if self.m_workers < 1:
            errors.append("m_workers must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            errors.append("alpha must lie in [0, 1]")
        if self.batch_size < 1:
            errors.append("batch_size must be >= 1")
        if self.mode not in CONSENSUS_MODES:
            errors.append(f"mode must be one of {CONSENSUS_MODES}")
        return errors


@dataclass(frozen=True)
class ConsensusReport:
    scores: tuple
    consensus: float
    synced: bool
    check_index: int = 0


def feature_similarity(f_target, f_actionvalue) -> float:
    a = np.asarray(f_target, dtype=float).reshape(1, -1)
    b = np.asarray(f_actionvalue, dtype=float).reshape(1, -1)
    if a.shape != b.shape:
        raise ValueError(f"feature lengths differ: {a.shape[1]} vs {b.shape[1]}")
    return float(_kernels.cosine_rows(a, b)[0])


def avg_similarity(batch_states, q_net, target_net) -> float:
    states = np.atleast_2d(np.asarray(batch_states))
    if states.shape[0] == 0:
        raise ValueError("empty batch")
    f_t = np.ascontiguousarray(target_net.features(states), dtype=float)
    f_a = np.ascontiguousarray(q_net.features(states), dtype=float)
    return float(np.mean(_kernels.cosine_rows(f_t, f_a)))


def consensus(scores, mode: str = "min") -> float:
    """Collapse per-worker scores into one number.

    ``min`` is the conservative reading used by default. ``majority`` returns
    the median, i.e. the score at which half the workers agree.
    """
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise ValueError("no worker scores")
    if mode == "min":
        return float(s.min())
    if mode == "mean":
        return float(s.mean())
    if mode == "majority":
        return float(np.median(s))
    raise ValueError(f"unknown consensus mode {mode!r}")


def _worker_rng(run_seed: int, check_index: int, worker: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(run_seed), int(check_index), int(worker)]))


def maybe_sync_consensus(agent: DqnAgent, cfg: EnsembleConfig, run_seed: int = 0,
                         check_index: int = 0, executor: Executor | None = None) -> ConsensusReport:
    need = cfg.m_workers * cfg.batch_size
    if len(agent.buffer) < need:
        return ConsensusReport((), float("nan"), False, check_index)
    q_snap = agent.q_net.clone()
    t_snap = agent.target_net.clone()

    def work(m):
        states = agent.buffer.sample_states(cfg.batch_size, _worker_rng(run_seed, check_index, m))
        return avg_similarity(states, q_snap, t_snap)

    if executor is None:
        scores = [work(m) for m in range(cfg.m_workers)]
    else:
        scores = list(executor.map(work, range(cfg.m_workers)))
    score = consensus(scores, cfg.mode)
    synced = score <= cfg.alpha
    if synced:
        agent.sync()
    return ConsensusReport(tuple(scores), score, synced, check_index)


class EnsembleDqnAgent(DqnAgent):
    """DQN whose target network moves only on a consensus check at episode end."""

    kind = "dqn_ensemble"
    periodic_sync = False

    def __init__(self, obs_dim: int, params: DqnParams | None = None, ensemble: EnsembleConfig | None = None,
                 rng=None, total_env_steps: int = 120_000, run_seed: int = 0, q_net=None):
        super().__init__(obs_dim, params, rng, total_env_steps, q_net)
        self.ensemble = ensemble or EnsembleConfig(batch_size=self.params.batch_size)
        self.run_seed = run_seed
        self.checks = 0
        self.reports: list[ConsensusReport] = []

    def check(self, executor: Executor | None = None) -> ConsensusReport:
        report = maybe_sync_consensus(self, self.ensemble, self.run_seed, self.checks, executor)
        self.checks += 1
        self.reports.append(report)
        return report

    def end_episode(self):
        return self.check()
