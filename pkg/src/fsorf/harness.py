"""Experiment orchestration: agent factory, episode loop, metrics and CSV output.

Every run writes ``run_<agent>_<seed>.csv``. Wall-clock times go to a separate
``run_<agent>_<seed>_timing.csv`` so the main file stays byte-identical across
repeats.
"""

from __future__ import annotations

import csv
import math
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .actor_critic import ActorCriticAgent
from .config import ConfigError, ExperimentConfig
from .dqn import DqnAgent
from .ensemble import EnsembleDqnAgent
from .environment import LinkSwitchEnv, oracle_reward
from .myopic import MyopicAgent

RUN_COLUMNS = ("episode", "mean_loss", "actor_loss", "critic_loss", "total_reward", "normalized_reward",
               "oracle_reward", "switch_count_cum")
COMPARE_COLUMNS = ("agent", "seed", "episodes", "final_reward", "oracle_reward", "reward_ratio",
                   "switch_cost", "episodes_to_90pct_oracle")
N_TRANSITIONS = 100
FINAL_WINDOW = 50
RAMP_WINDOW = 10


@dataclass
class EpisodeRow:
    episode: int
    mean_loss: float
    actor_loss: float
    critic_loss: float
    total_reward: float
    normalized_reward: float
    oracle_reward: float
    switch_count_cum: int
    wall_ms: float


@dataclass
class RunRecord:
    agent: str
    seed: int
    rows: list = field(default_factory=list)
    first_errors: list = field(default_factory=list)
    last_errors: list = field(default_factory=list)
    n_errors: int = 0
    recount: int = 0
    consensus: list = field(default_factory=list)
    paths: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    @property
    def switch_cost(self) -> int:
        return self.rows[-1].switch_count_cum if self.rows else 0


def switching_cost(events) -> int:
    """Number of adjacent positions where the deployed policy differs.

    ``None`` entries mark "no policy yet" and never count as a change.
    """
    count = 0
    prev = None
    for e in events:
        if e is None:
            prev = None
            continue
        if prev is not None and e != prev:
            count += 1
        prev = e
    return count


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators for the weather, agent (init + replay) and action draws."""
    env_ss, agent_ss, act_ss = np.random.SeedSequence(int(seed)).spawn(3)
    return {
        "env": np.random.default_rng(env_ss),
        "agent": np.random.default_rng(agent_ss),
        "action": np.random.default_rng(act_ss),
    }


def make_agent(cfg: ExperimentConfig, rng: np.random.Generator):
    obs_dim = cfg.env.obs_dim
    total = cfg.episodes * cfg.env.episode_len
    if cfg.agent == "myopic":
        return MyopicAgent(cfg.myopic.p)
    if cfg.agent == "actor_critic":
        return ActorCriticAgent(obs_dim, cfg.actor_critic, rng)
    if cfg.agent == "dqn":
        return DqnAgent(obs_dim, cfg.dqn, rng, total_env_steps=total)
    if cfg.agent == "dqn_ensemble":
        return EnsembleDqnAgent(obs_dim, cfg.dqn, cfg.ensemble, rng, total_env_steps=total,
                                run_seed=cfg.seed)
    raise ConfigError([f"agent: unknown agent kind {cfg.agent!r}"])


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else format(x, ".10g")


def _write_csv(path: Path, header, rows) -> Path:
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) if not isinstance(v, str) else v for v in r])
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    return path


def run(cfg: ExperimentConfig, write: bool = True, progress=None) -> RunRecord:
    """Train one agent for ``cfg.episodes`` episodes and optionally flush CSVs."""
    errors = cfg.validate()
    if errors:
        raise ConfigError(errors)
    streams = seed_streams(cfg.seed)
    env = LinkSwitchEnv(cfg.env, cfg.weather, seed=streams["env"])
    agent = make_agent(cfg, streams["agent"])
    act_rng = streams["action"]
    record = RunRecord(cfg.agent, cfg.seed)
    last = deque(maxlen=N_TRANSITIONS)
    events = []
    per_episode = agent.switch_scope == "episode"

    for ep in range(1, cfg.episodes + 1):
        t0 = time.perf_counter()
        obs = env.reset()
        agent.begin_episode()
        if per_episode:
            events.append(None)
        losses, actor_losses, total = [], [], 0
        while True:
            action = agent.act(obs, act_rng)
            res = env.step(action)
            loss = agent.observe(obs, action, res.reward, res.observation)
            if loss is not None:
                losses.append(loss)
                record.n_errors += 1
                if len(record.first_errors) < N_TRANSITIONS:
                    record.first_errors.append(loss)
                last.append((record.n_errors, loss))
                if hasattr(agent, "last_actor_loss"):
                    actor_losses.append(agent.last_actor_loss)
            events.append(agent.policy_marker())
            total += res.reward
            obs = res.observation
            if res.done:
                break
        report = agent.end_episode()
        if report is not None:
            record.consensus.append((ep, report))
        if not per_episode:
            events.append(agent.policy_marker())
        n = len(env.gamma_trace)
        record.rows.append(EpisodeRow(
            episode=ep,
            mean_loss=float(np.mean(losses)) if losses else float("nan"),
            actor_loss=float(np.mean(actor_losses)) if actor_losses else float("nan"),
            critic_loss=(float(np.mean(losses)) if losses and agent.kind == "actor_critic"
                         else float("nan")),
            total_reward=int(total),
            normalized_reward=total / (n * cfg.env.k),
            oracle_reward=oracle_reward(env.gamma_trace, cfg.env),
            switch_count_cum=int(agent.policy_switch_count),
            wall_ms=(time.perf_counter() - t0) * 1e3,
        ))
        if progress is not None:
            progress(record.rows[-1])

    record.last_errors = list(last)
    record.recount = switching_cost(events)
    if record.recount != record.switch_cost:
        raise RuntimeError(f"switch counter {record.switch_cost} disagrees with event recount "
                           f"{record.recount}")
    if write:
        write_run(record, cfg.output_dir)
    return record


def run_path(out_dir, agent: str, seed: int, suffix: str = "") -> Path:
    return Path(out_dir) / f"run_{agent}_{seed}{suffix}.csv"


def write_run(record: RunRecord, out_dir) -> dict:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{out}: {exc.strerror or exc}") from exc
    a, s = record.agent, record.seed
    paths = {
        "run": _write_csv(run_path(out, a, s), RUN_COLUMNS,
                          ([getattr(r, c) for c in RUN_COLUMNS] for r in record.rows)),
        "timing": _write_csv(run_path(out, a, s, "_timing"), ("episode", "wall_ms"),
                             ((r.episode, r.wall_ms) for r in record.rows)),
    }
    trans = []
    for phase, items in (("first", list(enumerate(record.first_errors, start=1))),
                         ("last", record.last_errors)):
        running = 0.0
        for i, (idx, err) in enumerate(items, start=1):
            running += err
            trans.append((phase, idx, err, running / i))
    paths["transitions"] = _write_csv(out / f"transitions_{a}_{s}.csv",
                                      ("phase", "update", "error", "running_mean"), trans)
    if record.consensus:
        m = max(len(rep.scores) for _, rep in record.consensus)
        rows = [(ep, rep.check_index, rep.consensus, int(rep.synced),
                 *(list(rep.scores) + [float("nan")] * (m - len(rep.scores))))
                for ep, rep in record.consensus]
        paths["consensus"] = _write_csv(out / f"consensus_{a}_{s}.csv",
                                        ("episode", "check", "consensus", "synced",
                                         *(f"score_{i}" for i in range(m))), rows)
    record.paths = {k: str(v) for k, v in paths.items()}
    return paths


def episodes_to_fraction(record: RunRecord, fraction: float = 0.9, window: int = RAMP_WINDOW):
    """First episode whose trailing-``window`` reward reaches ``fraction`` of the trailing oracle."""
    r = record.column("normalized_reward")
    o = record.column("oracle_reward")
    for i in range(window, len(r) + 1):
        rm = r[i - window:i].mean()
        om = o[i - window:i].mean()
        if om > 0 and rm >= fraction * om:
            return i
    return None


def summarize(record: RunRecord, checkpoints=()) -> dict:
    k = min(FINAL_WINDOW, len(record.rows))
    final = float(record.column("normalized_reward")[-k:].mean())
    oracle = float(record.column("oracle_reward")[-k:].mean())
    row = {
        "agent": record.agent,
        "seed": record.seed,
        "episodes": len(record.rows),
        "final_reward": final,
        "oracle_reward": oracle,
        "reward_ratio": final / oracle if oracle > 0 else float("nan"),
        "switch_cost": record.switch_cost,
        "episodes_to_90pct_oracle": episodes_to_fraction(record),
    }
    for c in checkpoints:
        row[f"switch_cost_at_{c}"] = (record.rows[c - 1].switch_count_cum
                                      if c <= len(record.rows) else None)
    return row


def _run_quiet(cfg):
    return run(cfg)


def compare(cfgs, checkpoints=(), out_dir=None, workers: int = 1, records=None) -> list[dict]:
    """Run every config and write ``compare.csv``; one row per config, in input order.

    ``checkpoints`` adds a ``switch_cost_at_<n>`` column per entry.
    """
    cfgs = list(cfgs)
    if not cfgs:
        raise ValueError("nothing to compare")
    shared = {(c.env, c.weather, c.seed) for c in cfgs}
    if len(shared) != 1:
        raise ValueError("compared configs must share env, weather and seed")
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            recs = list(ex.map(_run_quiet, cfgs))
    else:
        recs = [run(c) for c in cfgs]
    if records is not None:
        records.extend(recs)
    rows = [summarize(r, checkpoints) for r in recs]
    out = Path(out_dir if out_dir is not None else cfgs[0].output_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = list(COMPARE_COLUMNS) + [f"switch_cost_at_{c}" for c in checkpoints]
    _write_csv(out / "compare.csv", header, ([r[h] for h in header] for r in rows))
    return rows
