"""MyOpic baseline: Bayesian belief over link readiness, greedy selection."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from fsorf.environment import LinkId

TIE_TOL = 1e-12


@dataclass(frozen=True)
class Belief:
    """Probability that each link is ready, plus the known flip probability."""

    fso_ready: float = 0.5
    rf_ready: float = 0.5
    p: float = 0.5

    def __post_init__(self):
        for name in ("fso_ready", "rf_ready", "p"):
            x = getattr(self, name)
            if not 0.0 <= x <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {x}")

    @property
    def components(self) -> np.ndarray:
        """``[ready_FSO, switch_RF, ready_RF, switch_FSO]``."""
        return np.array([self.fso_ready, 1.0 - self.rf_ready, self.rf_ready, 1.0 - self.fso_ready])

    def ready(self, link) -> float:
        return self.fso_ready if int(link) == LinkId.FSO else self.rf_ready


def select(belief: Belief, previous=None) -> LinkId:
    """Link with the higher ready-probability; ties alternate away from ``previous``."""
    diff = belief.fso_ready - belief.rf_ready
    if diff > TIE_TOL:
        return LinkId.FSO
    if diff < -TIE_TOL:
        return LinkId.RF
    if previous is None:
        return LinkId.FSO
    return LinkId.RF if int(previous) == LinkId.FSO else LinkId.FSO


def propagate(ready: float, p: float) -> float:
    return ready * (1.0 - p) + (1.0 - ready) * p


def update(belief: Belief, selected, observed_reward) -> Belief:
    """Condition on the selected link's outcome, then push both links one slot forward."""
    if observed_reward not in (-1, 1):
        raise ValueError(f"observed_reward must be -1 or +1, got {observed_reward!r}")
    seen = 1.0 if observed_reward == 1 else 0.0
    if int(selected) == LinkId.FSO:
        belief = replace(belief, fso_ready=seen)
    else:
        belief = replace(belief, rf_ready=seen)
    p = belief.p
    return Belief(propagate(belief.fso_ready, p), propagate(belief.rf_ready, p), p)


class MyopicAgent:
    """Stateful wrapper used by the experiment harness.

    A policy switch is a slot-to-slot change of the selected link inside an
    episode.
    """

    kind = "myopic"
    switch_scope = "episode"

    def __init__(self, p: float = 0.5):
        self.p = p
        self.policy_switch_count = 0
        self.begin_episode()

    def begin_episode(self):
        self.belief = Belief(0.5, 0.5, self.p)
        self.previous = None

    def act(self, obs, rng=None) -> LinkId:
        a = select(self.belief, self.previous)
        if self.previous is not None and a != self.previous:
            self.policy_switch_count += 1
        self.previous = a
        return a

    def policy_marker(self):
        return None if self.previous is None else int(self.previous)

    def observe(self, obs, action, reward, next_obs):
        self.belief = update(self.belief, action, reward)
        return None

    def end_episode(self):
        return None
