"""Online actor/critic: softmax policy network and state-value critic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fsorf.environment import LinkId, flatten
from fsorf.neural import MlpNetwork, MlpSpec, adam_step, log_softmax, sgd_step, softmax


@dataclass(frozen=True)
class ActorCriticParams:
    hidden_dims: tuple = (300, 200, 100)
    actor_lr: float = 0.01
    critic_lr: float = 1e-4
    discount: float = 0.9
    dtype: str = "float32"

    def validate(self) -> list[str]:
        errors = []
        if not 0 < self.actor_lr < 1:
            errors.append("actor_lr must lie in (0, 1)")
        if not self.critic_lr > 0:
            errors.append("critic_lr must be > 0")
        if not 0 < self.discount < 1:
            errors.append("discount must lie in (0, 1)")
        return errors


def td_error(reward, v_next, v_curr, discount):
    return reward + discount * v_next - v_curr


class ActorCriticAgent:
    """Online actor/critic.

    There is no separate deployed network, so a policy switch is counted as a
    slot-to-slot change of the greedy action inside an episode.
    """

    kind = "actor_critic"
    switch_scope = "episode"

    def __init__(self, obs_dim: int, params: ActorCriticParams | None = None, rng=None):
        self.params = params or ActorCriticParams()
        rng = rng if rng is not None else np.random.default_rng()
        p = self.params
        self.actor = MlpNetwork(MlpSpec(obs_dim, 2, p.hidden_dims, p.dtype), rng)
        self.critic = MlpNetwork(MlpSpec(obs_dim, 1, p.hidden_dims, p.dtype), rng)
        self.policy_switch_count = 0
        self.last_actor_loss = float("nan")
        self.greedy = None

    def policy(self, obs) -> np.ndarray:
        return softmax(self.actor.predict(flatten(obs)).astype(float))

    def act(self, obs, rng) -> LinkId:
        probs = self.policy(obs)
        greedy = int(probs[1] > probs[0])
        if self.greedy is not None and greedy != self.greedy:
            self.policy_switch_count += 1
        self.greedy = greedy
        return LinkId(int(rng.random() >= probs[0]))

    def value(self, obs) -> float:
        return float(self.critic.predict(flatten(obs))[0])

    def update(self, obs, action, reward, next_obs):
        """One online step on a single transition.

        Returns ``(critic_loss, actor_loss)`` where the critic loss is the
        squared TD error and the actor loss is ``-log pi(a|obs) * delta``.
        """
        p = self.params
        x = flatten(obs)
        v_next = float(self.critic.predict(flatten(next_obs))[0])
        v_out, _ = self.critic.forward(x)
        delta = td_error(float(reward), v_next, float(v_out[0]), p.discount)
        critic_loss = delta * delta
        # d(delta^2)/dV(obs) with the bootstrap target held fixed
        adam_step(self.critic, self.critic.backward(np.array([-2.0 * delta])), p.critic_lr)

        logits, _ = self.actor.forward(x)
        logits = logits.astype(float)
        a = int(action)
        actor_loss = -float(log_softmax(logits)[a]) * delta
        score = -softmax(logits)
        score[a] += 1.0
        # gradient ascent on log pi(a|obs) * delta == descent on actor_loss
        sgd_step(self.actor, self.actor.backward(-delta * score), p.actor_lr)
        self.last_actor_loss = actor_loss
        return critic_loss, actor_loss

    # harness protocol
    def begin_episode(self):
        self.greedy = None

    def policy_marker(self):
        return self.greedy

    def observe(self, obs, action, reward, next_obs):
        critic_loss, _ = self.update(obs, action, reward, next_obs)
        return critic_loss

    def end_episode(self):
        return None
