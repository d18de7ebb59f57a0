"""Independent value-iteration oracle for the two-regime link chain.

Regime 0 is clear (FSO right), regime 1 is storm (RF right). Each slot the
regime flips with probability ``p``. An action taken in regime ``s`` is scored
against the regime of the *next* slot, as in the environment.
"""

import numpy as np

RIGHT = {0: 0, 1: 1}  # regime -> rewarded link


def regime_values(p, discount, tol=1e-14):
    """Q*(regime, action) by value iteration on the 2-state/2-action model."""
    trans = np.array([[1 - p, p], [p, 1 - p]])
    reward = np.array([[1.0 if RIGHT[s2] == a else -1.0 for s2 in (0, 1)] for a in (0, 1)])
    q = np.zeros((2, 2))
    while True:
        v = q.max(axis=1)
        new = np.array([[trans[s] @ (reward[a] + discount * v) for a in (0, 1)] for s in (0, 1)])
        if np.abs(new - q).max() < tol:
            return new
        q = new


def hand_solution(discount):
    """Closed form for the deterministic alternating chain (p = 1)."""
    v = 1.0 / (1.0 - discount)
    return {"right": v, "wrong": -1.0 + discount * v}


def observation_values(discount, tol=1e-14):
    """Q* over window_len = 1 observations for the alternating chain (p = 1).

    The observation (fso, rf) after a step reveals the regime that was just
    scored, so the next regime is its flip. The all-zero start observation
    belongs to regime 0, so its successor is regime 1.
    """
    obs = [(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]
    regime_of = {(0.0, 0.0): 0, (1.0, 0.0): 0, (-1.0, 0.0): 1, (0.0, 1.0): 1, (0.0, -1.0): 0}
    q = {o: np.zeros(2) for o in obs}
    while True:
        new = {}
        for o in obs:
            nxt = 1 - regime_of[o]
            vals = np.zeros(2)
            for a in (0, 1):
                r = 1.0 if RIGHT[nxt] == a else -1.0
                o2 = (r, 0.0) if a == 0 else (0.0, r)
                vals[a] = r + discount * q[o2].max()
            new[o] = vals
        if max(np.abs(new[o] - q[o]).max() for o in obs) < tol:
            return new
        q = new
