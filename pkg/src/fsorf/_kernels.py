"""Hot inner loops, each with a numba ``@njit`` build and a pure-numpy twin.

The active implementation is chosen once at import time. Set the environment
variable ``FSORF_DISABLE_NUMBA=1`` to force the numpy path (useful for
debugging, coverage, or platforms without numba). Both paths are kept
numerically interchangeable; ``tests/test_kernels.py`` checks that.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("FSORF_DISABLE_NUMBA", "0").lower() not in ("1", "true", "yes")


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def flush_threshold(dtype) -> float:
    """Moments below this magnitude are zeroed so they never decay into denormals."""
    return 1e-30 if np.dtype(dtype) == np.float32 else 1e-300


def adam_update_numpy(params, grads, m, v, lr, beta1, beta2, eps, step):
    """In-place Adam update of flat arrays; ``step`` is 1-based."""
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    tiny = flush_threshold(params.dtype)
    m *= beta1
    m += (1.0 - beta1) * grads
    m *= np.abs(m) > tiny
    v *= beta2
    v += (1.0 - beta2) * grads * grads
    v *= v > tiny
    denom = np.sqrt(v / c2)
    denom += eps
    params -= (lr / c1) * m / denom


def cosine_rows_numpy(a, b):
    """Row-wise cosine similarity with the zero-vector conventions.

    Both rows zero -> 1.0, exactly one zero -> 0.0.
    """
    dot = np.einsum("ij,ij->i", a, b)
    na2 = np.einsum("ij,ij->i", a, a)
    nb2 = np.einsum("ij,ij->i", b, b)
    out = np.zeros(a.shape[0])
    both = (na2 > 0) & (nb2 > 0)
    # sqrt(|a|^2 |b|^2) rather than |a| |b|: identical rows then give exactly 1.0
    out[both] = dot[both] / np.sqrt(na2[both] * nb2[both])
    out[(na2 == 0) & (nb2 == 0)] = 1.0
    return np.clip(out, -1.0, 1.0)


def birth_death_path_numpy(start, n_regimes, p_move, u_move, u_dir):
    """Regime index after each step of the clamped birth-death chain.

    Step ``t`` moves iff ``u_move[t] < p_move``. Interior regimes go down when
    ``u_dir[t] < 0.5``; end regimes move to their only neighbour.
    """
    n = u_move.shape[0]
    path = np.empty(n, dtype=np.int64)
    r = int(start)
    for t in range(n):
        if n_regimes > 1 and u_move[t] < p_move:
            if r == 0:
                r = 1
            elif r == n_regimes - 1:
                r -= 1
            elif u_dir[t] < 0.5:
                r -= 1
            else:
                r += 1
        path[t] = r
    return path


def q_sweeps_numpy(q, s, a, r, s_next, alpha, discount, n_sweeps):
    """Apply the tabular Q-learning update over a transition list ``n_sweeps`` times."""
    for _ in range(n_sweeps):
        for i in range(s.shape[0]):
            target = r[i] + discount * q[s_next[i]].max()
            q[s[i], a[i]] += alpha * (target - q[s[i], a[i]])
    return q


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if NUMBA_AVAILABLE:

    # error_model="numpy" drops the ZeroDivisionError branch so LLVM can vectorise
    @numba.njit(cache=True, fastmath=True, error_model="numpy")
    def _adam_loop(params, grads, m, v, scale, beta1, beta2, one_m_b1, one_m_b2, eps, inv_c2, tiny):
        for i in range(params.shape[0]):
            g = grads[i]
            mi = beta1 * m[i] + one_m_b1 * g
            vi = beta2 * v[i] + one_m_b2 * g * g
            # multiply by the mask instead of branching so the loop still vectorises
            mi = mi * (abs(mi) > tiny)
            vi = vi * (vi > tiny)
            m[i] = mi
            v[i] = vi
            params[i] -= scale * mi / (np.sqrt(vi * inv_c2) + eps)

    def adam_update_numba(params, grads, m, v, lr, beta1, beta2, eps, step):
        c1 = 1.0 - beta1**step
        c2 = 1.0 - beta2**step
        # scalars must share the array dtype or numba upcasts every element
        t = params.dtype.type
        _adam_loop(params, grads, m, v, t(lr / c1), t(beta1), t(beta2), t(1.0 - beta1), t(1.0 - beta2),
                   t(eps), t(1.0 / c2), t(flush_threshold(params.dtype)))

    @numba.njit(cache=True)
    def cosine_rows_numba(a, b):
        n, d = a.shape
        out = np.zeros(n)
        for i in range(n):
            dot = 0.0
            na = 0.0
            nb = 0.0
            for j in range(d):
                dot += a[i, j] * b[i, j]
                na += a[i, j] * a[i, j]
                nb += b[i, j] * b[i, j]
            if na > 0.0 and nb > 0.0:
                c = dot / np.sqrt(na * nb)
                out[i] = min(1.0, max(-1.0, c))
            elif na == 0.0 and nb == 0.0:
                out[i] = 1.0
        return out

    @numba.njit(cache=True)
    def birth_death_path_numba(start, n_regimes, p_move, u_move, u_dir):
        n = u_move.shape[0]
        path = np.empty(n, dtype=np.int64)
        r = start
        for t in range(n):
            if n_regimes > 1 and u_move[t] < p_move:
                if r == 0:
                    r = 1
                elif r == n_regimes - 1:
                    r -= 1
                elif u_dir[t] < 0.5:
                    r -= 1
                else:
                    r += 1
            path[t] = r
        return path

    @numba.njit(cache=True)
    def q_sweeps_numba(q, s, a, r, s_next, alpha, discount, n_sweeps):
        for _ in range(n_sweeps):
            for i in range(s.shape[0]):
                best = q[s_next[i], 0]
                for j in range(1, q.shape[1]):
                    if q[s_next[i], j] > best:
                        best = q[s_next[i], j]
                target = r[i] + discount * best
                q[s[i], a[i]] += alpha * (target - q[s[i], a[i]])
        return q

else:  # pragma: no cover
    adam_update_numba = adam_update_numpy
    cosine_rows_numba = cosine_rows_numpy
    birth_death_path_numba = birth_death_path_numpy
    q_sweeps_numba = q_sweeps_numpy


if USE_NUMBA:
    adam_update = adam_update_numba
    cosine_rows = cosine_rows_numba
    birth_death_path = birth_death_path_numba
    q_sweeps = q_sweeps_numba
else:
    adam_update = adam_update_numpy
    cosine_rows = cosine_rows_numpy
    birth_death_path = birth_death_path_numpy
    q_sweeps = q_sweeps_numpy


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
