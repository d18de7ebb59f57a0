"""Compare the numba and numpy paths of every hot kernel.

    python benchmarks/bench_kernels.py [--repeat N]

Both paths are imported from the same module, so one process measures both.
The last line times a whole DQN learn step with each Adam kernel.
"""

import argparse
import timeit

import numpy as np

from fsorf import _kernels as K
from fsorf.dqn import DqnAgent, DqnParams
from fsorf import neural


def _adam_case(dtype, n):
    rng = np.random.default_rng(0)
    p = rng.standard_normal(n).astype(dtype)
    g = rng.standard_normal(n).astype(dtype)
    m = np.zeros(n, dtype)
    v = np.zeros(n, dtype)
    return lambda f: f(p, g, m, v, 1e-4, 0.9, 0.999, 1e-8, 10)


def cases():
    rng = np.random.default_rng(1)
    n_dqn = neural.MlpSpec(32, 2).n_params
    a = rng.standard_normal((32, 100))
    b = rng.standard_normal((32, 100))
    u = rng.random(200_000)
    w = rng.random(200_000)
    q = np.zeros((64, 2))
    s = rng.integers(0, 64, 5000)
    act = rng.integers(0, 2, 5000)
    r = rng.standard_normal(5000)
    s2 = rng.integers(0, 64, 5000)
    return [
        (f"adam float32 n={n_dqn}", _adam_case(np.float32, n_dqn), "adam_update"),
        (f"adam float64 n={n_dqn}", _adam_case(np.float64, n_dqn), "adam_update"),
        ("cosine 32x100", lambda f: f(a, b), "cosine_rows"),
        ("birth-death path 2e5", lambda f: f(0, 3, 0.02, u, w), "birth_death_path"),
        ("q sweeps 5000x10", lambda f: f(q.copy(), s, act, r, s2, 0.1, 0.9, 10), "q_sweeps"),
    ]


def best_of(fn, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def learn_step_time(adam_impl, repeat):
    agent = DqnAgent(32, DqnParams(), np.random.default_rng(0))
    rng = np.random.default_rng(2)
    for _ in range(2000):
        s = rng.integers(-1, 2, 32)
        agent.remember(s, int(rng.integers(2)), 1.0, s)
    saved = K.adam_update
    K.adam_update = adam_impl
    try:
        return best_of(agent.learn_step, repeat)
    finally:
        K.adam_update = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not K.NUMBA_AVAILABLE:
        print("numba not installed; nothing to compare")
        return
    print(f"{'kernel':<28}{'numpy us':>12}{'numba us':>12}{'speedup':>10}")
    for name, call, attr in cases():
        f_np = getattr(K, attr + "_numpy")
        f_nb = getattr(K, attr + "_numba")
        call(f_nb)  # compile outside the timed region
        t_np = best_of(lambda: call(f_np), args.repeat)
        t_nb = best_of(lambda: call(f_nb), args.repeat)
        print(f"{name:<28}{t_np * 1e6:>12.1f}{t_nb * 1e6:>12.1f}{t_np / t_nb:>10.1f}x")
    t_np = learn_step_time(K.adam_update_numpy, args.repeat)
    t_nb = learn_step_time(K.adam_update_numba, args.repeat)
    print(f"{'dqn learn step (f32)':<28}{t_np * 1e6:>12.1f}{t_nb * 1e6:>12.1f}{t_np / t_nb:>10.1f}x")


if __name__ == "__main__":
    main()
