import os
import subprocess
import sys

import numpy as np
import pytest

from fsorf import _kernels as K

pytestmark = pytest.mark.skipif(not K.NUMBA_AVAILABLE, reason="numba not installed")


@pytest.mark.parametrize("dtype,tol", [(np.float64, 1e-12), (np.float32, 2e-6)])
def test_adam_paths_agree(dtype, tol):
    rng = np.random.default_rng(0)
    n = 1000
    p1 = rng.standard_normal(n).astype(dtype)
    p2 = p1.copy()
    m1, v1 = np.zeros(n, dtype), np.zeros(n, dtype)
    m2, v2 = np.zeros(n, dtype), np.zeros(n, dtype)
    for step in range(1, 30):
        g = rng.standard_normal(n).astype(dtype)
        K.adam_update_numpy(p1, g, m1, v1, 1e-3, 0.9, 0.999, 1e-8, step)
        K.adam_update_numba(p2, g, m2, v2, 1e-3, 0.9, 0.999, 1e-8, step)
    np.testing.assert_allclose(p1, p2, rtol=tol, atol=tol)
    np.testing.assert_allclose(m1, m2, rtol=tol, atol=tol)
    np.testing.assert_allclose(v1, v2, rtol=tol, atol=tol)


def test_adam_flushes_tiny_moments():
    for f in (K.adam_update_numpy, K.adam_update_numba):
        p = np.ones(4, np.float32)
        m = np.full(4, 1e-35, np.float32)
        v = np.full(4, 1e-35, np.float32)
        f(p, np.zeros(4, np.float32), m, v, 1e-3, 0.9, 0.999, 1e-8, 5)
        assert np.all(m == 0) and np.all(v == 0)
        assert np.all(p == 1)


def test_cosine_paths_agree_with_zero_rows():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((50, 7))
    b = rng.standard_normal((50, 7))
    a[3] = 0
    b[4] = 0
    a[5] = b[5] = 0
    b[6] = a[6] * 2.5
    c_np = K.cosine_rows_numpy(a, b)
    c_nb = K.cosine_rows_numba(a, b)
    np.testing.assert_allclose(c_np, c_nb, rtol=1e-12, atol=1e-15)
    assert c_np[3] == 0 and c_np[4] == 0 and c_np[5] == 1.0
    assert c_np[6] == pytest.approx(1.0, abs=1e-15)


def test_identical_rows_give_exactly_one():
    rng = np.random.default_rng(2)
    for _ in range(200):
        a = rng.standard_normal((3, 100)) * rng.uniform(1e-3, 1e3)
        assert np.all(K.cosine_rows_numpy(a, a.copy()) == 1.0)
        assert np.all(K.cosine_rows_numba(a, a.copy()) == 1.0)


def test_birth_death_paths_agree():
    rng = np.random.default_rng(3)
    u, w = rng.random(5000), rng.random(5000)
    for n_regimes in (1, 2, 3, 5):
        for p in (0.0, 0.1, 1.0):
            a = K.birth_death_path_numpy(0, n_regimes, p, u, w)
            b = K.birth_death_path_numba(0, n_regimes, p, u, w)
            np.testing.assert_array_equal(a, b)
            assert a.min() >= 0 and a.max() < n_regimes


def test_q_sweeps_paths_agree():
    rng = np.random.default_rng(4)
    s = rng.integers(0, 6, 300)
    a = rng.integers(0, 2, 300)
    r = rng.standard_normal(300)
    s2 = rng.integers(0, 6, 300)
    q1 = K.q_sweeps_numpy(np.zeros((6, 2)), s, a, r, s2, 0.2, 0.9, 20)
    q2 = K.q_sweeps_numba(np.zeros((6, 2)), s, a, r, s2, 0.2, 0.9, 20)
    np.testing.assert_allclose(q1, q2, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("0", "numba")])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, FSORF_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "import fsorf; print(fsorf.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
