import os
import subprocess
import sys

import numpy as np
import pytest

from mkot import _kernels as K

pytestmark = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")


def test_slice_min_paths_agree(rng):
    C = rng.standard_normal((7, 40))
    C[rng.random(C.shape) < 0.2] = np.inf
    P = rng.standard_normal(40)
    assert np.array_equal(K.slice_min_np(C, P), K.slice_min_nb(C, P))


def test_slice_min_all_forbidden_row():
    C = np.full((2, 3), np.inf)
    C[1, 1] = 0.5
    out = K.slice_min_nb(C, np.zeros(3))
    assert out[0] == np.inf and out[1] == 0.5


def test_slice_logsumexp_paths_agree(rng):
    C = rng.uniform(0, 5, (6, 50))
    C[rng.random(C.shape) < 0.3] = np.inf
    P = rng.standard_normal(50)
    lw = np.log(rng.uniform(0.1, 1, 50))
    for eps in (1.0, 0.01):
        a = K.slice_logsumexp_np(C, P, lw, eps)
        b = K.slice_logsumexp_nb(C, P, lw, eps)
        assert np.allclose(a, b, rtol=1e-13, atol=1e-12)


def test_slice_logsumexp_empty_row():
    C = np.full((1, 3), np.inf)
    lw = np.zeros(3)
    assert K.slice_logsumexp_nb(C, np.zeros(3), lw, 1.0)[0] == -np.inf
    assert K.slice_logsumexp_np(C, np.zeros(3), lw, 1.0)[0] == -np.inf


def test_first_negative_paths_agree(rng):
    N, n = 200, 3
    idx = rng.integers(0, 5, (N, n))
    offsets = np.array([0, 5, 10])
    y = rng.standard_normal(15)
    c = rng.standard_normal(N) + 2
    skip = rng.random(N) < 0.3
    for tol in (0.0, 0.5, 10.0):
        assert K.first_negative_np(c, idx, offsets, y, skip, tol) == \
            K.first_negative_nb(c, idx, offsets, y, skip, tol)


def test_coulomb_tensor_paths_agree(rng):
    sizes = np.array([3, 4, 2])
    pts = rng.standard_normal((3, 4, 2))
    pts[1, 2] = pts[0, 1]
    a = K.coulomb_tensor_np(pts, sizes)
    b = K.coulomb_tensor_nb(pts, sizes)
    assert np.allclose(a, b, rtol=1e-14)
    assert np.array_equal(np.isinf(a), np.isinf(b)) and np.isinf(a[1, 2, :]).all()


def test_env_flag_selects_numpy_path():
    code = "from mkot import _kernels as K; print(K.USE_NUMBA, K.slice_min is K.slice_min_np)"
    env = dict(os.environ, MK_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.split() == ["False", "True"]


def test_thread_count_does_not_change_results(rng):
    import numba
    C = rng.uniform(0, 3, (64, 500))
    P = rng.standard_normal(500)
    lw = np.full(500, -np.log(500))
    before = numba.get_num_threads()
    try:
        numba.set_num_threads(1)
        a = K.slice_logsumexp_nb(C, P, lw, 0.1)
        numba.set_num_threads(before)
        b = K.slice_logsumexp_nb(C, P, lw, 0.1)
    finally:
        numba.set_num_threads(before)
    assert np.array_equal(a, b)
