import importlib
import os
import subprocess
import sys

import numpy as np
import pytest

from dynreg import _backend, _fallback
from dynreg.haar import haar_matrix
from dynreg.learners import DenseOracleReducer, FastHaarReducer
from dynreg.reduction import run_reduction

from conftest import rel_err


def test_backend_names():
    assert _backend.get_backend("python") is _fallback
    assert _backend.BACKEND in ("compiled", "python")
    with pytest.raises(ValueError):
        _backend.get_backend("fortran")


def test_env_forces_python():
    code = "import dynreg; print(dynreg.BACKEND)"
    env = dict(os.environ, DYNREG_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("n", [0, 1, 3, 6])
def test_row_support(backend, n):
    k = _backend.get_backend(backend)
    H = haar_matrix(n)
    cols = np.empty(n + 1, dtype=np.int64)
    signs = np.empty(n + 1)
    for s in range(1 << n):
        assert k.row_support(s, n, cols, signs) == n + 1
        row = np.zeros(1 << n)
        row[cols] = signs
        assert np.array_equal(row, H[s])


def test_gather_scatter(backend, rng):
    k = _backend.get_backend(backend)
    n, d = 4, 3
    H = haar_matrix(n)
    theta = rng.normal(size=(16, d))
    out = np.empty(d)
    for s in range(16):
        k.gather(theta, s, n, out)
        assert np.allclose(out, H[s] @ theta, rtol=1e-13)
    g = rng.normal(size=d)
    expected = theta - np.outer(H[5], g)
    assert k.scatter(theta, 5, n, g) == n + 1
    assert np.allclose(theta, expected, rtol=1e-13)


@pytest.mark.parametrize("T,d", [(1, 1), (2, 2), (8, 2), (64, 3)])
def test_kernel_run_matches_oracle(backend, T, d):
    rng = np.random.default_rng(T * 10 + d)
    losses = rng.uniform(-1, 1, size=(T, d)) / np.sqrt(d)
    out = FastHaarReducer(T, d, backend=backend).run(losses)
    ref = run_reduction(DenseOracleReducer(haar_matrix(T.bit_length() - 1) @ haar_matrix(T.bit_length() - 1).T, d), losses)
    assert rel_err(out["plays"], ref.plays) <= 1e-9
    assert np.allclose(out["V"], ref.V, rtol=1e-12)


def test_backends_agree(rng):
    if "compiled" not in _backend.available():
        pytest.skip("compiled kernels not built")
    losses = rng.normal(size=(256, 4)) / 2
    a = _backend.get_backend("python").run_kt_haar(losses, 8, 1.0, 9.0)
    b = _backend.get_backend("compiled").run_kt_haar(losses, 8, 1.0, 9.0)
    for key in ("plays", "betas", "scalar_losses", "V", "dual_norm_sq", "wealth_1d", "theta"):
        assert np.allclose(a[key], b[key], rtol=1e-12, atol=1e-14), key
    assert a["clipped"] == b["clipped"]


def test_kernel_counts_clipping(backend):
    k = _backend.get_backend(backend)
    losses = np.ones((4, 1))
    out = k.run_kt_haar(losses, 2, 1.0, 1e-3)
    assert out["clipped"] > 0
    assert np.max(np.abs(out["scalar_losses"])) > 1e-3


def test_kernel_rejects_wrong_length(backend):
    with pytest.raises(ValueError):
        _backend.get_backend(backend).run_kt_haar(np.zeros((6, 1)), 3, 1.0, 1.0)
