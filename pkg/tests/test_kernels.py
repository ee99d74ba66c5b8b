import os
import subprocess
import sys

import numpy as np
import pytest

from chnsdbc import kernels


def _system(rng, batch=4, n=11, kl=2, ku=2):
    band = np.tri(n, n, ku) * np.tri(n, n, kl).T
    A = rng.normal(size=(batch, n, n)) * band + 8 * np.eye(n)
    return A, kernels.dense_to_band(A, kl, ku)


@pytest.mark.parametrize("backend", kernels.available_backends())
def test_banded_solve_matches_dense(backend):
    rng = np.random.default_rng(2)
    A, ab = _system(rng)
    rhs = rng.normal(size=(4, 11))
    x = kernels.BandedBatch(ab, 2, 2, backend=backend).solve(rhs)
    np.testing.assert_allclose(x, np.linalg.solve(A, rhs[..., None])[..., 0], rtol=1e-12, atol=1e-12)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.BandedBatch(np.zeros((1, 5, 3)), 2, 2, backend="fortran")


def test_env_var_forces_fallback():
    env = dict(os.environ, CHNSDBC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from chnsdbc import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
