import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracpont import _kernels_py, kernels
from fracpont.ops import product_trap_weights

try:
    from fracpont import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def naive(c, a0, g):
    n1 = len(g)
    out = np.zeros_like(g)
    for i in range(1, n1):
        out[i] = a0[i] * g[0] + sum(c[i - j] * g[j] for j in range(1, i + 1))
    return out


@pytest.mark.parametrize("impl", [_kernels_py.lower_apply] + ([compiled.lower_apply] if compiled else []))
def test_matches_definition(impl):
    c, a0, _ = product_trap_weights(40, 0.37)
    g = np.random.default_rng(0).normal(size=(41, 3))
    assert np.allclose(impl(c, a0, g), naive(c, a0, g), rtol=1e-13, atol=1e-13)


@needs_compiled
@given(st.integers(1, 300), st.integers(1, 3), st.floats(0.05, 3.0))
def test_backends_agree(n, dim, alpha):
    c, a0, _ = product_trap_weights(n, alpha)
    g = np.random.default_rng(n).normal(size=(n + 1, dim))
    ref = _kernels_py.lower_apply(c, a0, g)
    got = compiled.lower_apply(c, a0, g)
    assert np.allclose(got, ref, rtol=1e-12, atol=1e-12 * np.max(np.abs(ref)))


@needs_compiled
def test_compiled_accepts_read_only_input():
    c, a0, _ = product_trap_weights(16, 0.5)
    g = np.ones((17, 2))
    g.flags.writeable = False
    assert compiled.lower_apply(c, a0, g).shape == (17, 2)


@pytest.mark.parametrize("impl", [_kernels_py.lower_apply] + ([compiled.lower_apply] if compiled else []))
def test_short_weights_rejected(impl):
    c, a0, _ = product_trap_weights(8, 0.5)
    with pytest.raises(ValueError):
        impl(c, a0, np.ones((20, 1)))


def test_backend_reported():
    assert kernels.BACKEND == ("compiled" if compiled is not None else "python")


def test_environment_forces_fallback():
    env = dict(os.environ, FRACPONT_PURE_PYTHON="1")
    code = "from fracpont import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
