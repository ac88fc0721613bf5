from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qvlab import _backend, _fallback

_kernels = pytest.importorskip("qvlab._kernels")

finite = st.floats(-5, 5, allow_nan=False)


def test_compiled_backend_selected():
    assert _backend.BACKEND == "cython"


def test_env_forces_fallback():
    env = dict(os.environ, QVLAB_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "import qvlab; print(qvlab.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"


@settings(max_examples=40, deadline=None)
@given(values=arrays(float, st.integers(1, 60), elements=finite),
       dt=st.floats(1e-4, 0.5), count=st.integers(1, 400))
def test_char_function_equivalent(values, dt, count):
    w = np.linspace(1, 2, values.size)
    a = _fallback.char_function(values, w, dt, count)
    b = _kernels.char_function(np.ascontiguousarray(values), w, dt, count)
    assert np.max(np.abs(a - b)) < 1e-11 * w.sum()


@settings(max_examples=60, deadline=None)
@given(y=arrays(float, st.integers(1, 200), elements=finite))
def test_isotonic_equivalent(y):
    w = np.ones_like(y) + np.abs(np.sin(np.arange(y.size)))
    a = _fallback.isotonic_increasing(y, w)
    b = _kernels.isotonic_increasing(np.ascontiguousarray(y), w)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)
    assert np.all(np.diff(b) >= -1e-12)
    # weighted means are preserved by pooling
    assert np.dot(w, b) == pytest.approx(np.dot(w, y), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(reps=st.integers(1, 20), n=st.integers(1, 300), u_star=st.floats(-1.0, -0.5),
       seed=st.integers(0, 1000))
def test_election_sums_equivalent(reps, n, u_star, seed, uniform):
    rng = np.random.default_rng(seed)
    draws = rng.random((reps, n))
    gu = np.linspace(-1, 1, 101)
    gv = 0.2 * gu
    a = _fallback.election_sums(draws, uniform.ppf_table, gu, gv, u_star, -1.3)
    b = _kernels.election_sums(draws, uniform.ppf_table, gu, gv, u_star, -1.3)
    assert np.allclose(a[0], b[0], atol=1e-11)
    assert np.allclose(a[1], b[1], atol=1e-11)
    assert np.array_equal(a[2], b[2])
