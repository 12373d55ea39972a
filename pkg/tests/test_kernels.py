import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from wingfuse import _fallback, kernels
from wingfuse.dsp import highpass_coefficients

try:
    from wingfuse import _kernels
except ImportError:  # extension not built in this environment
    _kernels = None

compiled = pytest.mark.skipif(_kernels is None, reason="compiled kernels not built")

signals = arrays(np.float64, st.integers(0, 400), elements=st.floats(-1e3, 1e3))
beams = arrays(np.float64, st.integers(0, 400), elements=st.floats(0, 1))


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")
    if _kernels is not None:
        assert kernels.BACKEND == "cython"


def test_pure_python_switch():
    env = dict(os.environ, WINGFUSE_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from wingfuse import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@compiled
@settings(max_examples=60, deadline=None)
@given(signals, st.integers(1, 3), st.floats(0.1, 1000))
def test_filter_backends_bitwise_equal(x, order, fc):
    coeffs = highpass_coefficients(fc, 4000.0, order)
    assert np.array_equal(_kernels.first_order_sections(x, coeffs), _fallback.first_order_sections(x, coeffs))


@compiled
@settings(max_examples=60, deadline=None)
@given(beams, st.floats(0.05, 0.95), st.integers(0, 50))
def test_crossing_backends_equal(b, thr, refr):
    assert np.array_equal(_kernels.falling_crossings(b, thr, refr), _fallback.falling_crossings(b, thr, refr))


@settings(max_examples=60, deadline=None)
@given(beams, st.floats(0.05, 0.95), st.integers(0, 50))
def test_crossings_match_oracle(b, thr, refr):
    assert kernels.falling_crossings(b, thr, refr).tolist() == oracles.falling_crossings(b.tolist(), thr, refr)


def test_filter_does_not_modify_input():
    x = np.arange(10.0)
    kernels.first_order_sections(x, highpass_coefficients(8.0, 100.0))
    assert np.array_equal(x, np.arange(10.0))


def test_filter_recursion_by_hand():
    b0, b1, a1 = 0.5, -0.5, -0.25
    y = kernels.first_order_sections([1.0, 0.0, 0.0], np.array([[b0, b1, a1]]))
    # y0 = 0.5; y1 = -0.5 + 0.25*0.5 = -0.375; y2 = 0.25*(-0.375)
    assert np.allclose(y, [0.5, -0.375, -0.09375], rtol=0, atol=0)
