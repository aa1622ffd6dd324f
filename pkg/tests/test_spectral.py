import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dcone.spectral import periodic_antiderivative, periodic_diff, periodic_interpolate, wavenumbers


def grid(n):
    return 2 * np.pi * np.arange(n) / n


@pytest.mark.parametrize("k", [1, 3, 7])
def test_derivatives_of_trig_modes_are_exact(k):
    t = grid(32)
    f = np.sin(k * t)
    assert np.allclose(periodic_diff(f, 1), k * np.cos(k * t), atol=1e-12)
    assert np.allclose(periodic_diff(f, 2), -(k**2) * f, atol=1e-11)
    assert np.allclose(periodic_diff(f, 3), -(k**3) * np.cos(k * t), atol=1e-10)


def test_odd_derivatives_drop_nyquist_mode():
    t = grid(16)
    nyq = np.cos(8 * t)
    assert np.allclose(periodic_diff(nyq, 1), 0.0, atol=1e-13)
    assert np.allclose(periodic_diff(nyq, 2), -64 * nyq, atol=1e-10)


def test_wavenumbers():
    assert np.array_equal(wavenumbers(8), [0, 1, 2, 3, 4])


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 24, elements=st.floats(-5, 5)), arrays(np.float64, 24, elements=st.floats(-5, 5)))
def test_first_derivative_is_skew_and_second_symmetric(u, v):
    assert np.isclose(u @ periodic_diff(v, 1), -(periodic_diff(u, 1) @ v), atol=1e-9)
    assert np.isclose(u @ periodic_diff(v, 2), periodic_diff(u, 2) @ v, atol=1e-8)


def test_antiderivative_inverts_derivative():
    t = grid(64)
    f = np.exp(np.sin(t))
    F = periodic_antiderivative(f - f.mean())
    assert abs(F.mean()) < 1e-14
    assert np.allclose(periodic_diff(F, 1), f - f.mean(), atol=1e-12)


def test_interpolation_reproduces_trig_polynomials_off_grid():
    t = grid(16)
    f = 1 + np.cos(2 * t) - 0.5 * np.sin(5 * t)
    s = np.array([0.1, 1.234, 4.0])
    exact = 1 + np.cos(2 * s) - 0.5 * np.sin(5 * s)
    assert np.allclose(periodic_interpolate(f, s), exact, atol=1e-12)
    assert np.allclose(periodic_interpolate(f, t), f, atol=1e-13)


def test_axis_argument():
    t = grid(32)
    f = np.stack([np.sin(t), np.cos(t)], axis=1)
    d = periodic_diff(f, 1, axis=0)
    assert np.allclose(d[:, 0], np.cos(t)) and np.allclose(d[:, 1], -np.sin(t))


def test_interpolate_along_inner_axis():
    n = 16
    th = 2 * np.pi * np.arange(n) / n
    vals = np.stack([np.cos(th), np.sin(2 * th)], axis=0)[:, :, None] * np.ones(3)
    t = np.linspace(0, 1, 5)
    out = periodic_interpolate(vals, t, axis=1)
    assert out.shape == (2, 5, 3)
    assert np.allclose(out[0, :, 0], np.cos(t)) and np.allclose(out[1, :, 2], np.sin(2 * t))
