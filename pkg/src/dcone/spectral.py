"""Fourier differentiation of periodic samples along one axis."""

import numpy as np


def wavenumbers(n):
    return np.fft.rfftfreq(n, d=1.0 / n)


def periodic_diff(values, order=1, axis=0):
    """Spectral derivative of equispaced periodic samples on [0, 2*pi).

    Odd orders drop the Nyquist mode so the operator stays real and
    antisymmetric; even orders keep it (symmetric). The transpose of the
    order-1 operator is therefore its negative, which the energy adjoint uses.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    if order == 0:
        return values.copy()
    k = wavenumbers(n)
    mult = (1j * k) ** order
    if order % 2 == 1 and n % 2 == 0:
        mult[-1] = 0.0
    shape = [1] * values.ndim
    shape[axis] = k.size
    spec = np.fft.rfft(values, axis=axis) * mult.reshape(shape)
    return np.fft.irfft(spec, n=n, axis=axis)


def periodic_antiderivative(values, axis=0):
    """Zero-mean periodic antiderivative; the mean of `values` is discarded."""
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    k = wavenumbers(n)
    inv = np.zeros(k.size, dtype=complex)
    inv[1:] = 1.0 / (1j * k[1:])
    if n % 2 == 0:
        inv[-1] = 0.0
    shape = [1] * values.ndim
    shape[axis] = k.size
    spec = np.fft.rfft(values, axis=axis) * inv.reshape(shape)
    return np.fft.irfft(spec, n=n, axis=axis)


def periodic_interpolate(values, theta, axis=0):
    """Evaluate the trigonometric interpolant of `values` at arbitrary angles."""
    values = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    n = values.shape[0]
    coef = np.fft.rfft(values, axis=0) / n
    k = wavenumbers(n)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phase = np.exp(1j * np.outer(theta, k))
    scale = np.full(k.size, 2.0)
    scale[0] = 1.0
    if n % 2 == 0:
        scale[-1] = 1.0
    out = np.real(np.tensordot(phase * scale, coef, axes=(1, 0)))
    return np.moveaxis(out, 0, axis)
