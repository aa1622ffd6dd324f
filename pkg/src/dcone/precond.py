"""Ring-by-mode preconditioner for the discrete energy.

The bending term is quadratic in y and, with Fourier derivatives in theta,
its Hessian is block diagonal over (component, angular mode): every block
is a banded matrix over the free rings. The membrane Hessian is replaced by
``beta`` times the discrete Dirichlet form, which gives a symmetric positive
definite model whose inverse is applied with one banded Cholesky solve per
angular mode.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft
from scipy.linalg import cho_solve_banded, cholesky_banded

from .energy import N_GAUSS
from .mesh import PolarMesh
from .spectral import wavenumbers

BANDS = 3


def _point_form(f, a, avg, r, w, h2, beta, k2, mixed):
    """Quadratic form of one quadrature point for angular mode k.

    ``k2`` is k^2 and ``mixed`` the weight of the mixed term: k^2, or 0 at
    the Nyquist mode.
    """
    ra, rv = a / r, avg / r**2
    # density rows: f, k (a/r - avg/r^2), a/r - k^2 avg/r^2, and beta (a, k avg/r)
    t = ra - rv
    v = ra - k2 * rv
    return w * (
        h2 * (np.outer(f, f) + 2.0 * mixed * np.outer(t, t) + np.outer(v, v))
        + beta * (np.outer(a, a) + k2 * np.outer(avg, avg) / r**2)
    )


def _mode_matrices(mesh: PolarMesh, h2, beta):
    """Matrices M0, M2t, M2, M4 with A_k = M0 + k^2 (M2t + M2) + k^4 M4.

    M2t holds the mixed-derivative term, which vanishes at the Nyquist mode.
    Points of the centre cell depend on k through the pole rows and are
    left to ``_pole_block``.
    """
    n = mesh.n_r
    rule = mesh.radial_rule(N_GAUSS)
    M0, M2t, M2, M4 = (np.zeros((n + 1, n + 1)) for _ in range(4))
    for q in range(N_GAUSS, rule.r.size):
        f, a, avg = (np.zeros(n + 1) for _ in range(3))
        np.add.at(f, rule.idx[q], rule.w2[q])
        np.add.at(a, rule.idx[q], rule.w1[q])
        np.add.at(avg, rule.idx[q], rule.w0[q])
        r = rule.r[q]
        w = 2.0 * rule.weight[q] * mesh.dtheta
        ra, rv = a / r, avg / r**2
        M0 += w * (h2 * (np.outer(f, f) + np.outer(ra, ra)) + beta * np.outer(a, a))
        t = ra - rv
        M2t += w * 2.0 * h2 * np.outer(t, t)
        M2 += w * (-h2 * (np.outer(ra, rv) + np.outer(rv, ra)) + beta * np.outer(avg, avg) / r**2)
        M4 += w * h2 * np.outer(rv, rv)
    return tuple(M[1:-1, 1:-1] for M in (M0, M2t, M2, M4))


def _pole_block(mesh: PolarMesh, h2, beta, i, k2, mixed):
    """Contribution of the centre cell to mode i on rings 1 and 2."""
    rule = mesh.radial_rule(N_GAUSS)
    B = np.zeros((3, 3))
    for q in range(N_GAUSS):
        avg, a, f = (rule.pole[i, :, 3 * q + o] for o in range(3))
        w = 2.0 * rule.weight[q] * mesh.dtheta
        B += _point_form(f, a, avg, rule.r[q], w, h2, beta, k2, mixed)
    return B[1:, 1:]


def _to_banded_upper(A, bands):
    n = A.shape[0]
    ab = np.zeros((bands + 1, n))
    for d in range(bands + 1):
        ab[bands - d, d:] = np.diagonal(A, d)
    return ab


class SpectralPreconditioner:
    """Approximate inverse Hessian acting on free-ring gradients."""

    def __init__(self, mesh: PolarMesh, h: float, beta: float = 2.0):
        self.mesh = mesh
        self.n_theta = mesh.n_theta
        self.n_rings = mesh.n_r - 1
        ks = wavenumbers(mesh.n_theta)
        nyq = mesh.n_theta % 2 == 0
        M0, M2t, M2, M4 = (_to_banded_upper(M, BANDS) for M in _mode_matrices(mesh, h * h, beta))
        self.factors = []
        for i, k in enumerate(ks):
            k2 = float(k) ** 2
            mixed = 0.0 if (nyq and i == ks.size - 1) else k2
            ab = M0 + mixed * M2t + k2 * M2 + k2 * k2 * M4
            P = _pole_block(mesh, h * h, beta, i, k2, mixed)
            ab[BANDS, :2] += np.diagonal(P)
            ab[BANDS - 1, 1] += P[0, 1]
            self.factors.append(cholesky_banded(ab, lower=False))

    def __call__(self, g):
        G = g.reshape(self.n_rings, self.n_theta, 3)
        spec = sfft.rfft(G, axis=1)
        out = np.empty_like(spec)
        for i, cb in enumerate(self.factors):
            rhs = spec[:, i, :]
            sol = cho_solve_banded((cb, False), np.concatenate([rhs.real, rhs.imag], axis=1))
            out[:, i, :] = sol[:, :3] + 1j * sol[:, 3:]
        return sfft.irfft(out, n=self.n_theta, axis=1).ravel()
