"""The 1-homogeneous cone y(x) = |x| gamma(x/|x|) and its bending constant."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curve import BoundaryCurve
from .errors import ConfigError, NumericalError
from .spectral import periodic_interpolate

C1_AGREEMENT = 1e-8


@dataclass(frozen=True)
class ConeEvaluation:
    r: float
    theta: float
    value: np.ndarray
    gradient: np.ndarray  # 3x2, Cartesian columns d/dx1, d/dx2
    frame_gradient: np.ndarray  # 3x2, columns d/dr and (1/r) d/dtheta
    hessian_norm_sq: float


def _curve_at(c: BoundaryCurve, theta):
    theta = np.atleast_1d(theta)
    on_grid = np.isclose(np.mod(theta * c.n / (2 * np.pi), 1.0), 0.0, atol=1e-12) | np.isclose(
        np.mod(theta * c.n / (2 * np.pi), 1.0), 1.0, atol=1e-12
    )
    if np.all(on_grid):
        idx = np.rint(theta * c.n / (2 * np.pi)).astype(int) % c.n
        return c.gamma[idx], c.dgamma[idx], c.d2gamma[idx]
    return (
        periodic_interpolate(c.gamma, theta),
        periodic_interpolate(c.dgamma, theta),
        periodic_interpolate(c.d2gamma, theta),
    )


def evaluate_cone(c: BoundaryCurve, r, theta) -> ConeEvaluation:
    if r <= 0:
        raise ConfigError("the cone tip r = 0 is singular")
    g, dg, d2g = (a[0] for a in _curve_at(c, theta))
    n_hat = np.array([np.cos(theta), np.sin(theta)])
    t_hat = np.array([-np.sin(theta), np.cos(theta)])
    grad = np.outer(g, n_hat) + np.outer(dg, t_hat)
    return ConeEvaluation(
        r=float(r),
        theta=float(theta),
        value=r * g,
        gradient=grad,
        frame_gradient=np.stack([g, dg], axis=1),
        hessian_norm_sq=float(np.sum((g + d2g) ** 2) / r**2),
    )


def angular_c1(c: BoundaryCurve) -> float:
    """C1 through the reduced integral of |gamma + gamma''|^2 over the circle."""
    density = np.sum((c.gamma + c.d2gamma) ** 2, axis=1)
    return float(2 * np.pi * density.mean())


# eighth-order central weights for a second derivative
_FD2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])
_FD_STEP = 2e-3


def _cone_xy(c: BoundaryCurve, x1, x2):
    """y(x) = |x| gamma(atan2(x2, x1)) from the trigonometric interpolant of the samples."""
    r = np.hypot(x1, x2)
    theta = np.mod(np.arctan2(x2, x1), 2 * np.pi)
    return r[:, None] * periodic_interpolate(c.gamma, theta)


def annulus_bending_2d(c: BoundaryCurve, a, b, n_radial=12, n_angular=None):
    """Integral of |Hess y|^2 over the annulus a < |x| < b by tensor quadrature.

    The Cartesian Hessian is taken by eighth-order central differences of
    y(x1, x2) along e1, e2 and the diagonal, using only the gamma samples;
    no curve derivative enters. Radii are composite Gauss-Legendre, angles
    the half-offset trapezoid rule.
    """
    if not 0 < a < b:
        raise ConfigError("need 0 < a < b")
    if n_angular is None:
        n_angular = max(128, min(c.n, 256))
    # composite Gauss-Legendre on pieces with outer/inner ratio <= 2
    n_pieces = max(1, int(np.ceil(np.log2(b / a) - 1e-12)))
    edges = a * (b / a) ** (np.arange(n_pieces + 1) / n_pieces)
    nodes, weights = np.polynomial.legendre.leggauss(n_radial)
    lo, hi = edges[:-1, None], edges[1:, None]
    radii = (0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)).ravel()
    ws = (0.5 * (hi - lo) * weights).ravel()
    theta = 2 * np.pi * (np.arange(n_angular) + 0.5) / n_angular
    offsets = np.arange(-4, 5)
    dirs = np.array([[1.0, 0.0], [0.0, 1.0], [np.sqrt(0.5), np.sqrt(0.5)]])
    total = 0.0
    for r, w in zip(radii, ws):
        # the stencil scales with r so the relative resolution is uniform
        step = _FD_STEP * r
        x0 = r * np.cos(theta)
        x1 = r * np.sin(theta)
        dd = []
        for d in dirs:
            px = (x0[:, None] + step * offsets[None, :] * d[0]).ravel()
            py = (x1[:, None] + step * offsets[None, :] * d[1]).ravel()
            vals = _cone_xy(c, px, py).reshape(n_angular, offsets.size, 3)
            dd.append(np.einsum("s,qsc->qc", _FD2, vals) / step**2)
        h11, h22, hdiag = dd
        h12 = hdiag - 0.5 * (h11 + h22)
        dens = np.sum(h11**2 + h22**2 + 2 * h12**2, axis=1)
        total += w * r * dens.mean() * 2 * np.pi
    return float(total)


def c1_report(c: BoundaryCurve) -> dict:
    angular = angular_c1(c)
    quad = float(annulus_bending_2d(c, 0.5, 1.0) / np.log(2.0))
    scale = max(abs(angular), abs(quad))
    gap = abs(angular - quad) / scale if scale > 1e-12 else abs(angular - quad)
    return {"c1": angular, "c1_2d_quadrature": quad, "relative_gap": float(gap)}


def c1_constant(c: BoundaryCurve) -> float:
    rep = c1_report(c)
    if rep["relative_gap"] > C1_AGREEMENT:
        raise NumericalError(
            f"C1 routes disagree: angular {rep['c1']!r} vs 2-D {rep['c1_2d_quadrature']!r}"
        )
    return rep["c1"]
