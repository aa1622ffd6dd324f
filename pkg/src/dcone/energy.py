"""Discrete thin-sheet energy on a polar mesh.

The energy of a map y of the unit disk is

    E_h(y) = int |grad(y)^T grad(y) - Id|^2 + h^2 |Hess(y)|^2 dx.

Both densities are evaluated at two Gauss points of each radial cell in
the orthonormal polar frame (e_r, e_theta):

    metric    g = [[y_r.y_r, y_r.y_t/r], [., y_t.y_t/r^2]]
    Hessian   H_rr = y_rr, H_rt = y_rt/r - y_t/r^2, H_tt = y_tt/r^2 + y_r/r

Angular derivatives are Fourier-spectral per ring; radial values and
derivatives come from a cubic through four rings, except in the centre
cell, which is rebuilt mode by mode so the field stays smooth at r = 0.
The gradient is the exact adjoint of this discrete energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import kernels
from .curve import BoundaryCurve
from .errors import ConfigError
from .mesh import PolarMesh
from .spectral import wavenumbers

N_GAUSS = 2


def choice_m(h):
    """Dyadic cutoff M = ceil(log2(1/h) - log2(ln(1/h)))."""
    lh = math.log(1.0 / h)
    return max(1, math.ceil(math.log2(1.0 / h) - math.log2(lh) - 1e-12))


# -- fields ---------------------------------------------------------------


@dataclass(eq=False)
class Field:
    mesh: PolarMesh
    values: np.ndarray  # (n_nodes, 3)
    curve: BoundaryCurve | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_nodes, 3):
            raise ConfigError(f"field shape {self.values.shape} does not match mesh")
        if self.curve is not None and self.curve.n != self.mesh.n_theta:
            self.curve = matched_curve(self.curve, self.mesh)

    @property
    def boundary(self):
        return self.mesh.constrained

    def grid(self):
        m = self.mesh
        out = np.empty((m.n_r + 1, m.n_theta, 3))
        out[0] = self.values[0]
        out[1:] = self.values[1:].reshape(m.n_r, m.n_theta, 3)
        return out

    @classmethod
    def from_grid(cls, mesh, grid, curve=None):
        vals = np.concatenate([grid[0, :1], grid[1:].reshape(-1, 3)])
        return cls(mesh, vals, curve)

    def copy(self):
        return Field(self.mesh, self.values.copy(), self.curve)

    def with_values(self, values):
        return Field(self.mesh, values, self.curve)

    def constraint_violation(self):
        m = self.mesh
        out = float(np.max(np.abs(self.values[0])))
        if self.curve is not None:
            out = max(out, float(np.max(np.abs(self.values[m.boundary_nodes] - self.curve.gamma))))
        return out


def matched_curve(curve: BoundaryCurve, mesh: PolarMesh) -> BoundaryCurve:
    if curve.n == mesh.n_theta:
        return curve
    if curve.n % mesh.n_theta:
        raise ConfigError(
            f"mesh n_theta={mesh.n_theta} must equal or divide the curve resolution {curve.n}"
        )
    return curve.resample(mesh.n_theta)


def cone_field(c: BoundaryCurve, m: PolarMesh) -> Field:
    """Nodal samples of the exact cone r * gamma(theta), zero at the centre."""
    c = matched_curve(c, m)
    grid = np.zeros((m.n_r + 1, m.n_theta, 3))
    grid[1:] = m.radii[1:, None, None] * c.gamma[None]
    return Field.from_grid(m, grid, c)


def profile_shape(t):
    """C^2 blend: 0 for t <= 1/2, t for t >= 1, quintic in between."""
    t = np.asarray(t, dtype=float)
    s = np.clip(2.0 * t - 1.0, 0.0, 1.0)
    # quintic in s with phi(0)=phi'(0)=phi''(0)=0, phi(1)=1, dphi/dt(1)=1, phi''(1)=0
    blend = s**3 * (_Q[0] + _Q[1] * s + _Q[2] * s**2)
    return np.where(t >= 1.0, t, np.where(t <= 0.5, 0.0, blend))


def _quintic_coefficients():
    # p(s) = s^3 (c0 + c1 s + c2 s^2); t = (1 + s)/2 so d/dt = 2 d/ds
    # p(1) = 1, p'(1) = 1/2, p''(1) = 0
    A = np.array([[1.0, 1.0, 1.0], [3.0, 4.0, 5.0], [6.0, 12.0, 20.0]])
    return np.linalg.solve(A, np.array([1.0, 0.5, 0.0]))


_Q = _quintic_coefficients()


def upper_bound_profile(c: BoundaryCurve, h: float, m: PolarMesh) -> Field:
    """Competitor h * phi(|x|/h) * gamma(x/|x|): equal to the cone outside B_h, zero in B_{h/2}."""
    if not 0 < h < 0.25:
        raise ConfigError("h must lie in (0, 1/4)")
    if np.count_nonzero((m.radii > 0) & (m.radii <= 0.5 * h * (1 + 1e-12))) < 1:
        raise ConfigError("mesh cannot resolve B_{h/2}")
    c = matched_curve(c, m)
    radial = h * profile_shape(m.radii / h)
    radial[m.radii >= h] = m.radii[m.radii >= h]
    grid = radial[:, None, None] * c.gamma[None]
    grid[0] = 0.0
    return Field.from_grid(m, grid, c)


# -- energy ---------------------------------------------------------------


@dataclass
class EnergyBreakdown:
    h: float
    membrane: float
    bending: float
    cell_membrane: np.ndarray = field(repr=False)
    cell_bending: np.ndarray = field(repr=False)
    cell_annulus: np.ndarray = field(repr=False)
    cell_mid: np.ndarray = field(repr=False)
    m_cut: int = 0

    @property
    def total(self):
        return self.membrane + self.h**2 * self.bending

    @property
    def per_annulus(self):
        """[(j, membrane_j, bending_j)] for the dyadic annuli j = 0..M-1."""
        out = []
        for j in range(self.m_cut):
            sel = self.cell_annulus == j
            out.append((j, float(self.cell_membrane[sel].sum()), float(self.cell_bending[sel].sum())))
        return out

    @property
    def core(self):
        sel = self.cell_annulus >= self.m_cut
        return float(self.cell_membrane[sel].sum()), float(self.cell_bending[sel].sum())

    def region(self, lo, hi):
        """(membrane, bending) over cells with lo < r_mid <= hi."""
        sel = (self.cell_mid > lo) & (self.cell_mid <= hi)
        return float(self.cell_membrane[sel].sum()), float(self.cell_bending[sel].sum())

    def to_dict(self):
        return {
            "h": self.h,
            "membrane": self.membrane,
            "bending": self.bending,
            "total": self.total,
            "M": self.m_cut,
            "per_annulus": [
                {"j": j, "membrane": mj, "bending": bj} for j, mj, bj in self.per_annulus
            ],
            "core": dict(zip(("membrane", "bending"), self.core)),
        }


class EnergyModel:
    """Discrete E_h on a fixed mesh; free variables are the interior rings."""

    def __init__(self, mesh: PolarMesh, h: float, kernel=None):
        self.mesh = mesh
        self.h = float(h)
        self.h2 = self.h**2
        self.kernel = kernel or kernels.point_energy
        k = wavenumbers(mesh.n_theta)
        self._d1 = 1j * k
        if mesh.n_theta % 2 == 0:
            self._d1[-1] = 0.0
        self._d2 = -(k**2)
        self._d1c = self._d1[None, :, None]
        self._d2c = self._d2[None, :, None]
        rule = mesh.radial_rule(N_GAUSS)
        self._rule = rule
        self._rq = np.ascontiguousarray(rule.r)
        self._area = np.ascontiguousarray(rule.weight * mesh.dtheta)
        self._idx = np.ascontiguousarray(rule.idx, dtype=np.int64)
        self._w = tuple(np.ascontiguousarray(w) for w in (rule.w0, rule.w1, rule.w2))
        self.n_eval = 0

    # grid layout helpers
    @property
    def n_free(self):
        m = self.mesh
        return (m.n_r - 1) * m.n_theta * 3

    def free_of(self, y: Field):
        return y.grid()[1:-1].ravel().copy()

    def grid_with(self, y: Field, x):
        g = y.grid()
        g[1:-1] = x.reshape(g[1:-1].shape)
        return g

    def _angular(self, Y):
        n = self.mesh.n_theta
        spec = sfft.rfft(Y[1:], axis=1)
        P = np.empty_like(Y)
        Q = np.empty_like(Y)
        P[0] = 0.0
        Q[0] = 0.0
        P[1:] = sfft.irfft(spec * self._d1c, n=n, axis=1)
        Q[1:] = sfft.irfft(spec * self._d2c, n=n, axis=1)
        return P, Q

    def _angular_adjoint(self, GP, GQ):
        n = self.mesh.n_theta
        # transpose of D1 is -D1, D2 is symmetric
        spec = sfft.rfft(GQ[1:], axis=1) * self._d2c - sfft.rfft(GP[1:], axis=1) * self._d1c
        out = np.empty_like(GP)
        out[0] = 0.0
        out[1:] = sfft.irfft(spec, n=n, axis=1)
        return out

    def evaluate_grid(self, Y, want_grad=True):
        """Return (cell_membrane, cell_bending, grid gradient or None)."""
        Y = self._rule.extend(np.asarray(Y, dtype=float))
        P, Q = self._angular(Y)
        n_pts = self._rq.size
        mem = np.empty(n_pts)
        bend = np.empty(n_pts)
        grads = None
        if want_grad:
            grads = (np.zeros_like(Y), np.zeros_like(Y), np.zeros_like(Y))
        self.kernel(Y, P, Q, self._rq, self._area, self._idx, *self._w, self.h2, mem, bend, grads)
        mem = mem.reshape(-1, N_GAUSS).sum(axis=1)
        bend = bend.reshape(-1, N_GAUSS).sum(axis=1)
        self.n_eval += 1
        if not want_grad:
            return mem, bend, None
        GY, GP, GQ = grads
        G = self._rule.fold(GY + self._angular_adjoint(GP, GQ))
        return mem, bend, G

    def breakdown(self, y: Field) -> EnergyBreakdown:
        mem, bend, _ = self.evaluate_grid(y.grid(), want_grad=False)
        return self._breakdown(mem, bend)

    def _breakdown(self, mem, bend):
        return EnergyBreakdown(
            h=self.h,
            membrane=float(mem.sum()),
            bending=float(bend.sum()),
            cell_membrane=mem,
            cell_bending=bend,
            cell_annulus=self.mesh.cell_annulus,
            cell_mid=self.mesh.cell_mid,
            m_cut=choice_m(self.h),
        )

    def total(self, Y):
        mem, bend, _ = self.evaluate_grid(Y, want_grad=False)
        return float(mem.sum() + self.h2 * bend.sum())

    def node_gradient(self, y: Field):
        """Gradient with respect to every nodal value, constrained nodes zeroed."""
        _, _, G = self.evaluate_grid(y.grid())
        m = self.mesh
        out = np.zeros((m.n_nodes, 3))
        out[1:] = G[1:].reshape(-1, 3)
        out[m.constrained] = 0.0
        return out

    # flat-vector interface for the optimizer
    def fun_and_grad(self, x, template: Field):
        Y = self.grid_with(template, x)
        mem, bend, G = self.evaluate_grid(Y)
        return float(mem.sum() + self.h2 * bend.sum()), G[1:-1].ravel()

    def fun(self, x, template: Field):
        return self.total(self.grid_with(template, x))


def assemble_energy(y: Field, h: float) -> EnergyBreakdown:
    return EnergyModel(y.mesh, h).breakdown(y)


def energy_gradient(y: Field, h: float) -> np.ndarray:
    return EnergyModel(y.mesh, h).node_gradient(y)


def gradient_check(y: Field, h: float, n_directions=20, seed=0, step=1e-5, model=None) -> dict:
    """Compare analytic directional derivatives with central differences.

    Directions are random on the free rings and scaled by the node radius so
    that the probe perturbs every ring by a comparable relative amount.
    """
    em = model or EnergyModel(y.mesh, h)
    rng = np.random.default_rng(seed)
    x = em.free_of(y)
    f0, g = em.fun_and_grad(x, y)
    scale = np.repeat(y.mesh.radii[1:-1], y.mesh.n_theta * 3)
    errors = []
    for _ in range(n_directions):
        d = rng.standard_normal(x.size) * scale
        d /= np.linalg.norm(d)
        analytic = float(g @ d)
        fp = em.fun(x + step * d, y)
        fm = em.fun(x - step * d, y)
        numeric = (fp - fm) / (2 * step)
        denom = max(abs(analytic), abs(numeric), 1e-300)
        errors.append(abs(analytic - numeric) / denom)
    return {"energy": f0, "max_rel_error": max(errors), "rel_errors": errors, "seed": seed}
