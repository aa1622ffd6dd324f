"""Norms of nodal fields on disks, annuli and circles.

Integrals use 4-point Gauss-Legendre in r on every radial cell with the
same radial reconstruction as the energy (cubics through four rings, the
centre cell rebuilt per angular mode), and the trapezoidal rule in theta.
Angular derivatives are spectral per ring.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import ConfigError
from .mesh import STENCIL, PolarMesh
from .spectral import periodic_diff

N_GAUSS = 4
_RULES: "weakref.WeakKeyDictionary[PolarMesh, dict]" = weakref.WeakKeyDictionary()


@dataclass(eq=False)
class ScalarField:
    mesh: PolarMesh
    values: np.ndarray  # (n_nodes,)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_nodes,):
            raise ConfigError(f"scalar field shape {self.values.shape} does not match mesh")
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("scalar field has non-finite values")

    def grid(self):
        m = self.mesh
        out = np.empty((m.n_r + 1, m.n_theta))
        out[0] = self.values[0]
        out[1:] = self.values[1:].reshape(m.n_r, m.n_theta)
        return out


def sample(mesh: PolarMesh, fn) -> ScalarField:
    """ScalarField with values fn(x1, x2) at the mesh nodes."""
    xy = mesh.node_xy
    return ScalarField(mesh, np.broadcast_to(fn(xy[:, 0], xy[:, 1]), (mesh.n_nodes,)).astype(float))


@dataclass(frozen=True)
class Region:
    kind: str  # "disk", "annulus" or "boundary"
    lo: float = 0.0
    hi: float = 1.0

    @classmethod
    def disk(cls, radius=1.0):
        return cls("disk", 0.0, float(radius))

    @classmethod
    def annulus(cls, lo, hi):
        if not 0 < lo < hi:
            raise ConfigError("annulus needs 0 < lo < hi")
        return cls("annulus", float(lo), float(hi))

    @classmethod
    def dyadic(cls, j):
        """A_{2^-j}: 2^-(j+1) < r <= 2^-j."""
        return cls.annulus(2.0 ** -(j + 1), 2.0**-j)

    @classmethod
    def boundary(cls):
        return cls("boundary", 1.0, 1.0)


def _grid3(f):
    """(mesh, grid of shape (n_r+1, n_theta, n_comp)) for a scalar or vector field."""
    if isinstance(f, ScalarField):
        return f.mesh, f.grid()[..., None]
    g = f.grid()
    return f.mesh, g if g.ndim == 3 else g[..., None]


def _rule(mesh: PolarMesh):
    rule = _RULES.get(mesh)
    if rule is not None:
        return rule
    base = mesh.radial_rule(N_GAUSS)
    shape = (mesh.n_r, N_GAUSS, STENCIL)
    rule = {
        "idx": base.idx.reshape(shape),
        "W": np.stack([base.w0, base.w1, base.w2]).reshape((3,) + shape),
        "rq": base.r.reshape(mesh.n_r, N_GAUSS),
        "wq": base.weight.reshape(mesh.n_r, N_GAUSS),
        "base": base,
    }
    _RULES[mesh] = rule
    return rule


def _region_cells(mesh: PolarMesh, region: Region):
    if region.kind == "boundary":
        return np.zeros(0, dtype=int)
    r = mesh.radii
    for edge in (region.lo, region.hi):
        if edge > 0 and not mesh.has_radius(edge):
            raise ConfigError(f"region edge r={edge:g} is not a ring of the mesh")
    if region.hi > 1.0 + 1e-12:
        raise ConfigError("region extends beyond the unit disk")
    tol = 1e-12
    return np.flatnonzero((r[:-1] >= region.lo * (1 - tol)) & (r[1:] <= region.hi * (1 + tol)))


def _densities(mesh, G, cells):
    """Per-node (value^2, |grad|^2, |hess|^2) and the signed value sum at Gauss points."""
    rule = _rule(mesh)
    idx = rule["idx"][cells]
    W0, W1, W2 = (rule["W"][o][cells] for o in range(3))
    r = rule["rq"][cells][:, :, None, None]
    G = rule["base"].extend(G)
    Gt = np.zeros_like(G)
    Gtt = np.zeros_like(G)
    Gt[1:] = periodic_diff(G[1:], 1, axis=1)
    Gtt[1:] = periodic_diff(G[1:], 2, axis=1)
    S, St, Stt = G[idx], Gt[idx], Gtt[idx]
    F = np.einsum("cqk,cqktm->cqtm", W0, S)
    Fr = np.einsum("cqk,cqktm->cqtm", W1, S)
    Frr = np.einsum("cqk,cqktm->cqtm", W2, S)
    Ft = np.einsum("cqk,cqktm->cqtm", W0, St)
    Ftt = np.einsum("cqk,cqktm->cqtm", W0, Stt)
    Frt = np.einsum("cqk,cqktm->cqtm", W1, St)
    val = np.sum(F * F, axis=-1)
    grad = np.sum(Fr * Fr + (Ft / r) ** 2, axis=-1)
    hess = np.sum(Frr**2 + 2 * (Frt / r - Ft / r**2) ** 2 + (Ftt / r**2 + Fr / r) ** 2, axis=-1)
    return F.sum(axis=-1), val, grad, hess


def _integrate(mesh, cells, dens):
    wq = _rule(mesh)["wq"][cells]
    return float(np.einsum("cq,cqt->", wq, dens) * mesh.dtheta)


def integral(f, region: Region) -> float:
    """Integral of a scalar field (components summed for vector fields)."""
    mesh, G = _grid3(f)
    if region.kind == "boundary":
        return float(G[-1].sum() * mesh.dtheta)
    cells = _region_cells(mesh, region)
    F, _, _, _ = _densities(mesh, G, cells)
    return _integrate(mesh, cells, F)


def norms(f, region: Region) -> dict:
    """L2 norm, gradient and Hessian seminorms over the region, plus the trace on its outer circle."""
    mesh, G = _grid3(f)
    if region.kind != "boundary" and not mesh.has_radius(region.hi):
        raise ConfigError(f"outer radius {region.hi:g} is not a ring of the mesh")
    ring = mesh.n_r if region.kind == "boundary" else int(np.argmin(np.abs(mesh.radii - region.hi)))
    rad = mesh.radii[ring]
    trace = float(np.sum(G[ring] ** 2) * mesh.dtheta * rad)
    out = {"l2": np.nan, "grad_l2": np.nan, "hess_l2": np.nan, "trace_l2": float(np.sqrt(trace))}
    if region.kind == "boundary":
        return out
    cells = _region_cells(mesh, region)
    _, val, grad, hess = _densities(mesh, G, cells)
    out["l2"] = float(np.sqrt(_integrate(mesh, cells, val)))
    out["grad_l2"] = float(np.sqrt(_integrate(mesh, cells, grad)))
    out["hess_l2"] = float(np.sqrt(_integrate(mesh, cells, hess)))
    return out


def interpolation_ratio(f, region: Region) -> dict:
    """Trace and gradient interpolation ratios; both stay bounded for admissible f."""
    n = norms(f, region)
    l2 = n["l2"]
    if not l2 > 0:
        raise ConfigError("interpolation ratio is undefined for a zero field")
    w12 = np.sqrt(l2**2 + n["grad_l2"] ** 2)
    return {
        "trace_ratio": n["trace_l2"] ** 2 / (l2 * w12),
        "grad_ratio": n["grad_l2"] ** 2 / (l2**2 + l2 * n["hess_l2"]),
        **n,
    }


def rescaled(f, r0: float, target: PolarMesh | None = None):
    """f_hat(x) = f(r0 x) / r0 sampled on the target mesh by bicubic interpolation in (r, theta).

    Target nodes whose scaled radius leaves the source mesh are set to zero,
    so only regions with r0 * r <= 1 are meaningful.
    """
    mesh, G = _grid3(f)
    target = target or mesh
    pad = 3
    th = mesh.angles
    th_ext = np.concatenate([th[-pad:] - 2 * np.pi, th, th[:pad] + 2 * np.pi])
    rt = target.node_radius * r0
    tt = target.node_angle
    inside = rt <= 1.0 + 1e-12
    out = np.zeros((target.n_nodes, G.shape[-1]))
    for m in range(G.shape[-1]):
        vals = np.concatenate([G[:, -pad:, m], G[:, :, m], G[:, :pad, m]], axis=1)
        spline = RectBivariateSpline(mesh.radii, th_ext, vals, kx=3, ky=3)
        out[inside, m] = spline.ev(rt[inside], tt[inside])
    out /= r0
    if isinstance(f, ScalarField):
        return ScalarField(target, out[:, 0])
    from .energy import Field

    return Field(target, out)
