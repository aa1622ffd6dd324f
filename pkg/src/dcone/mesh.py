"""Radially graded polar tensor meshes of the unit disk.

Ring 0 is the single centre node. Rings 1..n_r carry ``n_theta`` equispaced
nodes each; ring n_r is the boundary circle. In geometric grading the ring
radii are piecewise geometric between breakpoints at r_min = h/4, h/2, h and
every dyadic radius 2**-j above r_min, so each cell lies inside exactly one
dyadic annulus and region-restricted integrals are exact partitions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError

RINGS_PER_OCTAVE = 8
STENCIL = 4


@dataclass(frozen=True)
class MeshSpec:
    n_r: int = 96
    n_theta: int = 192
    r_min: float | None = None
    grading: str = "geometric"

    def __post_init__(self):
        if self.grading not in ("geometric", "uniform"):
            raise ConfigError(f"unknown grading {self.grading!r}")
        if self.n_r < 16:
            raise ConfigError("n_r must be >= 16")
        if self.n_theta < 64 or self.n_theta % 2:
            raise ConfigError("n_theta must be even and >= 64")
        if self.r_min is not None and not 0 < self.r_min < 1:
            raise ConfigError("r_min must lie in (0, 1)")

    def to_dict(self):
        return {"n_r": self.n_r, "n_theta": self.n_theta, "r_min": self.r_min, "grading": self.grading}

    def refined(self, factor=2):
        return MeshSpec(self.n_r * factor, self.n_theta * factor, self.r_min, self.grading)


@dataclass(frozen=True, eq=False)
class RadialRule:
    """Flattened (cell, point) quadrature: weight integrates g(r) r dr.

    Points of the centre cell read pole rows appended after the boundary
    ring (see ``extend``): for each such point the value, r- and rr-derivative
    rebuilt mode by mode from rings 0, 1 and 2. Unused stencil slots carry
    zero weight.
    """

    n_gauss: int
    idx: np.ndarray  # (n_r * n_gauss, STENCIL) row indices
    w0: np.ndarray  # value weights
    w1: np.ndarray  # d/dr weights
    w2: np.ndarray  # d2/dr2 weights
    r: np.ndarray
    weight: np.ndarray
    pole: np.ndarray  # (n_modes, 3 rings, 3 * n_gauss rows) per-mode coefficients

    def extend(self, G):
        """Append the pole rows to a ring-major grid (rings on axis 0, angles on axis 1)."""
        n = G.shape[1]
        spec = np.fft.rfft(G[1:3], axis=1)
        rows = np.einsum("kir,ik...->rk...", self.pole[:, 1:], spec)
        rows = np.fft.irfft(rows, n=n, axis=1)
        rows += np.multiply.outer(self.pole[0, 0], G[0])
        return np.concatenate([G, rows], axis=0)

    def fold(self, G):
        """Adjoint of ``extend``: push pole-row sensitivities back onto rings 0..2."""
        n = G.shape[1]
        n_rows = self.pole.shape[2]
        out = G[:-n_rows].copy()
        rows = G[-n_rows:]
        spec = np.fft.rfft(rows, axis=1)
        back = np.einsum("kir,rk...->ik...", self.pole[:, 1:], spec)
        out[1:3] += np.fft.irfft(back, n=n, axis=1)
        out[0] += np.tensordot(self.pole[0, 0], rows, axes=(0, 0))
        return out


@dataclass(frozen=True, eq=False)
class PolarMesh:
    spec: MeshSpec
    h: float
    radii: np.ndarray  # length n_r + 1, radii[0] == 0
    breakpoints: tuple = field(default=())

    @property
    def n_r(self):
        return self.radii.size - 1

    @property
    def n_theta(self):
        return self.spec.n_theta

    @property
    def r_min(self):
        return float(self.radii[1])

    @property
    def n_nodes(self):
        return 1 + self.n_r * self.n_theta

    @property
    def dtheta(self):
        return 2 * np.pi / self.n_theta

    @cached_property
    def angles(self):
        return self.dtheta * np.arange(self.n_theta)

    @cached_property
    def node_radius(self):
        return np.concatenate([[0.0], np.repeat(self.radii[1:], self.n_theta)])

    @cached_property
    def node_angle(self):
        return np.concatenate([[0.0], np.tile(self.angles, self.n_r)])

    @cached_property
    def node_xy(self):
        r, t = self.node_radius, self.node_angle
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=1)

    def node_index(self, ring, j):
        if ring == 0:
            return 0
        return 1 + (ring - 1) * self.n_theta + (j % self.n_theta)

    @cached_property
    def boundary_nodes(self):
        return np.arange(1 + (self.n_r - 1) * self.n_theta, self.n_nodes)

    @cached_property
    def constrained(self):
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[0] = True
        mask[self.boundary_nodes] = True
        return mask

    # -- quadrature -------------------------------------------------------
    @cached_property
    def ring_weights(self):
        """Hat-function radial weights: integral of phi_i(r) r dr, times 2*pi for the centre."""
        r = self.radii
        w = np.zeros_like(r)
        a, b = r[:-1], r[1:]
        w[:-1] += (b - a) * (2 * a + b) / 6
        w[1:] += (b - a) * (a + 2 * b) / 6
        return w

    @cached_property
    def weights(self):
        """Nodal area weights (exact for integrands piecewise linear in r, trig-polynomial in theta)."""
        rw = self.ring_weights
        return np.concatenate([[2 * np.pi * rw[0]], np.repeat(rw[1:] * self.dtheta, self.n_theta)])

    @cached_property
    def cell_mid(self):
        return 0.5 * (self.radii[1:] + self.radii[:-1])

    @cached_property
    def cell_width(self):
        return np.diff(self.radii)

    @cached_property
    def cell_area(self):
        """Area of one annular sector of each radial cell."""
        return 0.5 * (self.radii[1:] ** 2 - self.radii[:-1] ** 2) * self.dtheta

    @cached_property
    def cell_annulus(self):
        """Dyadic index j with 2**-(j+1) < r <= 2**-j for each radial cell (by midpoint)."""
        return np.floor(-np.log2(self.cell_mid)).astype(int)

    @cached_property
    def ring_annulus(self):
        j = np.full(self.radii.size, -1)
        j[1:] = np.floor(-np.log2(self.radii[1:]) + 1e-12).astype(int)
        return j

    @cached_property
    def piece_rings(self):
        """Ring indices of the grading breakpoints (plus centre and boundary)."""
        rings = {0, self.n_r}
        for p in self.breakpoints:
            hit = np.flatnonzero(np.isclose(self.radii, p, rtol=1e-12, atol=0))
            rings.update(int(i) for i in hit)
        return np.array(sorted(rings))

    @cached_property
    def _rules(self):
        return {}

    def stencil_start(self, c):
        """First ring of the four-ring stencil serving cell c.

        Stencils are centred, across grading breakpoints too: a stencil
        confined to one piece never sees a jump of y_r at the breakpoint
        ring, and minimisers would crease along those circles for free.
        The exception is a cell whose inner ring is r = h/2 or r = h, where
        the core profile is only C^2; it looks outward only, so the profile
        stays exact beyond the junction while the cell just inside still
        straddles it and penalises creases.
        """
        start = c if c in self._junction_rings else c - 1
        return min(max(start, 0), self.n_r - 3)

    @cached_property
    def _junction_rings(self):
        r = self.radii
        return {int(i) for p in (0.5 * self.h, self.h) for i in np.flatnonzero(np.isclose(r, p, rtol=1e-12, atol=0))}

    def radial_rule(self, n_gauss=2) -> "RadialRule":
        """Gauss-Legendre points in every radial cell with reconstruction weights.

        At each point the value, first and second radial derivative are
        linear combinations of ring values: the cubic through four rings in
        every cell but the first. The points avoid cell midpoints on purpose:
        a midpoint-symmetric stencil cannot see the ring-to-ring sawtooth,
        which would then be free of bending cost.
        """
        rule = self._rules.get(n_gauss)
        if rule is not None:
            return rule
        r = self.radii
        n = self.n_r
        gx, gw = np.polynomial.legendre.leggauss(n_gauss)
        idx = np.zeros((n, n_gauss, STENCIL), dtype=np.int64)
        W = np.zeros((3, n, n_gauss, STENCIL))
        rq = np.zeros((n, n_gauss))
        wq = np.zeros((n, n_gauss))
        for c in range(n):
            half = 0.5 * (r[c + 1] - r[c])
            rq[c] = r[c] + half * (gx + 1.0)
            wq[c] = half * gw * rq[c]
            if c == 0:
                for q in range(n_gauss):
                    idx[c, q] = n + 1 + 3 * q + np.array([0, 1, 2, 0])
                    W[0, c, q, 0] = W[1, c, q, 1] = W[2, c, q, 2] = 1.0
                continue
            pts = np.arange(self.stencil_start(c), self.stencil_start(c) + 4)
            idx[c] = pts
            for q in range(n_gauss):
                for order in range(3):
                    W[order, c, q] = _fd_weights(r[pts], rq[c, q], order)
        rule = RadialRule(
            n_gauss=n_gauss,
            idx=idx.reshape(-1, STENCIL),
            w0=W[0].reshape(-1, STENCIL),
            w1=W[1].reshape(-1, STENCIL),
            w2=W[2].reshape(-1, STENCIL),
            r=rq.ravel(),
            weight=wq.ravel(),
            pole=_pole_coefficients(r[1], r[2], rq[0], self.n_theta // 2 + 1),
        )
        self._rules[n_gauss] = rule
        return rule

    def ring_mask(self, lo, hi):
        """Radial cells with lo < r_mid <= hi."""
        return (self.cell_mid > lo) & (self.cell_mid <= hi)

    def has_radius(self, r, rtol=1e-10):
        return bool(np.any(np.isclose(self.radii, r, rtol=rtol, atol=0)))

    def summary(self):
        return {
            "n_r": self.n_r,
            "n_theta": self.n_theta,
            "h": self.h,
            "grading": self.spec.grading,
            "n_nodes": self.n_nodes,
            "r_min": self.r_min,
            "radii": self.radii.tolist(),
            "weights_sum": float(self.weights.sum()),
            "weights_checksum": float(np.sum(self.weights * np.arange(1, self.n_nodes + 1)) / self.n_nodes),
        }


def _pole_coefficients(r1, r2, s, n_modes):
    """Per-mode weights on rings (0, 1, 2) for value, d/dr, d2/dr2 at radii s < r1.

    Angular mode k of a smooth field is s^k times a function of s^2 near
    the centre. Mode 0 is taken quadratic in s^2 through rings 0..2 and
    mode k >= 1 as s^k (a + b s^2) through rings 1 and 2. High modes thus
    fade inside the centre cell instead of meeting its 1/s^2 factors at full
    size, and ring 2 ties the cell to the next one so a crease at ring 1
    costs bending.
    """
    s = np.asarray(s, dtype=float)
    out = np.zeros((n_modes, 3, 3 * s.size))
    nodes = np.array([r1 * r1, r2 * r2])
    for q, sq in enumerate(s):
        u = sq * sq
        cols = slice(3 * q, 3 * q + 3)
        L, dL, ddL = (_fd_weights(np.r_[0.0, nodes], u, o) for o in range(3))
        out[0, :, cols] = np.stack([L, 2 * sq * dL, 2 * dL + 4 * u * ddL], axis=1)
        M, dM = (_fd_weights(nodes, u, o) for o in range(2))
        k = np.arange(1, n_modes)[:, None]
        ratio = (sq / np.array([r1, r2]))[None, :] ** k
        out[1:, 1:, 3 * q] = ratio * M
        out[1:, 1:, 3 * q + 1] = ratio * (k * M / sq + 2 * sq * dM)
        out[1:, 1:, 3 * q + 2] = ratio * (k * (k - 1) * M / u + (4 * k + 2) * dM)
    return out


def _fd_weights(x, x0, order):
    """Finite-difference weights of the given derivative order at x0 (Lagrange)."""
    x = np.asarray(x, dtype=float) - x0
    m = x.size
    vander = np.vander(x, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(vander, rhs)


def _allocate(lengths, minimum, total):
    counts = np.array([max(1, int(np.ceil(m - 1e-9))) for m in minimum])
    if counts.sum() > total:
        raise ConfigError(
            f"infeasible mesh: grading needs at least {counts.sum() + 1} radial intervals, got {total + 1}"
        )
    share = np.asarray(lengths) / np.sum(lengths)
    while counts.sum() < total:
        k = int(np.argmax(share * total - counts))
        counts[k] += 1
    return counts


def _geometric_radii(n_r, r_min, h):
    points = {1.0, r_min}
    j = 1
    while 2.0**-j > r_min * (1 + 1e-9):
        points.add(2.0**-j)
        j += 1
    for p in (h, h / 2):
        if p > r_min * (1 + 1e-9):
            points.add(p)
    pts = sorted(points)
    merged = [pts[0]]
    for p in pts[1:]:
        if p > merged[-1] * (1 + 1e-9):
            merged.append(p)
    merged = np.array(merged)
    lo, hi = merged[:-1], merged[1:]
    lengths = np.log(hi / lo)
    octaves = lengths / np.log(2.0)
    minimum = np.where(lo >= h * (1 - 1e-9), RINGS_PER_OCTAVE * octaves, 1.0)
    counts = _allocate(lengths, minimum, n_r - 1)
    radii = [0.0, r_min]
    for a, b, m in zip(lo, hi, counts):
        seg = a * (b / a) ** (np.arange(1, m + 1) / m)
        seg[-1] = b
        radii.extend(seg)
    return np.array(radii), tuple(float(p) for p in merged)


def build_mesh(spec: MeshSpec, h: float) -> PolarMesh:
    if not 0 < h < 0.25:
        raise ConfigError("h must lie in (0, 1/4)")
    if spec.grading == "uniform":
        radii = np.arange(spec.n_r + 1) / spec.n_r
        return PolarMesh(spec, float(h), radii, ())
    r_min = spec.r_min if spec.r_min is not None else h / 4
    if r_min > h / 2:
        raise ConfigError("r_min must not exceed h/2")
    radii, bps = _geometric_radii(spec.n_r, r_min, h)
    return PolarMesh(spec, float(h), radii, bps)


def annulus_mask(m: PolarMesh, j: int) -> np.ndarray:
    """Boolean node mask of the dyadic annulus 2**-(j+1) < r <= 2**-j."""
    if j < 0 or 2.0**-j < 2 * m.r_min * (1 - 1e-12):
        raise ConfigError(f"annulus j={j} is below the mesh resolution")
    r = m.node_radius
    hi, lo = 2.0**-j, 2.0 ** -(j + 1)
    tol = 1e-12
    return (r > lo * (1 + tol)) & (r <= hi * (1 + tol))


def disk_mask(m: PolarMesh, radius: float) -> np.ndarray:
    return m.node_radius <= radius * (1 + 1e-12)
