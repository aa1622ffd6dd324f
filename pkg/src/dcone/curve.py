"""Admissible boundary curves: closed, unit-speed curves on the unit sphere.

Two families are provided. The equator is the planar reference. The
latitude wave oscillates in colatitude around a parallel,

    psi(theta) = psi0 + a * cos(k * theta),

and its longitude is obtained by integrating
``phi' = sqrt(1 - psi'^2) / sin(psi)``, which makes the curve unit-speed by
construction. Closing the curve (``phi(2 pi) - phi(0) = 2 pi``) fixes the
mean colatitude ``psi0`` through a scalar root find.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, NumericalError
from .spectral import periodic_antiderivative, periodic_diff, periodic_interpolate

PLANARITY_THRESHOLD = 1e-6
MIN_SAMPLES = 64
FINE_SAMPLES = 4096


@dataclass(frozen=True)
class CurveSpec:
    family: str = "latitude-wave"
    amplitude: float = 0.2
    wavenumber: int = 3
    resolution: int = 256

    def __post_init__(self):
        if self.family not in ("equator", "latitude-wave"):
            raise ConfigError(f"unknown curve family {self.family!r}")
        if self.resolution < MIN_SAMPLES or self.resolution % 2:
            raise ConfigError("resolution must be even and >= 64")
        if self.amplitude < 0:
            raise ConfigError("amplitude must be nonnegative")
        if self.wavenumber < 2:
            raise ConfigError("wavenumber must be >= 2")

    def to_dict(self):
        return {
            "family": self.family,
            "amplitude": self.amplitude,
            "wavenumber": self.wavenumber,
            "resolution": self.resolution,
        }


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    theta: np.ndarray
    gamma: np.ndarray
    dgamma: np.ndarray
    d2gamma: np.ndarray
    d3gamma: np.ndarray
    spec: CurveSpec | None = None
    info: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.theta.size

    @property
    def planarity_defect(self):
        return float(np.linalg.svd(self.gamma.T, compute_uv=False)[-1])

    @property
    def is_planar(self):
        return self.planarity_defect < PLANARITY_THRESHOLD

    def content_hash(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.gamma).tobytes())
        return h.hexdigest()[:16]

    def resample(self, n):
        """Subsample (when n divides self.n) or spectrally interpolate to n samples."""
        if n == self.n:
            return self
        theta = _angles(n)
        if self.n % n == 0:
            gamma = self.gamma[:: self.n // n].copy()
        else:
            gamma = periodic_interpolate(self.gamma, theta)
            gamma /= np.linalg.norm(gamma, axis=1)[:, None]
        return _with_spectral_derivatives(theta, gamma, self.spec, dict(self.info))

    def rotated(self, rotation):
        q = np.asarray(rotation, dtype=float)
        return BoundaryCurve(
            self.theta,
            self.gamma @ q.T,
            self.dgamma @ q.T,
            self.d2gamma @ q.T,
            self.d3gamma @ q.T,
            self.spec,
            dict(self.info),
        )

    def to_dict(self):
        return {
            "spec": self.spec.to_dict() if self.spec else None,
            "info": self.info,
            "hash": self.content_hash(),
            "theta": self.theta.tolist(),
            "gamma": self.gamma.tolist(),
            "dgamma": self.dgamma.tolist(),
            "d2gamma": self.d2gamma.tolist(),
            "d3gamma": self.d3gamma.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        spec = CurveSpec(**doc["spec"]) if doc.get("spec") else None
        theta = np.asarray(doc["theta"], dtype=float)
        gamma = np.asarray(doc["gamma"], dtype=float)
        if "d3gamma" not in doc:
            return _with_spectral_derivatives(theta, gamma, spec, doc.get("info", {}))
        return cls(
            theta,
            gamma,
            np.asarray(doc["dgamma"], dtype=float),
            np.asarray(doc["d2gamma"], dtype=float),
            np.asarray(doc["d3gamma"], dtype=float),
            spec,
            dict(doc.get("info", {})),
        )

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _with_spectral_derivatives(theta, gamma, spec, info):
    d1 = periodic_diff(gamma, 1)
    d2 = periodic_diff(gamma, 2)
    d3 = periodic_diff(gamma, 3)
    return BoundaryCurve(theta, gamma, d1, d2, d3, spec, info)


def _angles(n):
    return 2 * np.pi * np.arange(n) / n


def make_equator(n_theta=256):
    if n_theta < MIN_SAMPLES or n_theta % 2:
        raise ConfigError("resolution must be even and >= 64")
    theta = _angles(n_theta)
    c, s, z = np.cos(theta), np.sin(theta), np.zeros_like(theta)
    gamma = np.stack([c, s, z], axis=1)
    dgamma = np.stack([-s, c, z], axis=1)
    spec = CurveSpec("equator", 0.0, 3, n_theta)
    return BoundaryCurve(theta, gamma, dgamma, -gamma, -dgamma, spec, {"psi0": np.pi / 2})


def _longitude_rate(theta, psi0, a, k):
    psi = psi0 + a * np.cos(k * theta)
    dpsi = -a * k * np.sin(k * theta)
    rad = 1.0 - dpsi**2
    if np.any(rad < 0):
        raise NumericalError("non-real unit-speed longitude rate (a*k > 1)")
    return psi, np.sqrt(rad) / np.sin(psi)


def closure_defect(psi0, a, k, n=FINE_SAMPLES):
    """phi(2 pi) - phi(0) - 2 pi, by the (spectrally accurate) periodic trapezoid rule."""
    theta = _angles(n)
    _, rate = _longitude_rate(theta, psi0, a, k)
    return 2 * np.pi * (rate.mean() - 1.0)


def solve_mean_colatitude(a, k):
    """Root-find the parallel psi0 <= pi/2 that closes the wave of amplitude a."""
    if a == 0:
        return np.pi / 2
    if a * k >= 1:
        raise NumericalError(f"amplitude {a} too large for wavenumber {k}")
    hi = np.pi / 2
    lo = max(a + 1e-3, 1e-3)
    f_hi = closure_defect(hi, a, k)
    f_lo = closure_defect(lo, a, k)
    if not (f_hi < 0 < f_lo):
        raise NumericalError("closure shooting failed: no sign change")
    return brentq(closure_defect, lo, hi, args=(a, k), xtol=1e-15, rtol=4 * np.finfo(float).eps)


def make_latitude_wave(spec: CurveSpec) -> BoundaryCurve:
    if spec.family == "equator" or spec.amplitude == 0:
        curve = make_equator(spec.resolution)
        return BoundaryCurve(
            curve.theta, curve.gamma, curve.dgamma, curve.d2gamma, curve.d3gamma, spec, curve.info
        )
    a, k, n = spec.amplitude, spec.wavenumber, spec.resolution
    psi0 = solve_mean_colatitude(a, k)
    # longitude at a fine resolution, then subsample
    n_fine = max(FINE_SAMPLES, n)
    n_fine += (-n_fine) % n
    fine = _angles(n_fine)
    _, rate = _longitude_rate(fine, psi0, a, k)
    phi_fine = fine + periodic_antiderivative(rate - 1.0)
    phi_fine -= phi_fine[0]
    stride = n_fine // n
    theta = fine[::stride]
    phi = phi_fine[::stride]
    psi = psi0 + a * np.cos(k * theta)
    gamma = np.stack(
        [np.sin(psi) * np.cos(phi), np.sin(psi) * np.sin(phi), np.cos(psi)], axis=1
    )
    info = {"psi0": float(psi0), "closure_defect": float(closure_defect(psi0, a, k))}
    return _with_spectral_derivatives(theta, gamma, spec, info)


def make_curve(spec: CurveSpec) -> BoundaryCurve:
    if spec.family == "equator":
        return make_equator(spec.resolution)
    return make_latitude_wave(spec)


def validate_curve(c: BoundaryCurve) -> dict:
    """Report-only check of the admissibility conditions."""
    unit_length = float(np.max(np.abs(np.linalg.norm(c.gamma, axis=1) - 1.0)))
    unit_speed = float(np.max(np.abs(np.linalg.norm(c.dgamma, axis=1) - 1.0)))
    tangency = float(np.max(np.abs(np.einsum("ij,ij->i", c.gamma, c.dgamma))))
    ends = periodic_interpolate(c.gamma, [0.0, 2 * np.pi])
    periodicity = float(np.max(np.abs(ends[0] - ends[1])))
    defect = c.planarity_defect
    return {
        "unit_length": unit_length,
        "unit_speed": unit_speed,
        "tangency": tangency,
        "periodicity": periodicity,
        "planarity_defect": defect,
        "planar": bool(defect < PLANARITY_THRESHOLD),
        "ok": bool(max(unit_length, unit_speed, tangency, periodicity) < 1e-8),
    }
