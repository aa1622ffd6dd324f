"""Constrained minimisation of the discrete energy and h-continuation."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import interp1d

from .curve import BoundaryCurve
from .energy import EnergyBreakdown, EnergyModel, Field, matched_curve, upper_bound_profile
from .errors import ConfigError, ConvergenceError, NumericalError
from .mesh import MeshSpec, PolarMesh, build_mesh
from .optimize import lbfgs
from .precond import SpectralPreconditioner

logger = logging.getLogger(__name__)

CONTINUATION_MODES = ("from_profile", "from_previous_h")


@dataclass(frozen=True)
class SolveConfig:
    gtol: float = 1e-8
    max_iter: int = 5000
    c1: float = 1e-4
    c2: float = 0.9
    memory: int = 20
    continuation: str = "from_previous_h"
    precond_beta: float = 2.0

    def __post_init__(self):
        if not self.gtol > 0:
            raise ConfigError("gtol must be positive")
        if self.max_iter < 1 or self.memory < 1:
            raise ConfigError("max_iter and memory must be positive")
        if not 0 < self.c1 < self.c2 < 1:
            raise ConfigError("line search constants need 0 < c1 < c2 < 1")
        if self.continuation not in CONTINUATION_MODES:
            raise ConfigError(f"continuation must be one of {CONTINUATION_MODES}")
        if self.precond_beta < 0:
            raise ConfigError("precond_beta must be non-negative")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        return cls(**doc)


@dataclass(eq=False)
class SolveResult:
    field: Field
    breakdown: EnergyBreakdown
    iterations: int
    gnorm_history: list
    energy_history: list
    reason: str
    initialization: str
    h: float
    n_eval: int = 0
    seconds: float = 0.0
    initial_energy: float = math.nan
    provenance: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.reason == "gtol"

    @property
    def energy(self):
        return self.breakdown.total

    @property
    def scaled_energy(self):
        return self.breakdown.total / self.h**2

    def summary(self):
        b = self.breakdown
        return {
            "h": self.h,
            "energy": b.total,
            "energy_over_h2": b.total / self.h**2,
            "membrane": b.membrane,
            "bending": b.bending,
            "iterations": self.iterations,
            "n_eval": self.n_eval,
            "gnorm": self.gnorm_history[-1] if self.gnorm_history else None,
            "reason": self.reason,
            "converged": self.converged,
            "initialization": self.initialization,
            "initial_energy": self.initial_energy,
        }

    def to_dict(self):
        out = self.summary()
        out["breakdown"] = self.breakdown.to_dict()
        out["gnorm_history"] = list(self.gnorm_history)
        out["mesh"] = self.field.mesh.summary()
        out.update(self.provenance)
        return out


def _check_admissible(y: Field, atol=0.0):
    if y.curve is None:
        raise ConfigError("the initial field carries no boundary curve")
    viol = y.constraint_violation()
    if viol > atol:
        raise ConfigError(f"initial field violates the constraints by {viol:.3e}")


def minimize(y0: Field, h: float, cfg: SolveConfig | None = None, initialization="given",
             model: EnergyModel | None = None) -> SolveResult:
    """Minimise E_h over fields sharing the boundary and centre values of y0.

    Only interior rings are optimised, so constrained nodes are copied
    bit for bit. Line-search breakdown is reported through ``reason``; a
    non-finite energy at the start raises NumericalError.
    """
    cfg = cfg or SolveConfig()
    _check_admissible(y0)
    em = model or EnergyModel(y0.mesh, h)
    t0 = time.perf_counter()
    x0 = em.free_of(y0)
    f0 = em.fun(x0, y0)
    if not np.isfinite(f0):
        raise NumericalError("initial energy is not finite")
    pre = SpectralPreconditioner(y0.mesh, h, beta=cfg.precond_beta)
    res = lbfgs(
        lambda x: em.fun_and_grad(x, y0), x0, gtol=cfg.gtol, max_iter=cfg.max_iter,
        memory=cfg.memory, c1=cfg.c1, c2=cfg.c2, precond=pre,
    )
    if res.reason == "nan":
        raise NumericalError("energy became non-finite and step shrinking did not recover")
    if res.f > f0:
        raise NumericalError("solver increased the energy")
    grid = em.grid_with(y0, res.x)
    vals = y0.values.copy()
    vals[1:][~y0.mesh.constrained[1:]] = grid[1:].reshape(-1, 3)[~y0.mesh.constrained[1:]]
    y = y0.with_values(vals)
    out = SolveResult(
        field=y,
        breakdown=em.breakdown(y),
        iterations=res.iterations,
        gnorm_history=res.gnorm_history,
        energy_history=res.f_history,
        reason=res.reason,
        initialization=initialization,
        h=float(h),
        n_eval=res.n_eval,
        seconds=time.perf_counter() - t0,
        initial_energy=float(f0),
    )
    logger.info("h=%g E/h^2=%.6f it=%d reason=%s", h, out.scaled_energy, out.iterations, out.reason)
    return out


def transfer_field(y: Field, mesh: PolarMesh, curve: BoundaryCurve) -> Field:
    """Carry y onto another mesh through u = y / r, linear in ln r.

    Below the smallest source radius u is held constant, so the result is
    cone-like there; the target's boundary and centre are reset exactly.
    """
    curve = matched_curve(curve, mesh)
    src = y.mesh
    u = y.grid()[1:] / src.radii[1:, None, None]
    if src.n_theta != mesh.n_theta:
        from .spectral import periodic_interpolate

        u = periodic_interpolate(u, mesh.angles, axis=1)
    lr = np.log(src.radii[1:])
    f = interp1d(lr, u, axis=0, bounds_error=False, fill_value=(u[0], u[-1]), assume_sorted=True)
    grid = np.zeros((mesh.n_r + 1, mesh.n_theta, 3))
    grid[1:] = f(np.log(mesh.radii[1:])) * mesh.radii[1:, None, None]
    grid[-1] = curve.gamma
    return Field.from_grid(mesh, grid, curve)


def continuation_sweep(c: BoundaryCurve, h_list, cfg: SolveConfig | None = None,
                       mesh_spec: MeshSpec | None = None, callback=None) -> list:
    """Solve for each h (strictly decreasing), warm-starting per cfg.continuation."""
    cfg = cfg or SolveConfig()
    mesh_spec = mesh_spec or MeshSpec()
    h_list = [float(h) for h in h_list]
    if not h_list:
        raise ConfigError("empty h list")
    if any(not 0 < h < 0.25 for h in h_list):
        raise ConfigError("every h must lie in (0, 1/4)")
    if any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise ConfigError("h list must be strictly decreasing")
    results = []
    for h in h_list:
        try:
            mesh = build_mesh(mesh_spec, h)
            if results and cfg.continuation == "from_previous_h":
                y0 = transfer_field(results[-1].field, mesh, c)
                init = f"previous_h={results[-1].h!r}"
            else:
                y0 = upper_bound_profile(c, h, mesh)
                init = "profile"
            res = minimize(y0, h, cfg, initialization=init)
        except (NumericalError, ConfigError) as exc:
            exc.args = (f"h={h!r}: {exc}",) + exc.args[1:]
            raise
        results.append(res)
        if callback is not None:
            callback(res)
    return results


def require_converged(results):
    bad = [r.h for r in results if not r.converged]
    if bad:
        raise ConvergenceError(f"no convergence at h={bad}")
    return results
