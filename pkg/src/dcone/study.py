"""Scaling-law fits and diagnostics on computed minimisers."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .cone import c1_constant
from .curve import BoundaryCurve, make_curve
from .energy import Field, cone_field, matched_curve, upper_bound_profile
from .errors import ConfigError, ConvergenceError
from .estimates import Region, ScalarField, integral, norms, sample
from .mesh import MeshSpec, build_mesh
from .solve import SolveConfig, SolveResult, continuation_sweep, minimize

SUP_PROXY = 2.0  # C in the "C h" term of the core sup estimate


# -- scaling fit ----------------------------------------------------------


@dataclass
class ScalingFit:
    slope: float
    intercept: float
    residual_rms: float
    h_min: float
    h_max: float
    n_points: int
    c1_reference: float | None
    relative_slope_gap: float | None
    excluded: list = field(default_factory=list)
    upper_constant: float | None = None  # max of E/h^2 - c1 ln(1/h) over the fit points

    def to_dict(self):
        return asdict(self)


def _rows(results):
    rows = []
    for r in results:
        if isinstance(r, SolveResult):
            rows.append({"h": r.h, "energy_over_h2": r.scaled_energy, "reason": r.reason})
        else:
            rows.append({"h": float(r["h"]), "energy_over_h2": float(r["energy_over_h2"]),
                         "reason": r.get("reason", "gtol")})
    return rows


def fit_log_scaling(results, c1: float | None = None, min_points=4) -> ScalingFit:
    """Least squares of E/h^2 against ln(1/h).

    Accepts SolveResults or mappings with keys h, energy_over_h2 and
    optionally reason. Results that did not reach the gradient tolerance are
    left out and listed in ``excluded``.
    """
    rows = _rows(results)
    used = [r for r in rows if r["reason"] == "gtol"]
    excluded = [r["h"] for r in rows if r["reason"] != "gtol"]
    if len(used) < min_points:
        raise ConvergenceError(
            f"scaling fit needs {min_points} converged points, got {len(used)} (excluded h={excluded})"
        )
    L = np.log(1.0 / np.array([r["h"] for r in used]))
    E = np.array([r["energy_over_h2"] for r in used])
    A = np.stack([L, np.ones_like(L)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, E, rcond=None)
    resid = E - A @ np.array([slope, intercept])
    gap = None
    upper = None
    if c1 is not None:
        gap = float(abs(slope - c1) / c1 if c1 > 0 else abs(slope))
        upper = float(np.max(E - c1 * L))
    hs = [r["h"] for r in used]
    return ScalingFit(
        slope=float(slope),
        intercept=float(intercept),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        h_min=min(hs),
        h_max=max(hs),
        n_points=len(used),
        c1_reference=c1,
        relative_slope_gap=gap,
        excluded=excluded,
        upper_constant=upper,
    )


# -- diagnostics on minimisers ---------------------------------------------


def deviation_field(y: Field, c: BoundaryCurve) -> Field:
    """e = y - cone on the nodes of y's mesh; zero on the boundary and at the centre."""
    cone = cone_field(matched_curve(c, y.mesh), y.mesh)
    e = y.values - cone.values
    e[y.mesh.boundary_nodes] = 0.0
    return Field(y.mesh, e)


@dataclass
class LemmaDiagnostics:
    h: float
    c1: float
    energy_over_h2: float
    membrane_over_h2: float
    bending: float
    sup_core: float
    sup_ratio: float
    hess_norm: float
    excess_upper: float  # E/h^2 - c1 ln(1/h)
    excess_lower: float  # E/h^2 - c1 ln(1/h) + c1 ln ln(1/h)
    dyadic_bending: float
    annulus: list = field(default_factory=list)

    def annulus_ratio(self, j):
        for row in self.annulus:
            if row["j"] == j:
                return row["ratio_lead"]
        return None

    def to_dict(self):
        return asdict(self)


def lemma_diagnostics(result: SolveResult, c: BoundaryCurve, c1: float | None = None) -> LemmaDiagnostics:
    y = result.field
    m = y.mesh
    h = result.h
    if not np.any((m.node_radius > 0) & (m.node_radius <= h * (1 + 1e-12))):
        raise ConfigError("B_h contains no mesh nodes")
    c1 = c1_constant(c) if c1 is None else c1
    L = math.log(1.0 / h)
    b = result.breakdown
    core = m.node_radius <= h * (1 + 1e-12)
    sup_core = float(np.max(np.linalg.norm(y.values[core], axis=1)))
    hess = math.sqrt(b.bending)
    denom = h * math.sqrt(L) * hess
    sup_ratio = (sup_core - SUP_PROXY * h) / denom if denom > 0 else 0.0
    e = deviation_field(y, c)
    rows = []
    j = 0
    while 2.0 ** -(j + 1) >= m.r_min * (1 - 1e-12):
        r0 = 2.0**-j
        l2sq = norms(e, Region.dyadic(j))["l2"] ** 2
        lead = r0**3 * h * L
        full = lead + r0**2 * h**2 * L**2
        rows.append({
            "j": j, "r0": r0, "l2sq": l2sq, "bound_lead": lead, "bound_full": full,
            "ratio_lead": l2sq / lead, "ratio_full": l2sq / full, "resolved": bool(r0 >= h * L),
        })
        j += 1
    dyadic = sum(bj for _, _, bj in b.per_annulus)
    E = b.total / h**2
    return LemmaDiagnostics(
        h=h,
        c1=c1,
        energy_over_h2=E,
        membrane_over_h2=b.membrane / h**2,
        bending=b.bending,
        sup_core=sup_core,
        sup_ratio=sup_ratio,
        hess_norm=hess,
        excess_upper=E - c1 * L,
        excess_lower=E - c1 * L + c1 * math.log(L),
        dyadic_bending=dyadic,
        annulus=rows,
    )


def excess_summary(diags) -> dict:
    up = np.array([d.excess_upper for d in diags])
    lo = np.array([d.excess_lower for d in diags])
    mid = len(diags) // 2
    return {
        "upper_max": float(up.max()),
        "upper_spread": float(up.max() - up.min()),
        "lower_min": float(lo.min()),
        "lower_spread": float(lo.max() - lo.min()),
        "lower_constant": float(-lo.min()),
        "upper_bounded": bool(up.max() - up.min() < 3 * abs(up[mid])),
        "lower_bounded": bool(lo.max() - lo.min() < 3 * abs(lo[mid])),
    }


# -- sweeps ---------------------------------------------------------------


def dyadic_h_list(p_from=4, p_to=9):
    return [2.0**-p for p in range(p_from, p_to + 1)]


def _curve_for(c: BoundaryCurve, n_theta):
    if c.n % n_theta == 0:
        return c
    if c.spec is not None:
        return make_curve(replace(c.spec, resolution=n_theta))
    return c.resample(n_theta)


def mesh_refinement_gate(c: BoundaryCurve, h: float, cfg: SolveConfig | None = None,
                         mesh_spec: MeshSpec | None = None, factor=2, tol=0.02) -> dict:
    """Relative change of converged E/h^2 when n_r and n_theta are multiplied by factor."""
    mesh_spec = mesh_spec or MeshSpec()
    out = {"h": h, "tol": tol}
    for name, spec in (("coarse", mesh_spec), ("fine", mesh_spec.refined(factor))):
        m = build_mesh(spec, h)
        curve = _curve_for(c, spec.n_theta)
        res = minimize(upper_bound_profile(curve, h, m), h, cfg, initialization="profile")
        out[name] = res.scaled_energy
        out[name + "_reason"] = res.reason
    out["relative_change"] = abs(out["fine"] - out["coarse"]) / abs(out["coarse"])
    out["passed"] = out["relative_change"] < tol
    return out


@dataclass
class StudyReport:
    results: list
    diagnostics: list
    fit: ScalingFit | None
    c1: float
    excess: dict

    def table(self):
        js = sorted({row["j"] for d in self.diagnostics for row in d.annulus})
        out = []
        for r, d in zip(self.results, self.diagnostics):
            s = r.summary()
            row = {
                "h": r.h,
                "ln_inv_h": math.log(1 / r.h),
                "energy": s["energy"],
                "energy_over_h2": s["energy_over_h2"],
                "membrane": s["membrane"],
                "bending": s["bending"],
                "reason": s["reason"],
                "iterations": s["iterations"],
                "sup_core": d.sup_core,
                "sup_ratio": d.sup_ratio,
                "excess_upper": d.excess_upper,
                "excess_lower": d.excess_lower,
                "membrane_over_h2": d.membrane_over_h2,
            }
            for j in js:
                row[f"annulus_ratio_j{j}"] = d.annulus_ratio(j)
            out.append(row)
        return out

    def to_csv(self):
        rows = self.table()
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if v is None else (repr(v) if isinstance(v, float) else v)) for k, v in row.items()})
        return buf.getvalue()

    def to_dict(self):
        return {
            "c1": self.c1,
            "fit": None if self.fit is None else self.fit.to_dict(),
            "excess": self.excess,
            "rows": self.table(),
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }


def run_study(c: BoundaryCurve, h_list, cfg: SolveConfig | None = None,
              mesh_spec: MeshSpec | None = None, callback=None) -> StudyReport:
    c1 = c1_constant(c)
    results = continuation_sweep(c, h_list, cfg, mesh_spec, callback=callback)
    diags = [lemma_diagnostics(r, c, c1) for r in results]
    try:
        fit = fit_log_scaling(results, c1)
    except ConvergenceError:
        fit = None
    return StudyReport(results, diags, fit, c1, excess_summary(diags))


# -- inequality probes ------------------------------------------------------


def _log_avg_exact(rho, delta):
    """Average of ln(1/max(|x|, delta)) over B_rho."""
    inner = min(rho, delta)
    total = 0.5 * inner**2 * math.log(1 / delta)
    if rho > delta:
        # int_delta^rho -ln(r) r dr
        F = lambda r: -0.5 * r * r * math.log(r) + 0.25 * r * r  # noqa: E731
        total += F(rho) - F(delta)
    return 2 * total / rho**2


def probe_mean_drift(eps_list, family="log", delta=1e-3, n_r=192, n_theta=64) -> list:
    """|avg_{B_eps} w - avg_{B_1} w| / (sqrt(ln 1/eps) ||grad w||) on the mesh, with closed forms for w = log."""
    m = build_mesh(MeshSpec(n_r, n_theta), delta)
    fns = {
        "log": lambda x, y: np.log(1 / np.maximum(np.hypot(x, y), delta)),
        "constant": lambda x, y: np.full_like(x, 3.0),
        "linear": lambda x, y: x,
    }
    if family not in fns:
        raise ConfigError(f"unknown family {family!r}")
    w = sample(m, fns[family])
    grad = norms(w, Region.disk())["grad_l2"]
    avg1 = integral(w, Region.disk()) / math.pi
    rows = []
    for eps in eps_list:
        if not 0 < eps < 1:
            raise ConfigError("eps must lie in (0, 1)")
        if not m.has_radius(eps) or eps < 2 * m.r_min:
            raise ConfigError(f"eps={eps:g} is below the mesh resolution or not a ring")
        avg_eps = integral(w, Region.disk(eps)) / (math.pi * eps**2)
        drift = abs(avg_eps - avg1)
        scale = math.sqrt(math.log(1 / eps)) * grad
        row = {"eps": eps, "drift": drift, "grad_l2": grad, "ratio": drift / scale if scale > 0 else 0.0}
        if family == "log":
            ex_drift = abs(_log_avg_exact(eps, delta) - _log_avg_exact(1.0, delta))
            ex_grad = math.sqrt(2 * math.pi * math.log(1 / delta))
            row["drift_exact"] = ex_drift
            row["ratio_exact"] = ex_drift / (math.sqrt(math.log(1 / eps)) * ex_grad)
        rows.append(row)
    return rows


def probe_core_sup(h_list, family="oscillatory", n_r=64, n_theta=128) -> list:
    """sup_{B_h}|v - v(0) - avg(grad v).x| against h ||hess v||_{L2(B_h)}.

    B_h is mapped onto a fixed uniform unit-disk mesh, V(xi) = v(h xi); both
    sides are invariant under that change of variables.
    """
    fns = {
        "quadratic": lambda x, y: x * x + y * y,
        "linear": lambda x, y: 2.0 * x - 3.0 * y + 1.0,
        "oscillatory": lambda x, y: np.sin(10 * x) * np.sin(10 * y),
    }
    if family not in fns:
        raise ConfigError(f"unknown family {family!r}")
    fn = fns[family]
    m = build_mesh(MeshSpec(n_r, n_theta, grading="uniform"), 0.125)
    xy = m.node_xy
    rows = []
    for h in h_list:
        V = sample(m, lambda a, b: fn(h * a, h * b))
        bnd = V.values[m.boundary_nodes]
        # divergence theorem: int_{B_1} grad V = int_{circle} V n
        avg_grad = np.array([np.sum(bnd * np.cos(m.angles)), np.sum(bnd * np.sin(m.angles))]) * m.dtheta / math.pi
        lhs = float(np.max(np.abs(V.values - V.values[0] - xy @ avg_grad)))
        rhs = norms(V, Region.disk())["hess_l2"]
        rows.append({"h": h, "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else 0.0})
    return rows


def probe_interpolation(ks=(1, 2, 4, 8, 16), n_r=64, n_theta=128) -> list:
    """Trace and gradient interpolation ratios for f_k = sin(k x1) on the unit disk."""
    from .estimates import interpolation_ratio

    m = build_mesh(MeshSpec(n_r, n_theta, grading="uniform"), 0.125)
    rows = []
    for k in ks:
        f = sample(m, lambda x, y: np.sin(k * x))
        r = interpolation_ratio(f, Region.disk())
        rows.append({"k": k, "trace_ratio": float(r["trace_ratio"]), "grad_ratio": float(r["grad_ratio"])})
    return rows


__all__ = [
    "ScalingFit", "fit_log_scaling", "deviation_field", "LemmaDiagnostics", "lemma_diagnostics",
    "excess_summary", "dyadic_h_list", "mesh_refinement_gate", "StudyReport", "run_study",
    "probe_mean_drift", "probe_core_sup", "probe_interpolation", "ScalarField",
]
