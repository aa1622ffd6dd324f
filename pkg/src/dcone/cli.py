"""Command-line interface: ``dcone <command> [subcommand] [options]``.

Every command prints one JSON document on stdout. Artifacts are written to
the output directory (``--out``, else ``$DCONE_OUTPUT_DIR``, else
``dcone-out`` for commands that always produce files). Errors are printed
as JSON on stderr with exit code 2 (configuration), 3 (numerical failure)
or 4 (no convergence).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import io as dio
from .cone import c1_report
from .curve import BoundaryCurve, CurveSpec, make_curve, validate_curve
from .energy import assemble_energy, gradient_check, matched_curve, upper_bound_profile
from .errors import ConfigError, ConvergenceError, DconeError
from .mesh import MeshSpec, build_mesh
from .solve import SolveConfig, continuation_sweep, minimize

OUTPUT_ENV = "DCONE_OUTPUT_DIR"
DEFAULT_OUTPUT = "dcone-out"

logger = logging.getLogger("dcone")


@dataclass
class RunConfig:
    curve: CurveSpec = field(default_factory=CurveSpec)
    mesh: MeshSpec = field(default_factory=MeshSpec)
    solve: SolveConfig = field(default_factory=SolveConfig)
    h: list = field(default_factory=lambda: [2.0**-6])
    output_dir: str | None = None
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not self.h or any(not 0 < x < 0.25 for x in self.h):
            raise ConfigError("h values must lie in (0, 1/4)")

    def to_dict(self, with_output=True):
        doc = {
            "curve": self.curve.to_dict(),
            "mesh": self.mesh.to_dict(),
            "solve": self.solve.to_dict(),
            "h": list(self.h),
            "seed": self.seed,
            "threads": self.threads,
        }
        if with_output:
            doc["output_dir"] = self.output_dir
        return doc

    def provenance(self, curve: BoundaryCurve | None):
        out = dio.provenance(self.to_dict(with_output=False), curve)
        out.update(seed=self.seed, threads=self.threads)
        return out


def parse_h(text) -> float:
    """Accept plain floats and powers written as 2^-6 or 2**-6."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().replace("**", "^")
    try:
        if "^" in s:
            base, exp = s.split("^", 1)
            return float(base) ** float(exp)
        return float(s)
    except ValueError:
        raise ConfigError(f"cannot parse h value {text!r}") from None


def _config_from(args) -> RunConfig:
    doc = dio.read_json(args.config) if args.config else {}
    try:
        curve = dict(CurveSpec().to_dict(), **doc.get("curve", {}))
        mesh = dict(MeshSpec().to_dict(), **doc.get("mesh", {}))
        solve = dict(SolveConfig().to_dict(), **doc.get("solve", {}))
    except TypeError:
        raise ConfigError("config sections must be JSON objects") from None
    for key, name in (("family", "curve"), ("amplitude", "amplitude"), ("wavenumber", "wavenumber"),
                      ("resolution", "resolution")):
        if getattr(args, name, None) is not None:
            curve[key] = getattr(args, name)
    for key in ("n_r", "n_theta", "grading"):
        if getattr(args, key, None) is not None:
            mesh[key] = getattr(args, key)
    for key in ("gtol", "max_iter", "memory", "continuation"):
        if getattr(args, key, None) is not None:
            solve[key] = getattr(args, key)
    h = doc.get("h", [2.0**-6])
    h = [parse_h(x) for x in (h if isinstance(h, list) else [h])]
    if getattr(args, "h", None) is not None:
        h = [parse_h(args.h)]
    try:
        cfg = RunConfig(
            curve=CurveSpec(**curve),
            mesh=MeshSpec(**mesh),
            solve=SolveConfig(**solve),
            h=h,
            output_dir=args.out or doc.get("output_dir") or os.environ.get(OUTPUT_ENV),
            seed=args.seed if args.seed is not None else int(doc.get("seed", 0)),
            threads=args.threads if args.threads is not None else int(doc.get("threads", 1)),
        )
    except TypeError as exc:
        raise ConfigError(f"unknown configuration key ({exc})") from None
    # the curve must be sampled at a multiple of the angular mesh resolution
    if cfg.curve.resolution % cfg.mesh.n_theta:
        cfg = replace(cfg, curve=replace(cfg.curve, resolution=cfg.mesh.n_theta))
    return cfg


def _out_dir(cfg: RunConfig, always=False):
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return Path(DEFAULT_OUTPUT) if always else None


def _emit(doc, out_dir: Path | None, name: str):
    if out_dir is not None:
        dio.write_json(out_dir / name, doc)
    sys.stdout.write(dio.dumps(doc))


# -- commands -------------------------------------------------------------


def cmd_curve(args, cfg: RunConfig):
    if args.action == "gen":
        c = make_curve(cfg.curve)
        out = _out_dir(cfg, always=True)
        doc = {"curve": c.spec.to_dict(), "n": c.n, "info": c.info, "validation": validate_curve(c),
               "provenance": cfg.provenance(c)}
        dio.write_json(out / "curve_data.json", dict(c.to_dict(), provenance=cfg.provenance(c)))
        _emit(doc, out, "curve.json")
        return 0
    c = BoundaryCurve.from_dict(dio.read_json(args.file)) if args.file else make_curve(cfg.curve)
    report = validate_curve(c)
    _emit({"validation": report, "provenance": cfg.provenance(c)}, _out_dir(cfg), "validate.json")
    return 0 if report["ok"] else 3


def cmd_cone(args, cfg: RunConfig):
    c = make_curve(cfg.curve)
    _emit(dict(c1_report(c), provenance=cfg.provenance(c)), _out_dir(cfg), "c1.json")
    return 0


def cmd_mesh(args, cfg: RunConfig):
    m = build_mesh(cfg.mesh, cfg.h[0])
    doc = m.summary()
    doc["provenance"] = cfg.provenance(None)
    _emit(doc, _out_dir(cfg), "mesh.json")
    return 0


def cmd_energy(args, cfg: RunConfig):
    c = make_curve(cfg.curve)
    if args.action == "eval":
        if not args.field:
            raise ConfigError("energy eval needs --field")
        y, h = dio.load_field(args.field)
        doc = {"breakdown": assemble_energy(y, h).to_dict()}
        c = y.curve
    else:
        h = cfg.h[0]
        m = build_mesh(cfg.mesh, h)
        y = upper_bound_profile(c, h, m)
        if args.action == "profile":
            doc = {"breakdown": assemble_energy(y, h).to_dict()}
        else:
            rng = np.random.default_rng(cfg.seed)
            noise = rng.standard_normal(y.values.shape) * 0.01 * m.node_radius[:, None]
            noise[m.constrained] = 0.0
            y = y.with_values(y.values + noise)
            doc = {"gradient_check": gradient_check(y, h, args.directions, seed=cfg.seed)}
    doc["provenance"] = cfg.provenance(c)
    _emit(doc, _out_dir(cfg), f"energy_{args.action}.json")
    return 0


def _result_doc(res, cfg, c):
    doc = res.to_dict()
    doc["provenance"] = cfg.provenance(c)
    doc["config"] = cfg.to_dict(with_output=False)
    return doc


def cmd_solve(args, cfg: RunConfig):
    c = make_curve(cfg.curve)
    h = cfg.h[0]
    m = build_mesh(cfg.mesh, h)
    res = minimize(upper_bound_profile(c, h, m), h, cfg.solve, initialization="profile")
    out = _out_dir(cfg, always=True)
    dio.save_field(out / "field.json", res.field, h)
    _emit(_result_doc(res, cfg, matched_curve(c, m)), out, "solve.json")
    if not res.converged:
        raise ConvergenceError(f"solve stopped with reason {res.reason!r}")
    return 0


def _h_range(h_from, h_to, factor):
    if factor <= 1:
        raise ConfigError("factor must exceed 1")
    if not h_to < h_from:
        raise ConfigError("--h-to must be smaller than --h-from")
    out = []
    h = h_from
    while h >= h_to * (1 - 1e-12):
        out.append(h)
        h /= factor
    return out


def cmd_sweep(args, cfg: RunConfig):
    from .study import excess_summary, fit_log_scaling, lemma_diagnostics

    c = make_curve(cfg.curve)
    if args.h_from is not None or args.h_to is not None:
        hs = _h_range(parse_h(args.h_from or "2^-4"), parse_h(args.h_to or "2^-9"), args.factor)
    elif len(cfg.h) > 1:
        hs = cfg.h
    else:
        hs = _h_range(2.0**-4, 2.0**-9, 2.0)
    cfg = replace(cfg, h=hs)
    results = continuation_sweep(c, hs, cfg.solve, cfg.mesh)
    c1 = c1_report(c)["c1"]
    diags = [lemma_diagnostics(r, c, c1) for r in results]
    out = _out_dir(cfg, always=True)
    rows = []
    for r, d in zip(results, diags):
        row = r.summary()
        row.update(ln_inv_h=math.log(1 / r.h), excess_upper=d.excess_upper, excess_lower=d.excess_lower,
                   sup_core=d.sup_core, sup_ratio=d.sup_ratio, membrane_over_h2=d.membrane_over_h2)
        rows.append(row)
        if args.snapshots:
            dio.save_field(out / f"field_h{r.h:.6g}.json", r.field, r.h)
    try:
        fit = fit_log_scaling(results, c1).to_dict()
    except ConvergenceError as exc:
        fit = {"error": str(exc)}
    doc = {
        "c1": c1,
        "rows": rows,
        "fit": fit,
        "excess": excess_summary(diags),
        "diagnostics": [d.to_dict() for d in diags],
        "provenance": cfg.provenance(c),
        "config": cfg.to_dict(with_output=False),
    }
    _write_csv(out / "sweep.csv", rows, ["h", "ln_inv_h", "energy", "energy_over_h2", "membrane", "bending",
                                          "iterations", "reason", "excess_upper", "excess_lower",
                                          "sup_core", "sup_ratio", "membrane_over_h2"])
    _emit(doc, out, "sweep.json")
    bad = [r.h for r in results if not r.converged]
    if bad:
        raise ConvergenceError(f"no convergence at h={bad}")
    return 0


def _write_csv(path, rows, columns):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(row[k]) if isinstance(row[k], float) else row[k] for k in columns])


def _read_table(path):
    path = Path(path)
    if path.suffix == ".csv":
        try:
            with open(path, newline="") as fh:
                rows = list(csv.DictReader(fh))
        except FileNotFoundError:
            raise ConfigError(f"no such file: {path}") from None
        return rows, None
    doc = dio.read_json(path)
    if isinstance(doc, list):
        return doc, None
    return doc.get("rows", []), doc.get("c1")


def cmd_fit(args, cfg: RunConfig):
    from .study import fit_log_scaling

    rows, c1 = _read_table(args.table)
    if args.c1 is not None:
        c1 = args.c1
    try:
        rows = [{"h": float(r["h"]), "energy_over_h2": float(r["energy_over_h2"]),
                 "reason": r.get("reason") or "gtol"} for r in rows]
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"table needs columns h and energy_over_h2 ({exc})") from None
    fit = fit_log_scaling(rows, c1)
    doc = dict(fit.to_dict(), provenance=cfg.provenance(None), table=str(args.table))
    _emit(doc, _out_dir(cfg), "fit.json")
    return 0


def cmd_report(args, cfg: RunConfig):
    from .study import fit_log_scaling

    rows, c1 = _read_table(args.table)
    if args.c1 is not None:
        c1 = args.c1
    if c1 is None:
        c1 = c1_report(make_curve(cfg.curve))["c1"]
    cols = []
    for r in rows:
        h = float(r["h"])
        L = math.log(1 / h)
        E = float(r["energy_over_h2"])
        cols.append({
            "h": h, "ln_inv_h": L, "energy_over_h2": E, "c1_ln_inv_h": c1 * L,
            "lower_shape": c1 * L - c1 * math.log(L), "excess_upper": E - c1 * L,
            "excess_lower": E - c1 * L + c1 * math.log(L),
            "reason": r.get("reason") or "gtol",
        })
    out = _out_dir(cfg, always=True)
    _write_csv(out / "report.csv", cols, list(cols[0]) if cols else ["h"])
    try:
        fit = fit_log_scaling(cols, c1).to_dict()
    except ConvergenceError as exc:
        fit = {"error": str(exc)}
    _emit({"c1": c1, "columns": cols, "fit": fit, "provenance": cfg.provenance(None)}, out, "report.json")
    return 0


def cmd_probe(args, cfg: RunConfig):
    from .study import probe_core_sup, probe_interpolation, probe_mean_drift

    if args.action == "drift":
        eps = [parse_h(e) for e in args.values] if args.values else [2.0**-p for p in range(2, 9)]
        rows = probe_mean_drift(eps, family=args.family or "log")
    elif args.action == "trace":
        ks = [int(k) for k in args.values] if args.values else [1, 2, 4, 8, 16]
        rows = probe_interpolation(ks)
    else:
        hs = [parse_h(e) for e in args.values] if args.values else [2.0**-p for p in range(3, 7)]
        rows = probe_core_sup(hs, family=args.family or "oscillatory")
    _emit({"probe": args.action, "rows": rows, "provenance": cfg.provenance(None)}, _out_dir(cfg),
          f"probe_{args.action}.json")
    return 0


# -- parser ---------------------------------------------------------------


def _common(p):
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="JSON configuration file; flags override it")
    g.add_argument("--curve", choices=["equator", "latitude-wave"])
    g.add_argument("--amplitude", type=float)
    g.add_argument("--wavenumber", type=int)
    g.add_argument("--resolution", type=int)
    g.add_argument("--n-r", dest="n_r", type=int)
    g.add_argument("--n-theta", dest="n_theta", type=int)
    g.add_argument("--grading", choices=["geometric", "uniform"])
    g.add_argument("--h", help="sheet thickness, e.g. 0.015625 or 2^-6")
    g.add_argument("--gtol", type=float)
    g.add_argument("--max-iter", dest="max_iter", type=int)
    g.add_argument("--memory", type=int)
    g.add_argument("--continuation", choices=["from_profile", "from_previous_h"])
    g.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV})")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int)
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="dcone", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curve", help="generate or validate boundary curves")
    p.add_argument("action", choices=["gen", "validate"])
    p.add_argument("--file", help="curve JSON to validate")
    _common(p)

    p = sub.add_parser("cone", help="cone constants")
    p.add_argument("action", choices=["c1"])
    _common(p)

    p = sub.add_parser("mesh", help="mesh summary")
    p.add_argument("action", choices=["info"])
    _common(p)

    p = sub.add_parser("energy", help="energy of a snapshot or of the profile; gradient check")
    p.add_argument("action", choices=["eval", "profile", "check"])
    p.add_argument("--field", help="field snapshot JSON (eval)")
    p.add_argument("--directions", type=int, default=20)
    _common(p)

    p = sub.add_parser("solve", help="minimise from the profile at one h")
    _common(p)

    p = sub.add_parser("sweep", help="continuation sweep over h")
    p.add_argument("--h-from", dest="h_from")
    p.add_argument("--h-to", dest="h_to")
    p.add_argument("--factor", type=float, default=2.0)
    p.add_argument("--snapshots", action="store_true", help="write a field snapshot per h")
    _common(p)

    p = sub.add_parser("fit", help="least-squares fit of E/h^2 against ln(1/h)")
    p.add_argument("--table", required=True, help="sweep CSV or JSON")
    p.add_argument("--c1", type=float)
    _common(p)

    p = sub.add_parser("report", help="plot-ready columns from a sweep table")
    p.add_argument("--table", required=True)
    p.add_argument("--c1", type=float)
    _common(p)

    p = sub.add_parser("probe", help="inequality probes")
    p.add_argument("action", choices=["drift", "trace", "core-sup"])
    p.add_argument("--family")
    p.add_argument("values", nargs="*", help="eps (drift), k (trace) or h (core-sup) values")
    _common(p)
    return parser


COMMANDS = {
    "curve": cmd_curve, "cone": cmd_cone, "mesh": cmd_mesh, "energy": cmd_energy, "solve": cmd_solve,
    "sweep": cmd_sweep, "fit": cmd_fit, "report": cmd_report, "probe": cmd_probe,
}


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    # a '*' positional is filled before later options are seen; collect the rest here
    if extra and args.command == "probe" and not any(e.startswith("-") for e in extra):
        args.values = list(args.values) + extra
    elif extra:
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from(args)
        return COMMANDS[args.command](args, cfg)
    except DconeError as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        sys.stderr.write(json.dumps(err) + "\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
