"""JSON persistence: canonical dumps, hashes and field snapshots."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .curve import BoundaryCurve, CurveSpec, make_curve
from .energy import Field
from .errors import ConfigError
from .mesh import MeshSpec, build_mesh


def _default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _finite(doc):
    """Replace non-finite floats by None so the output is strict JSON."""
    if isinstance(doc, dict):
        return {k: _finite(v) for k, v in doc.items()}
    if isinstance(doc, (list, tuple)):
        return [_finite(v) for v in doc]
    if isinstance(doc, np.ndarray):
        return _finite(doc.tolist())
    if isinstance(doc, (float, np.floating)) and not np.isfinite(doc):
        return None
    return doc


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), default=_default, allow_nan=True)


def dumps(doc) -> str:
    return json.dumps(_finite(doc), sort_keys=True, indent=2, default=_default, allow_nan=False) + "\n"


def config_hash(doc) -> str:
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()[:16]


def provenance(config: dict, curve: BoundaryCurve | None) -> dict:
    return {
        "config_hash": config_hash(config),
        "curve_hash": None if curve is None else curve.content_hash(),
        "code_version": __version__,
    }


def write_json(path, doc):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(doc))
    return path


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


# -- field snapshots -------------------------------------------------------


def snapshot(y: Field, h: float, mesh_spec: MeshSpec | None = None) -> dict:
    m = y.mesh
    curve = y.curve
    return {
        "header": {
            "n_r": m.n_r,
            "n_theta": m.n_theta,
            "h": float(h),
            "curve_hash": None if curve is None else curve.content_hash(),
            "curve_spec": None if curve is None or curve.spec is None else curve.spec.to_dict(),
            "mesh_spec": (mesh_spec or m.spec).to_dict(),
            "code_version": __version__,
        },
        "values": y.values.ravel().tolist(),
    }


def load_snapshot(doc) -> tuple[Field, float]:
    """Rebuild (field, h) from a snapshot; the curve is regenerated and its hash checked."""
    try:
        head = doc["header"]
        values = np.asarray(doc["values"], dtype=float)
        h = float(head["h"])
        spec = MeshSpec(**head["mesh_spec"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed field snapshot ({exc})") from None
    mesh = build_mesh(spec, h)
    if (mesh.n_r, mesh.n_theta) != (head["n_r"], head["n_theta"]):
        raise ConfigError("snapshot header does not match its mesh spec")
    if values.size != mesh.n_nodes * 3:
        raise ConfigError("snapshot value count does not match the mesh")
    curve = None
    if head.get("curve_spec"):
        curve = make_curve(CurveSpec(**head["curve_spec"]))
        if curve.n != mesh.n_theta:
            curve = curve.resample(mesh.n_theta)
        if head.get("curve_hash") and curve.content_hash() != head["curve_hash"]:
            raise ConfigError("regenerated curve does not match the snapshot's curve hash")
    return Field(mesh, values.reshape(-1, 3), curve), h


def save_field(path, y: Field, h: float):
    return write_json(path, snapshot(y, h))


def load_field(path):
    return load_snapshot(read_json(path))
