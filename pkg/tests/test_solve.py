import math

import numpy as np
import pytest

from dcone.cone import c1_constant
from dcone.curve import CurveSpec, make_curve
from dcone.energy import Field, cone_field, upper_bound_profile
from dcone.errors import ConfigError, ConvergenceError
from dcone.mesh import MeshSpec, build_mesh
from dcone.solve import SolveConfig, continuation_sweep, minimize, require_converged, transfer_field

SPEC = MeshSpec(64, 64)


@pytest.mark.parametrize("kwargs", [dict(gtol=0), dict(max_iter=0), dict(c1=0.95), dict(continuation="x"),
                                    dict(precond_beta=-1)])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        SolveConfig(**kwargs)


def test_config_round_trip():
    cfg = SolveConfig(gtol=1e-7, continuation="from_profile")
    assert SolveConfig.from_dict(cfg.to_dict()) == cfg


def test_equator_relaxes_to_flat(equator64):
    h = 2.0**-5
    m = build_mesh(SPEC, h)
    res = minimize(upper_bound_profile(equator64, h, m), h)
    assert res.converged and res.iterations <= 500
    assert res.energy < 1e-10


@pytest.fixture(scope="module")
def wave_solution(wave64):
    h = 2.0**-5
    m = build_mesh(SPEC, h)
    y0 = upper_bound_profile(wave64, h, m)
    return y0, minimize(y0, h)


def test_solution_properties(wave_solution):
    y0, res = wave_solution
    assert res.converged
    assert res.gnorm_history[-1] <= 1e-8
    c = res.field.mesh.constrained
    assert np.array_equal(res.field.values[c], y0.values[c])
    assert res.energy < res.initial_energy
    assert all(b <= a for a, b in zip(res.energy_history, res.energy_history[1:]))
    s = res.summary()
    assert s["energy_over_h2"] == pytest.approx(res.scaled_energy)
    assert "seconds" not in s
    assert res.to_dict()["mesh"]["n_r"] == 64


def test_singleton_sweep_matches_minimize(wave64, wave_solution):
    _, res = wave_solution
    (sw,) = continuation_sweep(wave64, [2.0**-5], mesh_spec=SPEC)
    assert sw.initialization == "profile"
    assert np.array_equal(sw.field.values, res.field.values)


def test_sweep_validation(wave64):
    with pytest.raises(ConfigError):
        continuation_sweep(wave64, [2.0**-6, 2.0**-5], mesh_spec=SPEC)
    with pytest.raises(ConfigError):
        continuation_sweep(wave64, [0.3], mesh_spec=SPEC)
    with pytest.raises(ConfigError):
        continuation_sweep(wave64, [], mesh_spec=SPEC)
    with pytest.raises(ConfigError, match="h=0.0078125"):
        continuation_sweep(wave64, [2.0**-7], mesh_spec=MeshSpec(32, 64))


def test_inadmissible_start(wave64):
    h = 2.0**-5
    m = build_mesh(SPEC, h)
    y = upper_bound_profile(wave64, h, m)
    bad = y.values.copy()
    bad[m.boundary_nodes[0]] += 1e-3
    with pytest.raises(ConfigError):
        minimize(y.with_values(bad), h)
    with pytest.raises(ConfigError):
        minimize(Field(m, y.values), h)


def test_transfer_field(wave64):
    h = 2.0**-5
    m = build_mesh(SPEC, h)
    y = cone_field(wave64, m)
    same = transfer_field(y, m, wave64)
    assert np.allclose(same.values, y.values, atol=1e-14)
    src = build_mesh(MeshSpec(64, 128), h)
    m2 = build_mesh(MeshSpec(80, 64), 2.0**-6)
    z = transfer_field(cone_field(make_curve(CurveSpec(resolution=128)), src), m2, wave64)
    assert z.constraint_violation() == 0.0
    assert np.allclose(z.values, cone_field(wave64, m2).values, atol=1e-6)


def test_warm_and_cold_agree_and_energy_grows(wave64):
    c1 = c1_constant(wave64)
    hs = [2.0**-6, 2.0**-7]
    warm = require_converged(continuation_sweep(wave64, hs, mesh_spec=SPEC))
    cold = continuation_sweep(wave64, hs, SolveConfig(continuation="from_profile"), mesh_spec=SPEC)
    assert warm[1].initialization.startswith("previous_h")
    assert cold[1].scaled_energy == pytest.approx(warm[1].scaled_energy, rel=1e-6)
    inc = warm[1].scaled_energy - warm[0].scaled_energy
    assert 0 < inc < c1 * math.log(2)


def test_require_converged(wave64):
    h = 2.0**-5
    res = minimize(upper_bound_profile(wave64, h, build_mesh(SPEC, h)), h, SolveConfig(max_iter=2))
    assert res.reason == "max_iter"
    with pytest.raises(ConvergenceError):
        require_converged([res])


def test_minimum_is_insensitive_to_grading(wave192):
    h = 2.0**-4
    energies = {}
    for spec in (MeshSpec(96, 192), MeshSpec(256, 192, grading="uniform")):
        res = minimize(upper_bound_profile(wave192, h, build_mesh(spec, h)), h)
        assert res.reason == "gtol"
        energies[spec.grading] = res.scaled_energy
    assert energies["geometric"] == pytest.approx(energies["uniform"], rel=3e-3)
