import math

import numpy as np
import pytest
from scipy.integrate import quad

from dcone.energy import upper_bound_profile
from dcone.errors import ConfigError
from dcone.estimates import Region, ScalarField, integral, interpolation_ratio, norms, rescaled, sample
from dcone.mesh import MeshSpec, build_mesh
from dcone.study import deviation_field


@pytest.fixture(scope="module")
def unit():
    return build_mesh(MeshSpec(64, 128, grading="uniform"), 0.125)


def test_constant(unit):
    n = norms(sample(unit, lambda x, y: np.ones_like(x)), Region.disk())
    assert n["l2"] ** 2 == pytest.approx(math.pi, rel=1e-12)
    assert n["trace_l2"] ** 2 == pytest.approx(2 * math.pi, rel=1e-12)
    assert n["grad_l2"] < 1e-12 and n["hess_l2"] < 1e-12


def test_linear(unit):
    f = sample(unit, lambda x, y: x)
    r = interpolation_ratio(f, Region.disk())
    assert r["l2"] ** 2 == pytest.approx(math.pi / 4, rel=1e-10)
    assert r["grad_l2"] ** 2 == pytest.approx(math.pi, rel=1e-10)
    assert r["hess_l2"] < 1e-8
    assert r["trace_ratio"] == pytest.approx(4 / math.sqrt(5), rel=1e-9)
    assert r["grad_ratio"] == pytest.approx(4, rel=1e-6)


def test_quadratic_hessian(unit):
    # |hess(x^2 + y^2)|^2 = 8
    n = norms(sample(unit, lambda x, y: x * x + y * y), Region.disk())
    assert n["hess_l2"] ** 2 == pytest.approx(8 * math.pi, rel=1e-10)
    assert integral(sample(unit, lambda x, y: x * x + y * y), Region.disk()) == pytest.approx(math.pi / 2)


def test_log_family_on_graded_mesh():
    delta = 1e-3
    m = build_mesh(MeshSpec(192, 64), delta)
    f = sample(m, lambda x, y: np.log(1 / np.maximum(np.hypot(x, y), delta)))
    n = norms(f, Region.disk())
    l2sq = 2 * math.pi * (0.5 * delta**2 * math.log(delta) ** 2 + quad(lambda r: math.log(r) ** 2 * r, delta, 1)[0])
    assert n["l2"] ** 2 == pytest.approx(l2sq, rel=1e-6)
    # derivatives of the cubic reconstruction lose accuracy first
    assert n["grad_l2"] ** 2 == pytest.approx(2 * math.pi * math.log(1 / delta), rel=1e-4)
    assert n["trace_l2"] < 1e-12


def test_annulus_integral_additivity():
    m = build_mesh(MeshSpec(96, 64), 2.0**-6)
    f = sample(m, lambda x, y: np.exp(x) * np.cos(y))
    total = integral(f, Region.disk())
    parts = integral(f, Region.disk(2.0**-6)) + sum(integral(f, Region.dyadic(j)) for j in range(6))
    assert parts == pytest.approx(total, rel=1e-13)


@pytest.mark.parametrize("r0", [0.5, 0.25])
def test_scaling_law(r0):
    src = build_mesh(MeshSpec(192, 128), 2.0**-6)
    tgt = build_mesh(MeshSpec(64, 128, grading="uniform"), 0.125)
    f = sample(src, lambda x, y: np.sin(3 * x) * np.cos(2 * y) + x * x)
    g = rescaled(f, r0, tgt)
    big, small = norms(f, Region.disk(r0)), norms(g, Region.disk())
    assert small["l2"] == pytest.approx(big["l2"] / r0**2, rel=1e-4)
    assert small["grad_l2"] == pytest.approx(big["grad_l2"] / r0, rel=1e-4)
    assert small["hess_l2"] == pytest.approx(big["hess_l2"], rel=1e-4)


def test_rescaled_deviation_identity(wave192):
    """The rescaled deviation of the profile competitor has the predicted norms on each annulus."""
    h = 2.0**-6
    m = build_mesh(MeshSpec(96, 192), h)
    e = deviation_field(upper_bound_profile(wave192, h, m), wave192)
    for j in (0, 1, 2):
        r0 = 2.0**-j
        ehat = rescaled(e, r0)
        ref = norms(e, Region.dyadic(j))
        got = norms(ehat, Region.annulus(0.5, 1.0))
        assert got["l2"] == pytest.approx(ref["l2"] / r0**2, rel=1e-4)
        assert got["hess_l2"] == pytest.approx(ref["hess_l2"], rel=1e-4)


def test_errors(unit):
    z = ScalarField(unit, np.zeros(unit.n_nodes))
    with pytest.raises(ConfigError):
        interpolation_ratio(z, Region.disk())
    with pytest.raises(ConfigError):
        norms(z, Region.disk(0.3337))
    with pytest.raises(ConfigError):
        Region.annulus(0.5, 0.25)
    with pytest.raises(ConfigError):
        ScalarField(unit, np.zeros(3))
    with pytest.raises(ConfigError):
        ScalarField(unit, np.full(unit.n_nodes, np.nan))
    b = norms(sample(unit, lambda x, y: x), Region.boundary())
    assert b["trace_l2"] ** 2 == pytest.approx(math.pi) and math.isnan(b["l2"])
