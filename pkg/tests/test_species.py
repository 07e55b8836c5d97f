import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import kn, spence

from beameq.errors import QuadratureFailure
from beameq.species import (Model, SpeciesModel, SpeciesParams, boltzmann_angular_kernel,
                            density, fermi_angular_kernel, fugacity, primitive,
                            primitive_angular_kernel, softplus, softplus_primitive)

finite = dict(allow_nan=False, allow_infinity=False)


def phi_oracle(x):
    if x < -1.0:
        # alternating series, convergent for x < 0
        return sum((-1) ** (k + 1) * math.exp(k * x) / k ** 2 for k in range(1, 80))
    # -Li2(-e^x) through scipy's spence(z) = Li2(1 - z)
    return -spence(1.0 + math.exp(x))


# -- scalar kernels -------------------------------------------------------

def test_phi_at_zero_is_pi_squared_over_twelve():
    assert abs(softplus_primitive(0.0) - math.pi ** 2 / 12.0) < 1e-12


@pytest.mark.parametrize("x", [-40.0, -5.0, -0.7, 0.3, 1.0, 4.0, 25.0])
def test_phi_matches_dilogarithm(x):
    assert softplus_primitive(x) == pytest.approx(phi_oracle(x), rel=1e-13, abs=1e-300)


@given(st.floats(-30, 30, **finite))
def test_phi_derivative_is_softplus(x):
    h = 1e-5
    fd = (softplus_primitive(x + h) - softplus_primitive(x - h)) / (2 * h)
    assert fd == pytest.approx(softplus(x), rel=1e-7, abs=1e-12)


def test_softplus_overflow_safe():
    assert softplus(800.0) == 800.0
    assert softplus(-800.0) == 0.0
    assert np.all(np.isfinite(softplus(np.array([-1e4, 0.0, 1e4]))))


def brute_angular(fn, a, b):
    val, _ = quad(lambda mu: fn(a + b * mu), -1.0, 1.0, epsabs=0, epsrel=1e-13, limit=200)
    return val


@settings(max_examples=60, deadline=None)
@given(st.floats(-30, 30, **finite), st.floats(0, 30, **finite))
def test_fermi_kernel_matches_angular_quadrature(a, b):
    oracle = brute_angular(lambda x: 1.0 / (1.0 + math.exp(-x)) if x > -700 else 0.0, a, b)
    assert fermi_angular_kernel(a, b) == pytest.approx(oracle, rel=1e-10, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(st.floats(-30, 30, **finite), st.floats(0, 30, **finite))
def test_primitive_kernel_matches_angular_quadrature(a, b):
    oracle = brute_angular(lambda x: float(softplus(x)), a, b)
    assert primitive_angular_kernel(a, b) == pytest.approx(oracle, rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("a,b", [(1.0, 2.0), (-3.0, 0.5), (0.0, 1e-6), (2.0, 40.0)])
def test_boltzmann_kernel_closed_form(a, b):
    assert boltzmann_angular_kernel(a, b) == pytest.approx(
        brute_angular(math.exp, a, b), rel=1e-12)


def test_kernels_even_in_b():
    assert fermi_angular_kernel(0.3, -2.0) == fermi_angular_kernel(0.3, 2.0)


def test_small_b_branch_is_continuous():
    for a in (-5.0, 0.0, 3.0):
        lo = fermi_angular_kernel(a, 0.999e-4)
        hi = fermi_angular_kernel(a, 1.001e-4)
        assert lo == pytest.approx(hi, rel=1e-9)
        lo = primitive_angular_kernel(a, 0.999e-4)
        hi = primitive_angular_kernel(a, 1.001e-4)
        assert lo == pytest.approx(hi, rel=1e-9)


# -- species parameters ---------------------------------------------------

def test_species_params_derived_quantities():
    sp = SpeciesParams(1, 2.0, 0.5, 0.6, 1.0)
    assert sp.beta == pytest.approx(1.0 / (0.5 * 0.8))
    assert sp.min_energy == pytest.approx(2.0 * 0.8)


@pytest.mark.parametrize("field,value", [("charge", 0.0), ("mass", 0.0), ("temperature", -1.0),
                                         ("drift", 1.0), ("line_density", 0.0),
                                         ("mass", float("nan"))])
def test_species_params_validation(field, value):
    kw = dict(charge=1.0, mass=1.0, temperature=1.0, drift=0.1, line_density=1.0)
    kw[field] = value
    with pytest.raises(ValueError):
        SpeciesParams(**kw)


def test_model_aliases():
    assert Model.parse("tf") is Model.THOMAS_FERMI
    assert Model.parse("Bennett") is Model.BENNETT
    assert Model.parse(Model.BENNETT) is Model.BENNETT
    with pytest.raises(ValueError):
        Model.parse("maxwell")


# -- densities --------------------------------------------------------------

SP = SpeciesParams(1.0, 1.0, 1.0, 0.5, 1.0)


@pytest.mark.parametrize("nu,temp", [(0.0, 1.0), (0.5, 1.0), (-0.9, 0.3), (0.2, 5.0)])
def test_bennett_density_matches_bessel_closed_form(nu, temp):
    sp = SpeciesParams(1.0, 1.0, temp, nu, 1.0)
    gamma = 1.0 / math.sqrt(1.0 - nu * nu)
    w = 0.3
    exact = math.exp(sp.beta * w) * 2.0 * gamma * 4.0 * math.pi * temp * kn(2, 1.0 / temp)
    assert density(Model.BENNETT, sp, w) == pytest.approx(exact, rel=1e-10)


def test_bennett_fugacity_scaling_is_exact():
    mdl = SpeciesModel(Model.BENNETT, SP)
    for d in (0.1, -3.0, 7.5):
        ratio = mdl.density(0.2 + d) / mdl.density(0.2)
        assert ratio == pytest.approx(math.exp(SP.beta * d), rel=1e-14)
        assert mdl.primitive(0.2) == pytest.approx(mdl.density(0.2) / SP.beta, rel=1e-15)


@pytest.mark.parametrize("z", [1e-3, 0.5, 1.0, 30.0])
def test_primitive_derivative_is_density(z):
    mdl = SpeciesModel(Model.THOMAS_FERMI, SP, (SP.min_energy - 10, SP.min_energy + 5))
    w = SP.min_energy + math.log(z) / SP.beta
    h = 1e-4 / SP.beta
    fd = (mdl.primitive(w + h) - mdl.primitive(w - h)) / (2 * h)
    assert fd == pytest.approx(mdl.density(w), rel=1e-6)


def test_tf_approaches_bennett_at_low_fugacity():
    w = SP.min_energy + math.log(1e-5) / SP.beta
    tf = density(Model.THOMAS_FERMI, SP, w)
    bn = density(Model.BENNETT, SP, w)
    # first correction of the Fermi factor is -z e^{-2 beta E} term: ratio 1 - O(z)
    assert 0 < 1 - tf / bn < 1e-5


@pytest.mark.parametrize("temp,rel", [(0.05, 3e-6), (0.01, 1e-8)])
def test_tf_degenerate_limit_is_fermi_sphere(temp, rel):
    # filled Fermi sphere plus the leading Sommerfeld correction; the
    # remainder is O(T^4)
    sp = SpeciesParams(1.0, 1.0, temp, 0.0, 1.0)
    w = 2.0
    pf = math.sqrt(w * w - 1.0)
    sphere = 2.0 * 4.0 * math.pi * (pf ** 3 / 3.0
                                    + math.pi ** 2 / 6.0 * temp ** 2 * (pf + w * w / pf))
    assert density(Model.THOMAS_FERMI, sp, w) == pytest.approx(sphere, rel=rel)


def test_series_branch_agrees_with_quadrature():
    mdl = SpeciesModel(Model.THOMAS_FERMI, SP, (SP.min_energy - 10, SP.min_energy + 2))
    w_edge = SP.min_energy + math.log(0.02) / SP.beta
    lo = mdl.density(w_edge - 1e-13)
    hi = mdl.density(w_edge + 1e-13)
    assert lo == pytest.approx(hi, rel=1e-10)
    oracle, _ = quad(lambda p: 4 * math.pi * p * p * fermi_angular_kernel(
        SP.beta * (w_edge - math.sqrt(1 + p * p)), SP.beta * SP.drift * p),
        0, 80, epsabs=0, epsrel=1e-13, limit=400)
    assert lo == pytest.approx(oracle, rel=1e-10)


def test_scalar_pair_matches_vector_path():
    mdl = SpeciesModel(Model.THOMAS_FERMI, SP, (SP.min_energy - 10, SP.min_energy + 3))
    for w in (SP.min_energy - 0.5, SP.min_energy + 0.3, SP.min_energy + 3.0):
        g, p = mdl.density_and_primitive(w)
        assert g == pytest.approx(float(mdl.density(np.array([w]))[0]), rel=1e-13)
        assert p == pytest.approx(float(mdl.primitive(np.array([w]))[0]), rel=1e-13)


@pytest.mark.parametrize("model", [Model.BENNETT, Model.THOMAS_FERMI])
def test_invert_density_round_trip(model):
    mdl = SpeciesModel(model, SP, (SP.min_energy - 10, SP.min_energy + 3))
    for w in (SP.min_energy - 2.0, SP.min_energy + 1.0):
        assert mdl.invert_density(float(mdl.density(w))) == pytest.approx(w, rel=1e-10, abs=1e-12)


def test_density_increases_with_w():
    w = np.linspace(SP.min_energy - 5, SP.min_energy + 3, 50)
    g = density(Model.THOMAS_FERMI, SP, w)
    assert np.all(np.diff(g) > 0)


def test_fugacity_definition():
    assert fugacity(SP, SP.min_energy) == 1.0


def test_primitive_module_function():
    w = SP.min_energy
    assert primitive(Model.BENNETT, SP, w) == pytest.approx(density(Model.BENNETT, SP, w) / SP.beta)


def test_quadrature_failure_is_reported():
    from beameq.species import adaptive_rule

    with pytest.raises(QuadratureFailure):
        adaptive_rule(lambda p: np.full_like(p, np.nan), 1.0)
