import dataclasses
import math

import numpy as np
import pytest

from beameq.analytic import pinch_density_radial
from beameq.coupling import current_and_charge
from beameq.errors import (BlowUp, JacobianSingular, NoConvergence, NotConformal,
                           TailNotAsymptotic)
from beameq.pipeline import pinch_mismatch, radial_solution
from beameq.radial import (bennett_line_densities, central_w_for_density, integrate_profile,
                           ode_defect, solve_equilibrium, solve_equilibrium_conformal,
                           tail_extend, validate_confinement)

from conftest import make_config


def test_forward_pinch_matches_closed_form(pinch_config):
    prof = radial_solution(pinch_config)
    err, k = pinch_mismatch(prof)
    assert k == pytest.approx(1.0, rel=1e-12)
    assert err < 1e-5


@pytest.mark.parametrize("k", [0.1, 7.0])
def test_forward_pinch_any_scale(pinch_config, k):
    cfg = dataclasses.replace(pinch_config,
                              solver=dataclasses.replace(pinch_config.solver, scale_k=k))
    err, k_read = pinch_mismatch(radial_solution(cfg))
    assert k_read == pytest.approx(k, rel=1e-12)
    assert err < 1e-5


def test_pinch_tail_exponent_is_four(pinch_config):
    prof = radial_solution(pinch_config)
    assert np.allclose(prof.tail.alpha, 4.0, atol=0.02)
    assert np.allclose(prof.line_densities, pinch_config.line_densities, rtol=1e-6)


def test_conformal_profile_is_exact(pinch_profile, pinch_config):
    n = pinch_config.line_densities
    exact = pinch_density_radial(1.0, n[0], pinch_profile.r)
    assert np.max(np.abs(pinch_profile.rho[0] / exact - 1)) < 1e-10
    assert pinch_profile.kind == "conformal"


def test_conformal_solve_rejects_other_configs(bennett_config):
    with pytest.raises(NotConformal):
        solve_equilibrium_conformal(bennett_config)


def test_inverse_mode_refuses_conformal_bennett(pinch_config):
    with pytest.raises(JacobianSingular):
        solve_equilibrium(pinch_config)


def test_regularity_and_monotonicity(bennett_profile):
    assert np.all(bennett_profile.du[:, 0] == 0)
    assert np.all(np.diff(bennett_profile.rho, axis=1) < 0)
    assert np.all(np.diff(bennett_profile.u, axis=1) < 0)


def test_bennett_targets_reproduced(bennett_profile, bennett_config):
    assert np.allclose(bennett_profile.line_densities, bennett_config.line_densities,
                       rtol=bennett_config.solver.newton_tol)
    rho0 = bennett_profile.rho[0, 0]
    k = bennett_config.solver.scale_k
    assert rho0 == pytest.approx(bennett_config.plus.line_density * k ** 2 / math.pi, rel=1e-9)


def test_tf_targets_reproduced(tf_profile, tf_config):
    assert np.allclose(tf_profile.line_densities, tf_config.line_densities,
                       rtol=tf_config.solver.newton_tol)
    assert tf_profile.kind == "inverse"


def test_doubling_rmax_is_stable(bennett_profile):
    cfg = bennett_profile.config
    p1 = integrate_profile(cfg, bennett_profile.central_w)
    p2 = integrate_profile(cfg, bennett_profile.central_w, r_max=2.0 * p1.r_max)
    assert np.max(np.abs(p2.line_densities / p1.line_densities - 1)) < 1e-7
    assert np.max(np.abs(p2.masses / p1.masses - 1)) < 1e-7


def test_ode_defect_small(bennett_profile):
    assert ode_defect(bennett_profile) < 1e-5


def test_incompatible_bennett_targets():
    n = bennett_line_densities(make_config(nu=(0.9, -0.9)), 1.3)
    cfg = make_config(nu=(0.9, -0.9), n=1.1 * n)
    with pytest.raises(NoConvergence) as info:
        solve_equilibrium(cfg)
    assert "Bennett identity" in str(info.value)


def test_bennett_line_densities_satisfy_identity():
    cfg = make_config(nu=(0.7, -0.3))
    n = bennett_line_densities(cfg, 0.8)
    assert n[1] / n[0] == pytest.approx(0.8)
    cur, chg = current_and_charge(cfg, n)
    assert cur ** 2 - chg ** 2 == pytest.approx(2 * np.sum(n / cfg.betas), rel=1e-13)


def test_tail_window_in_core_is_rejected(bennett_profile):
    core = bennett_profile.restricted(3.0)
    with pytest.raises(TailNotAsymptotic):
        tail_extend(core)


def test_confinement_messages():
    weak = make_config(n=(0.1, 0.1))
    rep = validate_confinement(weak)
    assert not rep.passed
    assert all("unconfined" in m for m in rep.messages)
    marginal = make_config(n=(2 * math.sqrt(0.75),) * 2)
    assert "marginal" in validate_confinement(marginal).messages[0]
    near = make_config(n=(2.02 * math.sqrt(0.75),) * 2)
    assert "policy" in validate_confinement(near).messages[0]
    with pytest.raises(NoConvergence):
        solve_equilibrium(weak)


def test_non_finite_central_data():
    cfg = make_config()
    with pytest.raises(BlowUp):
        integrate_profile(cfg, (math.nan, 0.0))


def test_bennett_scale_invariance(bennett_profile, bennett_config):
    # rho -> lambda^2 rho(lambda r) maps solutions to solutions with the same N
    rho0 = 4.0 * bennett_profile.rho[:, 0]
    w = central_w_for_density(bennett_config, rho0)
    prof = integrate_profile(bennett_config, w)
    assert prof.rho[:, 0] == pytest.approx(rho0, rel=1e-12)
    assert np.allclose(prof.line_densities, bennett_profile.line_densities, rtol=1e-8)
