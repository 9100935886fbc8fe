import warnings

import numpy as np
import pytest

from bsd2dtn.assembly import assemble
from bsd2dtn.elliptic_dtn import dtn_direct
from bsd2dtn.geometry import boundary_probes, build_box_mesh, make_field
from bsd2dtn.helpers import Bsd2DtnWarning, CFLError, ConfigError
from bsd2dtn.hyperbolic_dtn import (
    SineKernel,
    TimeProfile,
    cfl_limit,
    duhamel,
    four_term_split,
    hyperbolic_difference,
    remainder_telescoping,
    wave_formula,
    wave_step,
)
from bsd2dtn.spectral import eigensolve


warnings.simplefilter("ignore")

mesh = build_box_mesh(2, 8)
bump = "256*(x1*(1-x1)*x2*(1-x2))**2"
op = assemble(mesh, make_field("conformal", "1", dict(alpha=2.0), mesh))
field_eps = make_field("conformal", "1 + 0.1*" + bump, dict(alpha=2.0), mesh)
op_eps = assemble(mesh, field_eps)
sd = eigensolve(op, op.n_interior)
sd_eps = eigensolve(op_eps, op_eps.n_interior)
probes = boundary_probes(mesh, 1)
ell = mesh.n + 1
derivs = [dtn_direct(op, 0.0, j) for j in range(ell + 1)]
times = np.linspace(0.0, 1.0, 33)


def test_monomial_profile():
    eta = TimeProfile.monomial(8)
    assert eta(2.0) == pytest.approx(256.0)
    assert eta.derivative(8)(0.3) == pytest.approx(40320.0)
    assert eta.vanishing_order() == 8
    assert TimeProfile([0.0]).is_zero


def test_windowed_ramp():
    eta = TimeProfile.windowed_ramp(8, 2.0, 3)
    assert eta(2.0) == pytest.approx(0.0, abs=1e-12)
    assert eta.vanishing_order() == 8
    assert eta.degree == 11
    with pytest.raises(ConfigError):
        TimeProfile.windowed_ramp(8, 0.0, 3)


def test_profile_classes():
    assert TimeProfile.monomial(8).check_class(8) == "strict"
    with pytest.warns(Bsd2DtnWarning, match="relaxed"):
        assert TimeProfile.monomial(7).check_class(8) == "relaxed"
    with pytest.raises(ConfigError):
        TimeProfile.monomial(5).check_class(8)


def test_sine_kernel():
    kernel = SineKernel(sd.lambdas[:5])
    check = kernel.ode_residual(1.0)
    assert check["ode"].max() < 1e-4
    assert check["initial_value"] == 0.0
    assert check["initial_slope"] < 1e-12
    with pytest.raises(ConfigError):
        SineKernel([1.0, 0.0])


def test_duhamel_of_constant():
    lam = np.array([1.0, 4.0, 30.0])
    conv = duhamel(lam, TimeProfile([1.0]), times)
    omega = np.sqrt(lam)[:, None]
    np.testing.assert_allclose(conv, (1 - np.cos(omega * times)) / omega**2, atol=1e-12)


def test_duhamel_methods_agree():
    lam = sd.lambdas[:4]
    eta = TimeProfile.monomial(3)
    closed = duhamel(lam, eta, times)
    trapezoid = duhamel(lam, eta, times, method="trapezoid", panels=256)
    np.testing.assert_allclose(trapezoid, closed, atol=1e-7)
    with pytest.raises(ConfigError):
        duhamel(lam, eta, times, method="simpson")


def test_formula_matches_stepping():
    eta = TimeProfile.monomial(2 * mesh.n + 4)
    dt = mesh.h / 8
    stepped = wave_step(op, probes, eta, 1.0, dt, alpha=2.0)
    formula = wave_formula(sd, derivs, probes, eta, stepped.times, ell)
    assert formula.extra["profile_class"] == "strict"
    assert formula.extra["tail_bound"] == 0.0
    assert formula.relative_difference(stepped).max() < 0.05


def test_zero_remainder_profile():
    eta = TimeProfile.monomial(2 * mesh.n + 3)
    formula = wave_formula(sd, derivs, probes, eta, times, ell)
    # eta^(2 ell + 2) vanishes, the relaxed class adds free oscillations
    np.testing.assert_allclose(formula.extra["remainder"], 0.0, atol=1e-14)
    assert formula.extra["profile_class"] == "relaxed"
    assert np.abs(formula.extra["correction"]).max() > 0


def test_formula_needs_derivatives():
    eta = TimeProfile.monomial(8)
    with pytest.raises(ConfigError):
        wave_formula(sd, derivs[:2], probes, eta, times, ell)


def test_cfl():
    limit = cfl_limit(mesh, 2.0)
    assert limit == pytest.approx(mesh.h / 2)
    with pytest.raises(CFLError):
        wave_step(op, probes, TimeProfile.monomial(8), 1.0, 2 * limit, alpha=2.0)


def test_energy_is_conserved_without_forcing():
    still = TimeProfile([0.0])
    trace = wave_step(
        op, probes[:1], still, 1.0, mesh.h / 4, initial=sd.eigvecs[0], alpha=2.0
    )
    energy = trace.extra["energy"][0]
    assert energy.max() / energy.min() - 1 < 0.02


def test_four_term_split():
    eta = TimeProfile.monomial(8)
    split = four_term_split(sd, sd_eps, probes, eta, times, ell)
    assert split["defect"] < 1e-10
    assert split["I1"].shape == (probes.shape[0], times.size, mesh.n_boundary)


def test_hyperbolic_difference():
    eta = TimeProfile.monomial(8)
    pairs = ((op, sd), (op_eps, sd_eps))
    out = hyperbolic_difference(*pairs, probes, eta, times, delta=0.5)
    frame = out["frame"]
    assert len(frame) == probes.shape[0]
    assert {"difference", "remainder", "I1", "I4", "ratio"} <= set(frame.columns)
    assert out["defect"] < 1e-10
    assert out["max_ratio"] > 0


def test_remainder_telescoping():
    eta = TimeProfile.monomial(8)
    fine = np.linspace(0.0, 1.0, 1001)
    out = remainder_telescoping(sd, eta, probes[0], fine, ell)
    assert out["relative"] < 1e-3


def test_trace_tables():
    eta = TimeProfile.monomial(8)
    formula = wave_formula(sd, derivs, probes[:1], eta, times, ell)
    frame = formula.to_frame()
    assert len(frame) == times.size * mesh.n_boundary
    da = formula.to_dataarray()
    assert da.dims == ("probe", "time", "boundary_dof")
    assert "history" in da.attrs
