import json
import warnings

import numpy as np
import pytest

from bsd2dtn.assembly import assemble
from bsd2dtn.geometry import boundary_probes, build_box_mesh, make_field
from bsd2dtn.helpers import ConfigError
from bsd2dtn.hyperbolic_dtn import TimeProfile
from bsd2dtn.spectral import eigensolve
from bsd2dtn.verify import (
    VerificationReport,
    check_elliptic_chain,
    check_lemte,
    check_norm_equivalence,
    check_resolvent_bound,
    check_route_equivalence,
    check_sine_kernel,
    check_splittings,
    check_ui0,
    check_weyl_potential,
    default_family,
    fit_modulus,
    modulus_values,
    sweep_stability,
)


warnings.simplefilter("ignore")

mesh = build_box_mesh(2, 6)
bump = "256*(x1*(1-x1)*x2*(1-x2))**2"
field = make_field("conformal", "1", dict(alpha=2.0), mesh)
op = assemble(mesh, field)
field_eps = make_field("conformal", "1 + 0.1*" + bump, dict(alpha=2.0), mesh)
op_eps = assemble(mesh, field_eps)
sd = eigensolve(op, op.n_interior)
sd_eps = eigensolve(op_eps, op_eps.n_interior)
probes = boundary_probes(mesh, 2)


def test_lemte_inequalities():
    report = check_lemte(samples=200, seed=1)
    assert report.passed
    assert report.measured["te1_ratio"] <= 1
    assert report.measured["oracle_error"] < 1e-8
    assert len(report.details) == 200


def test_ui0_identity():
    report = check_ui0(samples=200)
    assert report.passed
    assert report.measured["relative_error"] < 1e-10


def test_bad_sample_counts():
    with pytest.raises(ConfigError):
        check_lemte(samples=0)
    with pytest.raises(ConfigError):
        check_ui0(samples=0)


def test_report_margin_and_summary():
    report = VerificationReport("demo", {}, dict(a=0.5, b=2.0), dict(a=1.0, b=1.0))
    assert not report.passed
    assert report.failures == ["b"]
    assert report.margin == pytest.approx(0.5)
    assert report.summary_line().startswith("FAIL")
    assert "failed=b" in report.summary_line()

    ok = VerificationReport("demo", {}, dict(a=0.5), dict(a=1.0))
    assert ok.passed
    assert ok.margin == pytest.approx(2.0)

    nan = VerificationReport("demo", {}, dict(a=np.nan), dict(a=1.0))
    assert not nan.passed
    assert json.loads(nan.to_json())["measured"]["a"] == "nan"


def test_report_only_always_passes():
    report = VerificationReport("demo", {}, dict(a=5.0), dict(a=1.0), report_only=True)
    assert report.passed
    assert report.summary_line().startswith("REPORT")


def test_tolerance_relaxes_bounds():
    report = VerificationReport("demo", {}, dict(a=1.1), dict(a=1.0), tolerance=0.2)
    assert report.passed


def test_sine_kernel_check():
    report = check_sine_kernel(sd.truncate(6), 1.0)
    assert report.passed
    with pytest.raises(ConfigError):
        check_sine_kernel(sd, 0.0)


def test_resolvent_bound():
    report = check_resolvent_bound(sd, 2.0, samples=20)
    assert report.passed
    with pytest.raises(ConfigError):
        check_resolvent_bound(sd, 0.0)


def test_norm_equivalence():
    conformal = make_field("conformal", "1 + 0.5*x1", dict(alpha=2.0), mesh)
    report = check_norm_equivalence(mesh, conformal, samples=20)
    assert report.passed
    bare = make_field("potential", "x1", dict(ceiling=1.0), mesh)
    with pytest.raises(ConfigError):
        check_norm_equivalence(mesh, bare)


def test_weyl_potential():
    bounds = dict(ceiling=1.0)
    sd_V = eigensolve(assemble(mesh, make_field("potential", bump, bounds, mesh)), 8)
    sd_0 = eigensolve(assemble(mesh, make_field("potential", "0", bounds, mesh)), 8)
    assert check_weyl_potential(sd_V, sd_0, 1.0).passed
    with pytest.raises(ConfigError):
        check_weyl_potential(sd_V, sd_0.truncate(4), 1.0)


def test_elliptic_chain_reports():
    report = check_elliptic_chain(sd, op=op, samples=4)
    assert report.report_only
    assert report.passed
    assert report.measured["eigen_solver_ratio"] == pytest.approx(1.0, rel=1e-6)
    assert report.measured["solver_h1_constant"] > 0


def test_splittings():
    times = np.linspace(0.0, 1.0, 17)
    eta = TimeProfile.monomial(8)
    report = check_splittings(sd, sd_eps, 1.0, 2, probes[:3], eta, times, 3)
    assert report.passed
    assert "four_term_defect" in report.measured
    with pytest.raises(ConfigError):
        check_splittings(sd, sd_eps, 1.0, 2, probes, profile=eta)


def test_route_equivalence():
    report = check_route_equivalence(op, sd, lambdas=(0.0, 1.0), orders=(0, 1, 2))
    assert report.passed, report.measured
    assert report.measured["resolvent_error"] < 1e-4
    assert len(report.details) == 6


def test_fit_recovers_exponent():
    deltas = np.logspace(-8, -2, 12)
    errors = 2.0 * np.abs(np.log(deltas)) ** -0.5
    report = fit_modulus(deltas, errors, "psi_sigma")
    assert report.measured["theta"] == pytest.approx(0.5, rel=1e-8)
    assert report.measured["kappa"] == pytest.approx(2.0, rel=1e-8)
    assert report.measured["dominated"]


def test_fit_of_zero_errors():
    report = fit_modulus([1e-3, 1e-2], [0.0, 0.0], "psi_sigma_theta")
    assert report.measured["kappa"] == 0.0
    assert report.measured["theta"] == 0.5
    assert report.measured["dominated"]


def test_fit_domination_failure():
    deltas = np.concatenate([np.logspace(-8, -2, 6), [0.5]])
    errors = np.abs(np.log(deltas)) ** -0.5
    errors[-1] = 100.0
    report = fit_modulus(deltas, errors)
    assert not report.measured["dominated"]
    assert report.passed


def test_fit_phi_sigma_reports_eta():
    deltas = np.logspace(-8, -2, 6)
    errors = modulus_values(deltas, "phi_sigma", 1.0 / 16, 0.1)
    report = fit_modulus(deltas, errors, "phi_sigma")
    assert report.measured["eta"] == pytest.approx(0.25, rel=1e-6)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(deltas=[], errors=[]),
        dict(deltas=[0.1, 0.2], errors=[1.0]),
        dict(deltas=[0.1], errors=[1.0], modulus="psi"),
        dict(deltas=[0.1], errors=[1.0], varsigma=0.5),
    ],
)
def test_fit_bad_input(kwargs):
    with pytest.raises(ConfigError):
        fit_modulus(**kwargs)


def test_modulus_branches():
    values = modulus_values([0.0, 1e-4, 0.2], "psi_sigma", 0.5, 0.1)
    assert values[0] == 0.0
    assert values[1] == pytest.approx(np.log(1e4) ** -0.5)
    assert values[2] == pytest.approx(0.2)


def test_default_family():
    family = default_family("potential", 3)
    assert family["kind"] == "potential"
    assert family["base"] == "0"
    assert family["profile_power"] == 10
    assert default_family("hyperbolic_potential")["kind"] == "potential"
    with pytest.raises(ConfigError):
        default_family("acoustic")


def test_small_elliptic_sweep():
    family = dict(resolution=4, probe_order=1)
    report, frame = sweep_stability(family, "elliptic", [0.0, 0.01, 0.02, 0.04])
    assert len(frame) == 4
    assert frame.delta.iloc[0] == pytest.approx(0.0, abs=1e-10)
    assert (frame.delta.iloc[1:] > 0).all()
    assert report.measured["split_defect"] < 1e-10
    assert np.isfinite(report.measured["slope"])
    with pytest.raises(ConfigError):
        sweep_stability(family, "elliptic", [-0.1])


def test_hyperbolic_potential_sweep():
    family = dict(resolution=4, probe_order=1, n_times=9)
    epsilons = [0.0, 0.02, 0.04, 0.08]
    report, frame = sweep_stability(family, "hyperbolic_potential", epsilons)
    assert report.check_id == "sweep_hyperbolic_potential"
    assert report.inputs["family"]["kind"] == "potential"
    sigma = report.measured["sigma"]
    assert sigma == pytest.approx(1.0 / 3)
    mixed = frame.delta_bar**sigma + frame.delta_star
    np.testing.assert_allclose(frame.delta_mixed, mixed)
    assert (frame.dtn_difference.iloc[1:] > 0).all()
    assert report.measured["split_defect"] < 1e-10
    # the mixed functional decays like epsilon^sigma, the difference like epsilon
    assert report.measured["slope"] > 1
    assert np.isfinite(report.measured["power_constant"])
    assert report.passed
