import warnings

import numpy as np
import pytest

from bsd2dtn.assembly import assemble, solve_dirichlet
from bsd2dtn.bsd_metrics import smallest_k0
from bsd2dtn.elliptic_dtn import (
    dtn_direct,
    dtn_finite_difference,
    dtn_series,
    large_shift_decay,
    lemte_closed_form,
    lemte_integral,
    operator_norm,
    resolvent_power,
    smallest_j0,
    solution_series,
    taylor_assembly_residual,
    taylor_remainder,
    three_term_split,
    ui0_identity,
)
from bsd2dtn.geometry import boundary_probes, build_box_mesh, make_field
from bsd2dtn.helpers import (
    ConfigError,
    DivergentSeriesError,
    MeshMismatchError,
    NearSingularShiftError,
)
from bsd2dtn.spectral import eigensolve


warnings.simplefilter("ignore")

mesh = build_box_mesh(2, 6)
bump = "256*(x1*(1-x1)*x2*(1-x2))**2"
op = assemble(mesh, make_field("conformal", "1", dict(alpha=2.0), mesh))
field_eps = make_field("conformal", "1 + 0.1*" + bump, dict(alpha=2.0), mesh)
op_eps = assemble(mesh, field_eps)
# full discrete spectrum: the series are exact
sd = eigensolve(op, op.n_interior)
sd_eps = eigensolve(op_eps, op_eps.n_interior)
probes = boundary_probes(mesh, 2)


def test_map_kills_constants_at_zero():
    direct = dtn_direct(op, 0.0)
    np.testing.assert_allclose(direct.apply(np.ones(mesh.n_boundary)), 0.0, atol=1e-10)


def test_map_is_self_adjoint():
    for j in (0, 1, 2):
        assert dtn_direct(op_eps, 1.0, j).symmetry_defect() < 1e-10


@pytest.mark.parametrize("lam", [0.0, 1.0, 10.0])
def test_accelerated_series_matches_direct(lam):
    reference = dtn_direct(op, lam + 1.0)
    series = dtn_series(sd, lam, 0, reference=reference)
    direct = dtn_direct(op, lam)
    scale = np.abs(direct.matrix).max()
    np.testing.assert_allclose(series.matrix, direct.matrix, atol=1e-8 * scale)
    assert series.tail_bound == 0.0


def test_convergent_series_matches_direct():
    series = dtn_series(sd, 1.0, 2)
    direct = dtn_direct(op, 1.0, 2)
    scale = np.abs(direct.matrix).max()
    np.testing.assert_allclose(series.matrix, direct.matrix, atol=1e-8 * scale)


def test_series_accumulation_is_reproducible():
    first = dtn_series(sd, 1.0, 2).matrix
    np.testing.assert_array_equal(dtn_series(sd, 1.0, 2).matrix, first)
    coef = -2.0 / (sd.lambdas + 1.0) ** 3
    weighted = sd.boundary_weight @ sd.psis.T
    dense = (sd.psis.T * coef) @ weighted.T
    np.testing.assert_allclose(first, dense, rtol=0, atol=1e-12 * np.abs(dense).max())


def test_two_record_difference_series():
    reference = dtn_direct(op_eps, 1.0)
    series = dtn_series(sd, 1.0, 0, reference=reference, reference_sd=sd_eps)
    direct = dtn_direct(op, 1.0)
    scale = np.abs(direct.matrix).max()
    # the local boundary parts agree because the fields agree on the boundary
    np.testing.assert_allclose(series.matrix, direct.matrix, atol=1e-8 * scale)


@pytest.mark.parametrize("j", [0, 1])
def test_series_below_threshold_diverges(j):
    with pytest.raises(DivergentSeriesError):
        dtn_series(sd, 1.0, j)


def test_reference_checks():
    with pytest.raises(ConfigError):
        dtn_series(sd, 1.0, 0, reference=dtn_direct(op, 2.0, 1))
    other = build_box_mesh(2, 4)
    op_other = assemble(other, make_field("conformal", "1", dict(alpha=2.0), other))
    with pytest.raises(MeshMismatchError):
        dtn_series(sd, 1.0, 0, reference=dtn_direct(op_other, 2.0))


def test_finite_differences():
    for j in (1, 2):
        fd = dtn_finite_difference(op, 1.0, j, step=1e-3)
        direct = dtn_direct(op, 1.0, j)
        scale = np.abs(direct.matrix).max()
        np.testing.assert_allclose(fd.matrix, direct.matrix, atol=1e-4 * scale)


def test_guard_band():
    with pytest.raises(NearSingularShiftError):
        dtn_direct(op, -sd.lambdas[0])


def test_truncated_series_has_tail():
    series = dtn_series(sd, 1.0, 2, K=5)
    assert series.K_used == 5
    assert series.tail_bound > 0


def test_solution_series_matches_solve():
    phi = probes[0]
    u = solve_dirichlet(op, 2.0, phi)
    np.testing.assert_allclose(
        solution_series(sd, 2.0, 0, phi), u[mesh.interior], atol=1e-10
    )


def test_resolvent_power_matches_solve():
    rng = np.random.default_rng(0)
    f = rng.standard_normal(op.n_interior)
    lu = op.factor(3.0)
    expected = lu.solve(op.M @ f)
    np.testing.assert_allclose(resolvent_power(sd, 3.0, 1, f), expected, atol=1e-10)
    # j = 0 is the projection, the identity for the full spectrum
    np.testing.assert_allclose(resolvent_power(sd, 3.0, 0, f), f, atol=1e-10)


@pytest.mark.parametrize("j", [0, 1, 3])
def test_three_term_split(j):
    parts = three_term_split(sd, sd_eps, 1.0, j, probes[1])
    assert parts["defect"] < 1e-10
    assert np.linalg.norm(parts["total"]) > 0


@pytest.mark.parametrize("lam, a, b, j", [(1.0, 2.0, 3.0, 0), (0.5, 10.0, 1.0, 4)])
def test_ui0_identity(lam, a, b, j):
    lhs, rhs = ui0_identity(lam, a, b, j)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_lemte_closed_form_example():
    value = lemte_integral(2, 1, 2.0, 10.0)
    assert value == pytest.approx(0.0385802, abs=1e-7)
    assert lemte_closed_form(2, 1, 2.0, 10.0) == pytest.approx(value, rel=1e-10)


def test_lemte_limits():
    assert lemte_integral(2, 1, 2.0, 0.0) == 0.0
    full = lemte_integral(3, 2, 1.5, np.inf)
    assert full == pytest.approx(lemte_closed_form(3, 2, 1.5, np.inf), rel=1e-10)
    with pytest.raises(ConfigError):
        lemte_integral(2, 1, 0.0, 1.0)


def test_smallest_j0():
    assert smallest_j0(2) == 2
    assert smallest_j0(3) == 2
    assert smallest_j0 is smallest_k0


def test_taylor_assembly_is_exact_for_full_records():
    for m in (0, 1):
        assert taylor_assembly_residual(op, op_eps, sd, sd_eps, 5.0, m, probes) < 1e-8


def test_taylor_remainder_constants():
    out = taylor_remainder(sd, sd_eps, 5.0, 1, probes)
    assert out["upsilon"].shape == probes.shape
    assert out["j0"] == 2
    assert np.isfinite(out["coefficient_constant"])
    with pytest.raises(ConfigError):
        taylor_remainder(sd, sd_eps, 0.0, 1, probes)


def test_operator_norms():
    direct = dtn_direct(op, 1.0)
    assert operator_norm(direct) > 0
    assert operator_norm(direct, norm="h12", mesh=mesh) > 0
    with pytest.raises(ConfigError):
        operator_norm(direct, norm="h12")
    with pytest.raises(ConfigError):
        operator_norm(direct.matrix)


def test_large_shift_decay():
    out = large_shift_decay(sd, sd_eps, [10.0, 100.0, 1000.0], 1, probes)
    assert len(out["values"]) == 3
    assert np.isfinite(out["slope"])
    with pytest.raises(DivergentSeriesError):
        large_shift_decay(sd, sd_eps, [10.0], 0, probes)
    direct = large_shift_decay(sd, sd_eps, [10.0, 100.0], 0, probes, ops=(op, op_eps))
    assert len(direct["values"]) == 2
