import warnings

import numpy as np
import pytest

from bsd2dtn.assembly import assemble
from bsd2dtn.geometry import build_box_mesh, make_field
from bsd2dtn.helpers import Bsd2DtnWarning, ConfigError, MeshMismatchError
from bsd2dtn.spectral import (
    RESIDUAL_TOL,
    cross_gram,
    eigen_residuals,
    eigensolve,
    projector_distance,
    trace_constant,
    validate_estimates,
    weyl_constant,
)


mesh = build_box_mesh(2, 16)
op = assemble(mesh, make_field("metric", "identity", dict(alpha=2.0), mesh))
with warnings.catch_warnings():
    warnings.simplefilter("ignore", Bsd2DtnWarning)
    sd = eigensolve(op, 10)

exact = np.pi**2 * np.array([2, 5, 5, 8, 10, 10])


def test_square_spectrum():
    assert sd.K == 10
    np.testing.assert_allclose(sd.lambdas[:6], exact, rtol=0.05)
    assert sd.lambdas[0] == pytest.approx(2 * np.pi**2, rel=0.01)
    assert (np.diff(sd.lambdas) >= 0).all()


def test_first_flux_norm():
    assert sd.psi_norms[0] == pytest.approx(2 * np.sqrt(2) * np.pi, rel=0.05)


def test_eigvecs_are_mass_orthonormal():
    gram = (sd.eigvecs * sd.mass_weight[None, :]) @ sd.eigvecs.T
    np.testing.assert_allclose(gram, np.eye(sd.K), atol=1e-10)


def test_degenerate_clusters_warn():
    with pytest.warns(Bsd2DtnWarning, match="degenerate"):
        eigensolve(op, 4)
    sizes = [c.size for c in sd.clusters()]
    assert sizes[:3] == [1, 2, 1]


@pytest.mark.parametrize("K", [0, -1, 2.5, 10000])
def test_bad_truncation(K):
    with pytest.raises(ConfigError):
        eigensolve(op, K)


def test_without_eigvecs():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", Bsd2DtnWarning)
        light = eigensolve(op, 3, keep_eigvecs=False)
    assert light.eigvecs is None
    np.testing.assert_allclose(light.lambdas, sd.lambdas[:3])
    with pytest.raises(ConfigError):
        cross_gram(light, sd)


def test_constants():
    assert weyl_constant([1.0, 4.0], 1) == pytest.approx(1.0)
    assert weyl_constant([2.0, 2.0], 2) == pytest.approx(2.0)
    assert trace_constant([1.0, 1.0], 2) == pytest.approx(1.0)
    assert sd.theta >= 1
    assert sd.trace_constant > 0


def test_truncate_and_relabel():
    short = sd.truncate(4)
    assert short.K == 4
    swapped = sd.relabel([1, 0, 2], signs=[1, -1, 1])
    np.testing.assert_allclose(swapped.lambdas, sd.lambdas[[1, 0, 2]])
    np.testing.assert_allclose(swapped.psis[1], -sd.psis[0])


def test_rotation_of_a_cluster():
    c, s = np.cos(0.3), np.sin(0.3)
    Q = np.array([[c, -s], [s, c]])
    rotated = sd.rotated({(1, 2): Q})
    np.testing.assert_allclose(rotated.psis[0], sd.psis[0])
    np.testing.assert_allclose(rotated.psis[1], c * sd.psis[1] + s * sd.psis[2])
    # rotations inside a cluster keep the spectral projector
    assert projector_distance(sd, rotated, [1, 2]) == pytest.approx(0.0, abs=1e-6)


def test_self_gram_is_identity():
    np.testing.assert_allclose(cross_gram(sd, sd), np.eye(sd.K), atol=1e-10)


def test_gram_needs_same_mesh():
    other = build_box_mesh(2, 8)
    op_other = assemble(other, make_field("metric", "identity", dict(alpha=2.0), other))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", Bsd2DtnWarning)
        sd_other = eigensolve(op_other, 3)
    with pytest.raises(MeshMismatchError):
        cross_gram(sd, sd_other)


def test_estimates_under_refinement():
    mesh_f = build_box_mesh(2, 32)
    op_f = assemble(mesh_f, make_field("metric", "identity", dict(alpha=2.0), mesh_f))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", Bsd2DtnWarning)
        sd_f = eigensolve(op_f, 10)
    report = validate_estimates(sd, sd_fine=sd_f)
    assert report.passed
    assert report.measured["theta_ratio"] <= 1.2
    assert report.measured["trace_constant_ratio"] <= 1.2


def test_eigen_residuals_are_unscaled():
    residual = eigen_residuals(op, sd.lambdas, sd.eigvecs)
    assert residual.max() <= RESIDUAL_TOL
    shifted = eigen_residuals(op, sd.lambdas * (1 + 1e-6), sd.eigvecs)
    # an eigenvalue error of 1e-6 relative shows up as lam * 1e-6
    np.testing.assert_allclose(shifted, sd.lambdas * 1e-6, rtol=1e-3)
    scaled = eigen_residuals(op, sd.lambdas * (1 + 1e-6), sd.eigvecs, scaled=True)
    np.testing.assert_allclose(scaled, shifted / sd.lambdas)


def test_estimates_report_residuals():
    report = validate_estimates(sd, op=op)
    assert report.measured["max_residual"] <= RESIDUAL_TOL
    assert report.measured["max_scaled_residual"] <= report.measured["max_residual"]
    assert "max_residual" not in validate_estimates(sd).measured


def test_dataset_carries_history():
    ds = sd.to_dataset()
    assert ds.lambdas.size == sd.K
    assert "history" in ds.attrs
    assert ds.attrs["theta"] == pytest.approx(sd.theta)
