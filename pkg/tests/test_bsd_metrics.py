import json
import warnings

import numpy as np
import pytest

from bsd2dtn.assembly import assemble
from bsd2dtn.bsd_metrics import (
    Pairing,
    aligned_gram,
    check_exponents,
    compute_delta,
    compute_delta0,
    compute_delta_bar_star,
    delta_report,
    optimal_shift,
    pair_modes,
    smallest_k0,
)
from bsd2dtn.geometry import build_box_mesh, make_field
from bsd2dtn.helpers import ConfigError, MeshMismatchError
from bsd2dtn.spectral import cross_gram, eigensolve


warnings.simplefilter("ignore")

mesh = build_box_mesh(2, 8)
bump = "256*(x1*(1-x1)*x2*(1-x2))**2"


def record(expression, K=10):
    field = make_field("conformal", expression, dict(alpha=2.0), mesh)
    return eigensolve(assemble(mesh, field), K)


sd = record("1")
sd_eps = record("1 + 0.05*" + bump)


def test_identical_records():
    report = delta_report(sd, sd)
    assert report.delta == pytest.approx(0.0, abs=1e-12)
    assert report.delta0 == pytest.approx(0.0, abs=1e-8)
    assert report.delta_bar == pytest.approx(0.0, abs=1e-12)
    assert report.pairing.is_identity


def test_swapped_cluster_is_paired_back():
    swapped = sd.relabel([0, 2, 1] + list(range(3, sd.K)))
    pairing = pair_modes(sd, swapped)
    assert pairing.order[:3].tolist() == [0, 2, 1]
    assert compute_delta(sd, swapped, pairing=pairing)["delta"] == pytest.approx(
        0.0, abs=1e-12
    )
    # without pairing the psi term sees the swap
    assert compute_delta(sd, swapped)["psi_term"] > 1


def test_sign_flips_are_paired_back():
    signs = np.ones(sd.K)
    signs[[0, 3]] = -1
    flipped = sd.relabel(np.arange(sd.K), signs)
    pairing = pair_modes(sd, flipped)
    np.testing.assert_array_equal(pairing.signs, signs)
    assert delta_report(sd, flipped).delta == pytest.approx(0.0, abs=1e-12)


def test_rotated_cluster_needs_rotation():
    c, s = np.cos(0.3), np.sin(0.3)
    Q = np.array([[c, -s], [s, c]])
    turned = sd.rotated({(1, 2): Q})
    plain = delta_report(sd, turned, rotate=False)
    aligned = delta_report(sd, turned, rotate=True)
    assert plain.delta > 1e-3
    assert aligned.delta == pytest.approx(0.0, abs=1e-8)
    assert aligned.delta0 == pytest.approx(0.0, abs=1e-8)
    assert (1, 2) in aligned.pairing.rotations


def test_aligned_gram_of_rotation():
    c, s = np.cos(0.3), np.sin(0.3)
    Q = np.array([[c, -s], [s, c]])
    turned = sd.rotated({(1, 2): Q})
    gram = cross_gram(sd, turned)
    pairing = pair_modes(sd, turned, gram=gram, rotate=True)
    np.testing.assert_allclose(aligned_gram(gram, pairing), np.eye(sd.K), atol=1e-10)


def test_perturbation_is_seen():
    report = delta_report(sd, sd_eps)
    assert report.delta > 0
    assert report.delta_plus == pytest.approx(report.delta + report.delta0)
    assert report.k0 == 2
    assert report.sigma == pytest.approx(1.0 / 3)


def test_delta_grows_with_perturbation():
    deltas = [delta_report(sd, record("1 + {}*{}".format(eps, bump))).delta
              for eps in (0.01, 0.04)]
    assert deltas[0] < deltas[1]


def test_report_serialization():
    report = delta_report(sd, sd_eps)
    tree = json.loads(report.to_json())
    assert tree["delta"] == pytest.approx(report.delta)
    assert "tail_estimate" in tree
    frame = report.to_frame()
    assert len(frame) == 1
    assert frame["delta"].iloc[0] == pytest.approx(report.delta)


def test_truncation():
    report = delta_report(sd, sd_eps, K=4)
    assert report.K == 4
    with pytest.raises(ConfigError):
        delta_report(sd, sd_eps, K=0)


@pytest.mark.parametrize("p, q", [(2.0, 1.0), (1.0, 1.2), (0.5, 1.0)])
def test_exponent_bounds(p, q):
    with pytest.raises(ConfigError):
        check_exponents(p, q, 2)


def test_exponents_inside_bounds():
    check_exponents(1.3, 1.1, 2)


def test_records_must_match():
    with pytest.raises(ConfigError):
        compute_delta(sd, sd.truncate(5))
    shifted = record("1 + 0.2*x1")
    with pytest.raises(MeshMismatchError):
        compute_delta(sd, shifted)


def test_delta0_weights():
    assert compute_delta0(np.eye(5), 2) == pytest.approx(0.0)
    assert compute_delta0(np.zeros((1, 1)), 2) == pytest.approx(1.0)


def test_bar_star_of_identical_records():
    out = compute_delta_bar_star(sd, sd)
    assert out["delta_bar"] == 0
    assert out["delta_star"] == 0


@pytest.mark.parametrize("n, k0", [(2, 2), (3, 2), (5, 3)])
def test_smallest_k0(n, k0):
    assert smallest_k0(n) == k0


def test_optimal_shift():
    assert optimal_shift(0.0, 2) == np.inf
    assert optimal_shift(1e-4, 2) > 1


def test_identity_pairing():
    pairing = Pairing.identity(4)
    assert pairing.is_identity
    assert pairing.to_dict()["basis"] == "identity"


def test_eigenvalue_shift_only_moves_lambda_term():
    shifted = sd.with_values(lambdas=sd.lambdas * 1.01)
    out = compute_delta(sd, shifted)
    assert out["lambda_term"] > 0
    assert out["psi_term"] == pytest.approx(0.0, abs=1e-12)
