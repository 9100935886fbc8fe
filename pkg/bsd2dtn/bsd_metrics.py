#!/usr/bin/env python
"""
Distances between two boundary spectral records: the eigenvalue/flux
distance delta, the Gram distance delta0, their sum, and the weighted
distances used for potentials.
"""

import warnings

import numpy as np

from .helpers import Bsd2DtnWarning, ConfigError, MeshMismatchError
from .utils import stable_sum


TIE_TOL = 1e-12
PERMUTATION_LIMIT = 6


class Pairing(object):
    """
    Alignment of the modes of a second record to the modes of a first one.

    Mode ``l`` of the first record is paired with mode ``order[l]`` of the
    second record multiplied by ``signs[l]``. Inside degenerate clusters of
    the first record, whose eigenbasis is arbitrary, ``rotations`` maps the
    cluster indices to the orthogonal recombination of the first record's
    modes that best matches the paired modes of the second record.
    """

    def __init__(self, order, signs, ambiguous=(), basis="gram", rotations=None):
        self.order = np.asarray(order, dtype=int)
        self.signs = np.asarray(signs, dtype=float)
        self.ambiguous = [list(map(int, c)) for c in ambiguous]
        self.basis = basis
        self.rotations = {} if rotations is None else dict(rotations)

    @classmethod
    def identity(cls, K):
        return cls(np.arange(K), np.ones(K), basis="identity")

    @property
    def is_identity(self):
        same = (self.order == np.arange(self.order.size)).all()
        same = same and (self.signs > 0).all()
        unrotated = all(
            np.allclose(Q, np.eye(len(Q)), atol=1e-12) for Q in self.rotations.values()
        )
        return bool(same and unrotated)

    def to_dict(self):
        return dict(
            order=self.order.tolist(),
            signs=[int(s) for s in self.signs],
            ambiguous=self.ambiguous,
            basis=self.basis,
            rotated_clusters=sorted(list(c) for c in self.rotations),
        )

    def __repr__(self):
        n_moved = int((self.order != np.arange(self.order.size)).sum())
        n_flipped = int((self.signs < 0).sum())
        return "<Pairing K={} moved={} flipped={} ambiguous={}>".format(
            self.order.size, n_moved, n_flipped, len(self.ambiguous)
        )


def _check_records(sd1, sd2):
    if sd1.mesh_signature != sd2.mesh_signature:
        raise MeshMismatchError(
            "records on meshes {} and {}".format(sd1.mesh_signature, sd2.mesh_signature)
        )
    if sd1.K != sd2.K:
        raise ConfigError("records have K={} and K={}".format(sd1.K, sd2.K))


def _check_weights(sd1, sd2, rtol=1e-12):
    W1, W2 = sd1.boundary_weight, sd2.boundary_weight
    diff = abs(W1 - W2).max()
    if diff > rtol * abs(W1).max():
        raise MeshMismatchError(
            "boundary weights differ by {:.3g}: the records do not share g on the "
            "boundary".format(diff)
        )


def _flux_overlap(sd1, sd2):
    """Normalized boundary overlaps, used when eigenvectors were not kept."""
    W = sd1.boundary_weight
    G = sd2.psis @ (W @ sd1.psis.T)
    n1 = np.sqrt(np.einsum("ij,ij->i", sd1.psis, (W @ sd1.psis.T).T))
    n2 = np.sqrt(np.einsum("ij,ij->i", sd2.psis, (W @ sd2.psis.T).T))
    scale = np.outer(np.where(n2 > 0, n2, 1.0), np.where(n1 > 0, n1, 1.0))
    return G / scale


def _assign_cluster(score):
    """
    Best assignment of the rows of ``score`` to its columns by total mass.

    Returns the row assigned to each column and whether another assignment
    lies within TIE_TOL of the best mass.
    """
    from itertools import permutations

    from scipy.optimize import linear_sum_assignment

    size = score.shape[0]
    if size == 1:
        return np.array([0]), False
    if size > PERMUTATION_LIMIT:
        rows, cols = linear_sum_assignment(-score)
        assigned = np.empty(size, dtype=int)
        assigned[cols] = rows
        return assigned, False

    columns = np.arange(size)
    # permutations() is lexicographic, so the first maximizer is the tie-break
    masses = [
        (perm, score[list(perm), columns].sum()) for perm in permutations(range(size))
    ]
    best = max(m for _, m in masses)
    candidates = [perm for perm, m in masses if m >= best - TIE_TOL]
    return np.array(candidates[0]), len(candidates) > 1


def _procrustes(block):
    """Orthogonal Q maximizing trace(block @ Q)."""
    U, _, Vt = np.linalg.svd(block)
    return Vt.T @ U.T


def pair_modes(sd1, sd2, gram=None, rotate=False):
    """
    Aligns the modes of ``sd2`` with those of ``sd1``.

    Inside each degenerate cluster of ``sd1`` the modes of ``sd2`` with the
    same indices are assigned by maximizing the total absolute Gram mass.
    Signs are then fixed so that the paired Gram entries are nonnegative.

    Parameters
    ----------
    sd1, sd2 : SpectralData
        records on the same mesh with the same K
    gram : np.array, shape=[K, K], optional
        precomputed ``cross_gram(sd1, sd2)``. Without it the Gram matrix is
        computed from the eigenvectors, or replaced by normalized boundary
        flux overlaps when eigenvectors were not kept.
    rotate : bool [False]
        also recombine the modes of each degenerate cluster of ``sd1`` by
        the orthogonal matrix that best matches the paired modes of ``sd2``
        (Gram basis only)

    Returns
    -------
    Pairing
        ambiguous clusters (another assignment within 1e-12 of the best
        mass) are listed and resolved by the lexicographic tie-break
    """
    from .spectral import cross_gram

    _check_records(sd1, sd2)
    basis = "gram"
    if gram is None:
        if sd1.eigvecs is not None and sd2.eigvecs is not None:
            gram = cross_gram(sd1, sd2)
        else:
            gram = _flux_overlap(sd1, sd2)
            basis = "flux"
    gram = np.asarray(gram, dtype=float)

    order = np.arange(sd1.K)
    ambiguous = []
    for cluster in sd1.clusters():
        if cluster.size == 1:
            continue
        score = np.abs(gram[np.ix_(cluster, cluster)])
        assigned, tie = _assign_cluster(score)
        order[cluster] = cluster[assigned]
        if tie:
            ambiguous += [cluster.tolist()]

    signs = np.sign(gram[order, np.arange(sd1.K)])
    signs[signs == 0] = 1.0

    rotations = {}
    if rotate and basis == "gram":
        aligned = gram[order] * signs[:, None]
        for cluster in sd1.clusters():
            if cluster.size > 1:
                Q = _procrustes(aligned[np.ix_(cluster, cluster)])
                if not np.allclose(Q, np.eye(cluster.size), rtol=0, atol=1e-12):
                    rotations[tuple(cluster.tolist())] = Q

    if ambiguous:
        msg = "ambiguous mode assignment in clusters {}; lexicographic tie-break used"
        msg = msg.format(ambiguous)
        warnings.warn(msg, category=Bsd2DtnWarning)
    return Pairing(order, signs, ambiguous, basis=basis, rotations=rotations)


def apply_pairing(sd2, pairing):
    """Second record relabeled by a pairing."""
    if pairing is None:
        return sd2
    return sd2.relabel(pairing.order, pairing.signs)


def align_records(sd1, sd2, pairing):
    """Both records in the aligned bases of a pairing."""
    if pairing is None:
        return sd1, sd2
    if pairing.rotations:
        sd1 = sd1.rotated(pairing.rotations)
    return sd1, apply_pairing(sd2, pairing)


def aligned_gram(gram, pairing):
    """Cross-Gram matrix of the aligned records."""
    gram = np.asarray(gram, dtype=float)
    if pairing is None:
        return gram
    out = gram[pairing.order] * pairing.signs[:, None]
    for cluster, Q in pairing.rotations.items():
        idx = np.asarray(cluster, dtype=int)
        out[:, idx] = out[:, idx] @ Q
    return out


def check_exponents(p, q, n):
    """
    Enforces 1 <= p < 2n/(2n-1) and 1 <= q < 4n/(4n-1).
    """
    p_max = 2 * n / (2 * n - 1)
    q_max = 4 * n / (4 * n - 1)
    if not (1 <= p < p_max):
        raise ConfigError("p={} outside [1, {:.6g}) for n={}".format(p, p_max, n))
    if not (1 <= q < q_max):
        raise ConfigError("q={} outside [1, {:.6g}) for n={}".format(q, q_max, n))


def _differences(sd1, sd2, pairing):
    from .utils import weighted_norm

    _check_records(sd1, sd2)
    _check_weights(sd1, sd2)
    sd1, sd2 = align_records(sd1, sd2, pairing)
    d_lambda = np.abs(sd1.lambdas - sd2.lambdas)
    d_psi = np.atleast_1d(weighted_norm(sd1.psis - sd2.psis, sd1.boundary_weight))
    return d_lambda, d_psi


def compute_delta(sd1, sd2, p=1, q=1, pairing=None):
    """
    delta = ||(lam_k^1 - lam_k^2)||_{l^p} + ||(psi_k^1 - psi_k^2)||_{l^q(L2(Gamma))}

    Parameters
    ----------
    sd1, sd2 : SpectralData
    p, q : float [1, 1]
        sequence exponents, 1 <= p < 2n/(2n-1), 1 <= q < 4n/(4n-1)
    pairing : Pairing, optional
        alignment of sd2 to sd1; like-indexed modes when None

    Returns
    -------
    dict
        ``lambda_term``, ``psi_term`` and their sum ``delta``
    """
    check_exponents(p, q, sd1.n)
    d_lambda, d_psi = _differences(sd1, sd2, pairing)
    lambda_term = float(np.linalg.norm(d_lambda, ord=p))
    psi_term = float(np.linalg.norm(d_psi, ord=q))
    return dict(
        lambda_term=lambda_term, psi_term=psi_term, delta=lambda_term + psi_term
    )


def compute_delta0(gram, n):
    """
    Weighted entrywise l1 distance of the cross-Gram matrix to the identity,
    with weight k^(-1/(4n)) on the row index k and l^(7/(4n)) on the
    column index l.
    """
    gram = np.atleast_2d(np.asarray(gram, dtype=float))
    rows, cols = gram.shape
    k = np.arange(1, rows + 1)[:, None]
    ell = np.arange(1, cols + 1)[None, :]
    weights = ell ** (7.0 / (4 * n)) * k ** (-1.0 / (4 * n))
    return stable_sum(weights * np.abs(np.eye(rows, cols) - gram))


def smallest_k0(n):
    """Smallest integer strictly above (n+3)/4."""
    return int(np.floor((n + 3) / 4.0)) + 1


def compute_delta_bar_star(sd1, sd2, n=None, pairing=None):
    """
    Weighted distances for potentials.

    delta_bar  = sum_k k^(-(4k0+1)/(2n)) |dlam_k| + k^(-(4k0-3)/(2n)) ||dpsi_k||
    delta_star = sum_k k^(-(2+5/(2n))) (|dlam_k| + ||dpsi_k||)

    Returns
    -------
    dict
        ``delta_bar``, ``k0``, ``sigma`` = 1/(1+k0) and ``delta_star``
    """
    n = sd1.n if n is None else n
    k0 = smallest_k0(n)
    d_lambda, d_psi = _differences(sd1, sd2, pairing)
    k = np.arange(1, d_lambda.size + 1, dtype=float)

    bar = k ** (-(4 * k0 + 1) / (2.0 * n)) * d_lambda
    bar = bar + k ** (-(4 * k0 - 3) / (2.0 * n)) * d_psi
    star = k ** (-(2 + 5 / (2.0 * n))) * (d_lambda + d_psi)
    return dict(
        delta_bar=stable_sum(bar),
        k0=k0,
        sigma=1.0 / (1 + k0),
        delta_star=stable_sum(star),
    )


def _finite_tail(K, N, exponent, p=1):
    if N <= K:
        return 0.0
    k = np.arange(K + 1, N + 1, dtype=float)
    return stable_sum((k**exponent) ** p) ** (1.0 / p)


def _power_tail(K, s):
    """Bound of sum_{k>K} k^-s by the integral K^(1-s)/(s-1); inf if divergent."""
    if s <= 1:
        return np.inf
    return K ** (1 - s) / (s - 1)


def tail_estimates(sd1, sd2, p=1, q=1, n=None):
    """
    Bounds of the terms k > K dropped from the distances.

    The discrete bounds run over the remaining modes K < k <= N of the
    discretization and use |dlam_k| <= 2 theta k^(2/n) and
    ||dpsi_k|| <= 2 c k^(7/(4n)) with the larger empirical constants of the
    two records; they vanish when K = N. The continuum bounds of the weighted
    distances replace the finite sums by integrals and are infinite when the
    weighted terms do not decay fast enough.
    """
    n = sd1.n if n is None else n
    K, N = sd1.K, min(sd1.n_dofs, sd2.n_dofs)
    theta = max(sd1.theta, sd2.theta)
    const = max(sd1.trace_constant, sd2.trace_constant)
    k0 = smallest_k0(n)

    a_bar = (4 * k0 + 1) / (2.0 * n)
    b_bar = (4 * k0 - 3) / (2.0 * n)
    s_star = 2 + 5 / (2.0 * n)
    lam_rate, psi_rate = 2.0 / n, 7.0 / (4 * n)

    out = dict(
        delta=2 * theta * _finite_tail(K, N, lam_rate, p)
        + 2 * const * _finite_tail(K, N, psi_rate, q),
        delta_bar=2 * theta * _finite_tail(K, N, lam_rate - a_bar)
        + 2 * const * _finite_tail(K, N, psi_rate - b_bar),
        delta_star=2 * theta * _finite_tail(K, N, lam_rate - s_star)
        + 2 * const * _finite_tail(K, N, psi_rate - s_star),
        delta_bar_continuum=2 * theta * _power_tail(K, a_bar - lam_rate)
        + 2 * const * _power_tail(K, b_bar - psi_rate),
        delta_star_continuum=2 * theta * _power_tail(K, s_star - lam_rate)
        + 2 * const * _power_tail(K, s_star - psi_rate),
    )
    infinite = sorted(key for key, value in out.items() if not np.isfinite(value))
    if infinite:
        msg = "tail estimates {} are infinite for n={}".format(infinite, n)
        warnings.warn(msg, category=Bsd2DtnWarning)
    return out


def optimal_shift(delta_bar, k0):
    """
    Shift balancing the large-shift decay lam^(-1/8) against lam^k0 delta_bar,
    i.e. lam* = delta_bar^(-1/(k0 + 1/8)).
    """
    if delta_bar <= 0:
        return np.inf
    return float(delta_bar ** (-1.0 / (k0 + 0.125)))


class DeltaReport(object):
    """
    All distance functionals between two records at one truncation.

    ``delta0`` and ``delta_plus`` are None when eigenvectors were not
    available.
    """

    def __init__(
        self,
        p,
        q,
        K,
        n,
        delta,
        delta_lambda,
        delta_psi,
        delta0,
        delta_bar,
        k0,
        delta_star,
        pairing,
        tail_estimate,
    ):
        self.p = p
        self.q = q
        self.K = int(K)
        self.n = int(n)
        self.delta = delta
        self.delta_lambda = delta_lambda
        self.delta_psi = delta_psi
        self.delta0 = delta0
        self.delta_plus = None if delta0 is None else delta + delta0
        self.delta_bar = delta_bar
        self.k0 = k0
        self.sigma = 1.0 / (1 + k0)
        self.delta_star = delta_star
        self.pairing = pairing
        self.tail_estimate = dict(tail_estimate)

    def to_dict(self):
        out = dict(
            p=self.p,
            q=self.q,
            K=self.K,
            n=self.n,
            delta=self.delta,
            delta_lambda=self.delta_lambda,
            delta_psi=self.delta_psi,
            delta0="not computed" if self.delta0 is None else self.delta0,
            delta_bar=self.delta_bar,
            k0=self.k0,
            sigma=self.sigma,
            delta_star=self.delta_star,
            pairing=None if self.pairing is None else self.pairing.to_dict(),
            tail_estimate={k: _json_float(v) for k, v in self.tail_estimate.items()},
        )
        if self.delta_plus is not None:
            out["delta_plus"] = self.delta_plus
        return out

    def to_json(self):
        import json

        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_frame(self):
        """Single CSV-ready row (pairing and tails flattened)."""
        from pandas import DataFrame

        row = self.to_dict()
        pairing = row.pop("pairing")
        tails = row.pop("tail_estimate")
        row["pairing_identity"] = None if pairing is None else self.pairing.is_identity
        row["pairing_ambiguous"] = 0 if pairing is None else len(pairing["ambiguous"])
        for key, value in tails.items():
            row["tail_" + key] = value
        return DataFrame([row])

    def __repr__(self):
        return "<DeltaReport K={} delta={:.6g} delta0={} delta_bar={:.6g}>".format(
            self.K, self.delta, self.delta0, self.delta_bar
        )


def _json_float(value):
    value = float(value)
    return value if np.isfinite(value) else "inf"


def delta_report(sd1, sd2, p=1, q=1, K=None, pair=True, rotate=True, verbose=False):
    """
    Computes every distance functional between two records.

    Parameters
    ----------
    sd1, sd2 : SpectralData
    p, q : float [1, 1]
    K : int, optional
        truncation; all retained modes by default
    pair : bool [True]
        align sd2 to sd1 with ``pair_modes`` before measuring
    rotate : bool [True]
        align the bases of degenerate clusters as well

    Returns
    -------
    DeltaReport
    """
    from .helpers import printv
    from .spectral import cross_gram

    _check_records(sd1, sd2)
    n = sd1.n
    check_exponents(p, q, n)
    if K is not None:
        if K < 1 or K > sd1.K:
            raise ConfigError("truncation K={} outside [1, {}]".format(K, sd1.K))
        sd1, sd2 = sd1.truncate(K), sd2.truncate(K)

    have_vectors = sd1.eigvecs is not None and sd2.eigvecs is not None
    gram = cross_gram(sd1, sd2) if have_vectors else None
    if pair:
        pairing = pair_modes(sd1, sd2, gram=gram, rotate=rotate)
    else:
        pairing = Pairing.identity(sd1.K)
    printv(verbose, "\tpairing: {}".format(pairing))

    parts = compute_delta(sd1, sd2, p, q, pairing)
    bar_star = compute_delta_bar_star(sd1, sd2, n, pairing)
    delta0 = None
    if have_vectors:
        delta0 = compute_delta0(aligned_gram(gram, pairing), n)

    return DeltaReport(
        p,
        q,
        sd1.K,
        n,
        parts["delta"],
        parts["lambda_term"],
        parts["psi_term"],
        delta0,
        bar_star["delta_bar"],
        bar_star["k0"],
        bar_star["delta_star"],
        pairing,
        tail_estimates(sd1, sd2, p, q, n),
    )
