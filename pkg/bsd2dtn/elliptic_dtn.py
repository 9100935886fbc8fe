#!/usr/bin/env python
"""
Elliptic Dirichlet-to-Neumann maps Lambda(lam) and their lam-derivatives,
computed by direct boundary value solves and by spectral series over a
boundary spectral record, together with the resolvent and Taylor
machinery used to compare two records.
"""

from math import factorial

import numpy as np

from .assembly import GUARD_BAND, check_shift
from .bsd_metrics import smallest_k0 as smallest_j0
from .helpers import (
    ConfigError,
    DivergentSeriesError,
    MeshMismatchError,
    NearSingularShiftError,
    printv,
)
from .utils import compensated_sum, stable_sum


class DtnOperator(object):
    """
    Boundary matrix of Lambda^(j)(lam).

    Attributes
    ----------
    matrix : np.array, shape=[n_boundary, n_boundary]
        ``matrix @ phi`` is the flux for boundary data ``phi``
    lam : float
    j : int
        derivative order in lam (0 = the map itself)
    weight : scipy.sparse matrix
        boundary inner product the map is self-adjoint in
    route : str
        direct, series or finite_difference
    K_used : int or None
    tail_bound : float or None
        bound of the dropped modes for the series route
    """

    def __init__(
        self,
        matrix,
        lam,
        j,
        weight,
        route,
        K_used=None,
        tail_bound=None,
        mesh_signature=None,
    ):
        self.matrix = np.asarray(matrix, dtype=float)
        self.lam = float(lam)
        self.j = int(j)
        self.weight = weight
        self.route = route
        self.K_used = K_used
        self.tail_bound = tail_bound
        self.mesh_signature = mesh_signature

    def apply(self, phi):
        """Flux of boundary data ``phi`` (a vector or rows of probes)."""
        phi = np.asarray(phi, dtype=float)
        if phi.ndim == 1:
            return self.matrix @ phi
        return (self.matrix @ phi.T).T

    def symmetry_defect(self):
        """Relative asymmetry of the form <Lambda phi, chi> in the weight."""
        form = self.weight @ self.matrix
        scale = max(np.abs(form).max(), np.finfo(float).tiny)
        return float(np.abs(form - form.T).max() / scale)

    def __sub__(self, other):
        if self.mesh_signature != other.mesh_signature:
            raise MeshMismatchError("DtN maps on different meshes")
        return DtnOperator(
            self.matrix - other.matrix,
            self.lam,
            self.j,
            self.weight,
            "difference",
            mesh_signature=self.mesh_signature,
        )

    def __repr__(self):
        return "<DtnOperator route={} lam={:.6g} j={} size={} K={}>".format(
            self.route, self.lam, self.j, self.matrix.shape[0], self.K_used
        )


def dtn_direct(op, lam, j=0, check=True):
    """
    Lambda^(j)(lam) by direct solves.

    Column b is the flux of the solution with the b-th boundary basis
    function as data. Derivatives follow the solve chain
    (K + lam M) u^(i) = -i M u^(i-1) with zero boundary data, all columns
    at once through one factorization.

    Parameters
    ----------
    op : OperatorPair
    lam : float
        shift outside the guard band of the discrete spectrum
    j : int [0]
        derivative order

    Returns
    -------
    DtnOperator

    Raises
    ------
    NearSingularShiftError
    ConvergenceError
    """
    from .assembly import _check_residual

    if check:
        check_shift(op, lam)
    lu = op.factor(lam)
    A = op.system(lam)

    rhs = -op.K_IB.toarray()
    U = lu.solve(rhs)
    _check_residual(A, U, rhs)
    if j == 0:
        residual = op.K_BI @ U + op.K_BB.toarray()
    else:
        for i in range(1, j + 1):
            rhs = -i * op.M @ U
            U = lu.solve(rhs)
            _check_residual(A, U, rhs)
        residual = op.K_BI @ U
    matrix = op.boundary_solve(residual)
    return DtnOperator(
        matrix, lam, j, op.boundary_mass, "direct", mesh_signature=op.mesh.signature
    )


def dtn_finite_difference(op, lam, j, step=1e-3):
    """
    Centered finite difference of order j of the direct route,
    sum_i (-1)^i C(j, i) Lambda(lam + (j/2 - i) step) / step^j.
    """
    from scipy.special import comb

    matrix = 0.0
    for i in range(j + 1):
        shift = lam + (0.5 * j - i) * step
        matrix = matrix + (-1) ** i * comb(j, i) * dtn_direct(op, shift).matrix
    matrix = matrix / step**j
    route = "finite_difference"
    return DtnOperator(
        matrix, lam, j, op.boundary_mass, route, mesh_signature=op.mesh.signature
    )


def series_coefficients(lambdas, lam, j):
    """
    (-1)^(j+1) j! / (lam_k + lam)^(j+1), refusing shifts in the guard band.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    base = lambdas + lam
    near = np.abs(base) < GUARD_BAND * (1 + np.abs(lambdas))
    if near.any():
        raise NearSingularShiftError(lam, float(lambdas[near][0]))
    return (-1) ** (j + 1) * factorial(j) / base ** (j + 1)


def _series_matrix(sd, lam, j):
    # mode by mode in index order: reruns and thread counts give the same bits
    coef = series_coefficients(sd.lambdas, lam, j)
    weighted = (sd.boundary_weight @ sd.psis.T).T
    terms = (c * np.outer(psi, w) for c, psi, w in zip(coef, sd.psis, weighted))
    return compensated_sum(terms)


def series_tail_bound(sd, lam, j, n_modes=None):
    """
    Bound of the modes K < k <= N dropped from the series,

        j! c^2 sum_k k^(7/(2n)) (theta^-1 k^(2/n) + lam)^-(j+1)

    with the empirical Weyl and trace constants of the record. Zero when
    the record holds the full discrete spectrum.
    """
    N = sd.n_dofs if n_modes is None else n_modes
    if N <= sd.K:
        return 0.0
    n = sd.n
    k = np.arange(sd.K + 1, N + 1, dtype=float)
    base = k ** (2.0 / n) / sd.theta + lam
    if (base <= 0).any():
        return np.inf
    terms = k ** (7.0 / (2 * n)) * base ** (-(j + 1))
    return float(factorial(j) * sd.trace_constant**2 * stable_sum(terms))


def dtn_series(sd, lam, j=0, reference=None, reference_sd=None, threshold=None, K=None):
    """
    Lambda^(j)(lam) from boundary spectral data,

        (-1)^(j+1) j! sum_{k<=K} <phi|psi_k> psi_k / (lam_k + lam)^(j+1)

    Below the convergence threshold (j <= (n+3)/4 by default, and always
    for j = 0, whose series misses the local boundary part) a direct
    ``reference`` map is required. The result is then

        reference.matrix + series(sd, lam) - series(reference_sd, reference.lam)

    which sums a difference series. ``reference_sd`` defaults to ``sd``
    (shift acceleration); passing the record of another operator gives the
    two-record difference structure.

    Parameters
    ----------
    sd : SpectralData
    lam : float
    j : int [0]
    reference : DtnOperator, optional
        direct map of order j at any admissible shift
    reference_sd : SpectralData, optional
        record belonging to ``reference``
    threshold : float, optional
        convergence threshold; defaults to (n+3)/4
    K : int, optional
        truncation; all modes of the record by default

    Returns
    -------
    DtnOperator

    Raises
    ------
    DivergentSeriesError
        below the threshold without a reference
    NearSingularShiftError
    """
    n = sd.n
    threshold = (n + 3) / 4.0 if threshold is None else threshold
    if K is not None:
        sd = sd.truncate(K)

    if reference is None:
        if j == 0 or j <= threshold:
            raise DivergentSeriesError(
                "the flux series of order j={} does not converge for n={} "
                "(threshold {:.4g}); pass a direct reference map to sum the "
                "difference series instead".format(j, n, threshold)
            )
        matrix = _series_matrix(sd, lam, j)
        tail = series_tail_bound(sd, lam, j)
        return DtnOperator(
            matrix, lam, j, sd.boundary_weight, "series", sd.K, tail, sd.mesh_signature
        )

    reference_sd = sd if reference_sd is None else reference_sd
    if reference.j != j:
        raise ConfigError("reference has order {} but j={}".format(reference.j, j))
    if reference.mesh_signature not in (None, sd.mesh_signature):
        raise MeshMismatchError("reference map and record live on different meshes")
    if K is not None:
        reference_sd = reference_sd.truncate(K)

    matrix = (
        reference.matrix
        + _series_matrix(sd, lam, j)
        - _series_matrix(reference_sd, reference.lam, j)
    )
    tail = series_tail_bound(sd, lam, j)
    tail += series_tail_bound(reference_sd, reference.lam, j)
    return DtnOperator(
        matrix, lam, j, sd.boundary_weight, "series", sd.K, tail, sd.mesh_signature
    )


def _need_vectors(sd):
    if sd.eigvecs is None:
        raise ConfigError(
            "interior eigenvectors are required; eigensolve with keep_eigvecs=True"
        )


def resolvent_power(sd, lam, j, f):
    """
    R(lam)^j f = sum_k (f|phi_k) / (lam_k + lam)^j phi_k over the retained
    modes; j = 0 is the projection onto their span.

    Parameters
    ----------
    sd : SpectralData
        with eigenvectors
    lam : float
    j : int
    f : np.array, shape=[n_interior, ]
    """
    _need_vectors(sd)
    f = np.asarray(f, dtype=float)
    coef = sd.eigvecs @ (sd.mass_weight * f)
    if j > 0:
        base = sd.lambdas + lam
        if (np.abs(base) < GUARD_BAND * (1 + sd.lambdas)).any():
            nearest = float(sd.lambdas[np.argmin(np.abs(base))])
            raise NearSingularShiftError(lam, nearest)
        coef = coef / base**j
    return sd.eigvecs.T @ coef


def solution_series(sd, lam, j, phi):
    """
    Interior values of u^(j)(lam)(phi) from the record,

        (-1)^(j+1) j! sum_k <phi|psi_k> / (lam_k + lam)^(j+1) phi_k
    """
    _need_vectors(sd)
    pairing = sd.psis @ (sd.boundary_weight @ np.asarray(phi, dtype=float))
    return sd.eigvecs.T @ (series_coefficients(sd.lambdas, lam, j) * pairing)


def three_term_split(sd1, sd2, lam, j, phi):
    """
    Splits u^1(lam)^(j) - u^2(lam)^(j) into the eigenvalue term, the flux
    term and the eigenvector term.

    Returns
    -------
    dict
        ``u1``, ``u2``, ``u3``, the series difference ``total`` and the
        relative defect of the sum
    """
    _need_vectors(sd1)
    _need_vectors(sd2)
    phi = np.asarray(phi, dtype=float)
    W = sd1.boundary_weight
    sign = (-1) ** (j + 1) * factorial(j)
    base1 = (sd1.lambdas + lam) ** (-(j + 1))
    base2 = (sd2.lambdas + lam) ** (-(j + 1))
    pair1 = sd1.psis @ (W @ phi)
    pair2 = sd2.psis @ (W @ phi)

    u1 = sign * sd1.eigvecs.T @ ((base1 - base2) * pair1)
    u2 = sign * sd1.eigvecs.T @ (base2 * (pair1 - pair2))
    u3 = sign * (sd1.eigvecs - sd2.eigvecs).T @ (base2 * pair2)
    total = solution_series(sd1, lam, j, phi) - solution_series(sd2, lam, j, phi)

    scale = max(np.linalg.norm(total), np.linalg.norm(u1) + np.linalg.norm(u2), 1e-300)
    defect = np.linalg.norm(u1 + u2 + u3 - total) / scale
    return dict(u1=u1, u2=u2, u3=u3, total=total, defect=float(defect))


def ui0_identity(lam, a, b, j):
    """
    Both sides of

        j! (1/(lam+a)^(j+1) - 1/(lam+b)^(j+1))
            = -(j+1)! int_0^1 (a-b) / (lam + b + t(a-b))^(j+2) dt

    with the right side by adaptive quadrature.
    """
    from .utils import adaptive_quad

    lhs = factorial(j) * ((lam + a) ** (-(j + 1)) - (lam + b) ** (-(j + 1)))
    if a == b:
        return lhs, 0.0

    def integrand(t):
        return (a - b) / (lam + b + t * (a - b)) ** (j + 2)

    value, _ = adaptive_quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-13)
    return lhs, -factorial(j + 1) * value


def lemte_integral(j, m, a, lam):
    """
    int_0^lam s^(j-1) (a+s)^-(j+m+1) ds by adaptive quadrature.

    With x = s/(a+s) the integral becomes
    a^-(m+1) int_0^(lam/(a+lam)) x^(j-1) (1-x)^m dx, a polynomial on a
    bounded interval, which also covers lam = inf.
    """
    from .utils import adaptive_quad

    if a <= 0:
        raise ConfigError("a must be positive, got {}".format(a))
    if lam <= 0:
        return 0.0
    upper = 1.0 if np.isinf(lam) else lam / (a + lam)

    def integrand(x):
        return x ** (j - 1) * (1 - x) ** m

    value, _ = adaptive_quad(integrand, 0.0, upper, epsabs=0.0, epsrel=1e-13)
    return value * a ** (-(m + 1))


def lemte_closed_form(j, m, a, lam):
    """a^-(m+1) B(j, m+1) I_x(j, m+1) with x = lam/(a+lam)."""
    from scipy.special import beta, betainc

    upper = 1.0 if np.isinf(lam) else lam / (a + lam)
    return float(a ** (-(m + 1)) * beta(j, m + 1) * betainc(j, m + 1, upper))


def taylor_coefficients(lambdas, lam, m, j0):
    """
    d_k = (-1)^(m+1) (j0+m)!/(j0-1)! int_0^lam s^(j0-1) (lam_k + s)^-(j0+m+1) ds
    """
    prefactor = (-1) ** (m + 1) * factorial(j0 + m) / factorial(j0 - 1)
    return np.array([prefactor * lemte_integral(j0, m, lk, lam) for lk in lambdas])


def taylor_remainder(sd1, sd2, lam, m, probes, j0=None):
    """
    Integral remainder of the Taylor expansion of the DtN difference,

        Upsilon = sum_k d_k^1 <phi|psi_k^1> psi_k^1 - d_k^2 <phi|psi_k^2> psi_k^2

    Parameters
    ----------
    sd1, sd2 : SpectralData
        aligned records (see ``bsd_metrics.pair_modes``)
    lam : float
        positive expansion point
    m : int
        derivative order at 0 being expanded
    probes : np.array, shape=[n_probes, n_boundary]
    j0 : int, optional
        expansion length; floor((n+3)/4) + 1 by default

    Returns
    -------
    dict
        ``upsilon`` (per probe), coefficients ``d1``, ``d2`` and the empirical
        constants of |d_k| <= c k^(-2/n) and |d_k^1 - d_k^2| <= c k^(-4/n) |dlam_k|
    """
    if lam <= 0:
        raise ConfigError("the expansion point must be positive, got {}".format(lam))
    n = sd1.n
    j0 = smallest_j0(n) if j0 is None else int(j0)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    W = sd1.boundary_weight

    d1 = taylor_coefficients(sd1.lambdas, lam, m, j0)
    d2 = taylor_coefficients(sd2.lambdas, lam, m, j0)
    weighted1 = d1 * (probes @ (W @ sd1.psis.T))
    weighted2 = d2 * (probes @ (W @ sd2.psis.T))
    upsilon = compensated_sum(
        np.outer(weighted1[:, k], sd1.psis[k]) - np.outer(weighted2[:, k], sd2.psis[k])
        for k in range(sd1.K)
    )

    k = np.arange(1, sd1.K + 1, dtype=float)
    gap = np.abs(sd1.lambdas - sd2.lambdas)
    diff = np.abs(d1 - d2)
    ratio = np.where(gap > 0, diff * k ** (4.0 / n) / np.where(gap > 0, gap, 1.0), 0.0)
    growth = np.maximum(np.abs(d1), np.abs(d2)) * k ** (2.0 / n)
    return dict(
        upsilon=upsilon,
        d1=d1,
        d2=d2,
        j0=j0,
        coefficient_constant=float(growth.max()),
        difference_constant=float(ratio.max()),
    )


def taylor_assembly_residual(op1, op2, sd1, sd2, lam, m, probes, j0=None):
    """
    Relative defect of the Taylor assembly of the DtN difference at 0,

        dLambda^(m)(0) = sum_{j<j0} (-lam)^j / j! dLambda^(m+j)(lam) + Upsilon

    with the derivatives from direct solves and the remainder from the
    records. Exact up to rounding when the records hold the full discrete
    spectrum.
    """
    n = sd1.n
    j0 = smallest_j0(n) if j0 is None else int(j0)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))

    left = (dtn_direct(op1, 0.0, m) - dtn_direct(op2, 0.0, m)).apply(probes)
    right = taylor_remainder(sd1, sd2, lam, m, probes, j0)["upsilon"]
    for j in range(j0):
        diff = dtn_direct(op1, lam, m + j) - dtn_direct(op2, lam, m + j)
        right = right + (-lam) ** j / factorial(j) * diff.apply(probes)

    scale = max(np.abs(left).max(), np.abs(right).max(), 1e-300)
    return float(np.abs(left - right).max() / scale)


def operator_norm(dtn, weight=None, norm="l2", mesh=None):
    """
    Norm of a boundary map.

    Parameters
    ----------
    dtn : DtnOperator or np.array
    weight : boundary mass, taken from ``dtn`` when it is a DtnOperator
    norm : str ["l2"]
        "l2" for L2(Gamma) -> L2(Gamma), "h12" for H^(1/2) -> H^(-1/2) via
        fractional powers of the boundary Laplace-Beltrami operator
    mesh : Mesh
        required for "h12"
    """
    from .utils import sobolev_operator_norm, weighted_operator_norm

    if isinstance(dtn, DtnOperator):
        matrix = dtn.matrix
        weight = dtn.weight if weight is None else weight
    else:
        matrix = np.asarray(dtn, dtype=float)
    if weight is None:
        raise ConfigError("a boundary weight is required for a bare matrix")

    if norm == "l2":
        return weighted_operator_norm(matrix, weight)
    if norm == "h12":
        from .assembly import boundary_laplacian

        if mesh is None:
            raise ConfigError("the h12 norm needs the mesh for the boundary Laplacian")
        return sobolev_operator_norm(matrix, weight, boundary_laplacian(mesh))
    raise ConfigError("norm must be 'l2' or 'h12', got {}".format(norm))


def probe_norms(values, weight):
    """Boundary L2 norm of each row."""
    from .utils import weighted_norm

    return np.atleast_1d(weighted_norm(values, weight))


def large_shift_decay(sd1, sd2, lambdas, j, probes, ops=None, verbose=False):
    """
    lam^j ||Lambda^1(j)(lam) phi - Lambda^2(j)(lam) phi|| / ||phi|| over a
    grid of large shifts, which vanishes as lam grows.

    The difference comes from the records for j >= 1 (the series of the
    difference converges) and from direct solves when ``ops`` = (op1, op2)
    is given, which is required for j = 0.

    Returns
    -------
    dict
        ``lambdas``, the worst probe ratio ``values`` per shift, the fitted
        log-log ``slope`` and the potential-case rate ``reference_rate`` -1/8
    """
    from .utils import loglog_fit

    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    W = sd1.boundary_weight
    norms = probe_norms(probes, W)
    if ops is None and j == 0:
        raise DivergentSeriesError("j=0 needs the operators for direct solves")

    values = []
    for lam in lambdas:
        if ops is not None:
            diff = dtn_direct(ops[0], lam, j) - dtn_direct(ops[1], lam, j)
            flux = diff.apply(probes)
        else:
            diff = _series_matrix(sd1, lam, j) - _series_matrix(sd2, lam, j)
            flux = probes @ diff.T
        ratio = lam**j * probe_norms(flux, W) / norms
        values += [float(ratio.max())]
        printv(verbose, "\tlam={:.4g}: {:.6g}".format(lam, values[-1]))

    fit = loglog_fit(lambdas, values)
    return dict(
        lambdas=list(map(float, lambdas)),
        values=values,
        slope=fit["slope"],
        reference_rate=-0.125,
    )
