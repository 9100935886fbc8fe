#!/usr/bin/env python
"""
Boundary spectral data: the Dirichlet eigenvalues of an assembled operator
together with the conormal fluxes of the normalized eigenfunctions.
"""

from inspect import currentframe as getframe

import numpy as np

from .helpers import Bsd2DtnWarning, ConfigError, ConvergenceError, printv


DENSE_LIMIT = 2500
RESIDUAL_TOL = 1e-9
CLUSTER_RTOL = 1e-8


class SpectralData(object):
    """
    Boundary spectral data record (lam_k, psi_k), k = 1..K.

    Attributes
    ----------
    lambdas : np.array, shape=[K, ]
        nondecreasing Dirichlet eigenvalues
    psis : np.array, shape=[K, n_boundary]
        conormal fluxes of the eigenfunctions on the boundary dofs
    mass_weight : np.array, shape=[n_interior, ]
        diagonal of the lumped L2(dV_g) mass used for normalization
    boundary_weight : scipy.sparse matrix, shape=[n_boundary, n_boundary]
        L2(Gamma, dS_g) mass
    eigvecs : np.array, shape=[K, n_interior] or None
        interior eigenvectors, orthonormal in ``mass_weight``
    n : int
    mesh_signature : tuple
        (n, resolution) of the mesh the record lives on
    n_dofs : int
        number of interior dofs, i.e. the size of the full discrete spectrum
    """

    def __init__(
        self,
        lambdas,
        psis,
        mass_weight,
        boundary_weight,
        n,
        mesh_signature,
        eigvecs=None,
        kind="metric",
        n_dofs=None,
    ):
        self.lambdas = np.asarray(lambdas, dtype=float)
        self.psis = np.atleast_2d(np.asarray(psis, dtype=float))
        self.mass_weight = np.asarray(mass_weight, dtype=float)
        self.boundary_weight = boundary_weight
        if eigvecs is not None:
            eigvecs = np.atleast_2d(np.asarray(eigvecs, float))
        self.eigvecs = eigvecs
        self.n = int(n)
        self.mesh_signature = tuple(mesh_signature)
        self.kind = kind
        self.n_dofs = int(self.mass_weight.size if n_dofs is None else n_dofs)

        if self.psis.shape[0] != self.K:
            raise ConfigError(
                "psis has {} rows for K={}".format(self.psis.shape[0], self.K)
            )
        if self.eigvecs is not None and self.eigvecs.shape[0] != self.K:
            raise ConfigError(
                "eigvecs has {} rows for K={}".format(self.eigvecs.shape[0], self.K)
            )

    @property
    def K(self):
        return self.lambdas.size

    @property
    def psi_norms(self):
        from .utils import weighted_norm

        return np.atleast_1d(weighted_norm(self.psis, self.boundary_weight))

    @property
    def theta(self):
        return weyl_constant(self.lambdas, self.n)

    @property
    def trace_constant(self):
        return trace_constant(self.psi_norms, self.n)

    def clusters(self, rtol=CLUSTER_RTOL):
        """
        Groups of indices whose consecutive eigenvalues differ by at most
        rtol * lam_k.
        """
        groups = [[0]]
        for k in range(1, self.K):
            previous = self.lambdas[k - 1]
            if abs(self.lambdas[k] - previous) <= rtol * abs(previous):
                groups[-1] += [k]
            else:
                groups += [[k]]
        return [np.array(g) for g in groups]

    def truncate(self, K):
        """Record restricted to the first K modes."""
        return SpectralData(
            self.lambdas[:K],
            self.psis[:K],
            self.mass_weight,
            self.boundary_weight,
            self.n,
            self.mesh_signature,
            eigvecs=None if self.eigvecs is None else self.eigvecs[:K],
            kind=self.kind,
            n_dofs=self.n_dofs,
        )

    def relabel(self, order, signs=None):
        """Record with modes taken in ``order`` and multiplied by ``signs``."""
        order = np.asarray(order, dtype=int)
        signs = np.ones(order.size) if signs is None else np.asarray(signs, dtype=float)
        eigvecs = None
        if self.eigvecs is not None:
            eigvecs = self.eigvecs[order] * signs[:, None]
        return SpectralData(
            self.lambdas[order],
            self.psis[order] * signs[:, None],
            self.mass_weight,
            self.boundary_weight,
            self.n,
            self.mesh_signature,
            eigvecs=eigvecs,
            kind=self.kind,
            n_dofs=self.n_dofs,
        )

    def rotated(self, rotations):
        """
        Record whose modes inside the given clusters are recombined,
        new mode l of a cluster C being sum_m mode C[m] Q[m, l].

        Parameters
        ----------
        rotations : dict
            cluster index tuples mapped to orthogonal matrices
        """
        psis = self.psis.copy()
        eigvecs = None if self.eigvecs is None else self.eigvecs.copy()
        for cluster, Q in rotations.items():
            idx = np.asarray(cluster, dtype=int)
            psis[idx] = np.asarray(Q).T @ self.psis[idx]
            if eigvecs is not None:
                eigvecs[idx] = np.asarray(Q).T @ self.eigvecs[idx]
        return SpectralData(
            self.lambdas,
            psis,
            self.mass_weight,
            self.boundary_weight,
            self.n,
            self.mesh_signature,
            eigvecs=eigvecs,
            kind=self.kind,
            n_dofs=self.n_dofs,
        )

    def with_values(self, lambdas=None, psis=None):
        """Copy with replaced eigenvalues and/or fluxes (for constructed data)."""
        return SpectralData(
            self.lambdas if lambdas is None else lambdas,
            self.psis if psis is None else psis,
            self.mass_weight,
            self.boundary_weight,
            self.n,
            self.mesh_signature,
            eigvecs=self.eigvecs,
            kind=self.kind,
            n_dofs=self.n_dofs,
        )

    def to_dataset(self):
        """
        xarray view of the record with the empirical constants as attributes
        and a provenance history.
        """
        import xarray as xr

        from .helpers import attach_history

        mode = np.arange(1, self.K + 1)
        ds = xr.Dataset(
            {
                "lambdas": xr.DataArray(self.lambdas, dims=["mode"]),
                "psis": xr.DataArray(self.psis, dims=["mode", "boundary_dof"]),
                "psi_norm": xr.DataArray(self.psi_norms, dims=["mode"]),
            },
            coords={"mode": mode},
        )
        if self.eigvecs is not None:
            ds["eigvecs"] = xr.DataArray(self.eigvecs, dims=["mode", "interior_dof"])
        ds["lambdas"].attrs = dict(units="inverse length squared")

        attrs = dict(
            n=self.n,
            kind=self.kind,
            resolution=self.mesh_signature[1],
            theta=self.theta,
            trace_constant=self.trace_constant,
            description="boundary spectral data (eigenvalues and boundary fluxes)",
        )
        return attach_history(getframe(), ds, **attrs)

    def __repr__(self):
        return "<SpectralData K={} n={} kind={} lambda_1={:.6g}>".format(
            self.K, self.n, self.kind, self.lambdas[0]
        )


def weyl_constant(lambdas, n):
    """
    Smallest theta with theta^-1 k^(2/n) <= lam_k <= theta k^(2/n) for all k.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    k = np.arange(1, lambdas.size + 1)
    ratio = lambdas * k ** (-2.0 / n)
    return float(max(ratio.max(), (1.0 / ratio).max()))


def trace_constant(psi_norms, n):
    """
    Smallest c with ||psi_k|| <= c k^(7/(4n)) for all k.
    """
    psi_norms = np.asarray(psi_norms, dtype=float)
    k = np.arange(1, psi_norms.size + 1)
    return float((psi_norms * k ** (-7.0 / (4 * n))).max())


def _fix_signs(V):
    """Largest-magnitude entry of each row made positive (first within 1e-8)."""
    mags = np.abs(V)
    top = mags.max(axis=1, keepdims=True)
    first = np.argmax(mags >= top * (1 - 1e-8), axis=1)
    signs = np.sign(V[np.arange(V.shape[0]), first])
    signs[signs == 0] = 1.0
    return V * signs[:, None]


def _dense_modes(op, K):
    from scipy.linalg import eigh

    d = op.M.diagonal()
    s = 1.0 / np.sqrt(d)
    A = s[:, None] * op.K.toarray() * s[None, :]
    A = 0.5 * (A + A.T)
    lambdas, Y = eigh(A, subset_by_index=[0, K - 1])
    return lambdas, (Y * s[:, None]).T


def _sparse_modes(op, K, tol, maxiter):
    from scipy.linalg import eigh
    from scipy.sparse.linalg import ArpackNoConvergence, eigsh

    # fixed start vector: reruns reproduce the record bit for bit
    v0 = np.ones(op.n_interior)
    try:
        lambdas, V = eigsh(
            op.K, k=K, M=op.M, sigma=0.0, which="LM", v0=v0, tol=tol, maxiter=maxiter
        )
    except ArpackNoConvergence as err:
        raise ConvergenceError(
            "eigensolver did not converge: {} of {} modes".format(
                len(err.eigenvalues), K
            )
        )
    # Rayleigh-Ritz on the converged subspace restores M-orthonormality
    # inside degenerate clusters
    A = V.T @ (op.K @ V)
    B = V.T @ (op.M @ V)
    lambdas, Y = eigh(0.5 * (A + A.T), 0.5 * (B + B.T))
    return lambdas, (V @ Y).T


def eigen_residuals(op, lambdas, V, scaled=False):
    """
    Per-mode residuals ||K v - lam M v|| / ||M v||, divided once more by
    max(lam, 1) when ``scaled``.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    V = np.atleast_2d(V)
    MV = V * op.M.diagonal()[None, :]
    residual = np.linalg.norm((op.K @ V.T).T - lambdas[:, None] * MV, axis=1)
    residual /= np.linalg.norm(MV, axis=1)
    if scaled:
        residual /= np.maximum(lambdas, 1.0)
    return residual


def eigensolve(op, K, tol=1e-12, maxiter=None, keep_eigvecs=True, verbose=False):
    """
    Lowest K Dirichlet eigenpairs of an assembled operator and the fluxes of
    the eigenfunctions.

    Parameters
    ----------
    op : OperatorPair
    K : int
        number of modes, 1 <= K <= interior dof count
    tol : float [1e-12]
        eigensolver tolerance (sparse shift-invert route only)
    maxiter : int
        iteration budget of the sparse route
    keep_eigvecs : bool [True]
        keep the interior eigenvectors (needed for Gram matrices and
        resolvent powers)
    verbose : bool [False]

    Returns
    -------
    SpectralData

    Raises
    ------
    ConfigError
        if K is not in [1, interior dof count]
    ConvergenceError
        if the eigensolver fails or a mode residual exceeds 1e-9
    """
    import warnings

    n_dofs = op.n_interior
    if int(K) != K or K < 1 or K > n_dofs:
        raise ConfigError("K must be an integer in [1, {}], got {}".format(n_dofs, K))
    K = int(K)

    if n_dofs <= DENSE_LIMIT:
        printv(verbose, "\tdense eigensolve: {} dofs, {} modes".format(n_dofs, K))
        lambdas, V = _dense_modes(op, K)
    else:
        msg = "\tshift-invert eigensolve: {} dofs, {} modes".format(n_dofs, K)
        printv(verbose, msg)
        lambdas, V = _sparse_modes(op, K, tol, maxiter)

    order = np.argsort(lambdas, kind="stable")
    lambdas, V = lambdas[order], V[order]
    V = _fix_signs(V)

    residual = eigen_residuals(op, lambdas, V)
    if (residual > RESIDUAL_TOL).any() or lambdas[0] <= 0:
        k = int(np.argmax(residual))
        raise ConvergenceError(
            "eigenpair {} has relative residual {:.3g}".format(k + 1, residual[k])
        )

    psis = op.boundary_solve((op.K_BI @ V.T)).T

    sd = SpectralData(
        lambdas,
        psis,
        op.M.diagonal(),
        op.boundary_mass,
        op.mesh.n,
        op.mesh.signature,
        eigvecs=V if keep_eigvecs else None,
        kind=op.kind,
        n_dofs=n_dofs,
    )
    n_clustered = sum(c.size for c in sd.clusters() if c.size > 1)
    if n_clustered:
        msg = "{} of {} modes lie in degenerate clusters".format(n_clustered, K)
        warnings.warn(msg, category=Bsd2DtnWarning)
    msg = "\tlambda_1 = {:.8g}, lambda_K = {:.8g}".format(lambdas[0], lambdas[-1])
    printv(verbose, msg)
    return sd


def validate_estimates(sd, n=None, sd_fine=None, op=None):
    """
    Empirical Weyl constant theta and trace-growth constant c of a record,
    and their ratio against a refined record when given.

    Parameters
    ----------
    sd : SpectralData
    n : int
        dimension used in the exponents; defaults to ``sd.n``
    sd_fine : SpectralData, optional
        same problem on a refined mesh, compared over the common modes
    op : OperatorPair, optional
        operator of ``sd``; adds the largest eigenpair residual, plain and
        scaled by max(lam_k, 1), when the record keeps its eigenvectors

    Returns
    -------
    VerificationReport
        report-only (always passes); ``measured`` holds theta, c and, with
        ``sd_fine``, their refined values and ratios
    """
    from .verify import VerificationReport

    n = sd.n if n is None else n
    theta = weyl_constant(sd.lambdas, n)
    const = trace_constant(sd.psi_norms, n)
    measured = dict(theta=theta, trace_constant=const)
    bounds = {}
    if sd_fine is not None:
        K = min(sd.K, sd_fine.K)
        theta_f = weyl_constant(sd_fine.lambdas[:K], n)
        const_f = trace_constant(sd_fine.psi_norms[:K], n)
        measured.update(
            theta_fine=theta_f,
            trace_constant_fine=const_f,
            theta_ratio=max(theta, theta_f) / min(theta, theta_f),
            trace_constant_ratio=max(const, const_f) / min(const, const_f),
        )
        bounds.update(theta_ratio=1.2, trace_constant_ratio=1.2)
    if op is not None and sd.eigvecs is not None:
        residual = eigen_residuals(op, sd.lambdas, sd.eigvecs)
        scaled = eigen_residuals(op, sd.lambdas, sd.eigvecs, scaled=True)
        measured.update(
            max_residual=float(residual.max()), max_scaled_residual=float(scaled.max())
        )
        bounds["max_residual"] = RESIDUAL_TOL

    inputs = dict(K=sd.K, n=n, mesh=list(sd.mesh_signature))
    return VerificationReport(
        "spectral_estimates", inputs, measured, bounds, report_only=True
    )


def cross_gram(sd1, sd2):
    """
    Cross-Gram matrix G[k, l] = (phi_k^2 | phi_l^1) in the mass weight of sd1.

    Rows index the modes of ``sd2``, columns the modes of ``sd1``.

    Raises
    ------
    MeshMismatchError
        if the records live on different meshes
    ConfigError
        if either record was computed without eigenvectors
    """
    import warnings

    from .helpers import MeshMismatchError

    if sd1.mesh_signature != sd2.mesh_signature:
        raise MeshMismatchError(
            "records on meshes {} and {}".format(sd1.mesh_signature, sd2.mesh_signature)
        )
    if sd1.eigvecs is None or sd2.eigvecs is None:
        raise ConfigError("cross_gram needs records computed with keep_eigvecs=True")

    gram = sd2.eigvecs @ (sd1.eigvecs * sd1.mass_weight[None, :]).T
    if np.abs(gram).max() > 1 + 1e-8:
        msg = "cross-Gram entry {:.6g} exceeds 1 (mass weights differ)".format(
            np.abs(gram).max()
        )
        warnings.warn(msg, category=Bsd2DtnWarning)
    return gram


def projector_distance(sd1, sd2, cluster):
    """
    Frobenius distance between the spectral projectors of a mode cluster,
    the quantity that is stable inside degenerate eigenvalues.
    """
    idx = np.asarray(cluster, dtype=int)
    Y1 = (sd1.eigvecs[idx] * np.sqrt(sd1.mass_weight)[None, :]).T
    Y2 = (sd2.eigvecs[idx] * np.sqrt(sd2.mass_weight)[None, :]).T
    # ||P1 - P2||_F^2 = tr P1 + tr P2 - 2 ||Y1^T Y2||_F^2 for orthonormal Y
    cross = np.linalg.norm(Y1.T @ Y2) ** 2
    value = np.linalg.norm(Y1.T @ Y1) ** 2 + np.linalg.norm(Y2.T @ Y2) ** 2 - 2 * cross
    return float(np.sqrt(max(value, 0.0)))
