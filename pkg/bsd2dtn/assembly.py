#!/usr/bin/env python
"""
First-order element assembly for -Delta_g, -div(a grad) and -Delta_g + V
with Dirichlet data, plus the Dirichlet lift and the variational conormal
flux on the boundary.
"""

import numpy as np
import scipy.sparse as sp

from .helpers import (
    ConvergenceError,
    MeshMismatchError,
    NearSingularShiftError,
    NumericalError,
)


GUARD_BAND = 1e-6
DENSE_LIMIT = 500


class OperatorPair(object):
    """
    Discrete operator of one coefficient field on one mesh.

    The mass is row-sum lumped and carried by the interior dofs only, so the
    Dirichlet lift and the boundary flux couple through the stiffness alone.
    The conormal flux of a discrete solution u at shift lam is

        flux = M_gamma^{-1} (K u + lam M u)|_boundary

    which is the function whose boundary pairing reproduces the residual of
    the weak form.

    Attributes
    ----------
    K_full : scipy.sparse.csr_matrix, shape=[n_vertices, n_vertices]
    mass : np.array, shape=[n_vertices, ]
        lumped mass, zero on boundary vertices
    boundary_mass : scipy.sparse.csr_matrix, shape=[n_boundary, n_boundary]
        consistent boundary mass with weight sqrt|g_0| (1 for conductivities)
    K, M : interior stiffness and (diagonal) mass
    K_IB, K_BI, K_BB : couplings with the boundary dofs
    """

    def __init__(self, mesh, kind, K_full, mass, boundary_mass):
        self.mesh = mesh
        self.kind = kind
        self.K_full = K_full.tocsr()
        self.mass = np.asarray(mass, dtype=float)
        self.boundary_mass = boundary_mass.tocsr()

        I, B = mesh.interior, mesh.boundary
        self.K = self.K_full[I][:, I].tocsr()
        self.M = sp.diags(self.mass[I]).tocsr()
        self.K_IB = self.K_full[I][:, B].tocsr()
        self.K_BI = self.K_full[B][:, I].tocsr()
        self.K_BB = self.K_full[B][:, B].tocsr()
        self._factors = {}
        self._boundary_factor = None

    @property
    def n_interior(self):
        return self.mesh.n_interior

    @property
    def n_boundary(self):
        return self.mesh.n_boundary

    def system(self, lam):
        return (self.K + lam * self.M).tocsc()

    def factor(self, lam):
        """Sparse LU of K + lam M on the interior dofs, cached per shift."""
        from scipy.sparse.linalg import splu

        key = float(lam)
        if key not in self._factors:
            self._factors[key] = splu(self.system(key))
        return self._factors[key]

    def boundary_solve(self, rhs):
        """Applies M_gamma^{-1}."""
        from scipy.sparse.linalg import splu

        if self._boundary_factor is None:
            self._boundary_factor = splu(self.boundary_mass.tocsc())
        return self._boundary_factor.solve(np.asarray(rhs, dtype=float))

    def full_vector(self, interior, boundary):
        u = np.zeros(self.mesh.n_vertices)
        u[self.mesh.interior] = interior
        u[self.mesh.boundary] = boundary
        return u

    def lift(self, boundary_data, lam=0.0):
        """Discrete harmonic extension of boundary data at the given shift."""
        return solve_dirichlet(self, lam, boundary_data)

    def flux(self, u, lam=0.0, previous=None, order=0):
        """
        Conormal flux of the full solution vector ``u``.

        For a lam-derivative of order ``order`` of a solution, ``previous``
        is the derivative of order ``order - 1`` and the chain term
        ``order * M u'`` enters the boundary residual.
        """
        B = self.mesh.boundary
        residual = self.K_full @ u + lam * self.mass * u
        if order > 0 and previous is not None:
            residual = residual + order * self.mass * previous
        return self.boundary_solve(residual[B])

    def boundary_inner(self, a, b):
        """L2(Gamma, dS_g) pairing of boundary vectors (or rows of arrays)."""
        return np.asarray(a) @ (self.boundary_mass @ np.asarray(b).T)

    def matrices(self):
        """Named matrices for export."""
        return {
            "stiffness": self.K,
            "mass": self.M,
            "boundary_mass": self.boundary_mass,
            "stiffness_interior_boundary": self.K_IB,
        }

    def __repr__(self):
        return "<OperatorPair kind={} interior={} boundary={}>".format(
            self.kind, self.n_interior, self.n_boundary
        )


def _barycentric_gradients(mesh):
    from math import factorial

    X = mesh.vertices[mesh.cells]
    E = X[:, 1:, :] - X[:, :1, :]
    det = np.linalg.det(E)
    volumes = np.abs(det) / factorial(mesh.n)
    if (volumes <= 1e-14 * mesh.h**mesh.n).any():
        raise NumericalError("degenerate cells found: mass matrix would be singular")
    inv_t = np.linalg.inv(E).transpose(0, 2, 1)
    grads = np.concatenate([-inv_t.sum(axis=1, keepdims=True), inv_t], axis=1)
    return grads, volumes


def _cell_mean(values, cells):
    return values[cells].mean(axis=1)


def _coefficients(mesh, field):
    """Cell tensors sqrt|g| g^{-1} (or a I) and volume weights sqrt|g| (or 1)."""
    n = mesh.n
    if field.kind == "conductivity":
        a = _cell_mean(field.values, mesh.cells)
        tensors = a[:, None, None] * np.eye(n)[None]
        weights = np.ones(mesh.n_cells)
    else:
        g = _cell_mean(field.metric_tensor(), mesh.cells)
        weights = np.sqrt(np.linalg.det(g))
        tensors = weights[:, None, None] * np.linalg.inv(g)
    return tensors, weights


def _lump(mesh, cell_measure):
    n = mesh.n
    return np.bincount(
        mesh.cells.ravel(),
        weights=np.repeat(cell_measure / (n + 1), n + 1),
        minlength=mesh.n_vertices,
    )


def lumped_mass(mesh, field=None):
    """
    Row-sum lumped vertex weights of the volume measure, sqrt|g| dx for
    metric-type fields and dx for conductivities or without a field.
    Boundary vertices keep their weight.
    """
    _, volumes = _barycentric_gradients(mesh)
    if field is None or field.kind == "conductivity":
        return _lump(mesh, volumes)
    return _lump(mesh, volumes * _coefficients(mesh, field)[1])


def boundary_weight(mesh, field):
    """Per-facet weight sqrt|g_0| averaged over the facet vertices."""
    if field.kind == "conductivity":
        return np.ones(len(mesh.boundary_facets))
    g = field.metric_tensor()
    root = np.sqrt(np.linalg.det(g))
    return root[mesh.boundary_facets].mean(axis=1)


def boundary_mass_matrix(mesh, weights=None):
    """
    Consistent P1 mass matrix on the boundary facets, in boundary dof
    numbering, with an optional per-facet weight.
    """
    n = mesh.n
    facets = mesh.boundary_index[mesh.boundary_facets]
    measure = mesh.facet_measures
    if weights is not None:
        measure = measure * weights
    local = (np.ones((n, n)) + np.eye(n)) / (n * (n + 1))
    data = measure[:, None, None] * local[None]
    rows = np.broadcast_to(facets[:, :, None], data.shape)
    cols = np.broadcast_to(facets[:, None, :], data.shape)
    nb = mesh.n_boundary
    return sp.coo_matrix(
        (data.ravel(), (rows.ravel(), cols.ravel())), shape=(nb, nb)
    ).tocsr()


def boundary_laplacian(mesh):
    """
    P1 Laplace-Beltrami stiffness of the boundary surface (the polygon of
    the square or the faces of the cube), in boundary dof numbering.
    """
    n = mesh.n
    facets = mesh.boundary_facets
    X = mesh.vertices[facets]
    E = X[:, 1:, :] - X[:, :1, :]
    G = E @ E.transpose(0, 2, 1)
    D = np.concatenate([-np.ones((n - 1, 1)), np.eye(n - 1)], axis=1)
    Ginv = np.linalg.inv(G)
    data = mesh.facet_measures[:, None, None] * np.einsum("ki,ckl,lj->cij", D, Ginv, D)
    idx = mesh.boundary_index[facets]
    rows = np.broadcast_to(idx[:, :, None], data.shape)
    cols = np.broadcast_to(idx[:, None, :], data.shape)
    nb = mesh.n_boundary
    L = sp.coo_matrix((data.ravel(), (rows.ravel(), cols.ravel())), shape=(nb, nb))
    return ((L + L.T) / 2).tocsr()


def assemble(mesh, field):
    """
    Assembles the discrete operator of ``field`` on ``mesh``.

    Parameters
    ----------
    mesh : Mesh
    field : CoefficientField
        metric or conformal fields give -Delta_g with weight sqrt|g|;
        conductivities give -div(a grad) with Lebesgue weight; potentials give
        -Delta_g + V on their background metric

    Returns
    -------
    OperatorPair

    Raises
    ------
    MeshMismatchError
        if the field was sampled on another mesh
    NumericalError
        for degenerate cells
    """
    if mesh.signature != field.mesh_signature:
        raise MeshMismatchError(
            "field sampled on mesh {} but assembled on {}".format(
                field.mesh_signature, mesh.signature
            )
        )
    cells = mesh.cells
    grads, volumes = _barycentric_gradients(mesh)
    tensors, weights = _coefficients(mesh, field)

    local = np.einsum("cik,ckl,cjl->cij", grads, tensors, grads)
    local *= volumes[:, None, None]
    rows = np.broadcast_to(cells[:, :, None], local.shape)
    cols = np.broadcast_to(cells[:, None, :], local.shape)
    N = mesh.n_vertices
    K = sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(N, N))
    K = K.tocsr()
    K = ((K + K.T) * 0.5).tocsr()

    lumped = _lump(mesh, volumes * weights)
    if field.kind == "potential":
        K = (K + sp.diags(field.values * lumped)).tocsr()

    mass = lumped.copy()
    mass[mesh.boundary] = 0.0
    if (mass[mesh.interior] <= 0).any():
        raise NumericalError("mass matrix is not positive definite")

    gamma = boundary_mass_matrix(mesh, boundary_weight(mesh, field))
    return OperatorPair(mesh, field.kind, K, mass, gamma)


def nearest_eigenvalue(op, mu):
    """
    Discrete Dirichlet eigenvalue of (K, M) closest to ``mu``.
    """
    from scipy.linalg import eigh
    from scipy.sparse.linalg import eigsh

    if op.n_interior <= DENSE_LIMIT:
        lam = eigh(op.K.toarray(), np.diag(op.M.diagonal()), eigvals_only=True)
        return float(lam[np.argmin(np.abs(lam - mu))])
    lam = eigsh(op.K, k=1, M=op.M, sigma=mu, which="LM", return_eigenvectors=False)
    return float(lam[0])


def check_shift(op, lam):
    """
    Raises NearSingularShiftError when -lam falls in the guard band
    |lam + lam_k| < 1e-6 (1 + lam_k) of a discrete eigenvalue.
    """
    if lam >= 0:
        return
    nearest = nearest_eigenvalue(op, -lam)
    if abs(lam + nearest) < GUARD_BAND * (1 + abs(nearest)):
        raise NearSingularShiftError(lam, nearest)


def solve_dirichlet(op, lam, boundary_data, check=True):
    """
    Solves (-Delta_g + lam) u = 0 with u = boundary_data on the boundary.

    Parameters
    ----------
    op : OperatorPair
    lam : float
        spectral shift, outside the guard band of the discrete spectrum
    boundary_data : np.array, shape=[n_boundary, ]

    Returns
    -------
    np.array, shape=[n_vertices, ]
        full nodal solution (interior values and the boundary data)

    Raises
    ------
    NearSingularShiftError
        if -lam is within the guard band of a discrete eigenvalue
    ConvergenceError
        if the relative residual of the solve exceeds 1e-10
    """
    phi = np.asarray(boundary_data, dtype=float)
    if check:
        check_shift(op, lam)
    if not phi.any():
        return op.full_vector(np.zeros(op.n_interior), phi)

    rhs = -(op.K_IB @ phi)
    u = op.factor(lam).solve(rhs)
    _check_residual(op.system(lam), u, rhs)
    return op.full_vector(u, phi)


def solve_chain(op, lam, boundary_data, order):
    """
    Solution u(lam) and its lam-derivatives up to ``order`` through the chain

        (K + lam M) u^(j) = -j M u^(j-1),   u^(j) = 0 on the boundary (j >= 1)

    Returns
    -------
    list of np.array, shape=[n_vertices, ]
    """
    I = op.mesh.interior
    chain = [solve_dirichlet(op, lam, boundary_data)]
    A = op.system(lam)
    for j in range(1, order + 1):
        rhs = -j * (op.mass * chain[-1])[I]
        u = op.factor(lam).solve(rhs)
        _check_residual(A, u, rhs)
        chain += [op.full_vector(u, np.zeros(op.n_boundary))]
    return chain


def _check_residual(A, u, rhs, tol=1e-10):
    scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
    res = np.linalg.norm(A @ u - rhs) / scale
    if not np.isfinite(res) or res > tol:
        raise ConvergenceError(
            "linear solve residual {:.3g} above {:.0e}".format(res, tol)
        )
