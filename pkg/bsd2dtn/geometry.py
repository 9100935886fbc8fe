#!/usr/bin/env python
"""
Structured simplex meshes of the unit square and cube, and the coefficient
fields (metric, conformal factor, conductivity, potential) sampled on them.
"""

from itertools import permutations

import numpy as np

from .helpers import ConfigError, FieldClassError, MeshMismatchError


FIELD_KINDS = ("metric", "conformal", "conductivity", "potential")


class Mesh(object):
    """
    Kuhn triangulation of [0, 1]^n with ``resolution`` cells per axis.

    Every grid cube is split into n! simplices sharing the main diagonal, so
    the mesh is invariant under permutations of the coordinate axes. Boundary
    facets are read off the simplices, which keeps the facet triangulation
    consistent with the volume triangulation.

    Attributes
    ----------
    n : int
        spatial dimension
    resolution : int
        cells per axis
    vertices : np.array, shape=[n_vertices, n]
    cells : np.array, dtype=int, shape=[n_cells, n + 1]
    boundary_facets : np.array, dtype=int, shape=[n_facets, n]
    facet_normals : np.array, shape=[n_facets, n]
        outward Euclidean unit normals
    facet_measures : np.array, shape=[n_facets, ]
        surface measure dS of each facet
    boundary : np.array, dtype=int
        sorted vertex ids on the boundary (boundary dofs)
    interior : np.array, dtype=int
        sorted vertex ids in the interior (interior dofs)
    """

    def __init__(self, n, resolution):
        self.n = int(n)
        self.resolution = int(resolution)
        self.h = 1.0 / self.resolution

        r = self.resolution
        side = r + 1
        strides = side ** np.arange(self.n)

        grid = np.indices((side,) * self.n).reshape(self.n, -1).T[:, ::-1]
        # x1 varies fastest
        grid = grid[np.argsort(grid @ strides, kind="stable")]
        self._grid = grid
        self.vertices = grid / float(r)

        corners = np.indices((r,) * self.n).reshape(self.n, -1).T[:, ::-1]
        corners = corners[np.argsort(corners @ strides, kind="stable")]
        cells = []
        for perm in permutations(range(self.n)):
            offsets = np.zeros((self.n + 1, self.n), dtype=int)
            for step, axis in enumerate(perm):
                offsets[step + 1] = offsets[step]
                offsets[step + 1, axis] += 1
            cells += [(corners[:, None, :] + offsets[None, :, :]) @ strides]
        self.cells = np.stack(cells, axis=1).reshape(-1, self.n + 1)

        self._build_boundary()

    def _build_boundary(self):
        n = self.n
        r = self.resolution

        facets, normals = [], []
        for drop in range(n + 1):
            keep = [i for i in range(n + 1) if i != drop]
            facet = self.cells[:, keep]
            coords = self._grid[facet]
            for d in range(n):
                for plane, sign in ((0, -1.0), (r, 1.0)):
                    on_plane = (coords[:, :, d] == plane).all(axis=1)
                    if on_plane.any():
                        facets += [facet[on_plane]]
                        normal = np.zeros((on_plane.sum(), n))
                        normal[:, d] = sign
                        normals += [normal]

        facets = np.concatenate(facets)
        normals = np.concatenate(normals)
        order = np.lexsort(np.sort(facets, axis=1).T[::-1])
        self.boundary_facets = facets[order]
        self.facet_normals = normals[order]
        self.facet_measures = simplex_measures(self.vertices, self.boundary_facets)

        on_boundary = ((self._grid == 0) | (self._grid == r)).any(axis=1)
        self.boundary = np.flatnonzero(on_boundary)
        self.interior = np.flatnonzero(~on_boundary)

        self.boundary_index = np.full(self.n_vertices, -1, dtype=int)
        self.boundary_index[self.boundary] = np.arange(self.boundary.size)
        self.interior_index = np.full(self.n_vertices, -1, dtype=int)
        self.interior_index[self.interior] = np.arange(self.interior.size)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    @property
    def n_boundary(self):
        return self.boundary.size

    @property
    def n_interior(self):
        return self.interior.size

    @property
    def surface_measure(self):
        return float(np.sum(self.facet_measures))

    @property
    def signature(self):
        return (self.n, self.resolution)

    def check_same(self, other):
        if self.signature != other.signature:
            raise MeshMismatchError(
                "meshes differ: n={}, resolution={} vs n={}, resolution={}".format(
                    *self.signature, *other.signature
                )
            )

    def __repr__(self):
        return "<Mesh n={} resolution={} vertices={} boundary_dofs={}>".format(
            self.n, self.resolution, self.n_vertices, self.n_boundary
        )

    def __str__(self):
        return self.__repr__()


def simplex_measures(vertices, simplices):
    """
    Measures of k-simplices embedded in R^n via the Gram determinant.

    Parameters
    ----------
    vertices : np.array, shape=[m, n]
    simplices : np.array, dtype=int, shape=[s, k + 1]

    Returns
    -------
    np.array, shape=[s, ]
    """
    from math import factorial

    pts = vertices[simplices]
    edges = pts[:, 1:, :] - pts[:, :1, :]
    k = edges.shape[1]
    if k == 0:
        return np.ones(simplices.shape[0])
    gram = edges @ edges.transpose(0, 2, 1)
    return np.sqrt(np.abs(np.linalg.det(gram))) / factorial(k)


def build_box_mesh(n, resolution):
    """
    Uniform simplex mesh of the unit square (n=2) or unit cube (n=3).

    Parameters
    ----------
    n : int
        dimension, 2 or 3
    resolution : int
        cells per axis, >= 2

    Returns
    -------
    Mesh

    Raises
    ------
    ConfigError
        if ``n`` is not 2 or 3, or the resolution is below 2

    Example
    -------
    >>> mesh = build_box_mesh(2, 2)
    >>> mesh.n_vertices, len(mesh.boundary_facets)
    (9, 8)
    """
    if n not in (2, 3):
        raise ConfigError("only n in {{2, 3}} is supported, got n={}".format(n))
    if int(resolution) != resolution or resolution < 2:
        raise ConfigError(
            "resolution must be an integer >= 2, got {}".format(resolution)
        )
    return Mesh(n, int(resolution))


def boundary_coordinates(mesh):
    """
    Face parameters of the boundary dofs.

    Each boundary vertex is attributed to the first face (axis d, plane 0 or
    1, numbered 2 d + plane) it lies on, and carries its tangential
    coordinates on that face. Vertices on edges and corners have a
    tangential coordinate equal to 0 or 1.

    Returns
    -------
    face : np.array, dtype=int, shape=[n_boundary, ]
    coords : np.array, shape=[n_boundary, n - 1]
    """
    x = mesh.vertices[mesh.boundary]
    face = np.full(mesh.n_boundary, -1, dtype=int)
    coords = np.zeros((mesh.n_boundary, mesh.n - 1))
    for d in range(mesh.n):
        tangential = [t for t in range(mesh.n) if t != d]
        for plane in (0, 1):
            on_face = (face < 0) & np.isclose(x[:, d], plane, atol=1e-14)
            face[on_face] = 2 * d + plane
            coords[on_face] = x[on_face][:, tangential]
    return face, coords


def boundary_probes(mesh, order):
    """
    Boundary Fourier probes: on each face of the box, the product of
    sin(m pi t) along the first tangential coordinate (m = 1..order) and
    sin(pi t) along the remaining ones. The probes vanish on edges and corners.

    Parameters
    ----------
    mesh : Mesh
    order : int
        highest Fourier order on the first tangential coordinate

    Returns
    -------
    np.array, shape=[2 * n * order, n_boundary]
        one probe per row, as nodal values on the boundary dofs
    """
    if order < 1:
        raise ConfigError("probe order must be >= 1")

    face, coords = boundary_coordinates(mesh)
    probes = []
    for f in range(2 * mesh.n):
        on_face = face == f
        for m in range(1, order + 1):
            values = np.sin(m * np.pi * coords[:, 0])
            for t in range(1, mesh.n - 1):
                values = values * np.sin(np.pi * coords[:, t])
            probes += [np.where(on_face, values, 0.0)]
    return np.array(probes)


class CoefficientField(object):
    """
    A coefficient sampled on the mesh vertices, with its class bounds.

    ``values`` holds the defining quantity: the covariant tensor g for
    ``metric`` (shape [n_vertices, n, n]), the conformal factor c for
    ``conformal``, the conductivity a for ``conductivity`` and V for
    ``potential`` (shape [n_vertices, ]). Conformal fields carry their
    reference tensor g~, potentials their background metric.
    """

    def __init__(self, kind, values, bounds, mesh, reference=None, expression=None):
        if kind not in FIELD_KINDS:
            raise ConfigError(
                "unknown field kind '{}', expected one of {}".format(kind, FIELD_KINDS)
            )
        self.kind = kind
        self.values = np.asarray(values, dtype=float)
        self.bounds = dict(bounds or {})
        self.mesh_signature = mesh.signature
        self.n = mesh.n
        self.expression = expression
        if reference is None and kind in ("conformal", "potential"):
            reference = _identity(mesh)
        self.reference = None if reference is None else np.asarray(reference, float)
        self.values.flags.writeable = False
        self.validate()

    @property
    def alpha(self):
        return self.bounds.get("alpha", None)

    def metric_tensor(self):
        """Covariant metric per vertex, or None for conductivities."""
        if self.kind == "metric":
            return self.values
        if self.kind == "conformal":
            return self.values[:, None, None] * self.reference
        if self.kind == "potential":
            return self.reference
        return None

    def validate(self):
        """
        Re-runs the class checks; raises FieldClassError on violation.
        """
        n_vertices = (self.mesh_signature[1] + 1) ** self.n
        if self.kind == "metric":
            expected = (n_vertices, self.n, self.n)
        else:
            expected = (n_vertices,)
        if self.values.shape != expected:
            raise MeshMismatchError(
                "{} field has shape {}, mesh needs {}".format(
                    self.kind, self.values.shape, expected
                )
            )
        if not np.isfinite(self.values).all():
            raise FieldClassError("{} field has non-finite values".format(self.kind))

        beta = self.bounds.get("beta", None)
        if beta is not None and np.abs(self.values).max() > beta * (1 + 1e-12):
            i = int(np.argmax(np.abs(self.values).reshape(n_vertices, -1).max(axis=1)))
            raise FieldClassError(
                "{} field exceeds beta={} at vertex {}".format(self.kind, beta, i)
            )

        if self.kind == "conductivity":
            _check_interval(self.values, self.alpha, "conductivity")
        elif self.kind == "potential":
            ceiling = self.bounds.get("ceiling", None)
            if ceiling is None:
                raise FieldClassError("potential fields need bounds['ceiling']")
            v = self.values
            tol = 1e-12 * max(1.0, ceiling)
            if v.min() < -tol or v.max() > ceiling + tol:
                i = int(np.argmax(np.maximum(-v, v - ceiling)))
                raise FieldClassError(
                    "potential V={:.6g} at vertex {} outside [0, {}]".format(
                        v[i], i, ceiling
                    )
                )
            if self.alpha is not None:
                _check_spectrum(self.metric_tensor(), self.alpha, "background metric")
        else:
            _check_spectrum(self.metric_tensor(), self.alpha, self.kind)
        return True

    def boundary_values(self, mesh):
        """Values on the boundary dofs of the quantity fixed in the class."""
        if self.kind == "conductivity":
            return self.values[mesh.boundary]
        return self.metric_tensor()[mesh.boundary]

    def __repr__(self):
        return "<CoefficientField kind={} n={} bounds={}>".format(
            self.kind, self.n, self.bounds
        )


def _identity(mesh):
    return np.broadcast_to(np.eye(mesh.n), (mesh.n_vertices, mesh.n, mesh.n)).copy()


def _check_interval(values, alpha, name):
    if alpha is None or alpha <= 1:
        raise FieldClassError("{} fields need bounds['alpha'] > 1".format(name))
    lo, hi = 1.0 / alpha, float(alpha)
    tol = 1e-12 * hi
    bad = (values < lo - tol) | (values > hi + tol)
    if bad.any():
        dev = np.maximum(lo - values, values - hi)
        i = int(np.argmax(dev))
        raise FieldClassError(
            "{} value {:.6g} at vertex {} outside [{:.6g}, {:.6g}]".format(
                name, values[i], i, lo, hi
            )
        )


def _check_spectrum(g, alpha, name):
    if alpha is None or alpha <= 1:
        raise FieldClassError("{} fields need bounds['alpha'] > 1".format(name))
    asym = np.abs(g - g.transpose(0, 2, 1)).max()
    if asym > 1e-12 * max(1.0, np.abs(g).max()):
        raise FieldClassError(
            "{} tensor is not symmetric (max {:.3g})".format(name, asym)
        )
    eig = np.linalg.eigvalsh(g)
    lo, hi = 1.0 / alpha, float(alpha)
    tol = 1e-12 * hi
    dev = np.maximum(lo - eig.min(axis=1), eig.max(axis=1) - hi)
    if (dev > tol).any():
        i = int(np.argmax(dev))
        worst = eig[i, 0] if eig[i, 0] < lo else eig[i, -1]
        raise FieldClassError(
            "{} is not elliptic at vertex {}: eigenvalue {:.6g} outside "
            "[{:.6g}, {:.6g}]".format(name, i, worst, lo, hi)
        )


def evaluate_expression(expression, mesh):
    """
    Samples a scalar expression on the mesh vertices.

    Parameters
    ----------
    expression : str | float | callable | array-like
        a numexpr string in the coordinates ``x1, x2, x3`` (``pi`` is
        defined), a constant, a callable taking the [n_vertices, n] vertex
        array, or per-vertex values

    Returns
    -------
    np.array, shape=[n_vertices, ]
    """
    import numexpr as ne

    x = mesh.vertices
    if isinstance(expression, str):
        local = {"x{}".format(d + 1): x[:, d].copy() for d in range(mesh.n)}
        local["pi"] = np.pi
        try:
            out = ne.evaluate(expression, local_dict=local, global_dict={})
        except (KeyError, SyntaxError, TypeError, ValueError) as err:
            raise ConfigError("cannot evaluate '{}': {}".format(expression, err))
    elif callable(expression):
        out = expression(x)
    else:
        out = expression
    out = np.broadcast_to(np.asarray(out, dtype=float), (mesh.n_vertices,))
    return out.copy()


def _tensor(expression, mesh):
    if expression is None or (isinstance(expression, str) and expression == "identity"):
        return _identity(mesh)
    arr = np.asarray(expression, dtype=object) if isinstance(expression, list) else None
    if arr is not None and arr.shape == (mesh.n, mesh.n):
        g = np.empty((mesh.n_vertices, mesh.n, mesh.n))
        for k in range(mesh.n):
            for l in range(mesh.n):
                g[:, k, l] = evaluate_expression(expression[k][l], mesh)
        return g
    g = np.asarray(expression, dtype=float)
    if g.shape == (mesh.n, mesh.n):
        return np.broadcast_to(g, (mesh.n_vertices, mesh.n, mesh.n)).copy()
    if g.shape == (mesh.n_vertices, mesh.n, mesh.n):
        return g.copy()
    raise ConfigError(
        "cannot build a {0}x{0} tensor field from {1!r}".format(mesh.n, expression)
    )


def make_field(kind, expression, bounds, mesh, reference=None):
    """
    Samples a closed-form coefficient on the mesh and checks its class.

    Parameters
    ----------
    kind : str
        one of 'metric', 'conformal', 'conductivity', 'potential'
    expression : str | float | callable | array-like | nested list
        scalar expression (conformal factor, conductivity, potential) or a
        tensor for metrics: 'identity', an n x n nested list of scalar
        expressions, a constant n x n array or per-vertex tensors
    bounds : dict
        ``alpha`` (ellipticity ratio, > 1), ``beta`` (sup bound, optional),
        ``ceiling`` (potential ceiling)
    mesh : Mesh
    reference : tensor expression, optional
        reference tensor g~ of conformal fields or background metric of
        potentials; identity by default

    Returns
    -------
    CoefficientField

    Raises
    ------
    FieldClassError
        if the sampled values leave the class (worst vertex is reported)
    """
    if kind == "metric":
        values = _tensor(expression, mesh)
        ref = None
    else:
        values = evaluate_expression(expression, mesh)
        ref = _tensor(reference, mesh) if kind in ("conformal", "potential") else None
    label = expression if isinstance(expression, (str, int, float)) else None
    return CoefficientField(kind, values, bounds, mesh, reference=ref, expression=label)


def same_boundary(field1, field2, mesh, rtol=1e-12):
    """
    True when both fields agree on the boundary, i.e. they belong to the same
    boundary-fixed class and share one boundary weight.
    """
    if field1.kind != field2.kind:
        kinds = {field1.kind, field2.kind}
        if not kinds <= {"metric", "conformal"}:
            return False
    b1 = field1.boundary_values(mesh)
    b2 = field2.boundary_values(mesh)
    return bool(np.allclose(b1, b2, rtol=rtol, atol=rtol))
