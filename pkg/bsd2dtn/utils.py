#!/usr/bin/env python

import numpy as np

from .helpers import ConvergenceError


def adaptive_quad(func, a, b, epsabs=1e-12, epsrel=1e-12, limit=400, points=None):
    """
    Adaptive Gauss-Kronrod quadrature (QUADPACK) that raises instead of
    warning when the requested accuracy is not reached.

    Parameters
    ----------
    func : callable
        scalar integrand
    a, b : float
        limits; ``b`` may be ``np.inf``
    epsabs, epsrel : float
        absolute and relative tolerances

    Returns
    -------
    value : float
    abserr : float

    Raises
    ------
    ConvergenceError
        if QUADPACK flags the result (subdivision limit, roundoff, divergence)
    """
    from scipy.integrate import quad

    kwargs = dict(epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1)
    if points is not None and np.isfinite(b):
        kwargs["points"] = points
    out = quad(func, a, b, **kwargs)
    value, abserr = out[0], out[1]
    if len(out) > 3:
        # roundoff at the tolerance floor is accepted when the estimate is tiny
        tolerance = max(epsabs, epsrel * abs(value))
        if not (np.isfinite(value) and abserr <= 10 * tolerance):
            raise ConvergenceError(
                "quadrature on [{}, {}] failed: {}".format(a, b, out[3].strip())
            )
    return value, abserr


def stable_sum(values, axis=None):
    """
    Correctly rounded sum of all entries (``axis=None``), or the compensated
    sum along ``axis`` in index order (see ``compensated_sum``).
    """
    from math import fsum

    values = np.asarray(values, dtype=float)
    if axis is None:
        return fsum(values.ravel().tolist())
    return compensated_sum(np.moveaxis(values, axis, 0))


def compensated_sum(terms):
    """
    Neumaier-compensated sum of equally shaped arrays, accumulated in the
    order the terms are given. The result does not depend on how the terms
    were produced (generator, loop or array slices).
    """
    total = None
    for term in terms:
        term = np.asarray(term, dtype=float)
        if total is None:
            total = term.copy()
            carry = np.zeros_like(total)
            continue
        step = total + term
        carry += np.where(
            np.abs(total) >= np.abs(term), (total - step) + term, (term - step) + total
        )
        total = step
    if total is None:
        return 0.0
    return total + carry


def weighted_norm(v, weight):
    """
    Norm of the rows of ``v`` in the inner product given by ``weight``.
    Negative squared norms from rounding are clipped to zero.
    """
    v = np.atleast_2d(v)
    norm_squared = np.einsum("ij,ij->i", v, (weight @ v.T).T)
    norm_squared = np.where(norm_squared < 0, 0.0, norm_squared)
    out = np.sqrt(norm_squared)
    return out if out.size > 1 else float(out[0])


def weighted_operator_norm(matrix, weight):
    """
    Norm of a boundary matrix as an operator on (R^nb, weight): the largest
    singular value of L^T A L^{-T} with weight = L L^T.
    """
    from scipy.linalg import cholesky, solve_triangular, svdvals

    W = weight.toarray() if hasattr(weight, "toarray") else np.asarray(weight)
    L = cholesky(W, lower=True)
    A = np.asarray(matrix)
    scaled = L.T @ A
    scaled = solve_triangular(L, scaled.T, lower=True).T
    return float(svdvals(scaled)[0])


def sobolev_operator_norm(matrix, weight, laplacian):
    """
    H^{1/2} -> H^{-1/2} norm of a boundary matrix, with the fractional powers
    taken in the eigenbasis of the boundary Laplace-Beltrami pencil
    (laplacian, weight).
    """
    from scipy.linalg import eigh, svdvals

    W = weight.toarray() if hasattr(weight, "toarray") else np.asarray(weight)
    S = laplacian.toarray() if hasattr(laplacian, "toarray") else np.asarray(laplacian)
    mu, V = eigh(S, W)
    mu = np.where(mu < 0, 0.0, mu)
    scale = (1.0 + mu) ** -0.25
    core = V.T @ W @ np.asarray(matrix) @ V
    return float(svdvals(scale[:, None] * core * scale[None, :])[0])


def space_time_norm(traces, weight, times):
    """
    L2(Sigma) norm of boundary traces sampled on a time grid.

    Parameters
    ----------
    traces : np.array, shape=[n_times, n_boundary] or [n_probes, n_times, n_boundary]
    weight : boundary mass matrix
    times : np.array, shape=[n_times, ]
    """
    from scipy.integrate import trapezoid

    traces = np.asarray(traces, dtype=float)
    single = traces.ndim == 2
    traces = traces[None] if single else traces
    out = []
    for trace in traces:
        sq = np.einsum("ti,ti->t", trace, (weight @ trace.T).T)
        out += [np.sqrt(max(trapezoid(sq, times), 0.0))]
    out = np.array(out)
    return float(out[0]) if single else out


def loglog_fit(x, y, robust=False):
    """
    Fits log(y) = intercept + slope * log(x) on the strictly positive pairs.

    A Huber loss (robust=True) keeps single outliers from dragging the
    slope, as for calibration fits.

    Returns
    -------
    dict
        slope, intercept, r2 and the number of points used
    """
    from sklearn import linear_model, metrics

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if keep.sum() < 2:
        return dict(slope=np.nan, intercept=np.nan, r2=np.nan, n_points=int(keep.sum()))

    X = np.log(x[keep])[:, None]
    Y = np.log(y[keep])
    if robust:
        model = linear_model.HuberRegressor(fit_intercept=True)
    else:
        model = linear_model.LinearRegression()
    model.fit(X, Y)
    Y_hat = model.predict(X)
    r2 = metrics.r2_score(Y, Y_hat) if keep.sum() > 2 else 1.0

    return dict(
        slope=float(model.coef_[0]),
        intercept=float(model.intercept_),
        r2=float(r2),
        n_points=int(keep.sum()),
    )
