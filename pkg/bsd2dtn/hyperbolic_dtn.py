#!/usr/bin/env python
"""
Hyperbolic Dirichlet-to-Neumann map of the wave equation with boundary data
h(x, t) = phi(x) eta(t), by explicit time stepping and, independently, by
the expansion in elliptic DtN derivatives at zero shift plus a Duhamel
remainder over the boundary spectral data.
"""

from inspect import currentframe as getframe

import numpy as np

from .helpers import (
    Bsd2DtnWarning,
    CFLError,
    ConfigError,
    EnergyBlowupError,
    MeshMismatchError,
    printv,
    thread_count,
)
from .utils import compensated_sum, stable_sum


BLOWUP_FACTOR = 1e3


class TimeProfile(object):
    """
    Polynomial time profile eta(t) with exact derivatives.

    Parameters
    ----------
    polynomial : numpy.polynomial.Polynomial
    name : str
    """

    def __init__(self, polynomial, name=None):
        from numpy.polynomial import Polynomial

        if not isinstance(polynomial, Polynomial):
            polynomial = Polynomial(np.atleast_1d(np.asarray(polynomial, dtype=float)))
        self.polynomial = polynomial
        self.name = "polynomial" if name is None else name

    @classmethod
    def monomial(cls, m):
        """eta(t) = t^m"""
        from numpy.polynomial import Polynomial

        return cls(Polynomial([0.0] * int(m) + [1.0]), name="t^{}".format(int(m)))

    @classmethod
    def windowed_ramp(cls, m, tau, order):
        """
        eta(t) = t^m (1 - t/tau)^order: a ramp vanishing to order m at 0 and
        to order ``order`` at tau.
        """
        from numpy.polynomial import Polynomial

        if tau <= 0:
            raise ConfigError("tau must be positive, got {}".format(tau))
        ramp = Polynomial([0.0] * int(m) + [1.0])
        window = Polynomial([1.0, -1.0 / tau]) ** int(order)
        name = "t^{}(1-t/{:g})^{}".format(int(m), tau, int(order))
        return cls(ramp * window, name=name)

    def __call__(self, t):
        return self.polynomial(np.asarray(t, dtype=float))

    def derivative(self, order=1):
        if order == 0:
            return self
        name = "d{}({})".format(order, self.name)
        return TimeProfile(self.polynomial.deriv(order), name=name)

    @property
    def is_zero(self):
        return not np.any(self.polynomial.coef)

    @property
    def degree(self):
        return self.polynomial.degree()

    def vanishing_order(self):
        """Order of the first nonzero derivative at t = 0 (inf for eta = 0)."""
        nonzero = np.flatnonzero(self.polynomial.coef)
        return np.inf if nonzero.size == 0 else int(nonzero[0])

    def check_class(self, required):
        """
        Checks that the derivatives of order < ``required`` vanish at 0.

        Returns "strict" when they do, and "relaxed" (with a warning) when
        only the derivative of order required - 1 is nonzero.

        Raises
        ------
        ConfigError
            when a lower derivative is nonzero
        """
        import warnings

        order = self.vanishing_order()
        if order >= required:
            return "strict"
        if order == required - 1:
            msg = "profile {} has a nonzero derivative of order {} at t=0"
            msg = msg.format(self.name, order) + "; relaxed class"
            warnings.warn(msg, category=Bsd2DtnWarning)
            return "relaxed"
        raise ConfigError(
            "profile {} has a nonzero derivative of order {} at t=0, "
            "but orders below {} must vanish".format(self.name, order, required)
        )

    def to_dict(self):
        return dict(name=self.name, coefficients=self.polynomial.coef.tolist())

    def __repr__(self):
        return "<TimeProfile {} degree={}>".format(self.name, self.degree)


class SineKernel(object):
    """
    Per-mode kernels s_k(t) = sin(sqrt(lam_k) t) / sqrt(lam_k).
    """

    def __init__(self, lambdas):
        self.lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
        if (self.lambdas <= 0).any():
            raise ConfigError("sine kernels need positive eigenvalues")
        self.omega = np.sqrt(self.lambdas)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.sin(np.multiply.outer(self.omega, t)) / self.omega.reshape(
            self.omega.shape + (1,) * t.ndim
        )

    def derivative(self, t):
        return np.cos(np.multiply.outer(self.omega, np.asarray(t, dtype=float)))

    def ode_residual(self, tau, step=3e-5, n_points=64):
        """
        Largest normalized residual of s'' + lam s = 0 by centered second
        differences on [step, tau - step], with s(0) and s'(0) errors.

        Returns
        -------
        dict
            ``ode`` per mode, ``initial_value`` and ``initial_slope``
        """
        t = np.linspace(step, tau - step, n_points)
        s = self(t)
        second = (self(t + step) - 2 * s + self(t - step)) / step**2
        scale = self.lambdas * np.maximum(np.abs(s).max(axis=1), np.finfo(float).tiny)
        ode = np.abs(second + self.lambdas[:, None] * s).max(axis=1) / scale
        return dict(
            ode=ode,
            initial_value=float(np.abs(self(0.0)).max()),
            initial_slope=float(np.abs(self.derivative(0.0) - 1).max()),
        )

    def __repr__(self):
        return "<SineKernel K={}>".format(self.lambdas.size)


class WaveTrace(object):
    """
    Boundary fluxes on Sigma for a family of probes phi_b(x) eta(t).

    Attributes
    ----------
    times : np.array, shape=[n_times, ]
    traces : np.array, shape=[n_probes, n_times, n_boundary]
    probes : np.array, shape=[n_probes, n_boundary]
    profile : TimeProfile
    route : str
        stepping or formula
    weight : boundary mass
    extra : dict
        route diagnostics (energies, remainder parts, tail bound, class)
    """

    def __init__(
        self, times, traces, probes, profile, route, weight, dt=None, extra=None
    ):
        self.times = np.asarray(times, dtype=float)
        self.traces = np.asarray(traces, dtype=float)
        self.probes = np.atleast_2d(np.asarray(probes, dtype=float))
        self.profile = profile
        self.route = route
        self.weight = weight
        self.tau = float(self.times[-1])
        self.dt = dt if dt is not None else float(np.diff(self.times).mean())
        self.extra = {} if extra is None else dict(extra)

    def norms(self):
        """L2(Sigma) norm of each probe trace."""
        from .utils import space_time_norm

        return np.atleast_1d(space_time_norm(self.traces, self.weight, self.times))

    def relative_difference(self, other):
        """Per-probe L2(Sigma) discrepancy relative to ``other``."""
        from .utils import space_time_norm

        if self.traces.shape != other.traces.shape:
            raise MeshMismatchError(
                "trace shapes {} and {} differ".format(
                    self.traces.shape, other.traces.shape
                )
            )
        diff = space_time_norm(self.traces - other.traces, self.weight, self.times)
        diff = np.atleast_1d(diff)
        scale = other.norms()
        return diff / np.where(scale > 0, scale, 1.0)

    def to_dataarray(self):
        import xarray as xr

        from .helpers import attach_history

        da = xr.DataArray(
            self.traces,
            dims=["probe", "time", "boundary_dof"],
            coords={"probe": np.arange(self.traces.shape[0]), "time": self.times},
            name="flux",
        )
        attrs = dict(
            route=self.route, profile=self.profile.name, tau=self.tau, dt=self.dt
        )
        return attach_history(getframe(), da, **attrs)

    def to_frame(self):
        """Long table with columns probe, t, boundary_dof, value."""
        from pandas import DataFrame

        P, T, B = self.traces.shape
        probe, time, dof = np.meshgrid(
            np.arange(P), np.arange(T), np.arange(B), indexing="ij"
        )
        return DataFrame(
            dict(
                probe=probe.ravel(),
                t=self.times[time.ravel()],
                boundary_dof=dof.ravel(),
                value=self.traces.ravel(),
            )
        )

    def __repr__(self):
        return "<WaveTrace route={} probes={} steps={} tau={:g}>".format(
            self.route, self.traces.shape[0], self.times.size - 1, self.tau
        )


def cfl_limit(mesh, alpha=1.0):
    """Leapfrog stability limit h / (sqrt(n) sqrt(alpha))."""
    return mesh.h / (np.sqrt(mesh.n) * np.sqrt(alpha))


def _stepping_system(op):
    """Picklable matrices for worker processes."""
    return dict(
        K=op.K,
        K_IB=op.K_IB,
        K_BI=op.K_BI,
        K_BB=op.K_BB,
        mass=op.M.diagonal(),
        boundary_mass=op.boundary_mass,
        K_full=op.K_full,
        mass_full=op.mass,
        interior=op.mesh.interior,
        boundary=op.mesh.boundary,
    )


def _step_probe(phi, system, profile, dt, n_steps, initial=None):
    """Leapfrog for one probe; returns the flux trace and the energy record."""
    from scipy.sparse.linalg import splu

    K, K_IB = system["K"], system["K_IB"]
    K_BI, K_BB = system["K_BI"], system["K_BB"]
    m = system["mass"]
    W = system["boundary_mass"]
    gamma = splu(W.tocsc())
    I, B = system["interior"], system["boundary"]
    N = system["mass_full"].size

    velocity_profile = profile.derivative(1)
    times = dt * np.arange(n_steps + 1)
    eta = profile(times)
    eta_dot = velocity_profile(times)
    K_IB_phi = K_IB @ phi
    K_BB_phi = K_BB @ phi
    power_phi = W @ phi

    u0 = np.zeros(m.size) if initial is None else np.asarray(initial, dtype=float)
    acc0 = -(K @ u0 + K_IB_phi * eta[0]) / m
    u_prev, u = u0, u0 + 0.5 * dt**2 * acc0

    def full(interior, t_index):
        out = np.zeros(N)
        out[I] = interior
        out[B] = phi * eta[t_index]
        return out

    def energy(u_next, u_now, u_before, t_index):
        v = (u_next - u_before) / (2 * dt)
        w = full(u_now, t_index)
        return 0.5 * v @ (m * v) + 0.5 * w @ (system["K_full"] @ w)

    flux = np.zeros((n_steps + 1, phi.size))
    flux[0] = gamma.solve(K_BI @ u0 + K_BB_phi * eta[0])
    energies = np.zeros(n_steps + 1)
    w0 = full(u0, 0)
    energies[0] = 0.5 * w0 @ (system["K_full"] @ w0)
    work = abs(eta_dot[0] * (power_phi @ flux[0])) * dt

    for step in range(1, n_steps + 1):
        flux[step] = gamma.solve(K_BI @ u + K_BB_phi * eta[step])
        work += abs(eta_dot[step] * (power_phi @ flux[step])) * dt
        if step == n_steps:
            break
        u_next = 2 * u - u_prev + dt**2 * (-(K @ u) - K_IB_phi * eta[step]) / m
        energies[step] = energy(u_next, u, u_prev, step)
        bound = BLOWUP_FACTOR * (energies[0] + work) + np.finfo(float).tiny
        if not np.isfinite(energies[step]) or (step > 10 and energies[step] > bound):
            raise EnergyBlowupError(
                "discrete energy {:.3g} exceeds {:.0e} x the data bound "
                "at step {}".format(energies[step], BLOWUP_FACTOR, step)
            )
        u_prev, u = u, u_next
    energies[-1] = energies[-2]
    return flux, energies


def wave_step(
    op, probes, profile, tau, dt, initial=None, alpha=1.0, threads=1, verbose=False
):
    """
    Boundary fluxes of w with w = phi_b eta on Sigma, w(0) = initial,
    dw/dt(0) = 0, by explicit leapfrog on the lumped system

        M w'' + K w + K_IB h = 0

    Parameters
    ----------
    op : OperatorPair
    probes : np.array, shape=[n_probes, n_boundary]
    profile : TimeProfile
    tau : float
        final time
    dt : float
        requested step; reduced so that tau is a whole number of steps
    initial : np.array, shape=[n_interior, ], optional
        initial interior displacement (energy conservation checks)
    alpha : float [1.0]
        ellipticity bound entering the stability limit
    threads : int [1]
        worker processes over probes (0 = BSD2DTN_THREADS or all cores)

    Returns
    -------
    WaveTrace
        ``extra["energy"]`` holds the energy record per probe

    Raises
    ------
    CFLError
        if dt exceeds h / (sqrt(n) sqrt(alpha))
    EnergyBlowupError
        if the monitored energy exceeds 1e3 x (initial energy + boundary work)
    """
    import multiprocessing as mp
    from functools import partial

    from tqdm import tqdm

    limit = cfl_limit(op.mesh, alpha)
    if dt > limit * (1 + 1e-12):
        raise CFLError("dt={:.4g} exceeds the stability limit {:.4g}".format(dt, limit))
    n_steps = int(np.ceil(tau / dt - 1e-9))
    dt = tau / n_steps
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    times = dt * np.arange(n_steps + 1)

    func = partial(
        _step_probe,
        system=_stepping_system(op),
        profile=profile,
        dt=dt,
        n_steps=n_steps,
        initial=initial,
    )
    n_cpus = min(thread_count(threads), probes.shape[0])
    info = "\tleapfrog: {} probes, {} steps of {:.4g} on {} CPUs"
    printv(verbose, info.format(probes.shape[0], n_steps, dt, n_cpus))
    if n_cpus > 1:
        with mp.Pool(n_cpus) as pool:
            output = pool.map(func, list(probes))
    else:
        output = [func(phi) for phi in tqdm(probes, disable=not verbose)]

    traces = np.stack([flux for flux, _ in output])
    energy = np.stack([e for _, e in output])
    extra = dict(energy=energy, cfl_limit=limit, n_steps=n_steps)
    return WaveTrace(
        times, traces, probes, profile, "stepping", op.boundary_mass, dt, extra
    )


def _closed_convolution(omega, polynomial, times):
    """
    int_0^t P(s) sin(omega (t-s)) / omega ds for polynomial P, from the
    recursion obtained by integrating by parts twice:

        I(P) = (P(t) - P(0) cos wt)/w - P'(0) sin(wt)/w^2 - I(P'')/w^2
    """
    omega = np.asarray(omega, dtype=float)[:, None]
    t = np.asarray(times, dtype=float)[None, :]
    cos_t, sin_t = np.cos(omega * t), np.sin(omega * t)
    total = np.zeros((omega.shape[0], t.shape[1]))
    coef = np.ones_like(omega)
    P = polynomial
    while np.any(P.coef):
        P0, dP0 = P(0.0), P.deriv(1)(0.0)
        term = (P(t) - P0 * cos_t) / omega - dP0 * sin_t / omega**2
        total = total + coef * term
        coef = coef * (-1.0 / omega**2)
        P = P.deriv(2)
    return total / omega


def _trapezoid_convolution(omega, profile, times, panels):
    from scipy.integrate import trapezoid

    omega = np.asarray(omega, dtype=float)
    out = np.zeros((omega.size, len(times)))
    for i, t in enumerate(times):
        if t <= 0:
            continue
        estimates = []
        for count in (panels, 2 * panels):
            s = np.linspace(0.0, t, count + 1)
            kernel = np.sin(np.multiply.outer(omega, t - s)) / omega[:, None]
            estimates += [trapezoid(kernel * profile(s)[None, :], s, axis=1)]
        out[:, i] = (4 * estimates[1] - estimates[0]) / 3
    return out


def duhamel(lam, profile, times, method="closed", panels=64):
    """
    Per-mode convolution int_0^t eta(s) s_k(t-s) ds.

    Parameters
    ----------
    lam : float or np.array, shape=[K, ]
        eigenvalues
    profile : TimeProfile
    times : np.array
    method : str ["closed"]
        "closed" for the exact polynomial formula, "trapezoid" for the
        trapezoid rule with one Richardson extrapolation step
    panels : int [64]
        trapezoid panels per evaluation time (coarse level)

    Returns
    -------
    np.array, shape=[K, n_times]
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if (lam <= 0).any():
        raise ConfigError("convolution kernels need positive eigenvalues")
    omega = np.sqrt(lam)
    if method == "closed":
        return _closed_convolution(omega, profile.polynomial, times)
    if method == "trapezoid":
        times = np.asarray(times, dtype=float)
        return _trapezoid_convolution(omega, profile, times, panels)
    raise ConfigError("method must be 'closed' or 'trapezoid', got {}".format(method))


def _check_derivatives(dtn_derivs, ell):
    if len(dtn_derivs) < ell + 1:
        raise ConfigError(
            "{} DtN derivatives supplied, orders 0..{} needed".format(
                len(dtn_derivs), ell
            )
        )
    for j, dtn in enumerate(dtn_derivs[: ell + 1]):
        if dtn.j != j or dtn.lam != 0:
            raise ConfigError(
                "derivative {} is of order {} at shift {}".format(j, dtn.j, dtn.lam)
            )


def remainder_parts(sd, probes, profile, times, ell, method="closed"):
    """
    Modal pieces of the remainder flux for separable data phi eta.

    Returns
    -------
    dict
        ``forcing`` (-1)^ell <phi|psi_k> lam_k^-(ell+1), ``convolution`` of
        eta^(2 ell + 2) with s_k, and the initial data ``r0``, ``r1`` of
        the remainder (zero in the strict class)
    """
    W = sd.boundary_weight
    pair = np.atleast_2d(probes) @ (W @ sd.psis.T)
    lam = sd.lambdas
    forcing = (-1) ** ell * pair * lam ** (-(ell + 1))
    convolution = duhamel(lam, profile.derivative(2 * ell + 2), times, method=method)

    r0 = np.zeros_like(pair)
    r1 = np.zeros_like(pair)
    for j in range(ell + 1):
        scaled = (-1) ** j * pair * lam ** (-(j + 1))
        r0 += scaled * profile.derivative(2 * j)(0.0)
        r1 += scaled * profile.derivative(2 * j + 1)(0.0)
    return dict(forcing=forcing, convolution=convolution, r0=r0, r1=r1)


def _modal_sum(modal, psis):
    """sum_k modal[p, k, t] psis[k, b] accumulated mode by mode, [p, t, b]"""
    return compensated_sum(
        modal[:, k, :, None] * psis[k][None, None, :] for k in range(psis.shape[0])
    )


def wave_formula(sd, dtn_derivs, probes, profile, times, ell=None, method="closed"):
    """
    Boundary fluxes from the expansion

        Pi(h)(t) = sum_{j<=ell} Lambda^(j)(0) phi eta^(2j)(t) / j!  +  flux of r(t)

    where the remainder solves the wave equation with zero boundary data
    and forcing M (K^-1 M)^ell u(0)(phi) eta^(2 ell + 2) up to sign, and
    has the modal flux

        sum_k (-1)^ell <phi|psi_k> lam_k^-(ell+1)
            int_0^t eta^(2ell+2)(s) s_k(t-s) ds psi_k

    For profiles in the relaxed class the remainder also carries the free
    oscillation of its nonzero initial data, which is added and reported.

    Parameters
    ----------
    sd : SpectralData
    dtn_derivs : list of DtnOperator
        Lambda^(j)(0) for j = 0..ell (direct route)
    probes : np.array, shape=[n_probes, n_boundary]
    profile : TimeProfile
    times : np.array
    ell : int, optional
        expansion order, n + 1 by default
    method : str ["closed"]
        convolution method, see ``duhamel``

    Returns
    -------
    WaveTrace
        ``extra`` holds the Taylor part, the Duhamel remainder, the
        initial-data correction, the profile class and the tail bound

    Raises
    ------
    ConfigError
        for missing derivatives or insufficient vanishing of eta at 0
    """
    from math import factorial

    n = sd.n
    ell = n + 1 if ell is None else int(ell)
    _check_derivatives(dtn_derivs, ell)
    profile_class = profile.check_class(2 * ell + 2)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    times = np.asarray(times, dtype=float)

    taylor = np.zeros((probes.shape[0], times.size, probes.shape[1]))
    for j in range(ell + 1):
        flux = dtn_derivs[j].apply(probes)
        eta = profile.derivative(2 * j)(times) / factorial(j)
        taylor += flux[:, None, :] * eta[None, :, None]

    parts = remainder_parts(sd, probes, profile, times, ell, method)
    modal = parts["forcing"][:, :, None] * parts["convolution"][None, :, :]
    remainder = _modal_sum(modal, sd.psis)

    omega = np.sqrt(sd.lambdas)
    free = parts["r0"][:, :, None] * np.cos(np.multiply.outer(omega, times))[None]
    sine = np.sin(np.multiply.outer(omega, times)) / omega[:, None]
    free += parts["r1"][:, :, None] * sine[None]
    correction = _modal_sum(free, sd.psis)

    traces = taylor + remainder + correction
    extra = dict(
        taylor=taylor,
        remainder=remainder,
        correction=correction,
        profile_class=profile_class,
        ell=ell,
        K=sd.K,
        tail_bound=remainder_tail_bound(sd, probes, profile, times, ell),
    )
    return WaveTrace(
        times, traces, probes, profile, "formula", sd.boundary_weight, extra=extra
    )


def remainder_tail_bound(sd, probes, profile, times, ell):
    """
    Bound of the remainder modes K < k <= N dropped by the record, from
    |int eta^(2ell+2) s_k| <= ||eta^(2ell+2)||_L1 / sqrt(lam_k) and the
    empirical Weyl and trace constants.
    """
    from scipy.integrate import trapezoid

    N = sd.n_dofs
    if N <= sd.K:
        return 0.0
    from .utils import weighted_norm

    n = sd.n
    fine = np.linspace(0.0, float(np.max(times)), 4 * len(times) + 1)
    l1 = trapezoid(np.abs(profile.derivative(2 * ell + 2)(fine)), fine)
    k = np.arange(sd.K + 1, N + 1, dtype=float)
    lam_lower = k ** (2.0 / n) / sd.theta
    terms = k ** (7.0 / (2 * n)) * lam_lower ** (-(ell + 1.5))
    phi_norm = weighted_norm(np.atleast_2d(probes), sd.boundary_weight)
    phi_norm = np.atleast_1d(phi_norm).max()
    return float(sd.trace_constant**2 * phi_norm * l1 * stable_sum(terms))


def four_term_split(sd1, sd2, probes, profile, times, ell=None):
    """
    Splits the remainder flux difference of two aligned records into the
    eigenvalue-weight term I1, the flux-pairing term I2, the kernel term I3
    and the flux-vector term I4.

    Returns
    -------
    dict
        ``I1`` .. ``I4``, ``total`` (each [n_probes, n_times, n_boundary]) and
        the relative ``defect`` of the sum
    """
    ell = sd1.n + 1 if ell is None else int(ell)
    p1 = remainder_parts(sd1, probes, profile, times, ell)
    p2 = remainder_parts(sd2, probes, profile, times, ell)
    sign = (-1) ** ell
    W = sd1.boundary_weight
    pair1 = np.atleast_2d(probes) @ (W @ sd1.psis.T)
    pair2 = np.atleast_2d(probes) @ (W @ sd2.psis.T)
    a1 = sign * sd1.lambdas ** (-(ell + 1))
    a2 = sign * sd2.lambdas ** (-(ell + 1))
    c1, c2 = p1["convolution"], p2["convolution"]

    def assemble(coef, conv, psis):
        return _modal_sum(coef[:, :, None] * conv[None, :, :], psis)

    I1 = assemble((a1 - a2) * pair1, c1, sd1.psis)
    I2 = assemble(a2 * (pair1 - pair2), c1, sd1.psis)
    I3 = assemble(a2 * pair2, c1 - c2, sd1.psis)
    I4 = assemble(a2 * pair2, c2, sd1.psis - sd2.psis)
    total = assemble(a1 * pair1, c1, sd1.psis) - assemble(a2 * pair2, c2, sd2.psis)

    scale = max(np.abs(total).max(), np.abs(I1).max() + np.abs(I3).max(), 1e-300)
    defect = float(np.abs(I1 + I2 + I3 + I4 - total).max() / scale)
    return dict(I1=I1, I2=I2, I3=I3, I4=I4, total=total, defect=defect)


def hyperbolic_difference(rec1, rec2, probes, profile, times, ell=None, delta=None):
    """
    Compares the hyperbolic DtN maps of two operators on a probe family.

    Parameters
    ----------
    rec1, rec2 : tuple of (OperatorPair, SpectralData)
        operators with their aligned records on a shared mesh
    probes : np.array, shape=[n_probes, n_boundary]
    profile : TimeProfile
    times : np.array
    ell : int, optional
    delta : float, optional
        distance of the records; per-probe ratios are reported when given

    Returns
    -------
    dict
        ``frame`` (pandas, one row per probe with the L2(Sigma) norms of the
        trace difference, the remainder difference and I1..I4), the worst
        split ``defect`` and ``max_ratio``
    """
    from pandas import DataFrame

    from .elliptic_dtn import dtn_direct
    from .utils import space_time_norm

    (op1, sd1), (op2, sd2) = rec1, rec2
    same_ops = op1.mesh.signature == op2.mesh.signature
    if not same_ops or sd1.mesh_signature != sd2.mesh_signature:
        raise MeshMismatchError("records live on different meshes")
    ell = sd1.n + 1 if ell is None else int(ell)
    times = np.asarray(times, dtype=float)

    traces = []
    for op, sd in ((op1, sd1), (op2, sd2)):
        derivs = [dtn_direct(op, 0.0, j) for j in range(ell + 1)]
        traces += [wave_formula(sd, derivs, probes, profile, times, ell)]
    split = four_term_split(sd1, sd2, probes, profile, times, ell)

    W = sd1.boundary_weight

    def norm(values):
        return np.atleast_1d(space_time_norm(values, W, times))

    frame = DataFrame(
        dict(
            probe=np.arange(np.atleast_2d(probes).shape[0]),
            difference=norm(traces[0].traces - traces[1].traces),
            remainder=norm(split["total"]),
            I1=norm(split["I1"]),
            I2=norm(split["I2"]),
            I3=norm(split["I3"]),
            I4=norm(split["I4"]),
        )
    )
    held = np.repeat(np.atleast_2d(probes)[:, None, :], times.size, axis=1)
    frame["probe_norm"] = norm(held)
    max_ratio = None
    if delta is not None:
        if delta > 0:
            frame["ratio"] = frame.difference / (delta * frame.probe_norm)
            max_ratio = float(frame.ratio.max())
        else:
            frame["ratio"] = np.nan
    return dict(frame=frame, defect=split["defect"], max_ratio=max_ratio)


def remainder_telescoping(sd, profile, probe, times, ell=None):
    """
    Discrete re-derivation of the expansion: applying the semi-discrete wave
    operator (time derivatives by centered second differences) to the
    partial sums w_0 + ... + w_ell in modal form reproduces M d^2/dt^2 w_ell.

    Returns
    -------
    dict
        the largest ``residual``, its ``scale`` and their ratio ``relative``,
        which is of the order of the time step squared
    """
    ell = sd.n + 1 if ell is None else int(ell)
    times = np.asarray(times, dtype=float)
    dt = float(np.diff(times).mean())
    pair = sd.psis @ (sd.boundary_weight @ np.asarray(probe, dtype=float))
    lam = sd.lambdas[:, None]

    # modal coefficients of w_j = u^(j)(0)(phi) eta^(2j) / j!
    def coefficient(j):
        return (-1) ** (j + 1) * pair[:, None] * lam ** (-(j + 1))

    partial_sum = np.zeros((sd.K, times.size))
    for j in range(ell + 1):
        partial_sum += coefficient(j) * profile.derivative(2 * j)(times)[None, :]
    last = coefficient(ell) * profile.derivative(2 * ell)(times)[None, :]

    def second_difference(values):
        return (values[:, 2:] - 2 * values[:, 1:-1] + values[:, :-2]) / dt**2

    inner = slice(1, -1)
    boundary_forcing = pair[:, None] * profile(times)[None, inner]
    residual = (
        second_difference(partial_sum)
        + lam * partial_sum[:, inner]
        + boundary_forcing
        - second_difference(last)
    )
    scale = max(np.abs(second_difference(last)).max(), 1e-300)
    worst = float(np.abs(residual).max())
    return dict(residual=worst, scale=float(scale), relative=worst / scale, dt=dt)
