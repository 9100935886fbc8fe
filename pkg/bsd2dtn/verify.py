#!/usr/bin/env python
"""
Checkers for the identities and inequalities relating boundary spectral
data to the DtN maps, the stability sweeps over perturbation families and
the fits of logarithmic stability moduli.

Every checker returns a ``VerificationReport``. Asserted checks pass when
each measured quantity stays below its bound times (1 + tolerance); report
only checks always pass and carry the measured constants.
"""

import numpy as np

from .helpers import ConfigError, printv


CHECK_NAMES = (
    "lemte",
    "ui0",
    "estimates",
    "elliptic_chain",
    "splittings",
    "routes",
    "sine_kernel",
    "norm_equivalence",
    "resolvent",
    "weyl_potential",
)
SWEEP_KINDS = (
    "elliptic",
    "hyperbolic",
    "conductivity",
    "potential",
    "potential_power",
    "hyperbolic_potential",
)
HYPERBOLIC_SWEEPS = ("hyperbolic", "hyperbolic_potential")
MODULI = ("psi_sigma", "psi_sigma_theta", "phi_sigma")


class VerificationReport(object):
    """
    Outcome of one check.

    Attributes
    ----------
    check_id : str
    inputs : dict
        seed, ranges, K, mesh
    measured : dict
        measured quantities; the keys shared with ``bounds`` are asserted
    bounds : dict
    tolerance : float
        relative slack on every bound
    report_only : bool
        reported constants, never a failure
    details : list of dict
        per-case rows (one per sample point, shift or sweep point)
    """

    def __init__(
        self,
        check_id,
        inputs,
        measured,
        bounds,
        tolerance=0.0,
        report_only=False,
        notes=None,
        details=None,
    ):
        self.check_id = check_id
        self.inputs = dict(inputs)
        self.measured = dict(measured)
        self.bounds = dict(bounds)
        self.tolerance = float(tolerance)
        self.report_only = bool(report_only)
        self.notes = notes
        self.details = [] if details is None else list(details)

    def _holds(self, key):
        value = self.measured.get(key, np.nan)
        value = float(value)
        limit = self.bounds[key] * (1 + self.tolerance)
        return bool(np.isfinite(value) and value <= limit)

    @property
    def failures(self):
        return [key for key in sorted(self.bounds) if not self._holds(key)]

    @property
    def passed(self):
        if self.report_only:
            return True
        return not self.failures

    @property
    def margin(self):
        """Smallest bound / measured over the asserted quantities."""
        ratios = []
        for key, bound in self.bounds.items():
            value = float(self.measured.get(key, np.nan))
            if not np.isfinite(value):
                ratios += [0.0]
            elif value <= 0:
                ratios += [np.inf]
            else:
                ratios += [bound / value]
        return min(ratios) if ratios else None

    def to_dict(self):
        return _plain(
            dict(
                check_id=self.check_id,
                inputs=self.inputs,
                measured=self.measured,
                bounds=self.bounds,
                tolerance=self.tolerance,
                report_only=self.report_only,
                passed=self.passed,
                margin=self.margin,
                notes=self.notes,
                details=self.details,
            )
        )

    def to_json(self):
        import json

        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def summary_line(self):
        if self.report_only:
            status = "REPORT"
        else:
            status = "PASS" if self.passed else "FAIL"
        margin = self.margin
        margin = "-" if margin is None else "{:.4g}".format(margin)
        line = "{:6s} {} margin={}".format(status, self.check_id, margin)
        if not self.passed:
            line += " failed={}".format(",".join(self.failures))
        return line

    def __repr__(self):
        return "<VerificationReport {} passed={} margin={}>".format(
            self.check_id, self.passed, self.margin
        )


def _plain(obj):
    """JSON-ready copy: numpy scalars and arrays to Python, non-finite to str."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if np.isnan(value):
            return "nan"
        if np.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return obj


def _log_uniform(rng, low, high, size=None):
    return 10 ** rng.uniform(np.log10(low), np.log10(high), size)


def check_lemte(samples=1000, seed=0):
    """
    Checks on random samples

        int_0^lam s^(j-1) (a+s)^-(j+m+1) ds <= j 2^(j-1) / a^(m+1)

    and, for a < b,

        int_0^lam s^(j-1) [(a+s)^-(j+m+1) - (b+s)^-(j+m+1)] ds
            <= j (j+m+1) 2^(j-1) (b-a) / (a^(m+1) b)

    with j in [2, 8], m in [0, 5], 0 < a < b <= 1e3 and lam <= 1e6. The
    quadrature is compared against the incomplete beta closed form.

    Returns
    -------
    VerificationReport
        worst ratios left / right of both inequalities and the largest
        relative quadrature error against the closed form
    """
    from .elliptic_dtn import lemte_closed_form, lemte_integral

    if samples < 1:
        raise ConfigError("samples must be >= 1")
    rng = np.random.default_rng(seed)

    worst_te1, worst_te2, worst_oracle = 0.0, 0.0, 0.0
    details = []
    for _ in range(int(samples)):
        j = int(rng.integers(2, 9))
        m = int(rng.integers(0, 6))
        a = float(_log_uniform(rng, 1e-3, 1e3))
        b = float(a + (1e3 - a) * (1 - rng.uniform()))
        lam = float(_log_uniform(rng, 1e-2, 1e6))

        int_a = lemte_integral(j, m, a, lam)
        int_b = lemte_integral(j, m, b, lam)
        te1 = int_a / (j * 2 ** (j - 1) / a ** (m + 1))
        bound2 = j * (j + m + 1) * 2 ** (j - 1) * (b - a) / (a ** (m + 1) * b)
        left2 = int_a - int_b
        te2 = left2 / bound2 if left2 > 0 else 0.0

        closed = lemte_closed_form(j, m, a, lam)
        oracle = abs(int_a - closed) / closed if closed > 0 else abs(int_a)

        worst_te1 = max(worst_te1, te1)
        worst_te2 = max(worst_te2, te2)
        worst_oracle = max(worst_oracle, oracle)
        details += [dict(j=j, m=m, a=a, b=b, lam=lam, te1=te1, te2=te2)]

    inputs = dict(
        samples=int(samples),
        seed=seed,
        j=[2, 8],
        m=[0, 5],
        ab=[0, 1e3],
        lam=[1e-2, 1e6],
    )
    measured = dict(
        te1_ratio=worst_te1, te2_ratio=worst_te2, oracle_error=worst_oracle
    )
    bounds = dict(te1_ratio=1.0, te2_ratio=1.0, oracle_error=1e-8)
    return VerificationReport("lemte", inputs, measured, bounds, details=details)


def check_ui0(samples=1000, seed=0):
    """
    Checks the difference-quotient identity of the resolvent kernels

        j! ((lam+a)^-(j+1) - (lam+b)^-(j+1))
            = -(j+1)! int_0^1 (a-b) / (lam + b + t(a-b))^(j+2) dt

    to 1e-10 relative on random samples.
    """
    from .elliptic_dtn import ui0_identity

    if samples < 1:
        raise ConfigError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(int(samples)):
        j = int(rng.integers(0, 9))
        a = float(_log_uniform(rng, 1e-2, 1e3))
        b = float(_log_uniform(rng, 1e-2, 1e3))
        lam = float(_log_uniform(rng, 1e-2, 1e3))
        lhs, rhs = ui0_identity(lam, a, b, j)
        scale = max(abs(lhs), abs(rhs), np.finfo(float).tiny)
        worst = max(worst, abs(lhs - rhs) / scale)

    inputs = dict(
        samples=int(samples), seed=seed, j=[0, 8], ab=[1e-2, 1e3], lam=[1e-2, 1e3]
    )
    return VerificationReport(
        "ui0", inputs, dict(relative_error=worst), dict(relative_error=1e-10)
    )


def _elliptic_constants(sd, op=None):
    """phi_k L2(dx) / lam_k, H1 / sqrt(lam_k) and ||psi_k|| / lam_k^(7/8)."""
    from .assembly import lumped_mass

    V = sd.eigvecs
    if op is not None:
        lebesgue = lumped_mass(op.mesh)[op.mesh.interior]
        energy = np.einsum("ki,ki->k", V, (op.K @ V.T).T)
    else:
        lebesgue = sd.mass_weight
        energy = sd.lambdas.copy()
    l2 = np.sqrt(np.einsum("ki,ki->k", V, V * lebesgue[None, :]))
    h1 = np.sqrt(np.maximum(energy, 0.0) + l2**2)
    return dict(
        l2_constant=float((l2 / sd.lambdas).max()),
        h1_constant=float((h1 / np.sqrt(sd.lambdas)).max()),
        trace_constant=float((sd.psi_norms / sd.lambdas**0.875).max()),
    )


def check_elliptic_chain(sd, sd_fine=None, op=None, samples=16, seed=0):
    """
    Empirical constants of the elliptic estimates for the eigenfunctions,

        ||phi_k||_L2 <= c lam_k^-1 ... reported as max_k ||phi_k|| / lam_k
        ||phi_k||_H1 / sqrt(lam_k) and ||psi_k|| / lam_k^(7/8)

    and of the solver bound ||A^-1 f||_H1 <= c ||f|| on random f. With
    ``op`` the eigenfunction check A^-1 phi_1 = phi_1 / lam_1 is included.
    Report only; with ``sd_fine`` the refinement ratios of the constants
    are reported against 1.2.

    Parameters
    ----------
    sd : SpectralData
        with eigenvectors
    sd_fine : SpectralData, optional
        same problem on a refined mesh
    op : OperatorPair, optional
        operator of ``sd``; enables Lebesgue norms and the solver probes
    """
    from .elliptic_dtn import _need_vectors

    _need_vectors(sd)
    measured = _elliptic_constants(sd, op)
    measured["trace_ratio_first"] = float(sd.psi_norms[0] / sd.lambdas[0] ** 0.875)
    bounds = {}
    if sd_fine is not None:
        _need_vectors(sd_fine)
        fine = _elliptic_constants(sd_fine.truncate(min(sd.K, sd_fine.K)))
        coarse = _elliptic_constants(sd.truncate(min(sd.K, sd_fine.K)))
        for key in fine:
            ratio = max(fine[key], coarse[key]) / min(fine[key], coarse[key])
            measured[key + "_ratio"] = ratio
            bounds[key + "_ratio"] = 1.2

    if op is not None:
        m = op.M.diagonal()
        lu = op.factor(0.0)
        phi1 = sd.eigvecs[0]
        u = lu.solve(m * phi1)
        measured["eigen_solver_ratio"] = float(
            np.sqrt(u @ (m * u)) * sd.lambdas[0] / np.sqrt(phi1 @ (m * phi1))
        )
        rng = np.random.default_rng(seed)
        ratios = []
        for _ in range(int(samples)):
            f = rng.standard_normal(op.n_interior)
            u = lu.solve(m * f)
            ratios += [np.sqrt(u @ (op.K @ u) + u @ (m * u)) / np.sqrt(f @ (m * f))]
        measured["solver_h1_constant"] = float(max(ratios))

    inputs = dict(K=sd.K, n=sd.n, mesh=list(sd.mesh_signature), seed=seed)
    return VerificationReport(
        "elliptic_chain", inputs, measured, bounds, report_only=True
    )


def check_splittings(sd1, sd2, lam, j, probes, profile=None, times=None, ell=None):
    """
    The three-term splitting of the solution difference and, when a time
    profile is given, the four-term splitting of the remainder flux
    difference sum to the whole within 1e-10 relative.
    """
    from .elliptic_dtn import three_term_split
    from .hyperbolic_dtn import four_term_split

    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    defects = [three_term_split(sd1, sd2, lam, j, phi)["defect"] for phi in probes]
    measured = dict(three_term_defect=float(max(defects)))
    bounds = dict(three_term_defect=1e-10)
    if profile is not None:
        if times is None:
            raise ConfigError("the four-term splitting needs evaluation times")
        split = four_term_split(sd1, sd2, probes, profile, times, ell)
        measured["four_term_defect"] = split["defect"]
        bounds["four_term_defect"] = 1e-10

    inputs = dict(K=sd1.K, lam=lam, j=j, n_probes=probes.shape[0])
    if profile is not None:
        inputs["profile"] = profile.name
    return VerificationReport("splittings", inputs, measured, bounds)


def check_route_equivalence(
    op,
    sd,
    lambdas=(0.0, 1.0, 10.0),
    orders=(0, 1, 2),
    probes=None,
    reference_shift=None,
    fd_step=1e-3,
    tolerance=1e-3,
):
    """
    Compares the series route of Lambda^(j)(lam) with the direct route on
    boundary probes, and for j >= 1 with centered finite differences of the
    direct route.

    Below the convergence threshold the series is the difference series
    against a direct map at ``reference_shift`` (lam + 1 by default). A
    probe passes when its relative L2(Gamma) error is below
    tolerance + tail_bound ||phi|| / ||Lambda phi||.

    The solve chain is also compared with the resolvent powers,
    u^(j)(lam) = (-1)^j j! R(lam)^j u(lam), to 1e-4.

    Returns
    -------
    VerificationReport
        ``series_direct_ratio`` and ``finite_difference_ratio`` are the worst
        error / allowed ratios, ``resolvent_error`` the chain identity defect
    """
    from math import factorial

    from .assembly import solve_chain
    from .elliptic_dtn import (
        dtn_direct,
        dtn_finite_difference,
        dtn_series,
        probe_norms,
    )
    from .geometry import boundary_probes

    if probes is None:
        probes = boundary_probes(op.mesh, 2)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    W = op.boundary_mass
    phi_norms = probe_norms(probes, W)
    threshold = (sd.n + 3) / 4.0

    def relative(approx, exact, tail):
        exact_norms = probe_norms(exact, W)
        exact_norms = np.where(exact_norms > 0, exact_norms, 1.0)
        error = probe_norms(approx - exact, W) / exact_norms
        allowed = tolerance + (tail or 0.0) * phi_norms / exact_norms
        return float((error / allowed).max()), float(error.max())

    worst_series, worst_fd = 0.0, 0.0
    details = []
    for lam in lambdas:
        for j in orders:
            direct = dtn_direct(op, lam, j)
            exact = direct.apply(probes)
            if j == 0 or j <= threshold:
                shift = lam + 1.0 if reference_shift is None else reference_shift
                reference = dtn_direct(op, shift, j)
                series = dtn_series(sd, lam, j, reference=reference)
            else:
                series = dtn_series(sd, lam, j)
            ratio, error = relative(series.apply(probes), exact, series.tail_bound)
            worst_series = max(worst_series, ratio)
            row = dict(lam=lam, j=j, series_error=error, tail_bound=series.tail_bound)
            if j >= 1:
                fd = dtn_finite_difference(op, lam, j, fd_step).apply(probes)
                fd_ratio, fd_error = relative(
                    series.apply(probes), fd, series.tail_bound
                )
                worst_fd = max(worst_fd, fd_ratio)
                row["finite_difference_error"] = fd_error
            details += [row]

    resolvent_error = 0.0
    A_mass = op.M.diagonal()
    I = op.mesh.interior
    for lam in lambdas:
        J = max(orders)
        lu = op.factor(lam)
        for phi in probes:
            chain = solve_chain(op, lam, phi, J)
            power = chain[0][I]
            for j in range(1, J + 1):
                power = lu.solve(A_mass * power)
                expected = (-1) ** j * factorial(j) * power
                scale = max(np.abs(expected).max(), np.finfo(float).tiny)
                error = np.abs(chain[j][I] - expected).max() / scale
                resolvent_error = max(resolvent_error, float(error))

    inputs = dict(
        K=sd.K,
        mesh=list(op.mesh.signature),
        lambdas=list(lambdas),
        orders=list(orders),
        n_probes=probes.shape[0],
        fd_step=fd_step,
        tolerance=tolerance,
    )
    measured = dict(
        series_direct_ratio=worst_series,
        finite_difference_ratio=worst_fd,
        resolvent_error=resolvent_error,
    )
    bounds = dict(
        series_direct_ratio=1.0, finite_difference_ratio=1.0, resolvent_error=1e-4
    )
    return VerificationReport("routes", inputs, measured, bounds, details=details)


def check_sine_kernel(sd, tau):
    """
    The kernels s_k solve s'' + lam_k s = 0 with s(0) = 0 and s'(0) = 1:
    normalized ODE residual below 1e-6 and initial errors below 1e-12.
    """
    from .hyperbolic_dtn import SineKernel

    if tau <= 0:
        raise ConfigError("tau must be positive, got {}".format(tau))
    out = SineKernel(sd.lambdas).ode_residual(tau)
    measured = dict(
        ode_residual=float(out["ode"].max()),
        initial_value=out["initial_value"],
        initial_slope=out["initial_slope"],
    )
    bounds = dict(ode_residual=1e-6, initial_value=1e-12, initial_slope=1e-12)
    inputs = dict(K=sd.K, tau=tau)
    return VerificationReport("sine_kernel", inputs, measured, bounds)


def check_norm_equivalence(mesh, field, samples=100, seed=0):
    """
    alpha^(-n/4) ||f||_g <= ||f|| <= alpha^(n/4) ||f||_g on random nodal f,
    with the lumped L2(dV_g) and L2(dx) norms.
    """
    from .assembly import lumped_mass

    alpha = field.alpha
    if alpha is None:
        raise ConfigError("norm equivalence needs bounds['alpha']")
    n = mesh.n
    w_g = lumped_mass(mesh, field)
    w = lumped_mass(mesh)
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((int(samples), mesh.n_vertices))
    norm_g = np.sqrt((F**2) @ w_g)
    norm = np.sqrt((F**2) @ w)
    factor = alpha ** (n / 4.0)
    measured = dict(
        lower_ratio=float((norm_g / (factor * norm)).max()),
        upper_ratio=float((norm / (factor * norm_g)).max()),
    )
    bounds = dict(lower_ratio=1.0, upper_ratio=1.0)
    inputs = dict(samples=int(samples), seed=seed, alpha=alpha, kind=field.kind, n=n)
    return VerificationReport(
        "norm_equivalence", inputs, measured, bounds, tolerance=1e-12
    )


def check_resolvent_bound(sd, lam, samples=100, seed=0):
    """||R(lam) f|| <= ||f|| / lam for lam > 0 on random interior f."""
    from .elliptic_dtn import resolvent_power

    if lam <= 0:
        raise ConfigError("the resolvent bound needs lam > 0, got {}".format(lam))
    rng = np.random.default_rng(seed)
    m = sd.mass_weight
    worst = 0.0
    for _ in range(int(samples)):
        f = rng.standard_normal(m.size)
        Rf = resolvent_power(sd, lam, 1, f)
        worst = max(worst, lam * np.sqrt(Rf @ (m * Rf)) / np.sqrt(f @ (m * f)))
    inputs = dict(samples=int(samples), seed=seed, lam=lam, K=sd.K)
    return VerificationReport(
        "resolvent", inputs, dict(ratio=float(worst)), dict(ratio=1.0), tolerance=1e-12
    )


def check_weyl_potential(sd_V, sd_0, ceiling):
    """
    Eigenvalue sandwich of a bounded potential, lam_k <= lam_k^V <= lam_k + c.
    """
    if sd_V.K != sd_0.K:
        raise ConfigError("records have K={} and K={}".format(sd_V.K, sd_0.K))
    lower = sd_0.lambdas / sd_V.lambdas
    upper = (sd_V.lambdas - sd_0.lambdas) / ceiling
    measured = dict(lower_ratio=float(lower.max()), upper_ratio=float(upper.max()))
    bounds = dict(lower_ratio=1.0, upper_ratio=1.0)
    inputs = dict(K=sd_V.K, ceiling=ceiling)
    return VerificationReport(
        "weyl_potential", inputs, measured, bounds, tolerance=1e-10
    )


def default_family(which, n=2):
    """
    Perturbation family of a sweep: base coefficient plus epsilon times an
    interior bump vanishing to second order on the boundary.
    """
    if which not in SWEEP_KINDS:
        raise ConfigError(
            "unknown sweep '{}', expected one of {}".format(which, SWEEP_KINDS)
        )
    if n == 2:
        bump = "256*(x1*(1-x1)*x2*(1-x2))**2"
    else:
        bump = "4096*(x1*(1-x1)*x2*(1-x2)*x3*(1-x3))**2"
    kind = dict(
        elliptic="conformal",
        hyperbolic="conformal",
        conductivity="conductivity",
        potential="potential",
        potential_power="potential",
        hyperbolic_potential="potential",
    )[which]
    return dict(
        which=which,
        kind=kind,
        n=n,
        resolution=8,
        K=None,
        j=0,
        bump=bump,
        base="0" if kind == "potential" else "1",
        alpha=2.0,
        ceiling=1.0,
        probe_order=2,
        tau=1.0,
        n_times=33,
        profile_power=2 * n + 4,
        lam=1.0,
    )


def _family_field(family, epsilon, mesh):
    from .geometry import make_field

    kind = family["kind"]
    expression = "({}) + {!r}*({})".format(
        family["base"], float(epsilon), family["bump"]
    )
    bounds = dict(alpha=family["alpha"])
    if kind == "potential":
        bounds["ceiling"] = family["ceiling"]
    return make_field(kind, expression, bounds, mesh)


def _sweep_point(epsilon, family):
    """One perturbation level: distances and DtN difference against epsilon = 0."""
    from .assembly import assemble
    from .bsd_metrics import align_records, delta_report
    from .elliptic_dtn import dtn_direct, operator_norm, three_term_split
    from .geometry import boundary_probes, build_box_mesh
    from .hyperbolic_dtn import TimeProfile, hyperbolic_difference
    from .spectral import eigensolve

    mesh = build_box_mesh(family["n"], family["resolution"])
    ops = [assemble(mesh, _family_field(family, eps, mesh)) for eps in (0.0, epsilon)]
    K = family["K"] or mesh.n_interior
    sd1, sd2 = [eigensolve(op, K) for op in ops]
    report = delta_report(sd1, sd2)
    sd1a, sd2a = align_records(sd1, sd2, report.pairing)
    probes = boundary_probes(mesh, family["probe_order"])

    row = dict(
        epsilon=float(epsilon),
        delta=report.delta,
        delta_plus=report.delta_plus,
        delta_bar=report.delta_bar,
        delta_star=report.delta_star,
    )
    if family["which"] in HYPERBOLIC_SWEEPS:
        profile = TimeProfile.monomial(family["profile_power"])
        times = np.linspace(0.0, family["tau"], family["n_times"])
        out = hyperbolic_difference(
            (ops[0], sd1a), (ops[1], sd2a), probes, profile, times
        )
        frame = out["frame"]
        row["dtn_difference"] = float((frame.difference / frame.probe_norm).max())
        row["split_defect"] = out["defect"]
    else:
        j = family["j"]
        diff = dtn_direct(ops[0], 0.0, j) - dtn_direct(ops[1], 0.0, j)
        row["dtn_difference"] = operator_norm(diff)
        defects = [
            three_term_split(sd1a, sd2a, family["lam"], j, phi)["defect"]
            for phi in probes
        ]
        row["split_defect"] = float(max(defects))
    return row


def sweep_stability(
    family=None, which="elliptic", epsilons=None, threads=1, verbose=False
):
    """
    Stability sweep: for each epsilon the perturbed coefficient is compared
    with the unperturbed one through the matching distance and the norm of
    the DtN difference.

    - elliptic, conductivity, potential: ||Lambda_1^(j)(0) - Lambda_2^(j)(0)||
      against delta, slope in [0.8, 1.2] and ratio band below 3
    - hyperbolic: worst probe ||Pi_1 h - Pi_2 h|| / ||phi|| against delta
    - potential_power: the same DtN difference against delta_bar, which is
      dominated by C delta_bar^sigma when the slope is at least sigma
    - hyperbolic_potential: the hyperbolic difference of two potentials
      against delta_bar^sigma + delta_star, dominated when the slope is at
      least 1

    Parameters
    ----------
    family : dict, optional
        overrides of ``default_family(which, n)``
    which : str ["elliptic"]
    epsilons : array-like, optional
        perturbation levels; 0 and a log grid over [1e-3, 1e-1] by default
    threads : int [1]
        worker processes (0 = BSD2DTN_THREADS or all cores)

    Returns
    -------
    report : VerificationReport
    frame : pandas.DataFrame
        one row per epsilon
    """
    import multiprocessing as mp
    from functools import partial

    from pandas import DataFrame
    from tqdm import tqdm

    from .helpers import thread_count
    from .utils import loglog_fit

    overrides = dict(family or {})
    resolved = default_family(which, overrides.get("n", 2))
    resolved.update(overrides)
    resolved["which"] = which
    if epsilons is None:
        epsilons = np.concatenate([[0.0], np.logspace(-3, -1, 5)])
    epsilons = np.asarray(epsilons, dtype=float)
    if (epsilons < 0).any():
        raise ConfigError("perturbation levels must be >= 0")

    func = partial(_sweep_point, family=resolved)
    n_cpus = min(thread_count(threads), epsilons.size)
    msg = "\tsweep {}: {} points on {} CPUs".format(which, epsilons.size, n_cpus)
    printv(verbose, msg)
    if n_cpus > 1:
        with mp.Pool(n_cpus) as pool:
            rows = pool.map(func, list(epsilons))
    else:
        rows = [func(eps) for eps in tqdm(epsilons, disable=not verbose)]
    frame = DataFrame(rows)

    abscissa = "delta"
    if which == "potential_power":
        abscissa = "delta_bar"
    elif which == "hyperbolic_potential":
        _, sigma = _k0_sigma(resolved["n"])
        frame["delta_mixed"] = frame.delta_bar**sigma + frame.delta_star
        abscissa = "delta_mixed"
    positive = frame[(frame.epsilon > 0) & (frame[abscissa] > 0)]
    frame["ratio"] = frame.dtn_difference / frame[abscissa].where(frame[abscissa] > 0)
    fit = loglog_fit(positive[abscissa], positive.dtn_difference)
    slope = fit["slope"]

    measured = dict(
        slope=slope, r2=fit["r2"], split_defect=float(frame.split_defect.max())
    )
    bounds = dict(split_defect=1e-10)
    tolerance = 0.0
    if which == "potential_power":
        k0, sigma = _k0_sigma(resolved["n"])
        dominating = positive.dtn_difference / positive[abscissa] ** sigma
        measured.update(
            sigma=sigma,
            k0=k0,
            sigma_ratio=sigma / slope if slope > 0 else np.inf,
            power_constant=float(dominating.max()) if len(dominating) else np.nan,
        )
        bounds["sigma_ratio"] = 1.0
        tolerance = 0.2
    elif which == "hyperbolic_potential":
        dominating = positive.dtn_difference / positive[abscissa]
        measured.update(
            sigma=sigma,
            slope_ratio=1.0 / slope if slope > 0 else np.inf,
            power_constant=float(dominating.max()) if len(dominating) else np.nan,
        )
        bounds["slope_ratio"] = 1.0
        tolerance = 0.2
    else:
        ratios = positive.dtn_difference / positive[abscissa]
        measured.update(
            slope_lower=0.8 / slope if slope > 0 else np.inf,
            slope_upper=slope / 1.2,
            ratio_band=float(ratios.max() / ratios.min()) if len(ratios) else np.nan,
        )
        bounds.update(slope_lower=1.0, slope_upper=1.0, ratio_band=3.0)

    inputs = dict(family=resolved, epsilons=epsilons.tolist())
    details = frame.to_dict(orient="records")
    report = VerificationReport(
        "sweep_" + which, inputs, measured, bounds, tolerance=tolerance, details=details
    )
    return report, frame


def _k0_sigma(n):
    from .bsd_metrics import smallest_k0

    k0 = smallest_k0(n)
    return k0, 1.0 / (1 + k0)


def _modulus_abscissa(deltas, modulus):
    """|ln delta| or |ln(delta + |ln delta|^-1)| (nan where undefined)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        log_delta = np.abs(np.log(deltas))
        if modulus == "psi_sigma":
            return log_delta
        return np.abs(np.log(deltas + 1.0 / log_delta))


def modulus_values(deltas, modulus, theta, varsigma):
    """
    Stability modulus with exponent theta: logarithmic branch for
    0 < delta <= varsigma, delta above and 0 at delta = 0.
    """
    deltas = np.asarray(deltas, dtype=float)
    x = _modulus_abscissa(deltas, modulus)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_branch = x ** (-theta)
    out = np.where(deltas > varsigma, deltas, log_branch)
    return np.where(deltas <= 0, 0.0, out)


def fit_modulus(deltas, errors, modulus="psi_sigma", n=2, varsigma=0.1):
    """
    Least-squares fit of error ~ kappa * modulus(delta) with a free exponent
    on the logarithmic branch, followed by a domination test.

    Parameters
    ----------
    deltas, errors : array-like
        paired data distances and recovery errors
    modulus : str ["psi_sigma"]
        "psi_sigma" |ln d|^-theta (nominal theta = 2/(2+n)),
        "psi_sigma_theta" |ln(d + |ln d|^-1)|^-theta (nominal 1/2) or
        "phi_sigma" the same with exponent eta/4 (nominal eta = 1/4)
    n : int [2]
    varsigma : float [0.1]
        switch between the logarithmic and the linear branch, below 1/e

    Returns
    -------
    VerificationReport
        report only: fitted ``kappa`` and ``theta`` (and ``eta`` for
        phi_sigma), the smallest ``kappa_dominating`` with which the modulus
        dominates every point, and ``dominated`` when it stays within 3 kappa

    Raises
    ------
    ConfigError
        for empty or mismatched data
    """
    from sklearn.linear_model import LinearRegression

    if modulus not in MODULI:
        raise ConfigError(
            "unknown modulus '{}', expected one of {}".format(modulus, MODULI)
        )
    deltas = np.asarray(deltas, dtype=float).ravel()
    errors = np.asarray(errors, dtype=float).ravel()
    if deltas.size == 0 or deltas.size != errors.size:
        raise ConfigError("fit_modulus needs non-empty paired data")
    if not 0 < varsigma < np.exp(-1):
        raise ConfigError("varsigma must lie in (0, 1/e), got {}".format(varsigma))

    nominal = dict(psi_sigma=2.0 / (2 + n), psi_sigma_theta=0.5, phi_sigma=1.0 / 16)
    nominal = nominal[modulus]
    inputs = dict(modulus=modulus, n=n, varsigma=varsigma, n_points=int(deltas.size))

    if not np.any(errors):
        measured = dict(kappa=0.0, theta=nominal, kappa_dominating=0.0, dominated=True)
        return VerificationReport("fit_modulus", inputs, measured, {}, report_only=True)

    x = _modulus_abscissa(deltas, modulus)
    keep = (deltas > 0) & (deltas <= varsigma) & (errors > 0) & np.isfinite(x) & (x > 0)
    r2 = np.nan
    if keep.sum() >= 2:
        X = np.log(x[keep])[:, None]
        Y = np.log(errors[keep])
        model = LinearRegression().fit(X, Y)
        theta = float(-model.coef_[0])
        kappa = float(np.exp(model.intercept_))
        r2 = float(model.score(X, Y)) if keep.sum() > 2 else 1.0
    else:
        theta, kappa = nominal, None

    values = modulus_values(deltas, modulus, theta, varsigma)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(errors > 0, errors / values, 0.0)
    ratios = np.where(np.isnan(ratios), np.inf, ratios)
    kappa_dominating = float(ratios.max())
    if kappa is None:
        kappa = kappa_dominating
    dominated = bool(np.isfinite(kappa_dominating) and kappa_dominating <= 3 * kappa)

    measured = dict(
        kappa=kappa,
        theta=theta,
        kappa_dominating=kappa_dominating,
        dominated=dominated,
        r2=r2,
        n_fitted=int(keep.sum()),
    )
    if modulus == "phi_sigma":
        measured["eta"] = 4 * theta
    return VerificationReport("fit_modulus", inputs, measured, {}, report_only=True)


def _solve(config, mesh, field, K=None, verbose=False):
    from .assembly import assemble
    from .spectral import eigensolve

    op = assemble(mesh, field)
    eig_cfg = config["spectral"]
    K = eig_cfg["K"] if K is None else K
    K = min(K, op.n_interior)
    sd = eigensolve(op, K, eig_cfg["tol"], eig_cfg["maxiter"], verbose=verbose)
    return op, sd


def _records(config, name, verbose=False):
    """Mesh, operator and record of a named field of a config."""
    mesh = config.build_mesh()
    op, sd = _solve(config, mesh, config.build_field(name, mesh), verbose=verbose)
    return mesh, op, sd


def run_checks(names, config, verbose=False):
    """
    Runs the named checks with the settings of an ExperimentConfig.

    Parameters
    ----------
    names : list of str
        subset of CHECK_NAMES
    config : ExperimentConfig

    Returns
    -------
    list of VerificationReport
    """
    from .geometry import boundary_probes
    from .hyperbolic_dtn import TimeProfile

    unknown = [name for name in names if name not in CHECK_NAMES]
    if unknown:
        raise ConfigError(
            "unknown checks {}, expected from {}".format(unknown, CHECK_NAMES)
        )

    seed = config["seed"]
    settings = config["verify"]
    samples = settings["samples"]
    field = config["spectral"]["field"]
    reports = []
    cache = {}

    def record(name):
        if name not in cache:
            cache[name] = _records(config, name, verbose=verbose)
        return cache[name]

    for name in names:
        printv(verbose, "check {}".format(name))
        if name == "lemte":
            reports += [check_lemte(samples, seed)]
        elif name == "ui0":
            reports += [check_ui0(samples, seed)]
        elif name == "estimates":
            from .spectral import validate_estimates

            _, op, sd = record(field)
            reports += [validate_estimates(sd, op=op)]
        elif name == "elliptic_chain":
            _, op, sd = record(field)
            reports += [check_elliptic_chain(sd, op=op, seed=seed)]
        elif name == "splittings":
            first, second = config["delta"]["fields"]
            mesh, _, sd1 = record(first)
            _, _, sd2 = record(second)
            times = np.linspace(0.0, config["wave"]["tau"], config["wave"]["n_times"])
            profile = TimeProfile.monomial(2 * mesh.n + 4)
            probes = boundary_probes(mesh, config["dtn"]["probe_order"])
            reports += [
                check_splittings(
                    sd1, sd2, settings["lam"], settings["j"], probes, profile, times
                )
            ]
        elif name == "routes":
            mesh, op, sd = record(field)
            dtn = config["dtn"]
            reports += [
                check_route_equivalence(
                    op,
                    sd,
                    dtn["lambdas"],
                    dtn["orders"],
                    boundary_probes(mesh, dtn["probe_order"]),
                    dtn["reference_shift"],
                    dtn["fd_step"],
                    dtn["tolerance"],
                )
            ]
        elif name == "sine_kernel":
            reports += [check_sine_kernel(record(field)[2], config["wave"]["tau"])]
        elif name == "norm_equivalence":
            mesh = config.build_mesh()
            sampled = config.build_field(field, mesh)
            reports += [check_norm_equivalence(mesh, sampled, samples, seed)]
        elif name == "resolvent":
            sd = record(field)[2]
            reports += [check_resolvent_bound(sd, settings["lam"], samples, seed)]
        elif name == "weyl_potential":
            potential = settings["potential_field"]
            mesh, _, sd_V = record(potential)
            background = config.build_field(potential, mesh, background=True)
            sd_0 = _solve(config, mesh, background, sd_V.K, verbose)[1]
            ceiling = config["fields"][potential]["bounds"]["ceiling"]
            reports += [check_weyl_potential(sd_V, sd_0, ceiling)]
    return reports
