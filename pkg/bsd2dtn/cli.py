#!/usr/bin/env python
"""
Command line front end: ``bsd2dtn {eigs,dtn,wave,delta,verify,sweep}``.

Every command reads an experiment config, writes JSON reports (and CSV
tables or BSDM matrices) into the output directory and prints one summary
line per product or check. Exit codes: 0 ok, 1 check failure, 2 usage
error, 3 numerical failure.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .helpers import Bsd2DtnError, thread_count


logger = logging.getLogger(__name__)

COMMANDS = ("eigs", "dtn", "wave", "delta", "verify", "sweep")


def _dumps(tree):
    from .verify import _plain

    return json.dumps(_plain(tree), sort_keys=True, indent=2) + "\n"


def _write_json(directory, name, tree):
    from .helpers import atomic_write

    path = atomic_write(os.path.join(directory, name), _dumps(tree))
    logger.info("wrote %s", path)
    return path


def _write_csv(directory, name, frame):
    from .helpers import atomic_write

    text = frame.to_csv(index=False, float_format="%.17g")
    path = atomic_write(os.path.join(directory, name), text)
    logger.info("wrote %s", path)
    return path


def _solve(config, name, verbose=False):
    """Mesh, operator and spectral record of a named field."""
    from .assembly import assemble
    from .spectral import eigensolve

    eig_cfg = config["spectral"]
    mesh = config.build_mesh()
    op = assemble(mesh, config.build_field(name, mesh))
    K = min(eig_cfg["K"], op.n_interior)
    if K < eig_cfg["K"]:
        logger.warning("K=%d reduced to the %d interior dofs", eig_cfg["K"], K)
    logger.info("eigensolve: field=%s K=%d mesh=%s", name, K, mesh.signature)
    sd = eigensolve(
        op,
        K,
        eig_cfg["tol"],
        eig_cfg["maxiter"],
        keep_eigvecs=eig_cfg["keep_eigvecs"],
        verbose=verbose,
    )
    return mesh, op, sd


def cmd_eigs(config, out, threads=1, verbose=False):
    """Spectral record of ``spectral.field``: JSON header plus BSDM dumps."""
    from pandas import DataFrame

    from .load.records import save_spectral
    from .spectral import validate_estimates

    _, op, sd = _solve(config, config["spectral"]["field"], verbose)
    for path in save_spectral(sd, out, "spectral"):
        logger.info("wrote %s", path)
    frame = DataFrame(
        dict(k=np.arange(1, sd.K + 1), lam=sd.lambdas, psi_norm=sd.psi_norms)
    )
    _write_csv(out, "spectral.csv", frame)
    report = validate_estimates(sd, op=op)
    _write_json(out, "spectral_estimates.json", report.to_dict())

    print(
        "eigs K={} lambda_1={:.10g} theta={:.6g} trace_constant={:.6g}".format(
            sd.K, sd.lambdas[0], sd.theta, sd.trace_constant
        )
    )
    return 0


def cmd_dtn(config, out, threads=1, verbose=False):
    """
    Direct-route DtN maps on the (lambda, j) grid with their norms, and the
    equivalence of the direct, series and finite-difference routes.
    """
    from pandas import DataFrame

    from .elliptic_dtn import dtn_direct, operator_norm
    from .geometry import boundary_probes
    from .load.binary import write_matrix
    from .verify import check_route_equivalence

    dtn = config["dtn"]
    mesh, op, sd = _solve(config, dtn["field"], verbose)
    rows = []
    for lam in dtn["lambdas"]:
        for j in dtn["orders"]:
            direct = dtn_direct(op, lam, j)
            name = "dtn_lam{:g}_j{}.bsdm".format(lam, j)
            path = write_matrix(os.path.join(out, name), direct.matrix)
            logger.info("wrote %s", path)
            norm = operator_norm(direct, norm=dtn["norm"], mesh=mesh)
            defect = direct.symmetry_defect()
            rows += [dict(lam=lam, j=j, norm=norm, symmetry_defect=defect)]
    _write_csv(out, "dtn.csv", DataFrame(rows))

    report = check_route_equivalence(
        op,
        sd,
        dtn["lambdas"],
        dtn["orders"],
        boundary_probes(mesh, dtn["probe_order"]),
        dtn["reference_shift"],
        dtn["fd_step"],
        dtn["tolerance"],
    )
    tree = dict(norm=dtn["norm"], maps=rows, routes=report.to_dict())
    _write_json(out, "dtn.json", tree)
    print(report.summary_line())
    return 0 if report.passed else 1


def cmd_wave(config, out, threads=1, verbose=False):
    """
    Boundary fluxes of the wave equation by leapfrog stepping and by the
    expansion in elliptic DtN derivatives, per configured time profile.
    """
    from pandas import DataFrame, concat

    from .elliptic_dtn import dtn_direct
    from .geometry import boundary_probes
    from .hyperbolic_dtn import wave_formula, wave_step

    wave = config["wave"]
    mesh, op, sd = _solve(config, wave["field"], verbose)
    probes = boundary_probes(mesh, config["dtn"]["probe_order"])
    ell = mesh.n + 1 if wave["ell"] is None else wave["ell"]
    derivs = [dtn_direct(op, 0.0, j) for j in range(ell + 1)]
    alpha = config["fields"][wave["field"]]["bounds"].get("alpha") or 1.0

    summary = []
    for i, profile in enumerate(config.build_profiles()):
        logger.info("wave profile %s", profile.name)
        stepped = wave_step(
            op,
            probes,
            profile,
            wave["tau"],
            wave["dt"],
            alpha=alpha,
            threads=threads,
            verbose=verbose,
        )
        formula = wave_formula(
            sd, derivs, probes, profile, stepped.times, ell=ell, method=wave["method"]
        )
        discrepancy = formula.relative_difference(stepped)
        frames = []
        for trace in (stepped, formula):
            frame = trace.to_frame()
            frame.insert(0, "route", trace.route)
            frames += [frame]
        table = concat(frames, ignore_index=True)
        _write_csv(out, "wave_profile{}.csv".format(i), table)
        summary += [
            dict(
                profile=profile.name,
                profile_class=formula.extra["profile_class"],
                ell=ell,
                dt=stepped.dt,
                n_steps=stepped.extra["n_steps"],
                tail_bound=formula.extra["tail_bound"],
                relative_difference=list(discrepancy),
                stepping_norms=list(stepped.norms()),
            )
        ]
        print(
            "wave {} max_relative_difference={:.6g}".format(
                profile.name, float(np.max(discrepancy))
            )
        )
    _write_json(out, "wave.json", dict(K=sd.K, profiles=summary))
    return 0


def cmd_delta(config, out, threads=1, verbose=False):
    """Distance functionals between the two records of ``delta.fields``."""
    from .bsd_metrics import delta_report

    delta = config["delta"]
    first, second = delta["fields"]
    _, _, sd1 = _solve(config, first, verbose)
    _, _, sd2 = _solve(config, second, verbose)
    report = delta_report(
        sd1,
        sd2,
        delta["p"],
        delta["q"],
        delta["K"],
        pair=delta["pair"],
        rotate=delta["rotate"],
        verbose=verbose,
    )
    _write_json(out, "delta.json", report.to_dict())
    _write_csv(out, "delta.csv", report.to_frame())
    print(
        "delta K={} delta={:.6g} delta_bar={:.6g} delta_star={:.6g}".format(
            report.K, report.delta, report.delta_bar, report.delta_star
        )
    )
    return 0


def cmd_verify(config, out, threads=1, verbose=False):
    """Runs ``verify.checks``; exits 1 when an asserted check fails."""
    from pandas import DataFrame

    from .verify import run_checks

    reports = run_checks(config["verify"]["checks"], config, verbose=verbose)
    for report in reports:
        _write_json(out, "verify_{}.json".format(report.check_id), report.to_dict())
        if report.details:
            table = DataFrame(report.details)
            _write_csv(out, "verify_{}.csv".format(report.check_id), table)
        print(report.summary_line())
    return 0 if all(report.passed for report in reports) else 1


def cmd_sweep(config, out, threads=1, verbose=False):
    """Stability sweep over a perturbation family; summary CSV per sweep."""
    from .verify import sweep_stability

    sweep = config["sweep"]
    family = dict(n=config["mesh"]["n"])
    family.update(sweep["family"])
    report, frame = sweep_stability(
        family, sweep["which"], sweep["epsilons"], threads=threads, verbose=verbose
    )
    _write_json(out, "sweep_{}.json".format(sweep["which"]), report.to_dict())
    _write_csv(out, "sweep_{}.csv".format(sweep["which"]), frame)
    print(report.summary_line())
    return 0 if report.passed else 1


def _parser():
    from .helpers import package_version

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", type=str, default=None, help="JSON experiment config"
    )
    common.add_argument("--out", type=str, default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None, help="overrides config seed")
    common.add_argument(
        "--threads", type=int, default=None, help="worker cap (0 = all cores)"
    )
    common.add_argument(
        "--dry-run", action="store_true", help="print the resolved plan and exit"
    )
    common.add_argument("--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="bsd2dtn",
        description="Dirichlet-to-Neumann maps from boundary spectral data",
    )
    parser.add_argument("--version", action="version", version=package_version())
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        func = globals()["cmd_" + name]
        summary = func.__doc__.strip().splitlines()[0]
        subparsers.add_parser(name, parents=[common], help=summary)
    return parser


def main(argv=None):
    """
    Entry point of the ``bsd2dtn`` console script.

    Returns
    -------
    int
        exit code
    """
    from threadpoolctl import threadpool_limits

    from .config import ExperimentConfig

    try:
        args = _parser().parse_args(argv)
    except SystemExit as err:
        return err.code if isinstance(err.code, int) else 2

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        config = (
            ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        )
        if args.seed is not None:
            config = config.with_overrides(seed=args.seed)
        out = args.out or config["output"]["directory"]
        threads = thread_count(args.threads)
        os.environ["BSD2DTN_THREADS"] = str(threads)

        plan = dict(
            command=args.command, output=out, threads=threads, config=config.to_dict()
        )
        logger.info("plan: %s", json.dumps(plan, sort_keys=True))
        if args.dry_run:
            sys.stdout.write(_dumps(plan))
            return 0

        func = globals()["cmd_" + args.command]
        with threadpool_limits(limits=threads):
            return func(config, out, threads=threads, verbose=args.verbose)
    except Bsd2DtnError as err:
        logger.error("%s: %s", type(err).__name__, err)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
