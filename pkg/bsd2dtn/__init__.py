#!/usr/bin/env python

import warnings as _warnings

from . import (  # NOQA
    assembly,
    bsd_metrics,
    elliptic_dtn,
    geometry,
    hyperbolic_dtn,
    load,
    spectral,
    utils,
    verify,
)
from .assembly import assemble, solve_dirichlet
from .bsd_metrics import delta_report, pair_modes
from .config import ExperimentConfig
from .elliptic_dtn import dtn_direct, dtn_series, operator_norm
from .geometry import Mesh, boundary_probes, make_field
from .helpers import (  # NOQA
    Bsd2DtnError,
    Bsd2DtnWarning,
    ConfigError,
    NumericalError,
    package_version,
)
from .hyperbolic_dtn import TimeProfile, wave_formula, wave_step
from .spectral import SpectralData, eigensolve
from .verify import fit_modulus, run_checks, sweep_stability


__version__ = package_version()
_warnings.filterwarnings("ignore", category=RuntimeWarning)
