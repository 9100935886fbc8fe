#!/usr/bin/env python
"""
Experiment configuration: a JSON tree merged over the defaults below and
validated at parse time.
"""

import copy
import json

import numpy as np

from .helpers import ConfigError


FIELD_DEFAULTS = dict(
    kind="metric",
    expression="identity",
    path=None,
    bounds=dict(alpha=2.0),
    reference=None,
)

PROFILE_DEFAULTS = dict(kind="monomial", m=None, order=2)

DEFAULTS = dict(
    mesh=dict(n=2, resolution=16),
    fields=dict(base=FIELD_DEFAULTS),
    spectral=dict(field="base", K=20, tol=1e-12, maxiter=None, keep_eigvecs=True),
    delta=dict(fields=["base", "base"], p=1.0, q=1.0, K=None, pair=True, rotate=True),
    dtn=dict(
        field="base",
        lambdas=[0.0, 1.0, 10.0],
        orders=[0, 1, 2],
        probe_order=2,
        reference_shift=None,
        fd_step=1e-3,
        tolerance=1e-3,
        norm="l2",
    ),
    wave=dict(
        field="base",
        tau=1.0,
        dt=None,
        ell=None,
        profiles=[PROFILE_DEFAULTS],
        n_times=65,
        method="closed",
    ),
    sweep=dict(which="elliptic", epsilons=None, family=dict()),
    verify=dict(
        checks=["lemte", "ui0"], samples=1000, lam=1.0, j=2, potential_field=None
    ),
    output=dict(directory="bsd2dtn_out"),
    seed=0,
)

BOUND_KEYS = ("alpha", "beta", "ceiling")
FAMILY_KEYS = (
    "kind",
    "n",
    "resolution",
    "K",
    "j",
    "bump",
    "base",
    "alpha",
    "ceiling",
    "probe_order",
    "tau",
    "n_times",
    "profile_power",
    "lam",
)


def _merge(defaults, overrides, where):
    unknown = sorted(set(overrides) - set(defaults))
    if unknown:
        raise ConfigError("unknown keys {} in {}".format(unknown, where))
    out = copy.deepcopy(defaults)
    for key, value in overrides.items():
        nested = key not in ("family", "fields", "bounds")
        if isinstance(defaults[key], dict) and nested:
            if not isinstance(value, dict):
                raise ConfigError("{}.{} must be an object".format(where, key))
            out[key] = _merge(defaults[key], value, "{}.{}".format(where, key))
        else:
            out[key] = copy.deepcopy(value)
    return out


def _integer(value, name, low=None, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ConfigError("{} must be an integer, got {!r}".format(name, value))
    if low is not None and value < low:
        raise ConfigError("{} must be >= {}, got {}".format(name, low, value))
    return int(value)


def _number(value, name, low=None, high=None, strict=True, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float, np.number)):
        raise ConfigError("{} must be a number, got {!r}".format(name, value))
    value = float(value)
    if not np.isfinite(value):
        raise ConfigError("{} must be finite".format(name))
    if low is not None and (value <= low if strict else value < low):
        relation = ">" if strict else ">="
        raise ConfigError("{} must be {} {}, got {}".format(name, relation, low, value))
    if high is not None and value > high:
        raise ConfigError("{} must be <= {}, got {}".format(name, high, value))
    return value


def _choice(value, name, options):
    if value not in options:
        raise ConfigError("{} must be one of {}, got {!r}".format(name, options, value))
    return value


class ExperimentConfig(object):
    """
    Resolved experiment configuration.

    Sections are read with ``config["section"]``; the resolved tree is
    returned by ``to_dict`` and ``from_dict(cfg.to_dict()) == cfg`` holds.

    Parameters
    ----------
    tree : dict, optional
        overrides of ``DEFAULTS``; unknown sections or keys are rejected

    Raises
    ------
    ConfigError
        for schema violations, undefined field references, bad ranges and
        exponents p, q outside their admissible intervals
    """

    def __init__(self, tree=None):
        tree = dict(tree or {})
        fields = tree.pop("fields", {})
        if not isinstance(fields, dict):
            raise ConfigError("fields must be an object of named field specs")
        resolved = _merge(DEFAULTS, tree, "config")

        merged = copy.deepcopy(DEFAULTS["fields"])
        for name, entry in fields.items():
            if not isinstance(entry, dict):
                raise ConfigError("field '{}' must be an object".format(name))
            base = merged.get(name, FIELD_DEFAULTS)
            entry = dict(entry)
            bounds = entry.pop("bounds", None)
            if entry.get("path") is not None and "expression" not in entry:
                entry["expression"] = None
            merged[name] = _merge(base, entry, "fields.{}".format(name))
            if bounds is not None:
                if not isinstance(bounds, dict):
                    raise ConfigError("fields.{}.bounds must be an object".format(name))
                merged[name]["bounds"] = dict(bounds)
        resolved["fields"] = merged

        profiles = []
        for i, profile in enumerate(resolved["wave"]["profiles"]):
            if not isinstance(profile, dict):
                raise ConfigError("wave.profiles[{}] must be an object".format(i))
            where = "wave.profiles[{}]".format(i)
            profiles += [_merge(PROFILE_DEFAULTS, profile, where)]
        resolved["wave"]["profiles"] = profiles

        self._tree = resolved
        self._validate()

    def _validate(self):
        from .bsd_metrics import check_exponents
        from .geometry import FIELD_KINDS
        from .verify import CHECK_NAMES, SWEEP_KINDS

        tree = self._tree
        mesh = tree["mesh"]
        n = _choice(mesh["n"], "mesh.n", (2, 3))
        resolution = _integer(mesh["resolution"], "mesh.resolution", low=2)

        for name, entry in tree["fields"].items():
            where = "fields.{}".format(name)
            _choice(entry["kind"], where + ".kind", FIELD_KINDS)
            unknown = sorted(set(entry["bounds"]) - set(BOUND_KEYS))
            if unknown:
                raise ConfigError("unknown bounds {} in {}".format(unknown, where))
            alpha = entry["bounds"].get("alpha", None)
            _number(alpha, where + ".bounds.alpha", low=1.0, allow_none=True)
            if alpha is None and entry["kind"] != "potential":
                raise ConfigError("{} needs bounds.alpha > 1".format(where))
            beta = entry["bounds"].get("beta")
            _number(beta, where + ".bounds.beta", low=0.0, allow_none=True)
            if entry["kind"] == "potential":
                if "ceiling" not in entry["bounds"]:
                    raise ConfigError("{} needs bounds.ceiling".format(where))
                ceiling = entry["bounds"]["ceiling"]
                _number(ceiling, where + ".bounds.ceiling", low=0.0, strict=False)
            if (entry["path"] is None) == (entry["expression"] is None):
                raise ConfigError("{} needs one of expression and path".format(where))

        def defined(name, where):
            if name not in tree["fields"]:
                raise ConfigError(
                    "{} refers to the undefined field '{}'".format(where, name)
                )
            return name

        spectral = tree["spectral"]
        defined(spectral["field"], "spectral.field")
        _integer(spectral["K"], "spectral.K", low=1)
        _number(spectral["tol"], "spectral.tol", low=0.0)
        _integer(spectral["maxiter"], "spectral.maxiter", low=1, allow_none=True)

        delta = tree["delta"]
        if not isinstance(delta["fields"], list) or len(delta["fields"]) != 2:
            raise ConfigError("delta.fields must name two fields")
        for name in delta["fields"]:
            defined(name, "delta.fields")
        check_exponents(
            _number(delta["p"], "delta.p"), _number(delta["q"], "delta.q"), n
        )
        _integer(delta["K"], "delta.K", low=1, allow_none=True)

        dtn = tree["dtn"]
        defined(dtn["field"], "dtn.field")
        if not dtn["lambdas"]:
            raise ConfigError("dtn.lambdas is empty")
        for lam in dtn["lambdas"]:
            _number(lam, "dtn.lambdas", low=0.0, strict=False)
        for j in dtn["orders"]:
            _integer(j, "dtn.orders", low=0)
        _integer(dtn["probe_order"], "dtn.probe_order", low=1)
        _number(dtn["reference_shift"], "dtn.reference_shift", low=0.0, allow_none=True)
        _number(dtn["fd_step"], "dtn.fd_step", low=0.0)
        _number(dtn["tolerance"], "dtn.tolerance", low=0.0)
        _choice(dtn["norm"], "dtn.norm", ("l2", "h12"))

        wave = tree["wave"]
        defined(wave["field"], "wave.field")
        _number(wave["tau"], "wave.tau", low=0.0)
        if wave["dt"] is None:
            wave["dt"] = 1.0 / (4 * resolution)
        _number(wave["dt"], "wave.dt", low=0.0, high=wave["tau"])
        _integer(wave["ell"], "wave.ell", low=0, allow_none=True)
        _integer(wave["n_times"], "wave.n_times", low=2)
        _choice(wave["method"], "wave.method", ("closed", "trapezoid"))
        if not wave["profiles"]:
            raise ConfigError("wave.profiles is empty")
        for i, profile in enumerate(wave["profiles"]):
            where = "wave.profiles[{}]".format(i)
            _choice(profile["kind"], where + ".kind", ("monomial", "windowed_ramp"))
            if profile["m"] is None:
                profile["m"] = 2 * n + 4
            _integer(profile["m"], where + ".m", low=0)
            _integer(profile["order"], where + ".order", low=0)

        sweep = tree["sweep"]
        _choice(sweep["which"], "sweep.which", SWEEP_KINDS)
        if sweep["epsilons"] is not None:
            if not sweep["epsilons"]:
                raise ConfigError("sweep.epsilons is empty")
            for eps in sweep["epsilons"]:
                _number(eps, "sweep.epsilons", low=0.0, strict=False)
        unknown = sorted(set(sweep["family"]) - set(FAMILY_KEYS))
        if unknown:
            raise ConfigError("unknown keys {} in sweep.family".format(unknown))

        verify = tree["verify"]
        for name in verify["checks"]:
            _choice(name, "verify.checks", CHECK_NAMES)
        _integer(verify["samples"], "verify.samples", low=1)
        _number(verify["lam"], "verify.lam", low=0.0)
        _integer(verify["j"], "verify.j", low=0)
        potential = verify["potential_field"]
        if potential is not None:
            defined(potential, "verify.potential_field")
            if tree["fields"][potential]["kind"] != "potential":
                raise ConfigError("verify.potential_field must name a potential field")
        elif "weyl_potential" in verify["checks"]:
            raise ConfigError("the weyl_potential check needs verify.potential_field")

        if not isinstance(tree["output"]["directory"], str):
            raise ConfigError("output.directory must be a path")
        tree["seed"] = _integer(tree["seed"], "seed", low=0)

    def __getitem__(self, section):
        return self._tree[section]

    def to_dict(self):
        return copy.deepcopy(self._tree)

    def to_json(self):
        return json.dumps(self._tree, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, tree):
        return cls(copy.deepcopy(tree))

    @classmethod
    def load(cls, path):
        """Reads a JSON config file."""
        try:
            with open(path) as f:
                tree = json.load(f)
        except OSError as err:
            raise ConfigError("cannot read config {}: {}".format(path, err))
        except ValueError as err:
            raise ConfigError("config {} is not valid JSON: {}".format(path, err))
        if not isinstance(tree, dict):
            raise ConfigError("config {} must hold a JSON object".format(path))
        return cls(tree)

    def with_overrides(self, **sections):
        """Copy with whole sections replaced, e.g. ``seed=3``."""
        tree = self.to_dict()
        for key, value in sections.items():
            if isinstance(tree.get(key), dict) and isinstance(value, dict):
                tree[key].update(value)
            else:
                tree[key] = value
        return ExperimentConfig(tree)

    def __eq__(self, other):
        if not isinstance(other, ExperimentConfig):
            return NotImplemented
        return self.to_json() == other.to_json()

    def __repr__(self):
        return "<ExperimentConfig n={} resolution={} fields={}>".format(
            self["mesh"]["n"], self["mesh"]["resolution"], sorted(self["fields"])
        )

    def build_mesh(self):
        from .geometry import Mesh

        return Mesh(self["mesh"]["n"], self["mesh"]["resolution"])

    def build_field(self, name, mesh, background=False):
        """
        Samples a named field on a mesh.

        ``background=True`` returns the zero potential on the background
        metric of a potential field, i.e. the unperturbed operator.
        """
        from .geometry import make_field
        from .load.fields import read_field_csv

        entry = self["fields"][name]
        bounds = dict(entry["bounds"])
        if background:
            if entry["kind"] != "potential":
                raise ConfigError("field '{}' is not a potential".format(name))
            reference = entry["reference"]
            return make_field("potential", "0", bounds, mesh, reference=reference)
        if entry["path"] is not None:
            return read_field_csv(
                entry["path"], entry["kind"], bounds, mesh, reference=entry["reference"]
            )
        return make_field(
            entry["kind"],
            entry["expression"],
            bounds,
            mesh,
            reference=entry["reference"],
        )

    def build_profiles(self):
        """TimeProfile objects of the wave section."""
        from .hyperbolic_dtn import TimeProfile

        out = []
        for profile in self["wave"]["profiles"]:
            if profile["kind"] == "monomial":
                out += [TimeProfile.monomial(profile["m"])]
            else:
                out += [
                    TimeProfile.windowed_ramp(
                        profile["m"], self["wave"]["tau"], profile["order"]
                    )
                ]
        return out
