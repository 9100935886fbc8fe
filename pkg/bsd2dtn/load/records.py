# spectral records on disk: a JSON header next to BSDM matrix dumps

import json
import os

import numpy as np

from ..helpers import ConfigError, atomic_write
from .binary import read_matrix, write_matrix


def _plain(values):
    return [float(v) for v in np.asarray(values, dtype=float)]


def save_spectral(sd, directory, prefix="spectral"):
    """
    Writes a SpectralData record to ``directory``.

    The header ``<prefix>.json`` holds K, n, the mesh signature, the field
    kind, the empirical Weyl and trace constants, the eigenvalues and the
    names of the matrix files. Fluxes, eigenvectors, the boundary mass and
    the lumped interior mass are written as BSDM files.

    Returns
    -------
    list of str
        the paths written, header first
    """
    os.makedirs(directory, exist_ok=True)
    files = dict(
        psis="{}_psis.bsdm".format(prefix),
        boundary_weight="{}_boundary_weight.bsdm".format(prefix),
        mass_weight="{}_mass_weight.bsdm".format(prefix),
    )
    if sd.eigvecs is not None:
        files["eigvecs"] = "{}_eigvecs.bsdm".format(prefix)

    header = dict(
        K=sd.K,
        n=sd.n,
        kind=sd.kind,
        mesh=list(sd.mesh_signature),
        n_dofs=sd.n_dofs,
        theta=float(sd.theta),
        trace_constant=float(sd.trace_constant),
        lambdas=_plain(sd.lambdas),
        files=files,
    )

    written = [
        atomic_write(
            os.path.join(directory, prefix + ".json"),
            json.dumps(header, sort_keys=True, indent=2) + "\n",
        )
    ]
    matrices = dict(
        psis=sd.psis,
        boundary_weight=sd.boundary_weight,
        mass_weight=sd.mass_weight,
        eigvecs=sd.eigvecs,
    )
    for key, name in sorted(files.items()):
        written += [write_matrix(os.path.join(directory, name), matrices[key])]
    return written


def load_spectral(directory, prefix="spectral"):
    """
    Reads a record written by ``save_spectral``.

    Returns
    -------
    SpectralData

    Raises
    ------
    ConfigError
        if the header is missing or the dumps disagree with it
    """
    from scipy import sparse

    from ..spectral import SpectralData

    path = os.path.join(directory, prefix + ".json")
    if not os.path.exists(path):
        raise ConfigError("no spectral record at {}".format(path))
    with open(path) as f:
        header = json.load(f)

    def matrix(key):
        name = header["files"].get(key, None)
        if name is None:
            return None
        return read_matrix(os.path.join(directory, name))

    psis = matrix("psis")
    if psis.shape[0] != header["K"]:
        raise ConfigError(
            "{} holds {} fluxes for K={}".format(path, psis.shape[0], header["K"])
        )
    eigvecs = matrix("eigvecs")
    return SpectralData(
        header["lambdas"],
        psis,
        matrix("mass_weight").ravel(),
        sparse.csr_matrix(matrix("boundary_weight")),
        header["n"],
        header["mesh"],
        eigvecs=eigvecs,
        kind=header["kind"],
        n_dofs=header["n_dofs"],
    )
