# per-vertex coefficient fields from CSV tables

import numpy as np

from ..helpers import ConfigError


def read_field_csv(path, kind, bounds, mesh, reference=None):
    """
    Builds a coefficient field from a CSV of per-vertex values.

    Scalar kinds (conformal, conductivity, potential) read the columns
    ``vertex,value``; metrics read ``vertex,g11,g12,...`` with all n^2
    entries in row-major order. Every mesh vertex must appear once.

    Parameters
    ----------
    path : str
    kind : str
    bounds : dict
        class bounds, see ``geometry.make_field``
    mesh : Mesh
    reference : tensor expression, optional
        reference tensor of conformal fields or background metric of potentials

    Returns
    -------
    CoefficientField

    Raises
    ------
    ConfigError
        for missing columns or vertices
    FieldClassError
        if the values leave the class
    """
    import pandas as pd

    from ..geometry import make_field

    df = pd.read_csv(path)
    if "vertex" not in df:
        raise ConfigError("{} has no 'vertex' column".format(path))
    df = df.set_index("vertex").sort_index()
    if df.index.has_duplicates:
        raise ConfigError("{} lists vertices more than once".format(path))
    if not np.array_equal(df.index.values, np.arange(mesh.n_vertices)):
        raise ConfigError(
            "{} has {} vertices, the mesh has {}".format(path, len(df), mesh.n_vertices)
        )

    n = mesh.n
    if kind == "metric":
        columns = ["g{}{}".format(k + 1, l + 1) for k in range(n) for l in range(n)]
        missing = [c for c in columns if c not in df]
        if missing:
            raise ConfigError("{} misses the metric columns {}".format(path, missing))
        values = df[columns].values.reshape(-1, n, n)
    else:
        if "value" not in df:
            raise ConfigError("{} has no 'value' column".format(path))
        values = df["value"].values
    return make_field(kind, values, bounds, mesh, reference=reference)
