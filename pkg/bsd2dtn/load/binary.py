# BSDM binary matrix dumps

import numpy as np

from ..helpers import ConfigError, atomic_write


MAGIC = b"BSDM"
HEADER = np.dtype(
    [("magic", "S4"), ("rows", "<u4"), ("cols", "<u4"), ("flags", "<u4")]
)
SYMMETRIC = 1


def write_matrix(path, matrix, symmetric=None):
    """
    Writes a matrix as a 16 byte header (magic "BSDM", u32 rows, u32 cols,
    u32 flags) followed by little-endian float64 values in row-major order.

    Parameters
    ----------
    path : str
    matrix : np.array or scipy.sparse matrix
        vectors are written as a single row
    symmetric : bool, optional
        sets flag bit 0; detected exactly when None

    Returns
    -------
    str
        the path written
    """
    if hasattr(matrix, "toarray"):
        matrix = matrix.toarray()
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    if A.ndim != 2:
        raise ConfigError("only 2D arrays can be written, got shape {}".format(A.shape))
    rows, cols = A.shape
    if symmetric is None:
        symmetric = rows == cols and bool((A == A.T).all())
    flags = SYMMETRIC if symmetric else 0
    header = np.array([(MAGIC, rows, cols, flags)], dtype=HEADER)
    data = header.tobytes() + np.ascontiguousarray(A, dtype="<f8").tobytes()
    return atomic_write(path, data, mode="wb")


def read_header(raw, path=""):
    if len(raw) < HEADER.itemsize:
        raise ConfigError("{} is too short for a BSDM header".format(path))
    header = np.frombuffer(raw[: HEADER.itemsize], dtype=HEADER)[0]
    if header["magic"] != MAGIC:
        magic = header["magic"]
        raise ConfigError("{} is not a BSDM file (magic {!r})".format(path, magic))
    return int(header["rows"]), int(header["cols"]), int(header["flags"])


def read_matrix(path, return_flags=False):
    """
    Reads a BSDM dump.

    Returns
    -------
    np.array, shape=[rows, cols]
        and the header flags when ``return_flags``

    Raises
    ------
    ConfigError
        for a wrong magic or a payload that does not match the header
    """
    with open(path, "rb") as f:
        raw = f.read()
    rows, cols, flags = read_header(raw, path)
    payload = raw[HEADER.itemsize :]
    if len(payload) != 8 * rows * cols:
        raise ConfigError(
            "{} holds {} bytes of data for a {}x{} matrix".format(
                path, len(payload), rows, cols
            )
        )
    A = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(float)
    if return_flags:
        return A, flags
    return A
