import inspect


def package_version():
    # only installed packages know their version
    from importlib.metadata import PackageNotFoundError, version

    try:
        version = version("bsd2dtn")
    except PackageNotFoundError:
        version = "version_undefined"
    return version


class Bsd2DtnWarning(UserWarning):
    pass


class Bsd2DtnError(Exception):
    exit_code = 2


class ConfigError(Bsd2DtnError):
    pass


class FieldClassError(Bsd2DtnError):
    pass


class MeshMismatchError(Bsd2DtnError):
    pass


class DivergentSeriesError(Bsd2DtnError):
    pass


class NumericalError(Bsd2DtnError):
    exit_code = 3


class NearSingularShiftError(NumericalError):
    def __init__(self, shift, nearest):
        self.shift = shift
        self.nearest = nearest
        msg = (
            "shift lambda={:.6g} lies inside the guard band of the discrete "
            "eigenvalue lambda_k={:.6g}".format(shift, nearest)
        )
        super().__init__(msg)


class ConvergenceError(NumericalError):
    pass


class CFLError(NumericalError):
    pass


class EnergyBlowupError(NumericalError):
    pass


def time_now():
    from pandas import Timestamp

    return str(Timestamp("today"))[:19]


def _is_literal(text):
    if text in ("True", "False", "None"):
        return True
    try:
        float(text)
    except ValueError:
        return False
    return True


def rebuild_func_call(frame):
    """
    ``module.function(arg=value, ...)`` of the call running in ``frame``.
    Values of 25 characters or more are shown as ``<arg>``.
    """
    info = inspect.getargvalues(frame)
    module = inspect.getmodule(frame).__name__
    parts = []
    for arg in info.args:
        text = str(info.locals[arg])
        if len(text) >= 25:
            text = "<{}>".format(arg)
        elif not _is_literal(text):
            text = "'{}'".format(text)
        parts += ["{}={}".format(arg, text)]
    return "{}.{}({})".format(module, frame.f_code.co_name, ", ".join(parts))


def attach_history(frame, xobj, history="", **attrs):
    """
    Appends the function call that produced an xarray object to its
    ``history`` attribute and sets any additional attributes.

    Parameters
    ----------
    frame : frame
        the frame of the producing function, i.e. ``inspect.currentframe()``
    xobj : xr.DataArray | xr.Dataset
        the output object; modified in place and returned
    history : str
        history inherited from the inputs, if any
    **attrs : keyword=value pairs
        attributes attached to the output; empty strings are dropped

    Returns
    -------
    xr.DataArray | xr.Dataset
    """
    history += "[{}] (v{}) {};\n".format(
        time_now(), package_version(), rebuild_func_call(frame)
    )
    attributes = dict(xobj.attrs)
    attributes.update(attrs)
    attributes["history"] = history

    for key in list(attributes):
        if str(attributes[key]) == "":
            attributes.pop(key)

    xobj.attrs = attributes
    return xobj


def printv(verbose, message):
    """Prints ``message`` to stdout when ``verbose``."""
    if verbose:
        print(message)


def thread_count(threads=None):
    """
    Number of workers allowed for parallel sections.

    An explicit ``threads`` wins over the ``BSD2DTN_THREADS`` environment
    variable, which wins over the number of available cores.
    """
    import os

    if threads is None:
        threads = os.environ.get("BSD2DTN_THREADS", "")
        threads = int(threads) if threads.strip() else 0
    threads = int(threads)
    if threads < 0:
        raise ConfigError("thread count must be >= 0, got {}".format(threads))
    if threads == 0:
        threads = os.cpu_count() or 1
    return threads


def atomic_write(path, data, mode="w"):
    """
    Writes ``data`` to ``path`` through a temporary file in the same
    directory followed by a rename, so readers never see partial files.
    """
    import os
    import tempfile

    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    suffix = os.path.basename(path)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp_", suffix=suffix)
    try:
        with os.fdopen(fd, mode) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path
