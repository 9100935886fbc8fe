import inspect
import os

import numpy as np
import pytest
from scipy import sparse

from bsd2dtn.helpers import (
    ConfigError,
    ConvergenceError,
    atomic_write,
    printv,
    rebuild_func_call,
    thread_count,
)
from bsd2dtn.utils import (
    adaptive_quad,
    compensated_sum,
    loglog_fit,
    space_time_norm,
    stable_sum,
    weighted_norm,
    weighted_operator_norm,
)


def test_loglog_fit_of_power_law():
    x = np.logspace(-3, -1, 6)
    fit = loglog_fit(x, 3 * x**1.5)
    assert fit["slope"] == pytest.approx(1.5)
    assert fit["intercept"] == pytest.approx(np.log(3))
    assert fit["r2"] == pytest.approx(1.0)


def test_loglog_fit_skips_non_positive():
    fit = loglog_fit([0.0, 1.0, 2.0, 4.0], [1.0, 1.0, 2.0, 4.0])
    assert fit["n_points"] == 3
    assert fit["slope"] == pytest.approx(1.0)
    assert np.isnan(loglog_fit([1.0], [1.0])["slope"])


def test_robust_fit_ignores_outlier():
    x = np.logspace(-3, -1, 12)
    y = x**2
    y[5] *= 50
    assert loglog_fit(x, y, robust=True)["slope"] == pytest.approx(2.0, abs=0.1)


def test_weighted_norms():
    W = sparse.diags([1.0, 4.0])
    assert weighted_norm(np.array([1.0, 1.0]), W) == pytest.approx(np.sqrt(5))
    np.testing.assert_allclose(weighted_norm(np.eye(2), W), [1.0, 2.0])
    # the identity is an isometry in any weight
    assert weighted_operator_norm(np.eye(2), W) == pytest.approx(1.0)


def test_space_time_norm():
    times = np.linspace(0.0, 1.0, 101)
    traces = np.ones((times.size, 2))
    assert space_time_norm(traces, sparse.eye(2), times) == pytest.approx(np.sqrt(2))
    out = space_time_norm(np.stack([traces, 2 * traces]), sparse.eye(2), times)
    np.testing.assert_allclose(out, [np.sqrt(2), 2 * np.sqrt(2)])


def test_adaptive_quad():
    value, _ = adaptive_quad(lambda s: np.exp(-s), 0.0, np.inf)
    assert value == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ConvergenceError):
        adaptive_quad(lambda s: 1.0 / s, 0.0, 1.0, limit=5)


def test_stable_sum():
    assert stable_sum([1e16, 1.0, -1e16]) == 1.0


def test_stable_sum_along_axis():
    values = np.array([[1e16, 2.0], [1.0, 3.0], [-1e16, 4.0]])
    np.testing.assert_array_equal(stable_sum(values, axis=0), [1.0, 9.0])
    np.testing.assert_array_equal(stable_sum(values.T, axis=1), [1.0, 9.0])


def test_compensated_sum_of_arrays():
    terms = (np.full((2, 2), value) for value in (1e16, 1.0, 1.0, -1e16))
    np.testing.assert_array_equal(compensated_sum(terms), np.full((2, 2), 2.0))
    assert compensated_sum([]) == 0.0


def test_thread_count(monkeypatch):
    monkeypatch.setenv("BSD2DTN_THREADS", "3")
    assert thread_count() == 3
    assert thread_count(2) == 2
    assert thread_count(0) >= 1
    with pytest.raises(ConfigError):
        thread_count(-1)


def test_atomic_write(tmp_path):
    path = atomic_write(str(tmp_path / "sub" / "a.txt"), "hello\n")
    with open(path) as f:
        assert f.read() == "hello\n"
    assert os.listdir(tmp_path / "sub") == ["a.txt"]


def test_printv(capsys):
    printv(False, "quiet")
    printv(True, "loud")
    assert capsys.readouterr().out == "loud\n"


def test_rebuild_func_call():
    def demo(a, b, c, d):
        return rebuild_func_call(inspect.currentframe())

    call = demo(1.5, "x", True, list(range(20)))
    assert call.endswith("demo(a=1.5, b='x', c=True, d=<d>)")
