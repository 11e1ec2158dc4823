"""Dispatch for the hot kernels.

The compiled extension ``momfit._kernels`` is used when it imports; otherwise
(or when ``MOMFIT_PURE_PYTHON`` is set) the numpy fallback runs.  Both expose
the same three functions.  ``MOMFIT_THREADS`` caps the thread count of the
compiled loops.
"""

import os

from . import _kernels_py

try:
    if os.environ.get("MOMFIT_PURE_PYTHON"):
        raise ImportError("pure-python backend requested")
    from . import _kernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"


def available_backends():
    """Names of the importable backends, compiled first."""
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401

        names.insert(0, "cython")
    except ImportError:
        pass
    return names


def backend_module(name):
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def num_threads():
    raw = os.environ.get("MOMFIT_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"MOMFIT_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def monomial_matrix(pts, parent, var):
    return _impl.monomial_matrix(pts, parent, var, num_threads())


def weighted_moments(pts, weights, parent, var):
    return _impl.weighted_moments(pts, weights, parent, var, num_threads())


def poly_eval(pts, parent, var, coeffs):
    return _impl.poly_eval(pts, parent, var, coeffs, num_threads())


pairwise_rows = _kernels_py.pairwise_rows
