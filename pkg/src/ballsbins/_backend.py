"""Kernel backend selection.

``BALLSBINS_BACKEND=numpy`` forces the vectorised numpy kernels; the default
is numba when it imports, numpy otherwise.
"""

import importlib
import logging
import os

log = logging.getLogger(__name__)

_MODULES = {"numba": "ballsbins._kernels_numba", "numpy": "ballsbins._kernels_numpy"}


def load(name):
    if name not in _MODULES:
        raise ValueError(f"unknown backend {name!r}; expected one of {sorted(_MODULES)}")
    return importlib.import_module(_MODULES[name])


def _initial():
    want = os.environ.get("BALLSBINS_BACKEND", "numba").strip().lower() or "numba"
    try:
        return want, load(want)
    except ImportError:
        if want != "numba":
            raise
        log.warning("numba unavailable, falling back to numpy kernels")
        return "numpy", load("numpy")


NAME, kernels = _initial()


def set_backend(name):
    """Switch kernels for the whole process; returns the previous name."""
    global NAME, kernels
    prev = NAME
    kernels = load(name)
    NAME = name
    return prev


def current():
    return kernels
