"""Kernel backend selection.

The compiled ``_core`` extension is used when importable; otherwise the
pure-Python ``_pycore`` is. Setting ``SYNCGAME_PURE_PYTHON=1`` forces the
fallback.
"""

import importlib
import os

BACKENDS = ("cython", "python")
_MODULES = {"cython": "syncgame._core", "python": "syncgame._pycore"}


def load(name):
    """Import a backend by name; raises ImportError if it is unavailable."""
    return importlib.import_module(_MODULES[name])


def available():
    names = []
    for name in BACKENDS:
        try:
            load(name)
        except ImportError:
            continue
        names.append(name)
    return names


def _select():
    if os.environ.get("SYNCGAME_PURE_PYTHON"):
        return load("python")
    try:
        return load("cython")
    except ImportError:
        return load("python")


core = _select()
