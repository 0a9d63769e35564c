"""Kernel backend selection.

The jitted kernels are the default; set ``NOZZLEFLOW_DISABLE_NUMBA=1`` to
force the pure-numpy reference path (the same switch the benchmark uses).
When numba is missing or fails to import, the reference path is selected
silently.  Resolution is lazy so importing the package never pays the numba
import cost unless a kernel is actually needed.
"""

from __future__ import annotations

import os

from . import _kernels_numpy

ENV_FLAG = "NOZZLEFLOW_DISABLE_NUMBA"

_active = None


def _env_disabled() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


def _load(name: str):
    if name == "numpy":
        return _kernels_numpy
    if name == "numba":
        from . import _kernels_numba

        return _kernels_numba
    raise ValueError(f"unknown backend {name!r} (expected 'numba' or 'numpy')")


def kernels():
    """The active kernel module (resolved once, on first use)."""
    global _active
    if _active is None:
        if _env_disabled():
            _active = _kernels_numpy
        else:
            try:
                _active = _load("numba")
            except ImportError:
                _active = _kernels_numpy
    return _active


def select(name: str):
    """Force a backend ('numba' or 'numpy'); used by tests and benchmarks."""
    global _active
    _active = _load(name)
    return _active


def backend_name() -> str:
    return kernels().NAME
