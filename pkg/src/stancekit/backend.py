"""Selection of the hot-loop backend (numba JIT vs pure numpy).

The numeric inner loops (pairwise sparse Gram assembly and the per-site
EP sweep) have two interchangeable implementations.  The active one is
chosen by the ``STANCEKIT_BACKEND`` environment variable ("numba" or
"numpy"); the default is numba when importable, numpy otherwise.  Both
lanes are deterministic run-to-run, but results may differ between lanes
in the last floating-point bits.
"""

from __future__ import annotations

import os

ENV_FLAG = "STANCEKIT_BACKEND"

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

_active_name = None
_active_module = None


def _load(name: str):
    if name == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("STANCEKIT_BACKEND=numba but numba is not installed")
        from stancekit import _hot_numba as mod
    elif name == "numpy":
        from stancekit import _hot_numpy as mod
    else:
        raise ValueError(f"unknown backend {name!r}; expected 'numba' or 'numpy'")
    return mod


def default_backend_name() -> str:
    choice = os.environ.get(ENV_FLAG, "").strip().lower()
    if choice:
        return choice
    return "numba" if HAS_NUMBA else "numpy"


def set_backend(name: str) -> None:
    """Swap the active backend in-process (benchmarks and tests)."""
    global _active_name, _active_module
    _active_module = _load(name)
    _active_name = name


def active_backend() -> str:
    if _active_name is None:
        set_backend(default_backend_name())
    return _active_name


def hot():
    """Module providing pairwise_gram / cross_gram / ep_sweep."""
    if _active_module is None:
        set_backend(default_backend_name())
    return _active_module
