"""Hot loops of the gradient-field flow, in two interchangeable backends.

``flow_numba`` holds ``@njit`` loops, ``flow_numpy`` vectorised equivalents
(pointer doubling instead of memoised walks).  Both produce identical integer
outputs; accumulated heights agree to rounding.

Set ``SOMOGSA_DISABLE_NUMBA=1`` to force the numpy path.
"""

from __future__ import annotations

import os
from types import ModuleType
from typing import Optional

ENV_FLAG = "SOMOGSA_DISABLE_NUMBA"


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def numba_enabled() -> bool:
    if os.environ.get(ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on"):
        return False
    return numba_available()


def get_backend(name: Optional[str] = None) -> ModuleType:
    """Return the kernel module for ``name`` (``"numba"``, ``"numpy"`` or ``None`` for the default)."""
    if name is None:
        name = "numba" if numba_enabled() else "numpy"
    if name == "numba":
        if not numba_available():
            raise RuntimeError("numba backend requested but numba is not installed")
        from . import flow_numba

        return flow_numba
    if name == "numpy":
        from . import flow_numpy

        return flow_numpy
    raise ValueError(f"unknown backend {name!r}")
