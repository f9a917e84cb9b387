"""Select the time-domain kernel at import.

The compiled extension is used when it was built; setting
``JJRES_PURE_PYTHON=1`` forces the numpy implementation.
"""
from __future__ import annotations

import os

from . import _lindblad_py

try:
    from . import _lindblad_ext
except ImportError:  # extension not built
    _lindblad_ext = None

_KERNELS = {"python": _lindblad_py.evolve_kerr}
if _lindblad_ext is not None:
    _KERNELS["compiled"] = _lindblad_ext.evolve_kerr

if os.environ.get("JJRES_PURE_PYTHON", "").strip() not in ("", "0") or _lindblad_ext is None:
    BACKEND = "python"
else:
    BACKEND = "compiled"


def available_backends() -> list[str]:
    return sorted(_KERNELS)


def get_evolve_kerr(backend: str | None = None):
    """Return the ``evolve_kerr`` implementation for ``backend`` (default: active one)."""
    name = backend or BACKEND
    try:
        return _KERNELS[name]
    except KeyError:
        raise ValueError(
            f"backend {name!r} unavailable; choose from {available_backends()}"
        ) from None
