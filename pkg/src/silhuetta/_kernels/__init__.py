"""Hot-kernel backend selection.

The compiled Cython core is preferred when built; the numpy fallback is
semantically identical (bit-identical outputs). Force a backend with
SILHUETTA_BACKEND=compiled|numpy; the default "auto" tries the compiled
core first.
"""

from __future__ import annotations

import importlib
import os

from . import _numpy

_requested = os.environ.get("SILHUETTA_BACKEND", "auto").lower()
if _requested not in ("auto", "compiled", "numpy"):
    raise RuntimeError(
        f"SILHUETTA_BACKEND={_requested!r} not understood (auto|compiled|numpy)"
    )


def _try_compiled():
    try:
        return importlib.import_module("silhuetta._kernels._core")
    except ImportError:
        return None


if _requested == "numpy":
    _impl = _numpy
else:
    _impl = _try_compiled()
    if _impl is None:
        if _requested == "compiled":
            raise RuntimeError(
                "SILHUETTA_BACKEND=compiled but the extension is not built; "
                "run `pip install -e .` or `python setup.py build_ext --inplace`"
            )
        _impl = _numpy

BACKEND = "numpy" if _impl is _numpy else "compiled"
classify_solid = _impl.classify_solid
carve_sweep = _impl.carve_sweep


def available_backends() -> dict:
    """Name -> module for every importable backend (benchmark/tests)."""
    out = {"numpy": _numpy}
    core = _try_compiled()
    if core is not None:
        out["compiled"] = core
    return out
