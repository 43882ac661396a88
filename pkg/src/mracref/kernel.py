"""Engine selection for the closed-loop integrator.

The compiled extension is used when it imports; otherwise the numpy
fallback. Setting ``MRACREF_PURE_PYTHON=1`` forces the fallback.
"""

import logging
import os

from . import _pykernel

log = logging.getLogger(__name__)

try:
    if os.environ.get("MRACREF_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python engine forced by MRACREF_PURE_PYTHON")
    from . import _ckernel
except ImportError as exc:
    log.debug("compiled kernel unavailable (%s); using numpy fallback", exc)
    _ckernel = None

COMPILED = _ckernel is not None
ENGINES = {"python": _pykernel.rk4_closed_loop}
if COMPILED:
    ENGINES["compiled"] = _ckernel.rk4_closed_loop

rk4_closed_loop = ENGINES["compiled" if COMPILED else "python"]


def get_engine(name: str = "auto"):
    if name == "auto":
        return rk4_closed_loop
    try:
        return ENGINES[name]
    except KeyError:
        raise ValueError(f"engine {name!r} not available; have {sorted(ENGINES)}") from None
