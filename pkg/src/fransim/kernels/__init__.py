"""Hot loops of the game solver and the session tally.

The numba versions are used unless ``FRANSIM_DISABLE_NUMBA`` is set to a
non-empty value other than ``0`` (or numba cannot be imported), in which
case the pure-numpy versions are used. Both backends take and return the
same arrays.
"""
import os

from . import _numpy

BACKEND = "numpy"
if os.environ.get("FRANSIM_DISABLE_NUMBA", "") in ("", "0"):
    try:
        from . import _numba as _impl
        BACKEND = "numba"
    except ImportError:  # pragma: no cover
        _impl = _numpy
else:
    _impl = _numpy

best_response_level = _impl.best_response_level
sweep_to_equilibrium = _impl.sweep_to_equilibrium
utility_terms = _impl.utility_terms
session_counts = _impl.session_counts

__all__ = ["BACKEND", "best_response_level", "sweep_to_equilibrium",
           "utility_terms", "session_counts"]
