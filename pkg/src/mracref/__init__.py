"""Adaptive output tracking when the reference (leader) system is unknown.

Four controller structures are provided: state or output feedback, each
using either the leader's state ``x_m`` or only its output ``y_m``. In
every case the unknown equivalent reference input ``P_m(s)[y_m]`` is
parametrised and absorbed into the adaptive parameter vector.
"""

from .design import DesignError, Scheme, design
from .kernel import COMPILED
from .lti import Polynomial, RationalTF, StateSpace
from .sim import Init, RefInput, Scenario, integrate, metrics

__version__ = "0.1.0"

__all__ = [
    "COMPILED", "DesignError", "Init", "Polynomial", "RationalTF", "RefInput",
    "Scenario", "Scheme", "StateSpace", "design", "integrate", "metrics",
]
