"""Homogeneous gradient estimators for linear regression models.

Signals, persistence-of-excitation certificates, the single, composite and
tracker update laws, a fixed-step integrator and closed-form convergence
bounds, driven from INI scenario files by the ``homgrad`` command.
"""

from .analysis import *  # noqa: F401,F403
from .estimators import *  # noqa: F401,F403
from .integrator import *  # noqa: F401,F403
from .pe import *  # noqa: F401,F403
from .scenario import *  # noqa: F401,F403
from .signals import *  # noqa: F401,F403
from . import analysis, estimators, integrator, pe, scenario, signals

__version__ = "0.1.0"

__all__ = (analysis.__all__ + estimators.__all__ + integrator.__all__ + pe.__all__
           + scenario.__all__ + signals.__all__)
