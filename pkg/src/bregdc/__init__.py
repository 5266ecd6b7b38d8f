"""Inertial Bregman proximal DC algorithms with plug-and-play priors.

Core pieces:

- :mod:`bregdc.kernels` Legendre kernels and Bregman distances
- :mod:`bregdc.solver` the inertial solver, line search and descent diagnostics
- :mod:`bregdc.priors` proximal priors and gradient-step denoisers
- :mod:`bregdc.rician` Rician noise removal
- :mod:`bregdc.phase_retrieval` coded-diffraction phase retrieval
"""

from .errors import (BregDCError, ConfigurationError, ContractViolationError, DivergenceError,
                     DomainError, InvalidInputError, NumericalError, UnsupportedError)
from .kernels import *  # noqa: F401,F403
from .solver import *  # noqa: F401,F403
from .priors import *  # noqa: F401,F403
from .rician import *  # noqa: F401,F403
from .phase_retrieval import *  # noqa: F401,F403
from .metrics import *  # noqa: F401,F403
from .imageio import *  # noqa: F401,F403
from .phantoms import *  # noqa: F401,F403

__version__ = "0.1.0"
