"""Data-driven barrier certificates for unknown stochastic systems.

The toolkit estimates a conditional mean embedding of the transition kernel
from sampled state pairs, compiles the barrier conditions (robustified over
an RKHS ambiguity ball) into a sum-of-squares program, solves it with the
bundled semidefinite solver, certifies a smooth envelope of the polynomial
barrier by kernel regression, and reports a lower bound on the finite-horizon
safety probability.
"""

from .cme import AmbiguityConfig, EmpiricalCme, fit_cme
from .kernels import PolynomialKernel, SquaredExponentialKernel
from .polynomials import MonomialBasis, Polynomial, SemiAlgebraicSet
from .safety import probability_bound
from .sos import BarrierCertificate
from .systems import StateBox, TransitionDataset

__version__ = "0.1.0"

__all__ = [
    "AmbiguityConfig",
    "BarrierCertificate",
    "EmpiricalCme",
    "MonomialBasis",
    "Polynomial",
    "PolynomialKernel",
    "SemiAlgebraicSet",
    "SquaredExponentialKernel",
    "StateBox",
    "TransitionDataset",
    "fit_cme",
    "probability_bound",
    "__version__",
]
