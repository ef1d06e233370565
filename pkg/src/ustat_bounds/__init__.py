"""Exact and Monte-Carlo verification of moment and tail inequalities for
generalized U-statistics over finite discrete laws."""
from ._kernels import BACKEND
from .model import (DiscreteDistribution, UStatInstance, InvalidInstance, generate_instance,
                    hoeffding_projection, is_canonical, make_instance, undecouple,
                    validate_instance)
from .exact import (EnumerationInfeasible, FiniteDistribution, chaos_moment,
                    exact_distribution, lr_mixed_moment, max_mixed_moment, mixed_moment, moment)

__version__ = "0.1.0"
