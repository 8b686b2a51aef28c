"""First-order approximate linear programming for relational MDPs.

The package solves lifted MDPs specified as stochastic action theories:
value functions are weighted sums of first-order basis functions, backups
are computed symbolically by regression over case statements, and weights
come from a constraint-generation linear program whose separation step is
a bounded-resolution cost-network maximization.
"""

__version__ = "0.1.0"

from foalp.logic import KERNEL_BACKEND

__all__ = ["KERNEL_BACKEND", "__version__"]
