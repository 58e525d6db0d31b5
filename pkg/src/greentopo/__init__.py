"""Energy-aware base-station topology design on Poisson cellular networks.

The package evaluates downlink coverage of a randomly deployed network,
minimizes area power consumption over active density, transmit power and
frequency-reuse factor, and checks the analysis with a Monte-Carlo
simulator.
"""

from .coverage import (
    SurrogateKind,
    phi,
    psi_closed4,
    psi_exact,
    psi_surrogate,
    theta,
    vartheta,
)
from .errors import (
    ConvergenceError,
    DomainError,
    GreenTopoError,
    InfeasibleError,
    QuadratureError,
    ValidationError,
)
from .model import Constraints, PowerModel, RadioEnv, Topology, apc, table_ii
from .optimizer import (
    CaseLabel,
    Solution,
    given_beta_solve,
    grid_oracle,
    p_star,
    prop1_refine,
    prop1_solve,
    prop2_candidates,
    prop2_refine,
    prop2_solve,
)

__version__ = "0.1.0"
