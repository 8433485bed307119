"""Leader-follower consensus under prescribed performance funnels."""

from .certify import (
    FeasibilityReport,
    GammaStatus,
    Method,
    certify,
    chain_bound,
    chain_k_factor,
    check_theorem1,
    gamma_matrix,
    max_gamma,
    min_eig_psd,
    star_bound,
)
from .graph import (
    DerivedMatrices,
    Topology,
    build_topology,
    derive_matrices,
    make_chain,
    make_star,
    node_partition,
    positions_from_relative,
)
from .performance import EdgeChannel, OutOfFunnel, PerformanceSpec, alpha, jacobian, rho, select_region, transform
from .scenario import RunSummary, Scenario, emit, load_scenario, preset, run
from .sim import Mode, SimConfig, SimTrace, centroid, control_input, integrate, lyapunov, node_rhs

__version__ = "0.1.0"
