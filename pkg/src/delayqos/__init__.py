"""Utility maximization for delay-constrained wireless clients.

Feasibility of delivery ratios, the limiting behaviour of transmission-time
priority policies, the bidding game between clients and the access point,
a slotted simulator, and fairness checks.
"""
from .equilibrium import (
    BiddingState,
    BiddingTrace,
    SimulationBackend,
    SolverError,
    fixed_point_residual,
    run_bidding_game,
    solve_system,
    system_certificate_from_game,
    verify_kkt_system,
)
from .fairness import FairnessReport, check_proportional_fairness, check_weighted_max_min, sample_feasible
from .model import (
    ClientSpec,
    FeasibilityReport,
    SubsetLimitError,
    SystemConfig,
    all_idle_times,
    constraint_slacks,
    idle_time,
    is_feasible,
    workload,
)
from .policy_limit import (
    KKTCertificate,
    KKTReport,
    LimitDecomposition,
    LimitError,
    PolicyParams,
    analytic_policy_limit,
    solve_access_point,
    special_case_tot,
    verify_kkt_access_point,
)
from .simulator import (
    GeneralizedTT,
    PriorityRandom,
    RandomPriority,
    RngSpec,
    SimStats,
    WeightedTransmission,
    empirical_vs_analytic,
    priority_order,
    run_simulation,
)
from .utility import LogUtility, PowerUtility, UtilityFunction, client_best_response, total_utility

__version__ = "0.1.0"
