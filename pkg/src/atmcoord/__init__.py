"""Equilibrium engineering, selection and steering for finite coordination games."""

from .congestion import (
    BrdConfig,
    BrdTrace,
    CongestionInstance,
    Flight,
    ScheduleProfile,
    Sector,
    agent_cost,
    best_response,
    kappa_sweep,
    overload,
    run_brd,
)
from .equilibria import (
    EquilibriumResult,
    NashBasis,
    NoiseModel,
    build_nash_basis,
    ccce_margin,
    solve_ccce,
    solve_ce,
    solve_rrce,
    verify_ccce,
)
from .errors import (
    AtmCoordError,
    EmptyBasisError,
    GameInputError,
    NumericalError,
    SizeLimitError,
    UnsupportedError,
)
from .game import (
    JointDistribution,
    MixedProfile,
    NormalFormGame,
    deviation_gain,
    enumerate_mixed_nash_2p,
    enumerate_pure_nash,
    expected_utility,
    joint_index,
    product_distribution,
    profile_of_index,
    verify_ce,
)
from .lp import LinearProgram, LpSolution, solve_lp, solve_with_concave_cuts
from .scenarios import (
    RunwayScenario,
    fairness_index,
    fcfs_baseline,
    gen_congestion_instance,
    gen_runway_game,
)
from .steering import (
    IncentiveSignal,
    SteeringProblem,
    Trajectory,
    UnreachableReport,
    br_step,
    plan_incentives,
    simulate,
)

__version__ = "0.1.0"
