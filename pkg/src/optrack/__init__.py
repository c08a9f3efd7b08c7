"""optrack: multi-agent online optimum tracking with on-the-fly preference learning.

Agents on a communication graph jointly track the minimizer of a time-varying
sum of known engineering costs and hidden quadratic user costs, estimating the
hidden parameters by recursive least squares from noisy scalar feedback while
a dynamic gradient-tracking scheme keeps the network moving toward the current
optimum.
"""

from .quadratics import (
    QuadraticFunction,
    decision_dim,
    pack_params,
    pack_regressor,
    param_dim,
    unpack,
)
from .graphs import (
    GraphError,
    MixingMatrix,
    build_mixing,
    complete_edges,
    consensus_spectral_radius,
    erdos_renyi_edges,
    metropolis_weights,
    path_edges,
    ring_edges,
    validate_mixing,
)
from .rls import RlsState, batch_ls
from .scenarios import (
    CallbackCost,
    NoiseModel,
    Scenario,
    ScenarioError,
    TrackingCost,
    UserCost,
    benchmark_scenario,
    scenario_from_spec,
    scenario_to_spec,
    static_scenario,
)
from .tracking import (
    AgentState,
    BroadcastChannel,
    ConservationError,
    d_step,
    g_step,
    init_agents,
    step_size_advisor,
    x_step,
)
from .metrics import (
    MetricsAccumulator,
    MetricsRecord,
    OptimumOracle,
    agent_regret_increment,
    certify_plateau,
    plateau_detector,
    record,
)
from .simulate import (
    CheckpointError,
    ConfigError,
    DivergenceError,
    RunResult,
    SimConfig,
    read_metrics_csv,
    resume,
    run,
)

__version__ = "0.1.0"
