"""surgeflow: exact solvers for spatial surge pricing.

Transportation flows between supply and demand distributions, unit-demand
market clearing with minimal competitive prices, continuous and discrete surge
computation, and an online-policy simulation harness.
"""

from surgeflow.transport import (
    ContractViolation,
    DualPotentials,
    Flow,
    FlowCheck,
    InputError,
    MassVector,
    MetricSpace,
    VerificationError,
    alternative_min_cost_flows,
    as_fraction,
    earthmover_distance,
    flow_cost,
    identity_flow,
    metric_closure,
    metric_from_edges,
    min_cost_flow,
    remove_through_flow,
    usable_optimal_edges,
    verify_min_cost,
    zero_reduced_cost_edges,
)

from surgeflow.market import (
    ClearingCheck,
    ClearingPrices,
    Matching,
    UnitDemandMarket,
    brute_force_oracle,
    max_weight_matching,
    minimal_walrasian_prices,
    verify_clearing,
)
from surgeflow.continuous import (
    EquilibriumReport,
    SurgeVector,
    ZeroDemandConvention,
    build_market_from_flow,
    continuous_surge_prices,
    target_supply_surge,
    taxicab_utility,
    value_scale,
    verify_equilibrium_continuous,
    verify_unique_induction,
)
from surgeflow.discrete import (
    Assignment,
    DiscreteCheck,
    DiscreteInstance,
    DiscreteSurgeVector,
    Passenger,
    Taxicab,
    build_discrete_market,
    social_welfare_discrete,
    solve_discrete,
    surge_from_taxi_prices,
    verify_envy_free,
    verify_taxi_best_response,
    verify_truthful,
)
from surgeflow.online import (
    DemandSequence,
    LazyDiagnostics,
    SequenceStats,
    SupplyTrajectory,
    demand_served,
    gen_drift,
    gen_geometric,
    gen_single_vertex,
    gen_subset,
    is_lazy,
    lazify,
    lazy_diagnostics,
    offline_opt,
    offline_opt_value,
    run_comp,
    run_match,
    run_rand,
    run_stay,
    sequence_stats,
    surge_prices_for_step,
    trajectory_from_supplies,
)
from surgeflow.experiments import (
    AlgorithmSpec,
    ExperimentSummary,
    GeneratorSpec,
    TrialRecord,
    competitive_experiment,
    parse_algorithm_spec,
    parse_generator_spec,
    plot_data,
    reference_trial,
    run_trial,
    write_csv,
)
from surgeflow.serialize import (
    InstanceFile,
    parse_instance,
    parse_instance_data,
    serialize_instance,
)

__version__ = "0.1.0"
