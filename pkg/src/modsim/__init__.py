"""Station-based mobility-on-demand fleet simulation with ridesharing.

The package compares three ways of serving the same travel demand on one
road network: private cars (one per trip), a station-based vehicle-on-demand
fleet, and the same fleet with large-scale ridesharing, where requests are
inserted into vehicle plans as long as nobody's travel delay exceeds a bound.

Modules: `road_network` (graphs, fastest paths, travel-time estimator),
`demand` (trip loading and synthesis), `stations` (placement and fleet
sizing), `matching` (insertion-based ridesharing), `rebalancing` (stock
targets and min-cost shipment), `sim_engine` (discrete-event execution),
`analysis` (densities, occupancy, summaries), `traceio` (trace files), and
`cli` (the `modsim` command).
"""

__version__ = "0.1.0"

from .analysis import (
    CRITICAL_DENSITY,
    HEAVY_LOAD_DENSITY,
    AnalysisError,
    DensityReport,
    OccupancyReport,
    SummaryReport,
    edge_densities,
    occupancy_series,
    summarize,
)
from .demand import (
    DemandCluster,
    DemandConfig,
    DemandError,
    TravelRequest,
    generate_demand,
    load_requests,
    write_requests,
)
from .matching import (
    Assignment,
    MatchContext,
    MatchingError,
    OrderKind,
    PlanOrder,
    VehicleState,
    brute_force_oracle,
    dispatch_from_station,
    enumerate_insertions,
    match_request,
    plan_cost,
    request_delay,
)
from .rebalancing import (
    RebalancingError,
    RebalancingFlow,
    apply_rebalancing,
    compute_targets,
    solve_transportation,
)
from .road_network import (
    CalibrationError,
    NetworkError,
    NoPathError,
    Node,
    Path,
    RoadNetwork,
    RoadSegment,
    TravelTimeEstimator,
    calibrate_estimator,
    convert_geojson,
    estimate_time,
    fastest_path,
    fill_missing_speeds,
    load_network,
)
from .sim_engine import (
    FlowRecord,
    RequestRecord,
    ScenarioConfig,
    SimTrace,
    SimulationError,
    Traversal,
    run_scenario,
)
from .stations import (
    Station,
    StationError,
    StationLayout,
    build_stations,
    demand_weights,
    kmeans,
    load_stations,
    nearest_station,
    size_fleet,
    write_stations,
)
from .traceio import read_trace, write_trace
