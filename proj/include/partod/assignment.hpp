#pragma once

#include <map>
#include <vector>

#include "partod/demand.hpp"
#include "partod/network.hpp"

namespace partod {

struct FrankWolfeConfig {
    double gap_threshold = 1e-5;
    int max_iterations = 5000;
    double line_search_tolerance = 1e-10;  // bisection width on the step
    bool free_flow_costs = false;  // cost = t0 regardless of flow (uncongested runs)
    bool track_usage = false;      // per-pair edge-usage composite for adjustment
    bool track_paths = false;      // per-pair distinct paths (small networks only)
};

/// Flow-averaged share of a pair's demand crossing each edge, extracted from
/// the composite of all-or-nothing directions.
struct PairUsage {
    std::vector<std::pair<int, double>> edge_weight;  // sorted by edge index
};

struct PathShare {
    std::vector<int> edges;
    double weight = 0.0;
};

struct EquilibriumSolution {
    std::vector<double> flows;
    std::vector<double> times;  // travel times at the final flows
    double relative_gap = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_trace;  // non-increasing
    std::vector<double> gap_trace;
    std::vector<PairUsage> usage;              // per pair when tracked
    std::vector<std::vector<PathShare>> paths; // per pair when tracked
};

/// Travel times for a flow vector under the configured cost model.
std::vector<double> edge_times(const RoadNetwork& network, const std::vector<double>& flows,
                               bool free_flow_costs);

/// Routes each pair's full demand along one shortest path under `times`.
/// `paths_out`, when given, receives the chosen path per pair (also for
/// zero-demand pairs).
std::vector<double> all_or_nothing(const RoadNetwork& network, const ODMatrix& demand,
                                   const std::vector<double>& times,
                                   std::vector<std::vector<int>>* paths_out = nullptr);

/// All-or-nothing lower-bound gap: (t.x - t.y) / t.x with y the AON flows
/// under x's own times. Zero demand is defined as gap 0.
double relative_gap(const std::vector<double>& flows, const std::vector<double>& times,
                    const std::vector<double>& aon_flows);

/// Frank-Wolfe with exact bisection line search on the Beckmann objective.
/// `warm_start_times` seeds the initial all-or-nothing (defaults to
/// free-flow times).
EquilibriumSolution frank_wolfe(const RoadNetwork& network, const ODMatrix& demand,
                                const FrankWolfeConfig& config,
                                const std::vector<double>* warm_start_times = nullptr);

/// Beckmann objective of a flow vector (sum of BPR integrals, or linear cost
/// in the free-flow mode).
double beckmann_objective(const RoadNetwork& network, const std::vector<double>& flows,
                          bool free_flow_costs);

void write_ue_csv(const EquilibriumSolution& solution, const RoadNetwork& network,
                  const std::string& path);

void write_fw_trace_csv(const EquilibriumSolution& solution, const std::string& path);

} // namespace partod
