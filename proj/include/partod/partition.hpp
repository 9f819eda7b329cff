#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "partod/network.hpp"

namespace partod {

/// Community assignment found at one resolution. `modularity` is the
/// standard (resolution-1) value and stays within [-0.5, 1];
/// `objective_trace` records the resolution-scaled objective after each
/// local-move pass and never decreases.
struct Partitioning {
    double resolution = 1.0;
    std::vector<int> community;  // node -> community id, contiguous from 0
    int community_count = 0;
    double modularity = 0.0;
    std::vector<double> objective_trace;
};

/// Community topographic network: one node per community, one edge per
/// ordered community pair with crossing superedges. Lengths and free-flow
/// times are flow-weighted means of the constituents, capacities and flows
/// are sums.
struct CommunityNetwork {
    RoadNetwork net;
    std::vector<std::vector<int>> members;  // per community edge: original edges
    std::vector<int> node_community;        // original node -> community
    FlowSampleSet samples;                  // aggregated fitting snapshots
};

/// Modularity of an assignment on the undirected weighted graph derived from
/// the network (weights 1/length, antiparallel pairs merged). The resolution
/// scales the edge term relative to the null model, so larger values favour
/// fewer communities and zero favours singletons; at resolution 1 this is the
/// standard modularity.
double modularity(const RoadNetwork& network, const std::vector<int>& assignment,
                  double resolution);

/// Louvain community detection on the derived undirected graph. Node
/// visitation order is seeded; results are deterministic per
/// (network, resolution, seed).
Partitioning louvain(const RoadNetwork& network, double resolution,
                     std::uint64_t seed, std::vector<std::string>* warnings = nullptr);

struct SweepConfig {
    int grid_points = 64;
    double resolution_min = 1e-3;
    double resolution_max = 1e3;
    int max_extensions = 6;       // extra decades probed above resolution_max
    int points_per_extension = 8;
};

struct SweepResult {
    std::vector<Partitioning> entries;  // descending community count, >= 2
    std::vector<std::string> warnings;
    bool reached_two = false;
};

/// Scans resolutions from the unpartitioned end (resolution zero) upward,
/// keeping the lowest resolution for each distinct community count. Extends
/// the grid when the two-community end is not reached; if it still is not,
/// the coarsest found is reported with a warning.
SweepResult resolution_sweep(const RoadNetwork& network, std::uint64_t seed,
                             const SweepConfig& config = {});

/// Builds the degenerate community representation. Fails with
/// DegenerateNetwork when there are fewer than two communities or the result
/// is not strongly connected.
CommunityNetwork build_community_network(const RoadNetwork& network,
                                         const Partitioning& partitioning,
                                         const FlowSampleSet& snapshots,
                                         std::vector<std::string>* warnings = nullptr);

/// Aggregates any snapshot set (e.g. validation days) onto community edges.
FlowSampleSet aggregate_sample_set(const CommunityNetwork& community,
                                   const FlowSampleSet& original);

} // namespace partod
