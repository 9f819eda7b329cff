#pragma once

#include <cstdint>

#include "partod/demand.hpp"
#include "partod/network.hpp"

namespace partod {

struct SynthConfig {
    int blocks = 1;
    std::uint64_t seed = 0;
    double intra_distance = 1.0;      // edges inside a triangle
    double inter_distance = 5.0;      // edges between a block's triangles
    double connector_distance = 10.0; // edges chaining blocks together
    double demand_max = 10.0;
    bool integer_demand = true;
    double sample_multiplier = 2.5;
    double validation_multiplier = 2.5;
};

/// Chains nine-node blocks (three bidirected triangles plus bidirected
/// triangle connectors) with one bidirected connector per new block, attached
/// between uniformly random nodes of total degree below six. 24 directed
/// edges per block.
RoadNetwork build_block_network(const SynthConfig& config);

/// Ground-truth demand: an independent uniform draw from [0, demand_max]
/// per ordered pair (integers by default).
ODMatrix random_demand(const RoadNetwork& network, std::uint64_t seed,
                       const SynthConfig& config = {});

/// Mean flows from the uncongested (distance-cost) user equilibrium of the
/// truth; ceil(multiplier * |A|) Poisson samples around them.
FlowSampleSet simulate_flows(const RoadNetwork& network, const ODMatrix& truth,
                             std::uint64_t seed, double multiplier = 2.5,
                             const std::string& bin = "ALL");

/// Copy of the network with every capacity set to ten times the largest mean
/// flow, keeping the synthetic scenario uncongested under BPR costs too.
RoadNetwork with_synthetic_capacities(const RoadNetwork& network,
                                      const std::vector<double>& mean_flows);

/// Full Appendix-protocol scenario: network, truth, fitting samples and a
/// held-out validation sample set (derived seed).
struct SynthScenario {
    RoadNetwork network;
    ODMatrix truth;
    FlowSampleSet fit;
    FlowSampleSet validation;
};

SynthScenario generate_scenario(const SynthConfig& config);

} // namespace partod
