#include "partod/synth.hpp"

#include <algorithm>
#include <cmath>

#include "partod/assignment.hpp"
#include "partod/rng.hpp"

namespace partod {

namespace {

constexpr int kBlockNodes = 9;

// Undirected skeleton of one block in local 1-based node numbers.
struct BlockEdge {
    int u, v;
    bool intra;
};

const BlockEdge kBlockEdges[] = {
    {1, 2, true},  {2, 3, true},  {1, 3, true},   // triangle 1
    {4, 5, true},  {5, 6, true},  {4, 6, true},   // triangle 2
    {7, 8, true},  {8, 9, true},  {7, 9, true},   // triangle 3
    {2, 4, false}, {6, 7, false}, {3, 9, false},  // triangle connectors
};

} // namespace

RoadNetwork build_block_network(const SynthConfig& config) {
    require(config.blocks >= 1, ErrorCode::InvalidInput, "block count must be positive");
    require(config.intra_distance > 0.0 && config.inter_distance > 0.0 &&
                config.connector_distance > 0.0,
            ErrorCode::InvalidInput, "distances must be positive");

    Rng rng(config.seed);
    std::vector<SuperNode> nodes;
    std::vector<SuperEdge> edges;
    std::vector<int> total_degree;  // in + out per node

    auto add_bidirected = [&](int u, int v, double distance) {
        for (const auto& [tail, head] : {std::pair{u, v}, std::pair{v, u}}) {
            SuperEdge e;
            e.id = nodes[static_cast<std::size_t>(tail)].id + "_" +
                   nodes[static_cast<std::size_t>(head)].id;
            e.tail = tail;
            e.head = head;
            e.length_km = distance;
            e.t0_hours = distance;  // unit speed
            e.capacity_vph = 1.0;   // placeholder until flows are known
            edges.push_back(std::move(e));
        }
        total_degree[static_cast<std::size_t>(u)] += 2;
        total_degree[static_cast<std::size_t>(v)] += 2;
    };

    for (int b = 0; b < config.blocks; ++b) {
        const int base = b * kBlockNodes;
        for (int i = 1; i <= kBlockNodes; ++i) {
            const std::string id = "n" + std::to_string(base + i);
            nodes.push_back({id, id});
            total_degree.push_back(0);
        }
        for (const BlockEdge& be : kBlockEdges)
            add_bidirected(base + be.u - 1, base + be.v - 1,
                           be.intra ? config.intra_distance : config.inter_distance);

        if (b > 0) {
            std::vector<int> old_eligible, new_eligible;
            for (int v = 0; v < base; ++v)
                if (total_degree[static_cast<std::size_t>(v)] < 6) old_eligible.push_back(v);
            for (int v = base; v < base + kBlockNodes; ++v)
                if (total_degree[static_cast<std::size_t>(v)] < 6) new_eligible.push_back(v);
            require(!old_eligible.empty() && !new_eligible.empty(),
                    ErrorCode::InvalidInput, "no eligible connector node");
            const int u = old_eligible[rng.uniform_below(old_eligible.size())];
            const int v = new_eligible[rng.uniform_below(new_eligible.size())];
            add_bidirected(u, v, config.connector_distance);
        }
    }
    return RoadNetwork(std::move(nodes), std::move(edges));
}

ODMatrix random_demand(const RoadNetwork& network, std::uint64_t seed,
                       const SynthConfig& config) {
    Rng rng(seed);
    ODMatrix od = ODMatrix::zeros(ODPairSet::all_pairs(network));
    for (double& g : od.demand) {
        if (config.integer_demand)
            g = static_cast<double>(
                rng.uniform_int(0, static_cast<std::int64_t>(config.demand_max)));
        else
            g = rng.uniform01() * config.demand_max;
    }
    return od;
}

FlowSampleSet simulate_flows(const RoadNetwork& network, const ODMatrix& truth,
                             std::uint64_t seed, double multiplier,
                             const std::string& bin) {
    truth.check();
    FrankWolfeConfig fw;
    fw.free_flow_costs = true;
    const EquilibriumSolution ue = frank_wolfe(network, truth, fw);

    const int sample_count = static_cast<int>(
        std::ceil(multiplier * static_cast<double>(network.edge_count())));

    FlowSampleSet set;
    set.bin = bin;
    for (int j = 0; j < sample_count; ++j) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(j)));
        FlowSnapshot snap;
        snap.sample_index = j;
        snap.day = "d" + std::to_string(j + 1);
        snap.bin = bin;
        snap.flows.reserve(static_cast<std::size_t>(network.edge_count()));
        for (int a = 0; a < network.edge_count(); ++a)
            snap.flows.push_back(static_cast<double>(
                rng.poisson(ue.flows[static_cast<std::size_t>(a)])));
        set.samples.push_back(std::move(snap));
    }
    return set;
}

RoadNetwork with_synthetic_capacities(const RoadNetwork& network,
                                      const std::vector<double>& mean_flows) {
    double max_flow = 0.0;
    for (double v : mean_flows) max_flow = std::max(max_flow, v);
    const double capacity = max_flow > 0.0 ? 10.0 * max_flow : 10.0;
    std::vector<SuperEdge> edges = network.edges();
    for (SuperEdge& e : edges) e.capacity_vph = capacity;
    return RoadNetwork(network.nodes(), std::move(edges));
}

SynthScenario generate_scenario(const SynthConfig& config) {
    SynthScenario scenario;
    RoadNetwork skeleton = build_block_network(config);
    scenario.truth = random_demand(skeleton, mix_seed(config.seed, 0x0d), config);

    FrankWolfeConfig fw;
    fw.free_flow_costs = true;
    const EquilibriumSolution ue = frank_wolfe(skeleton, scenario.truth, fw);
    scenario.network = with_synthetic_capacities(skeleton, ue.flows);

    scenario.fit = simulate_flows(scenario.network, scenario.truth,
                                  mix_seed(config.seed, 0xf1), config.sample_multiplier);
    scenario.validation =
        simulate_flows(scenario.network, scenario.truth, mix_seed(config.seed, 0x7a),
                       config.validation_multiplier);
    return scenario;
}

} // namespace partod
