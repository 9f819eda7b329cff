#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "partod/assignment.hpp"
#include "partod/synth.hpp"

using namespace partod;

TEST_CASE("one block is the nine-node network") {
    SynthConfig config;
    config.blocks = 1;
    const RoadNetwork net = build_block_network(config);
    CHECK(net.node_count() == 9);
    CHECK(net.edge_count() == 24);
    CHECK(validate(net).ok);
}

TEST_CASE("two blocks add one bidirected connector") {
    SynthConfig config;
    config.blocks = 2;
    config.seed = 5;
    const RoadNetwork net = build_block_network(config);
    CHECK(net.node_count() == 18);
    CHECK(net.edge_count() == 50);
    CHECK(validate(net).ok);

    int connector_edges = 0;
    for (const auto& e : net.edges())
        if (e.length_km == config.connector_distance) ++connector_edges;
    CHECK(connector_edges == 2);
}

TEST_CASE("block construction is deterministic and respects the degree cap") {
    SynthConfig config;
    config.blocks = 6;
    config.seed = 1234;
    const RoadNetwork a = build_block_network(config);
    const RoadNetwork b = build_block_network(config);
    REQUIRE(a.edge_count() == b.edge_count());
    for (int i = 0; i < a.edge_count(); ++i) CHECK(a.edge(i).id == b.edge(i).id);

    std::vector<int> degree(static_cast<std::size_t>(a.node_count()), 0);
    for (const auto& e : a.edges()) {
        degree[static_cast<std::size_t>(e.tail)]++;
        degree[static_cast<std::size_t>(e.head)]++;
    }
    for (int d : degree) CHECK(d <= 6);
    CHECK(validate(a).ok);
}

TEST_CASE("every seed yields a strongly connected network") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        SynthConfig config;
        config.blocks = 4;
        config.seed = seed;
        CHECK(validate(build_block_network(config)).ok);
    }
}

TEST_CASE("random demand bounds and determinism") {
    SynthConfig config;
    config.blocks = 1;
    const RoadNetwork net = build_block_network(config);
    const ODMatrix a = random_demand(net, 42);
    const ODMatrix b = random_demand(net, 42);
    REQUIRE(a.demand.size() == 72);
    CHECK(a.demand == b.demand);
    for (double g : a.demand) {
        CHECK(g >= 0.0);
        CHECK(g <= 10.0);
        CHECK(g == std::floor(g));  // integer draws by default
    }
}

TEST_CASE("random demand mean approaches five") {
    SynthConfig config;
    config.blocks = 2;
    config.seed = 0;
    const RoadNetwork net = build_block_network(config);
    double total = 0.0;
    int count = 0;
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        const ODMatrix od = random_demand(net, seed);
        for (double g : od.demand) total += g;
        count += static_cast<int>(od.demand.size());
    }
    CHECK(std::fabs(total / count - 5.0) < 0.5);
}

TEST_CASE("simulated sample count follows the 2.5 multiplier") {
    SynthConfig config;
    config.blocks = 1;
    config.seed = 3;
    const RoadNetwork net = build_block_network(config);
    const ODMatrix truth = random_demand(net, 3);
    const FlowSampleSet samples = simulate_flows(net, truth, 3, 2.5);
    CHECK(samples.sample_count() == 60);  // ceil(2.5 * 24)
}

TEST_CASE("poisson sample means converge to the equilibrium means") {
    SynthConfig config;
    config.blocks = 1;
    config.seed = 7;
    const RoadNetwork net = build_block_network(config);
    const ODMatrix truth = random_demand(net, 7);

    FrankWolfeConfig fw;
    fw.free_flow_costs = true;
    const EquilibriumSolution ue = frank_wolfe(net, truth, fw);

    const FlowSampleSet samples = simulate_flows(net, truth, 7, 2.5);
    const std::vector<double> mean = samples.mean_flows();
    const double j_count = samples.sample_count();
    for (int a = 0; a < net.edge_count(); ++a) {
        const double lambda = ue.flows[static_cast<std::size_t>(a)];
        const double slack = 5.0 * std::sqrt(std::max(lambda, 1.0) / j_count);
        CHECK(std::fabs(mean[static_cast<std::size_t>(a)] - lambda) <= slack);
    }
}

TEST_CASE("zero demand simulates to all-zero flows") {
    SynthConfig config;
    config.blocks = 1;
    const RoadNetwork net = build_block_network(config);
    const ODMatrix zero = ODMatrix::zeros(ODPairSet::all_pairs(net));
    const FlowSampleSet samples = simulate_flows(net, zero, 9, 2.5);
    for (const auto& snap : samples.samples)
        for (double v : snap.flows) CHECK(v == 0.0);
}

TEST_CASE("simulate_flows is deterministic per seed") {
    SynthConfig config;
    config.blocks = 1;
    config.seed = 13;
    const RoadNetwork net = build_block_network(config);
    const ODMatrix truth = random_demand(net, 13);
    const FlowSampleSet a = simulate_flows(net, truth, 13, 2.5);
    const FlowSampleSet b = simulate_flows(net, truth, 13, 2.5);
    REQUIRE(a.sample_count() == b.sample_count());
    for (int j = 0; j < a.sample_count(); ++j)
        CHECK(a.samples[static_cast<std::size_t>(j)].flows ==
              b.samples[static_cast<std::size_t>(j)].flows);
}

TEST_CASE("scenario capacities keep the network uncongested under bpr") {
    SynthConfig config;
    config.blocks = 2;
    config.seed = 15;
    const SynthScenario scenario = generate_scenario(config);
    const std::vector<double> mean = scenario.fit.mean_flows();
    for (int a = 0; a < scenario.network.edge_count(); ++a)
        CHECK(mean[static_cast<std::size_t>(a)] <
              0.5 * scenario.network.edge(a).capacity_vph);
}
