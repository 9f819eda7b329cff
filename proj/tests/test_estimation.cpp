#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "partod/estimation.hpp"
#include "partod/rng.hpp"
#include "partod/synth.hpp"

using namespace partod;
using testutil::EdgeSpec;
using testutil::make_network;

namespace {

FlowSampleSet snapshots_from(const std::vector<std::vector<double>>& rows) {
    FlowSampleSet set;
    set.bin = "ALL";
    int j = 0;
    for (const auto& flows : rows) {
        FlowSnapshot snap;
        snap.sample_index = j;
        snap.day = "d" + std::to_string(++j);
        snap.bin = "ALL";
        snap.flows = flows;
        set.samples.push_back(std::move(snap));
    }
    return set;
}

ODPairSet pair_set(std::initializer_list<std::pair<int, int>> pairs) {
    ODPairSet set;
    for (const auto& p : pairs) set.pairs.push_back(p);
    return set;
}

} // namespace

TEST_CASE("covariance of identical snapshots is the ridge alone") {
    const FlowCovariance cov =
        sample_covariance(snapshots_from({{5.0, 7.0}, {5.0, 7.0}}));
    CHECK(cov.matrix()(0, 1) == doctest::Approx(0.0));
    CHECK(cov.matrix()(1, 0) == doctest::Approx(0.0));
    CHECK(cov.matrix()(0, 0) == doctest::Approx(cov.ridge()));
    CHECK(cov.ridge() > 0.0);
}

TEST_CASE("covariance hand computation") {
    const FlowCovariance cov = sample_covariance(snapshots_from({{1.0, 2.0}, {3.0, 4.0}}));
    CHECK(cov.matrix()(0, 0) == doctest::Approx(2.0 + cov.ridge()));
    CHECK(cov.matrix()(1, 1) == doctest::Approx(2.0 + cov.ridge()));
    CHECK(cov.matrix()(0, 1) == doctest::Approx(2.0));
    CHECK(cov.matrix()(1, 0) == doctest::Approx(2.0));
    // Symmetric within 1e-12 and positive definite after the ridge.
    CHECK((cov.matrix() - cov.matrix().transpose()).norm() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov.matrix());
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("covariance needs two snapshots") {
    CHECK_THROWS_AS(sample_covariance(snapshots_from({{1.0, 2.0}})), Error);
}

TEST_CASE("poisson snapshots give a near-diagonal covariance at the rate") {
    const double lambda = 400.0;
    const int j_count = 800;
    Rng rng(2024);
    std::vector<std::vector<double>> rows;
    for (int j = 0; j < j_count; ++j)
        rows.push_back({static_cast<double>(rng.poisson(lambda)),
                        static_cast<double>(rng.poisson(lambda))});
    const FlowCovariance cov = sample_covariance(snapshots_from(rows));
    const double slack = 5.0 * lambda / std::sqrt(static_cast<double>(j_count));
    CHECK(std::fabs(cov.matrix()(0, 0) - lambda) < slack);
    CHECK(std::fabs(cov.matrix()(1, 1) - lambda) < slack);
}

TEST_CASE("condition number stays capped under degenerate sampling") {
    // Second column is a copy of the first: raw covariance is singular.
    std::vector<std::vector<double>> rows;
    Rng rng(5);
    for (int j = 0; j < 40; ++j) {
        const double v = 100.0 + 30.0 * rng.uniform01();
        rows.push_back({v, v, 50.0 + 10.0 * rng.uniform01()});
    }
    const FlowCovariance cov = sample_covariance(snapshots_from(rows));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov.matrix());
    CHECK(eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff() <= 1e8 * 1.01);
}

TEST_CASE("gls on a single edge recovers the sample mean") {
    const RoadNetwork net = make_network({"u", "v"}, {{"uv", "u", "v", 1.0}});
    Rng rng(404);
    std::vector<std::vector<double>> rows;
    for (int j = 0; j < 60; ++j)
        rows.push_back({static_cast<double>(rng.poisson(100.0))});
    const FlowSampleSet samples = snapshots_from(rows);
    const RouteSet routes = build_routeset(net, pair_set({{0, 1}}), 4);
    const GlsResult result = gls_estimate(net, samples, routes, {});

    const double mean = samples.mean_flows()[0];
    CHECK(result.demand.demand[0] == doctest::Approx(mean).epsilon(1e-7));
    CHECK(std::fabs(result.demand.demand[0] - 100.0) <=
          3.0 * std::sqrt(100.0 / 60.0));
}

TEST_CASE("gls factorizes two constant parallel-edge flows") {
    const RoadNetwork net =
        make_network({"u", "v"}, {{"short", "u", "v", 1.0}, {"long", "u", "v", 2.0}});
    const FlowSampleSet samples =
        snapshots_from({{30.0, 70.0}, {30.0, 70.0}, {30.0, 70.0}});
    const RouteSet routes = build_routeset(net, pair_set({{0, 1}}), 4);
    REQUIRE(routes.total_routes() == 2);
    const GlsResult result = gls_estimate(net, samples, routes, {});

    CHECK(result.demand.demand[0] == doctest::Approx(100.0).epsilon(1e-6));
    REQUIRE(result.choice.rows[0].size() == 2);
    CHECK(result.choice.rows[0][0] == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(result.choice.rows[0][1] == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(result.objective == doctest::Approx(0.0).epsilon(1e-9));

    const Eigen::MatrixXd dense = result.choice.to_dense(routes);
    CHECK(dense.rows() == 1);
    CHECK(dense.cols() == 2);
    CHECK(dense.row(0).sum() == doctest::Approx(1.0));
}

TEST_CASE("gls with zero flows returns zero demand and objective") {
    const RoadNetwork net = make_network({"u", "v"}, {{"uv", "u", "v", 1.0}});
    const FlowSampleSet samples = snapshots_from({{0.0}, {0.0}, {0.0}});
    const RouteSet routes = build_routeset(net, pair_set({{0, 1}}), 4);
    const GlsResult result = gls_estimate(net, samples, routes, {});
    CHECK(result.demand.demand[0] == 0.0);
    CHECK(result.objective == doctest::Approx(0.0));
}

TEST_CASE("gls objective trace is non-increasing") {
    SynthConfig config;
    config.blocks = 1;
    config.seed = 31;
    const SynthScenario scenario = generate_scenario(config);
    const RouteSet routes =
        build_routeset(scenario.network, ODPairSet::all_pairs(scenario.network), 4);
    const GlsResult result = gls_estimate(scenario.network, scenario.fit, routes, {});
    REQUIRE(result.objective_trace.size() >= 2);
    for (std::size_t i = 1; i < result.objective_trace.size(); ++i)
        CHECK(result.objective_trace[i] <= result.objective_trace[i - 1] * (1 + 1e-12));
    CHECK(std::all_of(result.demand.demand.begin(), result.demand.demand.end(),
                      [](double g) { return g >= 0.0; }));
}

TEST_CASE("gls matches a dense active-set oracle on single-route networks") {
    // Directed line with returns: every pair has exactly one simple route.
    std::vector<EdgeSpec> edges;
    testutil::add_bidirected(edges, "a", "b", 1.0);
    testutil::add_bidirected(edges, "b", "c", 1.0);
    testutil::add_bidirected(edges, "c", "d", 1.0);
    const RoadNetwork net = make_network({"a", "b", "c", "d"}, edges);

    Rng rng(909);
    std::vector<std::vector<double>> rows;
    for (int j = 0; j < 45; ++j) {
        std::vector<double> flows;
        for (int a = 0; a < net.edge_count(); ++a)
            flows.push_back(static_cast<double>(rng.poisson(60.0 + 15.0 * a)));
        rows.push_back(std::move(flows));
    }
    const FlowSampleSet samples = snapshots_from(rows);
    GlsConfig config;
    config.max_inner_iterations = 50000;
    config.inner_tolerance = 1e-13;

    const FlowCovariance cov = sample_covariance(samples, config.ridge_base);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov.matrix());
    const Eigen::MatrixXd white = eig.operatorInverseSqrt();
    const std::vector<double> mean = samples.mean_flows();
    const Eigen::VectorXd xbar =
        Eigen::Map<const Eigen::VectorXd>(mean.data(), net.edge_count());

    SUBCASE("all pairs: the fit is underdetermined, optimality must match") {
        const RouteSet routes = build_routeset(net, ODPairSet::all_pairs(net), 4);
        for (const auto& pair_routes : routes.routes)
            REQUIRE(pair_routes.size() == 1);
        const GlsResult result = gls_estimate(net, samples, routes, config);

        const Eigen::MatrixXd a_matrix =
            white * build_incidence(routes, net).transpose();
        const Eigen::VectorXd b_vec = white * xbar;
        const Eigen::VectorXd oracle = testutil::nnls_lawson_hanson(a_matrix, b_vec);
        const double oracle_obj = (a_matrix * oracle - b_vec).squaredNorm();

        Eigen::VectorXd g(result.demand.demand.size());
        for (std::size_t i = 0; i < result.demand.demand.size(); ++i)
            g[static_cast<Eigen::Index>(i)] = result.demand.demand[i];
        const double got_obj = (a_matrix * g - b_vec).squaredNorm();
        CHECK(got_obj ==
              doctest::Approx(oracle_obj).epsilon(1e-6).scale(oracle_obj + 1.0));

        // KKT for NNLS: zero gradient on the support, non-negative off it.
        const Eigen::VectorXd grad = 2.0 * a_matrix.transpose() * (a_matrix * g - b_vec);
        const double tol = 1e-5 * (1.0 + grad.lpNorm<Eigen::Infinity>());
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            if (g[i] > 1e-8)
                CHECK(std::fabs(grad[i]) <= tol);
            else
                CHECK(grad[i] >= -tol);
        }
    }

    SUBCASE("independent pair subset: unique solution matches exactly") {
        const ODPairSet subset = pair_set({{0, 1}, {1, 2}, {2, 3}, {3, 0}});
        const RouteSet routes = build_routeset(net, subset, 4);
        REQUIRE(routes.pair_count() == 4);
        const GlsResult result = gls_estimate(net, samples, routes, config);

        const Eigen::MatrixXd a_matrix =
            white * build_incidence(routes, net).transpose();
        const Eigen::VectorXd oracle =
            testutil::nnls_lawson_hanson(a_matrix, white * xbar);
        REQUIRE(oracle.size() == static_cast<Eigen::Index>(result.demand.demand.size()));
        for (Eigen::Index i = 0; i < oracle.size(); ++i)
            CHECK(result.demand.demand[static_cast<std::size_t>(i)] ==
                  doctest::Approx(oracle[i]).epsilon(1e-6).scale(
                      std::max(oracle[i], 1.0)));
    }
}

TEST_CASE("degenerate prior on a two-community line") {
    // Two singleton communities joined by one edge each way.
    const RoadNetwork net =
        make_network({"a", "b"}, {{"ab", "a", "b", 1.0}, {"ba", "b", "a", 1.0}});
    Partitioning p;
    p.resolution = 1.0;
    p.community = {0, 1};
    p.community_count = 2;
    const FlowSampleSet samples =
        snapshots_from({{120.0, 45.0}, {120.0, 45.0}, {120.0, 45.0}});
    const CommunityNetwork community = build_community_network(net, p, samples);
    const ODMatrix h_com = degenerate_prior(community, {});
    REQUIRE(h_com.demand.size() == 2);
    const int ab = ODPairSet::row_major_index(2, 0, 1);
    const int ba = ODPairSet::row_major_index(2, 1, 0);
    CHECK(h_com.demand[static_cast<std::size_t>(ab)] ==
          doctest::Approx(120.0).epsilon(1e-6));
    CHECK(h_com.demand[static_cast<std::size_t>(ba)] ==
          doctest::Approx(45.0).epsilon(1e-6));
}

TEST_CASE("degenerate prior equals a direct run on the community graph") {
    SynthConfig config;
    config.blocks = 1;
    config.seed = 19;
    const SynthScenario scenario = generate_scenario(config);
    const Partitioning p = louvain(scenario.network, 1.0, 19);
    REQUIRE(p.community_count == 3);
    const CommunityNetwork community =
        build_community_network(scenario.network, p, scenario.fit);

    const ODMatrix via_strategy = degenerate_prior(community, {});

    const RouteSet routes =
        build_routeset(community.net, ODPairSet::all_pairs(community.net), 4);
    const GlsResult direct = gls_estimate(community.net, community.samples, routes, {});
    for (std::size_t i = 0; i < direct.demand.pairs.pairs.size(); ++i) {
        const auto& [o, d] = direct.demand.pairs.pairs[i];
        const int idx = ODPairSet::row_major_index(community.net.node_count(), o, d);
        CHECK(via_strategy.demand[static_cast<std::size_t>(idx)] ==
              direct.demand.demand[i]);
    }
}

TEST_CASE("internal prior with one community is bit-identical to unpartitioned") {
    SynthConfig config;
    config.blocks = 1;
    config.seed = 23;
    const SynthScenario scenario = generate_scenario(config);

    Partitioning everything;
    everything.resolution = 1e9;
    everything.community.assign(
        static_cast<std::size_t>(scenario.network.node_count()), 0);
    everything.community_count = 1;

    const ODMatrix internal =
        internal_prior(scenario.network, everything, scenario.fit, {});

    const RouteSet routes =
        build_routeset(scenario.network, ODPairSet::all_pairs(scenario.network), 4);
    const GlsResult direct = gls_estimate(scenario.network, scenario.fit, routes, {});
    std::vector<int> identity(static_cast<std::size_t>(scenario.network.node_count()));
    for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = static_cast<int>(i);
    const ODMatrix unpartitioned =
        scatter_demand(direct.demand, identity, scenario.network.node_count());

    REQUIRE(internal.demand.size() == unpartitioned.demand.size());
    for (std::size_t i = 0; i < internal.demand.size(); ++i)
        CHECK(internal.demand[i] == unpartitioned.demand[i]);  // exact
}

TEST_CASE("internal prior is block diagonal over partitions") {
    SynthConfig config;
    config.blocks = 1;
    config.seed = 29;
    const SynthScenario scenario = generate_scenario(config);
    const Partitioning p = louvain(scenario.network, 1.0, 29);
    REQUIRE(p.community_count == 3);

    const ODMatrix prior = internal_prior(scenario.network, p, scenario.fit, {});
    for (std::size_t i = 0; i < prior.pairs.pairs.size(); ++i) {
        const auto& [o, d] = prior.pairs.pairs[i];
        if (p.community[static_cast<std::size_t>(o)] !=
            p.community[static_cast<std::size_t>(d)])
            CHECK(prior.demand[i] == 0.0);  // inter-partition exactly zero
    }
    CHECK(prior.total() > 0.0);
}

TEST_CASE("internal prior of singleton communities is all zero") {
    SynthConfig config;
    config.blocks = 1;
    config.seed = 37;
    const SynthScenario scenario = generate_scenario(config);
    Partitioning singletons;
    singletons.resolution = 0.0;
    singletons.community.resize(static_cast<std::size_t>(scenario.network.node_count()));
    for (int v = 0; v < scenario.network.node_count(); ++v)
        singletons.community[static_cast<std::size_t>(v)] = v;
    singletons.community_count = scenario.network.node_count();

    const ODMatrix prior =
        internal_prior(scenario.network, singletons, scenario.fit, {});
    CHECK(prior.total() == 0.0);
}

TEST_CASE("external prior splits community demand equally") {
    // Two communities of three nodes each.
    Partitioning p;
    p.community = {0, 0, 0, 1, 1, 1};
    p.community_count = 2;

    ODMatrix h_com = ODMatrix::zeros(ODPairSet::all_pairs(2));
    h_com.demand[static_cast<std::size_t>(ODPairSet::row_major_index(2, 0, 1))] = 90.0;

    const ODMatrix prior = external_prior(h_com, p, 6);
    double forward_sum = 0.0;
    for (std::size_t i = 0; i < prior.pairs.pairs.size(); ++i) {
        const auto& [x, y] = prior.pairs.pairs[i];
        const int cx = p.community[static_cast<std::size_t>(x)];
        const int cy = p.community[static_cast<std::size_t>(y)];
        if (cx == cy) {
            CHECK(prior.demand[i] == 0.0);
        } else if (cx == 0 && cy == 1) {
            CHECK(prior.demand[i] == doctest::Approx(10.0));  // 90 / (3*3)
            forward_sum += prior.demand[i];
        } else {
            CHECK(prior.demand[i] == 0.0);  // H_com zero in that direction
        }
    }
    CHECK(forward_sum == doctest::Approx(90.0));  // exact conservation
}

TEST_CASE("external prior conserves totals exactly over random community demand") {
    Rng rng(61);
    Partitioning p;
    p.community = {0, 1, 1, 2, 2, 2, 0};
    p.community_count = 3;
    ODMatrix h_com = ODMatrix::zeros(ODPairSet::all_pairs(3));
    for (double& v : h_com.demand) v = std::floor(100.0 * rng.uniform01());

    const ODMatrix prior = external_prior(h_com, p, 7);
    std::vector<double> block_sums(h_com.demand.size(), 0.0);
    for (std::size_t i = 0; i < prior.pairs.pairs.size(); ++i) {
        const auto& [x, y] = prior.pairs.pairs[i];
        const int cx = p.community[static_cast<std::size_t>(x)];
        const int cy = p.community[static_cast<std::size_t>(y)];
        if (cx == cy) continue;
        block_sums[static_cast<std::size_t>(ODPairSet::row_major_index(3, cx, cy))] +=
            prior.demand[i];
    }
    for (std::size_t b = 0; b < block_sums.size(); ++b)
        CHECK(block_sums[b] == doctest::Approx(h_com.demand[b]).epsilon(1e-12));
}

TEST_CASE("combined prior sums disjoint supports and rejects overlap") {
    Partitioning p;
    p.community = {0, 0, 1, 1};
    p.community_count = 2;

    ODMatrix internal = ODMatrix::zeros(ODPairSet::all_pairs(4));
    internal.demand[static_cast<std::size_t>(ODPairSet::row_major_index(4, 0, 1))] = 5.0;
    ODMatrix external = ODMatrix::zeros(ODPairSet::all_pairs(4));
    external.demand[static_cast<std::size_t>(ODPairSet::row_major_index(4, 0, 2))] = 2.0;

    const ODMatrix combined = combined_prior(internal, external);
    CHECK(combined.total() == doctest::Approx(internal.total() + external.total()));
    CHECK(combined.demand[static_cast<std::size_t>(ODPairSet::row_major_index(4, 0, 1))] ==
          5.0);
    CHECK(combined.demand[static_cast<std::size_t>(ODPairSet::row_major_index(4, 0, 2))] ==
          2.0);

    // Zero external: combined equals internal.
    const ODMatrix with_zero =
        combined_prior(internal, ODMatrix::zeros(ODPairSet::all_pairs(4)));
    CHECK(with_zero.demand == internal.demand);

    ODMatrix overlapping = external;
    overlapping.demand[static_cast<std::size_t>(ODPairSet::row_major_index(4, 0, 1))] =
        1.0;
    CHECK_THROWS_AS(combined_prior(internal, overlapping), Error);
}
