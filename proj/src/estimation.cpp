#include "partod/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "partod/qp.hpp"

namespace partod {

FlowCovariance::FlowCovariance(Eigen::MatrixXd s, double ridge)
    : s_(std::move(s)), ridge_(ridge) {
    s_.diagonal().array() += ridge_;
    ldlt_.compute(s_);
    require(ldlt_.info() == Eigen::Success, ErrorCode::Numerical,
            "covariance factorization failed");
}

FlowCovariance sample_covariance(const FlowSampleSet& snapshots, double ridge_base) {
    const int j_count = snapshots.sample_count();
    require(j_count >= 2, ErrorCode::InsufficientSamples,
            "covariance needs at least two snapshots");
    const auto a_count = static_cast<Eigen::Index>(snapshots.samples.front().flows.size());

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(a_count);
    for (const auto& snap : snapshots.samples)
        mean += Eigen::Map<const Eigen::VectorXd>(snap.flows.data(), a_count);
    mean /= static_cast<double>(j_count);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(a_count, a_count);
    for (const auto& snap : snapshots.samples) {
        const Eigen::VectorXd dev =
            Eigen::Map<const Eigen::VectorXd>(snap.flows.data(), a_count) - mean;
        cov.noalias() += dev * dev.transpose();
    }
    cov /= static_cast<double>(j_count - 1);
    cov = 0.5 * (cov + cov.transpose()).eval();

    const double trace = cov.trace();
    double ridge = trace > 0.0 ? ridge_base * trace / static_cast<double>(a_count)
                               : 1e-12;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    require(eig.info() == Eigen::Success, ErrorCode::Numerical,
            "covariance eigenvalue computation failed");
    const double lambda_max = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    const double lambda_min = std::max(eig.eigenvalues().minCoeff(), 0.0);
    while ((lambda_max + ridge) / (lambda_min + ridge) > 1e8) ridge *= 10.0;

    return FlowCovariance(std::move(cov), ridge);
}

Eigen::MatrixXd RouteChoiceMatrix::to_dense(const RouteSet& routes) const {
    Eigen::MatrixXd p =
        Eigen::MatrixXd::Zero(routes.pair_count(), routes.total_routes());
    int col = 0;
    for (int i = 0; i < routes.pair_count(); ++i)
        for (double v : rows[static_cast<std::size_t>(i)]) p(i, col++) = v;
    return p;
}

namespace {

/// Flattened view of a route set for the solver loops.
struct RouteTable {
    std::vector<int> pair_of_route;
    std::vector<const std::vector<int>*> edges_of_route;
    std::vector<std::pair<int, int>> block;  // per pair: [first, last) route index

    explicit RouteTable(const RouteSet& routes) {
        for (int i = 0; i < routes.pair_count(); ++i) {
            const auto& list = routes.routes[static_cast<std::size_t>(i)];
            require(!list.empty(), ErrorCode::Precondition,
                    "route set has a pair without routes");
            const int first = static_cast<int>(pair_of_route.size());
            for (const Route& r : list) {
                pair_of_route.push_back(i);
                edges_of_route.push_back(&r.edge_indices);
            }
            block.emplace_back(first, static_cast<int>(pair_of_route.size()));
        }
    }

    int route_count() const { return static_cast<int>(pair_of_route.size()); }
};

Eigen::VectorXd predict_flows(const RouteTable& table, const Eigen::VectorXd& g,
                              const Eigen::VectorXd& q, Eigen::Index edge_count) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(edge_count);
    for (int r = 0; r < table.route_count(); ++r) {
        const double f = q[r] * g[table.pair_of_route[static_cast<std::size_t>(r)]];
        if (f == 0.0) continue;
        for (int a : *table.edges_of_route[static_cast<std::size_t>(r)]) x[a] += f;
    }
    return x;
}

} // namespace

GlsResult gls_estimate(const RoadNetwork& network, const FlowSampleSet& snapshots,
                       const RouteSet& routes, const GlsConfig& config) {
    require(routes.pair_count() > 0, ErrorCode::Precondition, "empty route set");
    const RouteTable table(routes);
    const auto a_count = static_cast<Eigen::Index>(network.edge_count());
    const double j_count = snapshots.sample_count();

    const FlowCovariance cov = sample_covariance(snapshots, config.ridge_base);
    const std::vector<double> mean = snapshots.mean_flows();
    const Eigen::VectorXd xbar = Eigen::Map<const Eigen::VectorXd>(mean.data(), a_count);

    double constant_term = 0.0;
    for (const auto& snap : snapshots.samples) {
        const Eigen::VectorXd dev =
            Eigen::Map<const Eigen::VectorXd>(snap.flows.data(), a_count) - xbar;
        constant_term += cov.quadratic(dev);
    }

    const int pair_count = routes.pair_count();
    const int route_count = table.route_count();

    Eigen::VectorXd g = Eigen::VectorXd::Zero(pair_count);
    Eigen::VectorXd q(route_count);
    for (int i = 0; i < pair_count; ++i) {
        const auto [first, last] = table.block[static_cast<std::size_t>(i)];
        for (int r = first; r < last; ++r)
            q[r] = 1.0 / static_cast<double>(last - first);
    }

    auto fit_term = [&](const Eigen::VectorXd& gv, const Eigen::VectorXd& qv) {
        const Eigen::VectorXd x = predict_flows(table, gv, qv, a_count);
        return j_count * cov.quadratic(xbar - x);
    };
    auto full_objective = [&](const Eigen::VectorXd& gv, const Eigen::VectorXd& qv) {
        const double value = fit_term(gv, qv) + constant_term;
        require(is_finite(value), ErrorCode::Numerical, "non-finite GLS objective");
        return value;
    };

    ProjectedGradientOptions inner;
    inner.max_iterations = config.max_inner_iterations;
    inner.tolerance = config.inner_tolerance;
    // Large instances are bounded by a work budget instead of the raw
    // iteration cap; small ones keep the full budget and its precision.
    const long nnz = static_cast<long>(
        std::accumulate(table.edges_of_route.begin(), table.edges_of_route.end(), 0L,
                        [](long acc, const std::vector<int>* edges) {
                            return acc + static_cast<long>(edges->size());
                        }));
    const long budget_iterations = std::max(200L, 1500000000L / std::max(nnz, 1L));
    inner.max_iterations =
        static_cast<int>(std::min<long>(inner.max_iterations, budget_iterations));
    // Very large instances also stop on a cumulative work bound so the
    // alternation cannot spend hours shaving sub-percent objective slivers.
    const long total_work_budget = 40000000000L;
    long work_spent = 0;

    GlsResult result;
    double objective = full_objective(g, q);
    result.objective_trace.push_back(objective);

    Eigen::VectorXd best_g = g, best_q = q;
    double best_objective = objective;

    // One predict + one factorized solve per objective evaluation; the
    // gradient at the same point reuses the cached weighted residual.
    struct EvalCache {
        Eigen::VectorXd point;
        Eigen::VectorXd weighted_residual;  // 2 J S^{-1}(x_pred - xbar)
        double objective = 0.0;
        bool valid = false;
    };
    auto evaluate = [&](EvalCache& cache, const Eigen::VectorXd& point,
                        const Eigen::VectorXd& gv, const Eigen::VectorXd& qv) {
        if (cache.valid && cache.point == point) return;
        const Eigen::VectorXd residual = predict_flows(table, gv, qv, a_count) - xbar;
        cache.weighted_residual = 2.0 * j_count * cov.solve(residual);
        cache.objective = 0.5 * residual.dot(cache.weighted_residual);
        cache.point = point;
        cache.valid = true;
    };
    auto route_dots = [&](const Eigen::VectorXd& w) {
        Eigen::VectorXd out(route_count);
        for (int r = 0; r < route_count; ++r) {
            double dot = 0.0;
            for (int a : *table.edges_of_route[static_cast<std::size_t>(r)]) dot += w[a];
            out[r] = dot;
        }
        return out;
    };

    for (int outer = 0; outer < config.max_outer_iterations; ++outer) {
        // Demand step: non-negative QP with probabilities fixed.
        {
            auto cache = std::make_shared<EvalCache>();
            auto obj = [&, cache](const Eigen::VectorXd& gv) {
                evaluate(*cache, gv, gv, q);
                return cache->objective;
            };
            auto grad = [&, cache](const Eigen::VectorXd& gv) {
                evaluate(*cache, gv, gv, q);
                const Eigen::VectorXd dots = route_dots(cache->weighted_residual);
                Eigen::VectorXd out = Eigen::VectorXd::Zero(pair_count);
                for (int r = 0; r < route_count; ++r)
                    out[table.pair_of_route[static_cast<std::size_t>(r)]] +=
                        q[r] * dots[r];
                return out;
            };
            auto project = [](Eigen::VectorXd& v) { v = v.cwiseMax(0.0); };
            g = minimize_projected(obj, grad, project, g, inner).x;
        }

        // Probability step: per-pair simplex QP with demand fixed.
        {
            auto cache = std::make_shared<EvalCache>();
            auto obj = [&, cache](const Eigen::VectorXd& qv) {
                evaluate(*cache, qv, g, qv);
                return cache->objective;
            };
            auto grad = [&, cache](const Eigen::VectorXd& qv) {
                evaluate(*cache, qv, g, qv);
                const Eigen::VectorXd dots = route_dots(cache->weighted_residual);
                Eigen::VectorXd out(route_count);
                for (int r = 0; r < route_count; ++r)
                    out[r] = g[table.pair_of_route[static_cast<std::size_t>(r)]] * dots[r];
                return out;
            };
            auto project = [&](Eigen::VectorXd& v) {
                for (const auto& [first, last] : table.block)
                    project_simplex(v.segment(first, last - first));
            };
            q = minimize_projected(obj, grad, project, q, inner).x;
        }

        const double next = full_objective(g, q);
        result.objective_trace.push_back(next);
        if (next < best_objective) {
            best_objective = next;
            best_g = g;
            best_q = q;
        }
        const double decrease = objective - next;
        objective = next;
        if (decrease <= config.outer_tolerance * std::max(std::fabs(objective), 1.0))
            break;
        work_spent += 2L * inner.max_iterations * nnz;
        if (work_spent >= total_work_budget) break;
    }

    result.objective = best_objective;
    result.demand.pairs = routes.pairs;
    result.demand.demand.assign(best_g.data(), best_g.data() + pair_count);
    result.demand.check();
    result.choice.rows.resize(static_cast<std::size_t>(pair_count));
    for (int i = 0; i < pair_count; ++i) {
        const auto [first, last] = table.block[static_cast<std::size_t>(i)];
        result.choice.rows[static_cast<std::size_t>(i)].assign(best_q.data() + first,
                                                               best_q.data() + last);
    }
    return result;
}

ODMatrix scatter_demand(const ODMatrix& sub, const std::vector<int>& node_map,
                        int full_node_count) {
    ODMatrix out = ODMatrix::zeros(ODPairSet::all_pairs(full_node_count));
    for (std::size_t i = 0; i < sub.pairs.pairs.size(); ++i) {
        const auto& [o, d] = sub.pairs.pairs[i];
        const int idx = ODPairSet::row_major_index(
            full_node_count, node_map[static_cast<std::size_t>(o)],
            node_map[static_cast<std::size_t>(d)]);
        out.demand[static_cast<std::size_t>(idx)] = sub.demand[i];
    }
    return out;
}

Subnetwork induced_subnetwork(const RoadNetwork& network, const std::vector<int>& nodes) {
    Subnetwork sub;
    sub.node_map = nodes;
    std::vector<int> to_sub(static_cast<std::size_t>(network.node_count()), -1);
    std::vector<SuperNode> sub_nodes;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        to_sub[static_cast<std::size_t>(nodes[i])] = static_cast<int>(i);
        sub_nodes.push_back(network.node(nodes[i]));
    }
    std::vector<SuperEdge> sub_edges;
    for (int a = 0; a < network.edge_count(); ++a) {
        const SuperEdge& e = network.edge(a);
        const int t = to_sub[static_cast<std::size_t>(e.tail)];
        const int h = to_sub[static_cast<std::size_t>(e.head)];
        if (t < 0 || h < 0) continue;
        SuperEdge copy = e;
        copy.tail = t;
        copy.head = h;
        sub_edges.push_back(std::move(copy));
        sub.edge_map.push_back(a);
    }
    sub.net = RoadNetwork(std::move(sub_nodes), std::move(sub_edges));
    return sub;
}

FlowSampleSet restrict_samples(const FlowSampleSet& samples,
                               const std::vector<int>& edge_map) {
    FlowSampleSet out;
    out.bin = samples.bin;
    for (const FlowSnapshot& snap : samples.samples) {
        FlowSnapshot restricted;
        restricted.sample_index = snap.sample_index;
        restricted.day = snap.day;
        restricted.bin = snap.bin;
        restricted.flows.reserve(edge_map.size());
        for (int a : edge_map)
            restricted.flows.push_back(snap.flows[static_cast<std::size_t>(a)]);
        out.samples.push_back(std::move(restricted));
    }
    return out;
}

ODMatrix degenerate_prior(const CommunityNetwork& community, const GlsConfig& config) {
    const RouteSet routes = build_routeset(
        community.net, ODPairSet::all_pairs(community.net), config.k_routes);
    require(routes.pair_count() == ODPairSet::all_pairs(community.net).size(),
            ErrorCode::DegenerateNetwork,
            "community network does not connect every community pair");
    GlsResult gls = gls_estimate(community.net, community.samples, routes, config);
    std::vector<int> identity(static_cast<std::size_t>(community.net.node_count()));
    for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = static_cast<int>(i);
    return scatter_demand(gls.demand, identity, community.net.node_count());
}

ODMatrix internal_prior(const RoadNetwork& network, const Partitioning& partitioning,
                        const FlowSampleSet& snapshots, const GlsConfig& config,
                        std::vector<std::string>* warnings) {
    require(partitioning.community.size() ==
                static_cast<std::size_t>(network.node_count()),
            ErrorCode::InvalidAssignment, "partitioning does not cover every node");
    ODMatrix out = ODMatrix::zeros(ODPairSet::all_pairs(network));

    for (int c = 0; c < partitioning.community_count; ++c) {
        std::vector<int> members;
        for (int v = 0; v < network.node_count(); ++v)
            if (partitioning.community[static_cast<std::size_t>(v)] == c)
                members.push_back(v);
        if (members.size() < 2) continue;

        const Subnetwork sub = induced_subnetwork(network, members);
        if (sub.net.edge_count() == 0) {
            if (warnings)
                warnings->push_back("partition " + std::to_string(c) +
                                    " has no internal edges; block left zero");
            continue;
        }
        const RouteSet routes =
            build_routeset(sub.net, ODPairSet::all_pairs(sub.net), config.k_routes);
        if (routes.pair_count() == 0) {
            if (warnings)
                warnings->push_back("partition " + std::to_string(c) +
                                    " has no internally connected pairs; block left zero");
            continue;
        }
        const FlowSampleSet sub_samples = restrict_samples(snapshots, sub.edge_map);
        GlsResult gls = gls_estimate(sub.net, sub_samples, routes, config);
        const ODMatrix block = scatter_demand(gls.demand, sub.node_map,
                                              network.node_count());
        out = ODMatrix::sum(out, block);
    }
    return out;
}

ODMatrix external_prior(const ODMatrix& community_demand,
                        const Partitioning& partitioning, int full_node_count) {
    const int c_count = partitioning.community_count;
    require(community_demand.pairs.pairs ==
                ODPairSet::all_pairs(c_count).pairs,
            ErrorCode::Precondition,
            "community demand must cover every ordered community pair");

    std::vector<double> size(static_cast<std::size_t>(c_count), 0.0);
    for (int c : partitioning.community) size[static_cast<std::size_t>(c)] += 1.0;

    ODMatrix out = ODMatrix::zeros(ODPairSet::all_pairs(full_node_count));
    for (std::size_t i = 0; i < out.pairs.pairs.size(); ++i) {
        const auto& [x, y] = out.pairs.pairs[i];
        const int cx = partitioning.community[static_cast<std::size_t>(x)];
        const int cy = partitioning.community[static_cast<std::size_t>(y)];
        if (cx == cy) continue;
        const int com_idx = ODPairSet::row_major_index(c_count, cx, cy);
        out.demand[i] = community_demand.demand[static_cast<std::size_t>(com_idx)] /
                        (size[static_cast<std::size_t>(cx)] *
                         size[static_cast<std::size_t>(cy)]);
    }
    return out;
}

ODMatrix combined_prior(const ODMatrix& internal, const ODMatrix& external) {
    require(internal.pairs.pairs == external.pairs.pairs, ErrorCode::Precondition,
            "priors cover different pair sets");
    for (std::size_t i = 0; i < internal.demand.size(); ++i)
        require(internal.demand[i] == 0.0 || external.demand[i] == 0.0,
                ErrorCode::Inconsistency,
                "internal and external priors overlap on a pair");
    return ODMatrix::sum(internal, external);
}

} // namespace partod
