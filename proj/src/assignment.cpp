#include "partod/assignment.hpp"

#include <algorithm>
#include <cmath>

#include "partod/csv.hpp"
#include "partod/routing.hpp"

namespace partod {

std::vector<double> edge_times(const RoadNetwork& network, const std::vector<double>& flows,
                               bool free_flow_costs) {
    std::vector<double> times(static_cast<std::size_t>(network.edge_count()));
    for (int a = 0; a < network.edge_count(); ++a) {
        const SuperEdge& e = network.edge(a);
        times[static_cast<std::size_t>(a)] =
            free_flow_costs ? e.t0_hours
                            : bpr_travel_time(e, flows[static_cast<std::size_t>(a)]);
    }
    return times;
}

double beckmann_objective(const RoadNetwork& network, const std::vector<double>& flows,
                          bool free_flow_costs) {
    double total = 0.0;
    for (int a = 0; a < network.edge_count(); ++a) {
        const SuperEdge& e = network.edge(a);
        const double x = flows[static_cast<std::size_t>(a)];
        total += free_flow_costs ? e.t0_hours * x : bpr_integral(e, x);
    }
    return total;
}

std::vector<double> all_or_nothing(const RoadNetwork& network, const ODMatrix& demand,
                                   const std::vector<double>& times,
                                   std::vector<std::vector<int>>* paths_out) {
    for (double t : times)
        require(t > 0.0, ErrorCode::InvalidInput, "travel times must be positive");
    demand.check();

    if (paths_out) paths_out->assign(demand.pairs.pairs.size(), {});
    std::vector<double> flows(static_cast<std::size_t>(network.edge_count()), 0.0);

    // Group pairs by origin so each origin needs one shortest-path tree.
    std::map<int, std::vector<int>> by_origin;
    for (std::size_t i = 0; i < demand.pairs.pairs.size(); ++i)
        by_origin[demand.pairs.pairs[i].first].push_back(static_cast<int>(i));

    for (const auto& [origin, pair_ids] : by_origin) {
        const ShortestPathTree tree = shortest_path_tree(network, origin, times);
        for (int i : pair_ids) {
            const int destination = demand.pairs.pairs[static_cast<std::size_t>(i)].second;
            const double g = demand.demand[static_cast<std::size_t>(i)];
            const bool reachable =
                tree.pred_edge[static_cast<std::size_t>(destination)] >= 0;
            if (!reachable) {
                require(g == 0.0, ErrorCode::Numerical,
                        "demand between unconnected nodes");
                continue;
            }
            if (g == 0.0 && !paths_out) continue;
            const std::vector<int> path = extract_path(tree, network, destination);
            for (int a : path) flows[static_cast<std::size_t>(a)] += g;
            if (paths_out) (*paths_out)[static_cast<std::size_t>(i)] = path;
        }
    }
    return flows;
}

double relative_gap(const std::vector<double>& flows, const std::vector<double>& times,
                    const std::vector<double>& aon_flows) {
    double cost_x = 0.0, cost_y = 0.0;
    for (std::size_t a = 0; a < flows.size(); ++a) {
        cost_x += times[a] * flows[a];
        cost_y += times[a] * aon_flows[a];
    }
    if (cost_x <= 0.0) {
        if (cost_y <= 0.0) return 0.0;  // no demand
        fail(ErrorCode::Numerical, "zero total cost with nonzero demand");
    }
    return (cost_x - cost_y) / cost_x;
}

namespace {

/// Composite of the all-or-nothing directions. Per-pair edge shares are
/// kept as flat edge-sorted vectors holding values scaled by 1/scale, so a
/// convex-combination update costs one merge per touched pair.
struct UsageTracker {
    bool routes = false;
    bool paths = false;
    double scale = 1.0;
    std::vector<std::vector<std::pair<int, double>>> edge_share;
    std::vector<std::map<std::vector<int>, double>> path_share;
    std::vector<int> sorted_path;  // scratch

    void reset(std::size_t pair_count, bool track_routes, bool track_paths) {
        routes = track_routes;
        paths = track_paths;
        scale = 1.0;
        if (routes) edge_share.assign(pair_count, {});
        if (paths) path_share.assign(pair_count, {});
    }

    void blend(const std::vector<std::vector<int>>& aon_paths, double lambda) {
        if (!routes && !paths) return;
        if (lambda >= 1.0) {
            scale = 1.0;
            for (auto& m : edge_share) m.clear();
            for (auto& m : path_share) m.clear();
            add_paths(aon_paths, 1.0);
            return;
        }
        scale *= (1.0 - lambda);
        add_paths(aon_paths, lambda / scale);
        if (scale < 1e-250) renormalize();
    }

    void add_paths(const std::vector<std::vector<int>>& aon_paths, double weight) {
        for (std::size_t i = 0; i < aon_paths.size(); ++i) {
            if (aon_paths[i].empty()) continue;
            if (routes) {
                sorted_path.assign(aon_paths[i].begin(), aon_paths[i].end());
                std::sort(sorted_path.begin(), sorted_path.end());
                merge_into(edge_share[i], sorted_path, weight);
            }
            if (paths) path_share[i][aon_paths[i]] += weight;
        }
    }

    static void merge_into(std::vector<std::pair<int, double>>& share,
                           const std::vector<int>& path_edges, double weight) {
        std::vector<std::pair<int, double>> merged;
        merged.reserve(share.size() + path_edges.size());
        std::size_t s = 0, p = 0;
        while (s < share.size() || p < path_edges.size()) {
            if (p == path_edges.size() ||
                (s < share.size() && share[s].first < path_edges[p])) {
                merged.push_back(share[s++]);
            } else if (s == share.size() || share[s].first > path_edges[p]) {
                merged.emplace_back(path_edges[p++], weight);
            } else {
                merged.emplace_back(share[s].first, share[s].second + weight);
                ++s;
                ++p;
            }
        }
        share = std::move(merged);
    }

    void renormalize() {
        for (auto& share : edge_share)
            for (auto& [a, w] : share) w *= scale;
        for (auto& m : path_share)
            for (auto& [p, w] : m) w *= scale;
        scale = 1.0;
    }

    void extract(EquilibriumSolution& solution) {
        if (routes) {
            renormalize();
            solution.usage.resize(edge_share.size());
            for (std::size_t i = 0; i < edge_share.size(); ++i)
                solution.usage[i].edge_weight = std::move(edge_share[i]);
        }
        if (paths) {
            solution.paths.resize(path_share.size());
            for (std::size_t i = 0; i < path_share.size(); ++i)
                for (const auto& [p, w] : path_share[i])
                    solution.paths[i].push_back({p, w * scale});
        }
    }
};

/// Exact line search: bisection on the directional derivative of the
/// Beckmann objective along x + lambda d.
double line_search(const RoadNetwork& network, const std::vector<double>& x,
                   const std::vector<double>& d, bool free_flow, double tol) {
    auto slope = [&](double lambda) {
        double s = 0.0;
        for (int a = 0; a < network.edge_count(); ++a) {
            const double da = d[static_cast<std::size_t>(a)];
            if (da == 0.0) continue;
            const double flow =
                std::max(x[static_cast<std::size_t>(a)] + lambda * da, 0.0);
            const SuperEdge& e = network.edge(a);
            s += (free_flow ? e.t0_hours : bpr_travel_time(e, flow)) * da;
        }
        return s;
    };
    if (slope(1.0) <= 0.0) return 1.0;
    double lo = 0.0, hi = 1.0;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (slope(mid) <= 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

EquilibriumSolution frank_wolfe(const RoadNetwork& network, const ODMatrix& demand,
                                const FrankWolfeConfig& config,
                                const std::vector<double>* warm_start_times) {
    demand.check();
    const auto edge_count = static_cast<std::size_t>(network.edge_count());
    EquilibriumSolution solution;

    UsageTracker tracker;
    tracker.reset(demand.pairs.pairs.size(), config.track_usage, config.track_paths);
    const bool need_paths = config.track_usage || config.track_paths;
    std::vector<std::vector<int>> aon_paths;

    std::vector<double> start_times =
        warm_start_times ? *warm_start_times
                         : edge_times(network, std::vector<double>(edge_count, 0.0),
                                      config.free_flow_costs);
    std::vector<double> x =
        all_or_nothing(network, demand, start_times, need_paths ? &aon_paths : nullptr);
    if (need_paths) tracker.blend(aon_paths, 1.0);

    bool converged = false;
    int iterations = 0;
    double gap = 0.0;
    std::vector<double> times;
    while (iterations < config.max_iterations) {
        ++iterations;
        times = edge_times(network, x, config.free_flow_costs);
        const std::vector<double> y =
            all_or_nothing(network, demand, times, need_paths ? &aon_paths : nullptr);
        gap = relative_gap(x, times, y);
        const double objective =
            beckmann_objective(network, x, config.free_flow_costs);
        require(is_finite(objective), ErrorCode::Numerical,
                "non-finite Beckmann objective");
        solution.objective_trace.push_back(objective);
        solution.gap_trace.push_back(gap);
        if (gap <= config.gap_threshold) {
            converged = true;
            break;
        }

        std::vector<double> d(edge_count);
        for (std::size_t a = 0; a < edge_count; ++a) d[a] = y[a] - x[a];
        const double lambda = line_search(network, x, d, config.free_flow_costs,
                                          config.line_search_tolerance);
        for (std::size_t a = 0; a < edge_count; ++a)
            x[a] = std::max(x[a] + lambda * d[a], 0.0);
        if (need_paths) tracker.blend(aon_paths, lambda);
    }

    solution.flows = std::move(x);
    solution.times = edge_times(network, solution.flows, config.free_flow_costs);
    solution.relative_gap = gap;
    solution.iterations = iterations;
    solution.converged = converged;
    tracker.extract(solution);
    return solution;
}

void write_ue_csv(const EquilibriumSolution& solution, const RoadNetwork& network,
                  const std::string& path) {
    csv::Writer w(path);
    w.row({"edge_id", "flow_vph", "time_hours"});
    for (int a = 0; a < network.edge_count(); ++a)
        w.row({network.edge(a).id,
               csv::format_double(solution.flows[static_cast<std::size_t>(a)]),
               csv::format_double(solution.times[static_cast<std::size_t>(a)])});
}

void write_fw_trace_csv(const EquilibriumSolution& solution, const std::string& path) {
    csv::Writer w(path);
    w.row({"iter", "objective", "gap"});
    for (std::size_t i = 0; i < solution.objective_trace.size(); ++i)
        w.row({std::to_string(i + 1), csv::format_double(solution.objective_trace[i]),
               csv::format_double(solution.gap_trace[i])});
}

} // namespace partod
