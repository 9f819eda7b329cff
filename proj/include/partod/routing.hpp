#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "partod/network.hpp"

namespace partod {

/// Simple (cycle-free) directed path for one O-D pair.
struct Route {
    int pair_index = -1;           // index into the owning RouteSet's pair list
    std::vector<int> edge_indices; // connected tail-to-head
    double length_km = 0.0;
};

/// Up to k routes per pair, sorted by (length, edge-id order). Only pairs
/// with at least one route are kept.
struct RouteSet {
    ODPairSet pairs;
    std::vector<std::vector<Route>> routes;  // aligned with pairs

    int pair_count() const { return static_cast<int>(pairs.pairs.size()); }
    int total_routes() const;
};

/// One-to-all shortest paths; `pred_edge[v]` is the incoming tree edge or -1.
/// Ties are broken by the lexicographic rank of the predecessor edge id, so
/// results do not depend on edge input order.
struct ShortestPathTree {
    std::vector<double> dist;      // +inf when unreachable
    std::vector<int> pred_edge;
};

ShortestPathTree shortest_path_tree(const RoadNetwork& network, int origin,
                                    const std::vector<double>& edge_weights,
                                    const std::vector<char>* banned_edges = nullptr,
                                    const std::vector<char>* banned_nodes = nullptr,
                                    int stop_at = -1);

/// Walks the predecessor chain; empty when unreachable.
std::vector<int> extract_path(const ShortestPathTree& tree, const RoadNetwork& network,
                              int destination);

/// Yen's algorithm on edge length. Returns min(k, #simple paths) distinct
/// routes, sorted by length with deterministic tie order.
std::vector<Route> k_shortest_routes(const RoadNetwork& network, int origin,
                                     int destination, int k);

/// Routes for every pair in `pair_set` that is reachable; unreachable pairs
/// are dropped (callers treat them as zero demand).
RouteSet build_routeset(const RoadNetwork& network, const ODPairSet& pair_set, int k);

/// Dense edge-route incidence: one row per route in pair order, one column
/// per edge. Intended for small problems and tests; the estimators consume
/// the RouteSet directly.
Eigen::MatrixXd build_incidence(const RouteSet& routes, const RoadNetwork& network);

void write_routes_csv(const RouteSet& routes, const RoadNetwork& network,
                      const std::string& path);

} // namespace partod
