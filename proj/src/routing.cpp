#include "partod/routing.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <set>

#include "partod/csv.hpp"

namespace partod {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

int RouteSet::total_routes() const {
    int n = 0;
    for (const auto& r : routes) n += static_cast<int>(r.size());
    return n;
}

ShortestPathTree shortest_path_tree(const RoadNetwork& network, int origin,
                                    const std::vector<double>& edge_weights,
                                    const std::vector<char>* banned_edges,
                                    const std::vector<char>* banned_nodes,
                                    int stop_at) {
    const auto n = static_cast<std::size_t>(network.node_count());
    ShortestPathTree tree;
    tree.dist.assign(n, kInf);
    tree.pred_edge.assign(n, -1);
    std::vector<char> done(n, 0);

    using Item = std::pair<double, int>;  // (dist, node)
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    tree.dist[static_cast<std::size_t>(origin)] = 0.0;
    heap.emplace(0.0, origin);

    const std::vector<int>& rank = network.edge_id_rank();
    while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (done[static_cast<std::size_t>(u)]) continue;
        done[static_cast<std::size_t>(u)] = 1;
        if (u == stop_at) break;
        for (int a : network.out_edges()[static_cast<std::size_t>(u)]) {
            if (banned_edges && (*banned_edges)[static_cast<std::size_t>(a)]) continue;
            const int v = network.edge(a).head;
            if (banned_nodes && (*banned_nodes)[static_cast<std::size_t>(v)]) continue;
            if (done[static_cast<std::size_t>(v)]) continue;
            const double nd = d + edge_weights[static_cast<std::size_t>(a)];
            double& dv = tree.dist[static_cast<std::size_t>(v)];
            int& pv = tree.pred_edge[static_cast<std::size_t>(v)];
            if (nd < dv) {
                dv = nd;
                pv = a;
                heap.emplace(nd, v);
            } else if (nd == dv && pv >= 0 &&
                       rank[static_cast<std::size_t>(a)] <
                           rank[static_cast<std::size_t>(pv)]) {
                pv = a;
            }
        }
    }
    return tree;
}

std::vector<int> extract_path(const ShortestPathTree& tree, const RoadNetwork& network,
                              int destination) {
    std::vector<int> path;
    int v = destination;
    while (tree.pred_edge[static_cast<std::size_t>(v)] >= 0) {
        const int a = tree.pred_edge[static_cast<std::size_t>(v)];
        path.push_back(a);
        v = network.edge(a).tail;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

namespace {

std::vector<double> length_weights(const RoadNetwork& network) {
    std::vector<double> w(static_cast<std::size_t>(network.edge_count()));
    for (int a = 0; a < network.edge_count(); ++a)
        w[static_cast<std::size_t>(a)] = network.edge(a).length_km;
    return w;
}

double path_length(const RoadNetwork& network, const std::vector<int>& edges) {
    double len = 0.0;
    for (int a : edges) len += network.edge(a).length_km;
    return len;
}

std::vector<int> rank_sequence(const RoadNetwork& network, const std::vector<int>& edges) {
    std::vector<int> seq;
    seq.reserve(edges.size());
    for (int a : edges) seq.push_back(network.edge_id_rank()[static_cast<std::size_t>(a)]);
    return seq;
}

struct Candidate {
    double length;
    std::vector<int> rank_seq;
    std::vector<int> edges;

    bool operator<(const Candidate& other) const {
        if (length != other.length) return length < other.length;
        return rank_seq < other.rank_seq;
    }
};

} // namespace

std::vector<Route> k_shortest_routes(const RoadNetwork& network, int origin,
                                     int destination, int k) {
    require(origin != destination, ErrorCode::InvalidPair,
            "origin and destination coincide");
    require(k >= 1, ErrorCode::InvalidInput, "k must be at least 1");

    const std::vector<double> weights = length_weights(network);
    auto make_candidate = [&](std::vector<int> edges) {
        Candidate c;
        c.length = path_length(network, edges);
        c.rank_seq = rank_sequence(network, edges);
        c.edges = std::move(edges);
        return c;
    };

    std::vector<Candidate> accepted;
    {
        ShortestPathTree base =
            shortest_path_tree(network, origin, weights, nullptr, nullptr, destination);
        if (base.pred_edge[static_cast<std::size_t>(destination)] < 0)
            return {};
        accepted.push_back(make_candidate(extract_path(base, network, destination)));
    }

    std::set<Candidate> pool;
    std::set<std::vector<int>> known;  // all accepted or pooled edge sequences
    known.insert(accepted.front().edges);

    while (static_cast<int>(accepted.size()) < k) {
        const std::vector<int>& prev = accepted.back().edges;
        std::vector<char> banned_nodes(static_cast<std::size_t>(network.node_count()), 0);
        std::vector<int> root;
        int spur_node = origin;

        for (std::size_t spur_pos = 0; spur_pos < prev.size(); ++spur_pos) {
            std::vector<char> banned_edges(static_cast<std::size_t>(network.edge_count()), 0);
            // Branch away from every accepted path that shares this root.
            for (const Candidate& p : accepted) {
                if (p.edges.size() > spur_pos &&
                    std::equal(root.begin(), root.end(), p.edges.begin()))
                    banned_edges[static_cast<std::size_t>(p.edges[spur_pos])] = 1;
            }

            ShortestPathTree spur = shortest_path_tree(network, spur_node, weights,
                                                       &banned_edges, &banned_nodes,
                                                       destination);
            if (spur.pred_edge[static_cast<std::size_t>(destination)] >= 0) {
                std::vector<int> full = root;
                const std::vector<int> tail = extract_path(spur, network, destination);
                full.insert(full.end(), tail.begin(), tail.end());
                if (known.insert(full).second) pool.insert(make_candidate(std::move(full)));
            }

            // The spur node joins the forbidden prefix for later positions.
            banned_nodes[static_cast<std::size_t>(spur_node)] = 1;
            root.push_back(prev[spur_pos]);
            spur_node = network.edge(prev[spur_pos]).head;
        }

        if (pool.empty()) break;
        accepted.push_back(*pool.begin());
        pool.erase(pool.begin());
    }

    std::sort(accepted.begin(), accepted.end());
    std::vector<Route> out;
    out.reserve(accepted.size());
    for (auto& c : accepted)
        out.push_back(Route{-1, std::move(c.edges), c.length});
    return out;
}

RouteSet build_routeset(const RoadNetwork& network, const ODPairSet& pair_set, int k) {
    RouteSet set;
    for (const auto& [o, d] : pair_set.pairs) {
        std::vector<Route> routes = k_shortest_routes(network, o, d, k);
        if (routes.empty()) continue;
        const int pair_index = set.pair_count();
        for (Route& r : routes) r.pair_index = pair_index;
        set.pairs.pairs.emplace_back(o, d);
        set.routes.push_back(std::move(routes));
    }
    return set;
}

Eigen::MatrixXd build_incidence(const RouteSet& routes, const RoadNetwork& network) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(routes.total_routes(), network.edge_count());
    int row = 0;
    for (const auto& pair_routes : routes.routes) {
        for (const Route& r : pair_routes) {
            require(!r.edge_indices.empty(), ErrorCode::Inconsistency, "route has no edges");
            for (int a : r.edge_indices) {
                require(a >= 0 && a < network.edge_count(), ErrorCode::Inconsistency,
                        "route references unknown edge");
                b(row, a) = 1.0;
            }
            ++row;
        }
    }
    return b;
}

void write_routes_csv(const RouteSet& routes, const RoadNetwork& network,
                      const std::string& path) {
    csv::Writer w(path);
    w.row({"pair_index", "rank", "edge_ids", "length_km"});
    for (int i = 0; i < routes.pair_count(); ++i) {
        int rank = 0;
        for (const Route& r : routes.routes[static_cast<std::size_t>(i)]) {
            std::string ids;
            for (std::size_t e = 0; e < r.edge_indices.size(); ++e) {
                if (e) ids += ';';
                ids += network.edge(r.edge_indices[e]).id;
            }
            w.row({std::to_string(i), std::to_string(rank++), ids,
                   csv::format_double(r.length_km)});
        }
    }
}

} // namespace partod
